//! Horizontal forms with operator coefficients and their differential.
//!
//! Components are stored polarized.  A term `q ζ^I R (dx)^ε` has bidegree `(p, q)` with
//! `q = |I|` and `p = |ε| − |I|`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::forms::{check_subset, full_set, wedge_insert, HorizontalForm};
use crate::jet::{rat, LocalFunction, MultiIndex, Rational};
use crate::ldo::{min_bound, Ldo, LdoKey};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OperatorForm {
    dim: usize,
    arity: usize,
    degree: usize,
    bound: Option<i64>,
    comps: BTreeMap<Vec<usize>, Ldo>,
}

impl OperatorForm {
    pub fn zero(dim: usize, arity: usize, degree: usize) -> Result<Self> {
        if degree > dim {
            return Err(Error::Degree(format!("form degree {degree} exceeds N = {dim}")));
        }
        Ok(OperatorForm { dim, arity, degree, bound: None, comps: BTreeMap::new() })
    }

    /// `A · dx^1 ∧ .. ∧ dx^N`.
    pub fn top(a: &Ldo) -> Self {
        let mut f = OperatorForm { dim: a.dim(), arity: a.arity(), degree: a.dim(), bound: a.bound(), comps: BTreeMap::new() };
        f.insert(full_set(a.dim()), a.to_polarized());
        f
    }

    /// `A` as a form of degree 0.
    pub fn scalar(a: &Ldo) -> Self {
        let mut f = OperatorForm { dim: a.dim(), arity: a.arity(), degree: 0, bound: a.bound(), comps: BTreeMap::new() };
        f.insert(Vec::new(), a.to_polarized());
        f
    }

    pub fn from_components(
        dim: usize,
        arity: usize,
        degree: usize,
        comps: impl IntoIterator<Item = (Vec<usize>, Ldo)>,
    ) -> Result<Self> {
        let mut f = Self::zero(dim, arity, degree)?;
        for (eps, a) in comps {
            check_subset(dim, degree, &eps)?;
            if a.dim() != dim {
                return Err(Error::Dimension { expected: dim, found: a.dim() });
            }
            if a.arity() != arity {
                return Err(Error::Arity { expected: arity, found: a.arity() });
            }
            f.bound = min_bound(f.bound, a.bound());
            f.insert(eps, a.to_polarized());
        }
        f.apply_bound();
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn bound(&self) -> Option<i64> {
        self.bound
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn components(&self) -> impl Iterator<Item = (&Vec<usize>, &Ldo)> {
        self.comps.iter()
    }

    /// The component at `ε` (polarized), zero when absent.
    pub fn component(&self, eps: &[usize]) -> Ldo {
        self.comps
            .get(eps)
            .cloned()
            .unwrap_or_else(|| Ldo::zero(self.dim, self.arity).to_polarized().with_bound(self.bound))
    }

    fn empty_like(&self) -> Self {
        OperatorForm { dim: self.dim, arity: self.arity, degree: self.degree, bound: self.bound, comps: BTreeMap::new() }
    }

    fn with_degree(&self, degree: usize) -> Self {
        OperatorForm { degree, ..self.empty_like() }
    }

    fn insert(&mut self, eps: Vec<usize>, a: Ldo) {
        let a = a.to_polarized();
        let merged = match self.comps.remove(&eps) {
            Some(old) => old.add(&a).expect("matching operators"),
            None => a,
        };
        if !merged.is_zero() {
            self.comps.insert(eps, merged);
        }
    }

    fn apply_bound(&mut self) {
        if let Some(b) = self.bound {
            let comps = std::mem::take(&mut self.comps);
            for (e, a) in comps {
                self.insert(e, a.truncate(b));
            }
        }
    }

    /// Lowers the bound of every component to `b`.
    pub fn truncate(&self, b: i64) -> Self {
        let mut out = self.clone();
        out.bound = min_bound(self.bound, Some(b));
        out.apply_bound();
        out
    }

    pub fn with_bound(&self, b: Option<i64>) -> Self {
        let mut out = self.empty_like();
        out.bound = b;
        for (e, a) in &self.comps {
            out.insert(e.clone(), a.clone().with_bound(b));
        }
        out
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Dimension { expected: self.dim, found: other.dim });
        }
        if self.arity != other.arity {
            return Err(Error::Arity { expected: self.arity, found: other.arity });
        }
        if self.degree != other.degree {
            return Err(Error::Degree(format!("cannot add forms of degrees {} and {}", self.degree, other.degree)));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        out.bound = min_bound(self.bound, other.bound);
        for (e, a) in &other.comps {
            out.insert(e.clone(), a.clone());
        }
        out.apply_bound();
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(&rat(-1))
    }

    pub fn scale(&self, s: &Rational) -> Self {
        let mut out = self.empty_like();
        for (e, a) in &self.comps {
            out.insert(e.clone(), a.scale(s));
        }
        out
    }

    /// Applies `f` to every component.
    pub fn map_components(&self, f: impl Fn(&Ldo) -> Result<Ldo>) -> Result<Self> {
        let mut out = self.empty_like();
        for (e, a) in &self.comps {
            let b = f(a)?;
            out.bound = min_bound(out.bound, b.bound());
            out.insert(e.clone(), b);
        }
        out.apply_bound();
        Ok(out)
    }

    /// Agreement on the part both operands know exactly.
    pub fn agrees_with(&self, other: &Self) -> bool {
        if self.check_same(other).is_err() {
            return false;
        }
        let b = min_bound(self.bound, other.bound);
        let (x, y) = match b {
            Some(b) => (self.truncate(b), other.truncate(b)),
            None => (self.clone(), other.clone()),
        };
        x.comps.len() == y.comps.len() && x.comps.iter().all(|(e, a)| y.comps.get(e).is_some_and(|c| a.agrees_with(c)))
    }

    /// Largest `ζ` degree present, `None` when zero.
    pub fn max_zeta_degree(&self) -> Option<u32> {
        self.comps.values().flat_map(|a| a.terms().map(|(k, _)| k.xi[0].order())).max()
    }

    /// The terms with `ζ` degree exactly `q`.
    pub fn zeta_block(&self, q: u32) -> Self {
        let mut out = self.empty_like();
        for (e, a) in &self.comps {
            let terms = a.terms().filter(|(k, _)| k.xi[0].order() == q).map(|(k, c)| (k.clone(), c.clone()));
            let b = Ldo::from_terms(self.dim, self.arity, true, a.bound(), terms).expect("same shape");
            out.insert(e.clone(), b);
        }
        out
    }

    fn raise_degree(&self, part: Part) -> Self {
        let mut out = self.with_degree((self.degree + 1).min(self.dim));
        if self.degree == self.dim {
            return out;
        }
        for (eps, a) in &self.comps {
            for i in 0..self.dim {
                let Some((sign, e)) = wedge_insert(eps, i) else { continue };
                let mut b = match part {
                    Part::Both => a.total_left(i).expect("valid axis"),
                    Part::Coefficients => a.differentiate_coefficients(i).expect("valid axis"),
                    Part::Zeta => a.mul_xi(0, i).expect("valid axis"),
                };
                if sign < 0 {
                    b = b.neg();
                }
                out.insert(e, b);
            }
        }
        out
    }

    /// `d(A (dx)^ε) = Σ_i (d/dx^i ∘ A) dx^i ∧ (dx)^ε`.
    pub fn d_op(&self) -> Self {
        self.raise_degree(Part::Both)
    }

    /// The part of `d` differentiating coefficients; preserves the `ζ` degree.
    pub fn d1(&self) -> Self {
        self.raise_degree(Part::Coefficients)
    }

    /// The part of `d` multiplying by `ζ^i`; raises the `ζ` degree by one.
    pub fn d2(&self) -> Self {
        self.raise_degree(Part::Zeta)
    }

    /// The Koszul homotopy `h = Σ_i ∂/∂ζ^i ⊗ ι(∂/∂x^i)`; `d₂h + hd₂ = (N − p)` on bidegree `p`.
    pub fn koszul_homotopy(&self) -> Self {
        let mut out = self.with_degree(self.degree.saturating_sub(1));
        if self.degree == 0 {
            return out;
        }
        for (eps, a) in &self.comps {
            for (pos, &i) in eps.iter().enumerate() {
                let mut rest = eps.clone();
                rest.remove(pos);
                let mut b = Ldo::zero(self.dim, self.arity).to_polarized().with_bound(a.bound());
                for (key, c) in a.terms() {
                    let e = key.xi[0].0[i];
                    if e == 0 {
                        continue;
                    }
                    let mut k = key.clone();
                    k.xi[0].0[i] -= 1;
                    let mut s = rat(e as i64);
                    if pos % 2 == 1 {
                        s = -s;
                    }
                    b.add_term(k, c.scale(&s));
                }
                out.insert(rest, b);
            }
        }
        out
    }

    /// Evaluates every component on the same arguments.
    pub fn apply(&self, args: &[LocalFunction]) -> Result<HorizontalForm> {
        let mut comps = Vec::new();
        for (e, a) in &self.comps {
            comps.push((e.clone(), a.apply(args)?));
        }
        HorizontalForm::from_components(self.dim, self.degree, comps)
    }

    /// The Ldo in the top component; errors unless the degree is `N`.
    pub fn top_component(&self) -> Result<Ldo> {
        if self.degree != self.dim {
            return Err(Error::Degree(format!("expected a form of degree {}, got {}", self.dim, self.degree)));
        }
        Ok(self.component(&full_set(self.dim)))
    }
}

#[derive(Clone, Copy)]
enum Part {
    Both,
    Coefficients,
    Zeta,
}

/// Solves `d₂ α = z` for a block of fixed `p < N`.
pub fn koszul_solve(z: &OperatorForm) -> Result<OperatorForm> {
    let n = z.dim;
    let k = z.degree;
    if z.is_zero() {
        return Ok(z.with_degree(k.saturating_sub(1)));
    }
    let mut p = None;
    for a in z.comps.values() {
        for (key, _) in a.terms() {
            let q = key.xi[0].order() as i64;
            let this = k as i64 - q;
            if p.is_some_and(|p| p != this) {
                return Err(Error::Degree("koszul_solve needs a block of a single bidegree".into()));
            }
            p = Some(this);
        }
    }
    let p = p.unwrap();
    if p >= n as i64 {
        return Err(Error::Degree(format!("the Koszul complex is not exact at p = {p} = N")));
    }
    if p == k as i64 {
        return Err(Error::NoSolution("d₂ is injective on forms without ζ letters".into()));
    }
    if !z.d2().is_zero() {
        return Err(Error::NotClosed("d₂ z ≠ 0".into()));
    }
    let alpha = z.koszul_homotopy().scale(&(Rational::from_integer(1.into()) / rat(n as i64 - p)));
    if k == 0 || !alpha.d2().agrees_with(z) {
        return Err(Error::NoSolution("d₂ is injective on forms without ζ letters".into()));
    }
    Ok(alpha)
}

/// Output of [`reduce_top`]: `A = d_op(tilde) + chi`.
#[derive(Clone, Debug)]
pub struct TopReduction {
    pub tilde: OperatorForm,
    pub chi: OperatorForm,
}

/// Splits a top-degree form as `d_op(Ã) + χ` by stripping `ζ` letters, smallest axis first.
pub fn reduce_top(a: &OperatorForm) -> Result<TopReduction> {
    let n = a.dim;
    if a.degree != n {
        return Err(Error::Degree(format!("reduce_top needs a form of degree {n}, got {}", a.degree)));
    }
    let full = full_set(n);
    let mut tilde = a.with_degree(n - 1);
    let mut work = a.component(&full);
    let mut chi = work.empty_like();
    let mut tilde_parts: Vec<Ldo> = (0..n).map(|_| work.empty_like()).collect();
    while !work.is_zero() {
        let mut next = work.empty_like();
        for (key, q) in work.terms() {
            let Some(i) = key.xi[0].0.iter().position(|&e| e > 0) else {
                chi.add_term(key.clone(), q.clone());
                continue;
            };
            let mut k = key.clone();
            k.xi[0] = key.xi[0].lowered(i).unwrap();
            let sign = if i % 2 == 0 { q.clone() } else { -q };
            tilde_parts[i].add_term(k.clone(), sign);
            next.add_term(k, -q.total_derivative_unchecked(i));
        }
        work = next;
    }
    for (i, part) in tilde_parts.into_iter().enumerate() {
        let mut eps = full.clone();
        eps.remove(i);
        tilde.insert(eps, part);
    }
    let mut chi_form = a.empty_like();
    chi_form.insert(full, chi);
    Ok(TopReduction { tilde, chi: chi_form })
}

/// Returns `X` with `d_op X = Y` for a closed `Y` of degree `k < N`, descending the
/// staircase of `ζ` degrees.  For `k = 0` the only closed form is zero, returned as is.
pub fn solve_d(y: &OperatorForm) -> Result<OperatorForm> {
    let n = y.dim;
    let k = y.degree;
    if k >= n {
        return Err(Error::Degree(format!("solve_d needs degree below N = {n}; use reduce_top")));
    }
    if !y.d_op().is_zero() {
        return Err(Error::NotClosed("d_op Y ≠ 0".into()));
    }
    if k == 0 {
        if y.is_zero() {
            return Ok(y.clone());
        }
        return Err(Error::Internal("nonzero closed operator form of degree 0".into()));
    }
    let mut rest = y.clone();
    let mut x = y.with_degree(k - 1);
    let mut last = u32::MAX;
    while let Some(q) = rest.max_zeta_degree() {
        if q >= last {
            return Err(Error::Internal("staircase did not descend".into()));
        }
        last = q;
        let alpha = koszul_solve(&rest.zeta_block(q))?;
        rest = rest.sub(&alpha.d_op())?;
        x = x.add(&alpha)?;
    }
    Ok(x)
}

/// Key with no letters except the given `ζ` exponent.
pub fn zeta_key(dim: usize, arity: usize, zeta: MultiIndex) -> LdoKey {
    let mut k = LdoKey::identity(dim, arity);
    k.xi[0] = zeta;
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_function, random_operator_form, rng, Shape};
    use proptest::prelude::*;

    fn small() -> Shape {
        Shape { max_terms: 3, ..Shape::default() }
    }

    fn u0() -> LocalFunction {
        LocalFunction::u(MultiIndex(vec![0]))
    }

    fn zeta(dim: usize, n: usize, axis: usize) -> Ldo {
        Ldo::xi(dim, n, 0, axis).unwrap().polarize().unwrap()
    }

    #[test]
    fn d_op_examples() {
        let a = OperatorForm::scalar(&Ldo::function(u0(), 1));
        let expected = Ldo::function(LocalFunction::u(MultiIndex(vec![1])), 1)
            .to_polarized()
            .add(&zeta(1, 1, 0).mul_function(&u0()).unwrap())
            .unwrap();
        assert_eq!(a.d_op(), OperatorForm::top(&expected));
        // matches normal ordering d/dx ∘ (u·id)
        let composed = Ldo::xi(1, 1, 0, 0).unwrap().compose(&[Ldo::function(u0(), 1)]).unwrap();
        assert_eq!(a.d_op(), OperatorForm::top(&composed));
        assert_eq!(OperatorForm::scalar(&Ldo::identity(1)).d_op(), OperatorForm::top(&zeta(1, 1, 0)));
    }

    #[test]
    fn koszul_edge_cases() {
        let z = OperatorForm::zero(2, 1, 1).unwrap();
        assert!(koszul_solve(&z).unwrap().is_zero());
        let f = Ldo::function(LocalFunction::u(MultiIndex(vec![0, 0])), 1);
        let z = OperatorForm::from_components(2, 1, 2, [(vec![0, 1], f)]).unwrap();
        // q = 0 = p − N would need p = N: rejected
        assert!(matches!(koszul_solve(&z), Err(Error::Degree(_))));
        let y = OperatorForm::from_components(2, 1, 1, [(vec![0], Ldo::function(LocalFunction::u(MultiIndex(vec![0, 0])), 1))]).unwrap();
        assert!(matches!(koszul_solve(&y), Err(Error::NoSolution(_))));
        let y = OperatorForm::from_components(2, 1, 1, [(vec![0], zeta(2, 1, 0))]).unwrap();
        assert!(matches!(koszul_solve(&y), Err(Error::NotClosed(_))));
    }

    #[test]
    fn reduce_top_examples() {
        let d = Ldo::xi(1, 1, 0, 0).unwrap();
        let r = reduce_top(&OperatorForm::top(&d)).unwrap();
        assert_eq!(r.tilde, OperatorForm::scalar(&Ldo::identity(1)));
        assert!(r.chi.is_zero());
        let x = LocalFunction::x(1, 0);
        let xd = d.mul_function(&x).unwrap();
        let r = reduce_top(&OperatorForm::top(&xd)).unwrap();
        assert_eq!(r.tilde, OperatorForm::scalar(&Ldo::function(x.clone(), 1)));
        assert_eq!(r.chi, OperatorForm::top(&Ldo::function(-LocalFunction::one(1), 1)));
        for seed in 0..10 {
            let f = random_function(&mut rng(seed), 1, &Shape::default());
            // x f' = d(x f)/dx − f
            let lhs = xd.apply(&[f.clone()]).unwrap();
            let rhs = &(&x * &f).total_derivative(0).unwrap() - &f;
            assert_eq!(lhs, rhs);
        }
        let v = Ldo::eta(1, 0, MultiIndex(vec![0])).unwrap().mul_function(&u0()).unwrap();
        let r = reduce_top(&OperatorForm::top(&v)).unwrap();
        assert!(r.tilde.is_zero());
        assert_eq!(r.chi, OperatorForm::top(&v));
    }

    #[test]
    fn solve_d_edge_cases() {
        let y = OperatorForm::zero(2, 1, 1).unwrap();
        assert!(solve_d(&y).unwrap().is_zero());
        let y = random_operator_form(&mut rng(4), 2, 1, 0, &small());
        assert!(matches!(solve_d(&y), Err(Error::NotClosed(_))));
        let top = random_operator_form(&mut rng(4), 2, 1, 2, &small());
        assert!(matches!(solve_d(&top), Err(Error::Degree(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn bicomplex_identities(seed in any::<u64>(), dim in 1usize..=3, degree in 0usize..=2, n in 1usize..=2) {
            prop_assume!(degree <= dim);
            let f = random_operator_form(&mut rng(seed), dim, n, degree, &small());
            prop_assert!(f.d_op().d_op().is_zero());
            prop_assert!(f.d1().d1().is_zero());
            prop_assert!(f.d2().d2().is_zero());
            prop_assert!(f.d1().d2().add(&f.d2().d1()).unwrap().is_zero());
            prop_assert_eq!(f.d1().add(&f.d2()).unwrap(), f.d_op());
        }

        #[test]
        fn koszul_round_trip(seed in any::<u64>(), dim in 1usize..=3, degree in 0usize..=2, q in 0u32..=2) {
            prop_assume!(degree < dim);
            let w = random_operator_form(&mut rng(seed), dim, 1, degree, &small()).zeta_block(q);
            let z = w.d2();
            let alpha = koszul_solve(&z).unwrap();
            prop_assert_eq!(alpha.d2(), z);
        }

        #[test]
        fn top_decomposition(seed in any::<u64>(), dim in 1usize..=2, n in 1usize..=2) {
            let a = random_operator_form(&mut rng(seed), dim, n, dim, &small());
            let r = reduce_top(&a).unwrap();
            prop_assert_eq!(r.tilde.d_op().add(&r.chi).unwrap(), a.clone());
            let chi = a.top_component().unwrap().characteristic();
            prop_assert_eq!(r.chi.top_component().unwrap(), chi);
        }

        #[test]
        fn staircase_round_trip(seed in any::<u64>(), dim in 2usize..=3, k in 1usize..=2, n in 1usize..=2) {
            prop_assume!(k < dim);
            let x0 = random_operator_form(&mut rng(seed), dim, n, k - 1, &small());
            let y = x0.d_op();
            let x = solve_d(&y).unwrap();
            prop_assert_eq!(x.d_op(), y);
        }
    }
}
