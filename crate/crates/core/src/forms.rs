//! Horizontal forms, the horizontal differential and the Euler operator.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::jet::{LocalFunction, MultiIndex};

/// Sign and result of `dx^i ∧ (dx)^ε`, or `None` if `i ∈ ε`.
pub fn wedge_insert(eps: &[usize], i: usize) -> Option<(i64, Vec<usize>)> {
    if eps.contains(&i) {
        return None;
    }
    let before = eps.iter().filter(|&&j| j < i).count();
    let mut out = eps.to_vec();
    out.insert(before, i);
    Some((if before % 2 == 0 { 1 } else { -1 }, out))
}

/// Sign of the shuffle that sorts the concatenation `a ++ b`, or `None` if they overlap.
pub fn wedge_concat(a: &[usize], b: &[usize]) -> Option<(i64, Vec<usize>)> {
    let mut inversions = 0usize;
    for x in a {
        for y in b {
            if x == y {
                return None;
            }
            if y < x {
                inversions += 1;
            }
        }
    }
    let mut out = [a, b].concat();
    out.sort_unstable();
    Some((if inversions % 2 == 0 { 1 } else { -1 }, out))
}

/// All `k`-subsets of `0..dim` in increasing lexicographic order.
pub fn subsets(dim: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, dim: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..dim {
            cur.push(i);
            rec(i + 1, dim, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= dim {
        rec(0, dim, k, &mut Vec::new(), &mut out);
    }
    out
}

pub fn full_set(dim: usize) -> Vec<usize> {
    (0..dim).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HorizontalForm {
    dim: usize,
    degree: usize,
    comps: BTreeMap<Vec<usize>, LocalFunction>,
}

impl HorizontalForm {
    pub fn zero(dim: usize, degree: usize) -> Result<Self> {
        if degree > dim {
            return Err(Error::Degree(format!("form degree {degree} exceeds N = {dim}")));
        }
        Ok(HorizontalForm { dim, degree, comps: BTreeMap::new() })
    }

    /// The 0-form `f`.
    pub fn function(f: LocalFunction) -> Self {
        let dim = f.dim();
        let mut w = HorizontalForm { dim, degree: 0, comps: BTreeMap::new() };
        w.add_component(Vec::new(), f);
        w
    }

    /// `f · dx^1 ∧ .. ∧ dx^N`.
    pub fn top(f: LocalFunction) -> Self {
        let dim = f.dim();
        let mut w = HorizontalForm { dim, degree: dim, comps: BTreeMap::new() };
        w.add_component(full_set(dim), f);
        w
    }

    pub fn from_components(
        dim: usize,
        degree: usize,
        comps: impl IntoIterator<Item = (Vec<usize>, LocalFunction)>,
    ) -> Result<Self> {
        let mut w = Self::zero(dim, degree)?;
        for (eps, f) in comps {
            check_subset(dim, degree, &eps)?;
            if f.dim() != dim {
                return Err(Error::Dimension { expected: dim, found: f.dim() });
            }
            w.add_component(eps, f);
        }
        Ok(w)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn components(&self) -> impl Iterator<Item = (&Vec<usize>, &LocalFunction)> {
        self.comps.iter()
    }

    pub fn component(&self, eps: &[usize]) -> LocalFunction {
        self.comps.get(eps).cloned().unwrap_or_else(|| LocalFunction::zero(self.dim))
    }

    pub(crate) fn add_component(&mut self, eps: Vec<usize>, f: LocalFunction) {
        if f.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.comps.entry(eps) {
            Entry::Vacant(v) => {
                v.insert(f);
            }
            Entry::Occupied(mut o) => {
                o.get_mut().add_assign_ref(&f);
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dimension { expected: self.dim, found: other.dim });
        }
        if self.degree != other.degree {
            return Err(Error::Degree(format!("cannot add forms of degrees {} and {}", self.degree, other.degree)));
        }
        let mut out = self.clone();
        for (e, f) in &other.comps {
            out.add_component(e.clone(), f.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for f in out.comps.values_mut() {
            *f = -&*f;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &crate::jet::Rational) -> Self {
        let mut out = Self { dim: self.dim, degree: self.degree, comps: BTreeMap::new() };
        for (e, f) in &self.comps {
            out.add_component(e.clone(), f.scale(s));
        }
        out
    }

    /// `d_H ω = Σ_i dx^i ∧ d/dx^i ω`.
    pub fn dh(&self) -> Self {
        let mut out = HorizontalForm { dim: self.dim, degree: (self.degree + 1).min(self.dim), comps: BTreeMap::new() };
        if self.degree == self.dim {
            return out;
        }
        for (eps, f) in &self.comps {
            for i in 0..self.dim {
                if let Some((sign, e)) = wedge_insert(eps, i) {
                    let d = f.total_derivative_unchecked(i);
                    out.add_component(e, if sign > 0 { d } else { -d });
                }
            }
        }
        out
    }

    /// The wedge product `self ∧ other`.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dimension { expected: self.dim, found: other.dim });
        }
        let degree = self.degree + other.degree;
        let mut out = Self::zero(self.dim, degree.min(self.dim))?;
        if degree > self.dim {
            return Ok(out);
        }
        out.degree = degree;
        for (a, f) in &self.comps {
            for (b, g) in &other.comps {
                if let Some((sign, e)) = wedge_concat(a, b) {
                    let p = f * g;
                    out.add_component(e, if sign > 0 { p } else { -p });
                }
            }
        }
        Ok(out)
    }

    /// Largest jet order among components.
    pub fn jet_order(&self) -> i64 {
        self.comps.values().map(|f| f.jet_order()).max().unwrap_or(-1)
    }
}

pub(crate) fn check_subset(dim: usize, degree: usize, eps: &[usize]) -> Result<()> {
    if eps.len() != degree || eps.windows(2).any(|w| w[0] >= w[1]) || eps.iter().any(|&i| i >= dim) {
        return Err(Error::Degree(format!("{eps:?} is not an increasing {degree}-subset of the {dim} axes")));
    }
    Ok(())
}

/// Variational derivative `Σ_I (−1)^{|I|} (d/dx)^I ∂L/∂u_I`.
pub fn euler_of(l: &LocalFunction) -> LocalFunction {
    let mut out = LocalFunction::zero(l.dim());
    for j in l.jet_variables() {
        let t = l.partial_u_unchecked(&j).total_derivative_multi(&j);
        if j.order() % 2 == 0 {
            out.add_assign_ref(&t);
        } else {
            out = &out - &t;
        }
    }
    out
}

/// The Euler operator on top-degree forms.
pub fn euler(alpha: &HorizontalForm) -> Result<LocalFunction> {
    if alpha.degree != alpha.dim {
        return Err(Error::Degree(format!("the Euler operator needs a form of degree {}, got {}", alpha.dim, alpha.degree)));
    }
    Ok(euler_of(&alpha.component(&full_set(alpha.dim))))
}

/// Returns `g` with `d_H g = α` for a 1-form on a line, by integrating by parts from the
/// highest jet order down.
pub fn invert_dh_1d(alpha: &HorizontalForm) -> Result<HorizontalForm> {
    if alpha.dim != 1 {
        return Err(Error::Unsupported("constructive inversion of d_H is only available for N = 1".into()));
    }
    if alpha.degree != 1 {
        return Err(Error::Degree(format!("expected a 1-form, got degree {}", alpha.degree)));
    }
    let l0 = alpha.component(&[0]);
    if !euler_of(&l0).is_zero() {
        return Err(Error::NotExact("the Euler operator does not vanish".into()));
    }
    let mut l = l0;
    let mut g = LocalFunction::zero(1);
    while !l.is_zero() {
        let k = l.jet_order();
        if k <= 0 {
            if l.depends_on_u() {
                return Err(Error::NotExact("remainder depends on u".into()));
            }
            g.add_assign_ref(&l.integrate_x(0));
            break;
        }
        let top = MultiIndex(vec![k as u32]);
        let parts = l.split_by_power(&top);
        if parts.keys().any(|&p| p > 1) {
            return Err(Error::NotExact(format!("not linear in u_{k}")));
        }
        let p = parts.get(&1).cloned().unwrap_or_else(|| LocalFunction::zero(1));
        let step = p.integrate_u(&MultiIndex(vec![k as u32 - 1]));
        l = &l - &step.total_derivative_unchecked(0);
        g.add_assign_ref(&step);
        if l.jet_order() >= k {
            return Err(Error::Internal("integration by parts did not lower the jet order".into()));
        }
    }
    Ok(HorizontalForm::function(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::rat;
    use crate::random::{rng, Shape};
    use proptest::prelude::*;

    fn u(v: &[u32]) -> LocalFunction {
        LocalFunction::u(MultiIndex(v.to_vec()))
    }

    fn random_form(seed: u64, dim: usize, degree: usize) -> HorizontalForm {
        crate::random::random_form(&mut rng(seed), dim, degree, &Shape::default())
    }

    #[test]
    fn dh_examples() {
        let w = HorizontalForm::function(u(&[0]));
        assert_eq!(w.dh(), HorizontalForm::top(u(&[1])));
        let w = HorizontalForm::from_components(2, 1, [(vec![0], u(&[0, 0]))]).unwrap();
        // dx^2 ∧ D_2(u) dx^1 = −u_(0,1) dx^1∧dx^2
        assert_eq!(w.dh(), HorizontalForm::top(-u(&[0, 1])));
    }

    #[test]
    fn euler_examples() {
        let l = u(&[1]).pow(2).scale(&crate::jet::rat_frac(1, 2));
        assert_eq!(euler(&HorizontalForm::top(l)).unwrap(), -u(&[2]));
        assert_eq!(euler(&HorizontalForm::top(u(&[0]))).unwrap(), LocalFunction::one(1));
        assert!(matches!(euler(&HorizontalForm::function(u(&[0]))), Err(Error::Degree(_))));
    }

    #[test]
    fn invert_examples() {
        assert_eq!(invert_dh_1d(&HorizontalForm::top(u(&[1]))).unwrap(), HorizontalForm::function(u(&[0])));
        let a = &(&u(&[0]) * &u(&[2])) + &u(&[1]).pow(2);
        let g = invert_dh_1d(&HorizontalForm::top(a.clone())).unwrap();
        assert_eq!(g.dh(), HorizontalForm::top(a));
        assert_eq!(g, HorizontalForm::function(&u(&[0]) * &u(&[1])));
        assert!(matches!(invert_dh_1d(&HorizontalForm::top(u(&[0]))), Err(Error::NotExact(_))));
        let x = LocalFunction::x(1, 0);
        assert_eq!(invert_dh_1d(&HorizontalForm::top(x.clone())).unwrap().dh(), HorizontalForm::top(x));
    }

    #[test]
    fn wedge_signs() {
        assert_eq!(wedge_insert(&[0, 2], 1), Some((-1, vec![0, 1, 2])));
        assert_eq!(wedge_insert(&[1], 0), Some((1, vec![0, 1])));
        assert_eq!(wedge_insert(&[1], 1), None);
        assert_eq!(wedge_concat(&[1, 2], &[0]), Some((1, vec![0, 1, 2])));
        assert_eq!(wedge_concat(&[2], &[0, 1]), Some((1, vec![0, 1, 2])));
        assert_eq!(wedge_concat(&[1], &[0]), Some((-1, vec![0, 1])));
        assert_eq!(subsets(3, 2).len(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn dh_squares_to_zero(seed in any::<u64>(), dim in 1usize..=3, degree in 0usize..=3) {
            prop_assume!(degree <= dim);
            let w = random_form(seed, dim, degree);
            prop_assert!(w.dh().dh().is_zero());
        }

        #[test]
        fn euler_kills_exact_forms(seed in any::<u64>(), dim in 1usize..=3) {
            let w = random_form(seed, dim, dim - 1);
            prop_assert!(euler(&w.dh()).unwrap().is_zero());
        }

        #[test]
        fn inversion_round_trip(seed in any::<u64>()) {
            let g = random_form(seed, 1, 0);
            let a = g.dh();
            prop_assert_eq!(invert_dh_1d(&a).unwrap().dh(), a);
        }

        #[test]
        fn dh_is_a_graded_derivation(seed in any::<u64>(), p in 0usize..=1) {
            let a = random_form(seed, 2, p);
            let b = random_form(seed ^ 1, 2, 1 - p);
            let lhs = a.wedge(&b).unwrap().dh();
            let sign = if p % 2 == 0 { rat(1) } else { rat(-1) };
            let rhs = a.dh().wedge(&b).unwrap().add(&a.wedge(&b.dh()).unwrap().scale(&sign)).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
