//! Graded endomorphisms of the regraded horizontal complex and their lifting.
//!
//! The regraded complex has `Ω_s = Ω^{N−s,0}`, with `d_H` of degree −1.  A degree-`k`
//! element `f` of arity `n` is a family `f_s : [Ω^{⊗n}]_s → Ω_{s+k}`, stored through its
//! components `F^{ε_1..ε_n} ∈ O^{N−s−k}(n)`: on `g_1 (dx)^{ε_1} ⊗ .. ⊗ g_n (dx)^{ε_n}` the
//! map `f_s` returns `F^{ε⃗}(g_1, .., g_n)`.  Here `s = nN − Σ|ε_j|`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::forms::{full_set, subsets, wedge_insert, HorizontalForm};
use crate::jet::{rat, LocalFunction, Rational};
use crate::ldo::{check_permutation, min_bound, Ldo};
use crate::opcomplex::{reduce_top, solve_d, OperatorForm};

/// Which form degree enters the Koszul signs of `d_H^{⊗n}` and of the symmetric group action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum SignConvention {
    /// Regraded degrees `N − |ε|`.
    #[default]
    Regraded,
    /// Classical form degrees `|ε|`.
    Classical,
}

impl SignConvention {
    pub fn degree(self, dim: usize, eps: &[usize]) -> usize {
        match self {
            SignConvention::Regraded => dim - eps.len(),
            SignConvention::Classical => eps.len(),
        }
    }

    /// `(−1)^{Σ_{l<j} deg ε_l}`.
    pub fn slot_sign(self, dim: usize, eps: &[Vec<usize>], j: usize) -> i64 {
        let total: usize = eps[..j].iter().map(|e| self.degree(dim, e)).sum();
        if total % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

pub type Eps = Vec<Vec<usize>>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DEndElement {
    dim: usize,
    arity: usize,
    degree: i64,
    sign: SignConvention,
    families: BTreeMap<Eps, OperatorForm>,
}

fn sign_rat(s: i64) -> Rational {
    rat(s)
}

/// Tuples `(ε_1..ε_n)` of subsets of the axes with `Σ|ε_j| = nN − s`.
pub fn eps_tuples(dim: usize, arity: usize, s: usize) -> Vec<Eps> {
    let total = (arity * dim) as i64 - s as i64;
    if total < 0 {
        return Vec::new();
    }
    let all: Vec<Vec<usize>> = (0..=dim).flat_map(|k| subsets(dim, k)).collect();
    let mut out: Vec<Eps> = vec![Vec::new()];
    for _ in 0..arity {
        let mut next = Vec::new();
        for prefix in &out {
            for e in &all {
                let mut p = prefix.clone();
                p.push(e.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out.retain(|t| t.iter().map(|e| e.len()).sum::<usize>() as i64 == total);
    out
}

impl DEndElement {
    pub fn zero(dim: usize, arity: usize, degree: i64, sign: SignConvention) -> Self {
        DEndElement { dim, arity, degree, sign, families: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn sign_convention(&self) -> SignConvention {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.families.is_empty()
    }

    pub fn families(&self) -> impl Iterator<Item = (&Eps, &OperatorForm)> {
        self.families.iter()
    }

    pub fn bound(&self) -> Option<i64> {
        self.families.values().fold(None, |acc, f| min_bound(acc, f.bound()))
    }

    /// `s = nN − Σ|ε_j|`.
    pub fn s_of(&self, eps: &[Vec<usize>]) -> usize {
        self.arity * self.dim - eps.iter().map(|e| e.len()).sum::<usize>()
    }

    /// Valid values of `s` for a degree: `max(−k, 0) ≤ s ≤ min(nN, N − k)`.
    pub fn s_range(dim: usize, arity: usize, degree: i64) -> Option<(usize, usize)> {
        let lo = (-degree).max(0);
        let hi = ((arity * dim) as i64).min(dim as i64 - degree);
        (lo <= hi).then_some((lo as usize, hi as usize))
    }

    /// Form degree `N − s − k` of the component at `s`, if valid.
    fn form_degree(&self, s: usize) -> Option<usize> {
        let d = self.dim as i64 - s as i64 - self.degree;
        (0..=self.dim as i64).contains(&d).then_some(d as usize)
    }

    fn check_eps(&self, eps: &[Vec<usize>]) -> Result<usize> {
        if eps.len() != self.arity {
            return Err(Error::Arity { expected: self.arity, found: eps.len() });
        }
        for e in eps {
            crate::forms::check_subset(self.dim, e.len(), e)?;
        }
        let s = self.s_of(eps);
        self.form_degree(s)
            .ok_or_else(|| Error::Degree(format!("no components at s = {s} for degree {}", self.degree)))
    }

    /// Sets (adds to) the component at `ε⃗`.
    pub fn insert(&mut self, eps: Eps, form: OperatorForm) -> Result<()> {
        let d = self.check_eps(&eps)?;
        if form.degree() != d || form.arity() != self.arity || form.dim() != self.dim {
            return Err(Error::Degree(format!(
                "component at {eps:?} must be an operator form of degree {d} and arity {}",
                self.arity
            )));
        }
        let merged = match self.families.remove(&eps) {
            Some(old) => old.add(&form)?,
            None => form,
        };
        if !merged.is_zero() {
            self.families.insert(eps, merged);
        }
        Ok(())
    }

    /// The component at `ε⃗`; zero when absent or out of range.
    pub fn family(&self, eps: &[Vec<usize>]) -> Option<OperatorForm> {
        let s = self.s_of(eps);
        let d = self.form_degree(s)?;
        Some(
            self.families
                .get(eps)
                .cloned()
                .unwrap_or_else(|| OperatorForm::zero(self.dim, self.arity, d).unwrap().with_bound(self.bound())),
        )
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Dimension { expected: self.dim, found: other.dim });
        }
        if self.arity != other.arity {
            return Err(Error::Arity { expected: self.arity, found: other.arity });
        }
        if self.degree != other.degree {
            return Err(Error::Degree(format!("degrees {} and {} differ", self.degree, other.degree)));
        }
        if self.sign != other.sign {
            return Err(Error::Unsupported("elements use different sign conventions".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (e, f) in &other.families {
            out.insert(e.clone(), f.clone())?;
        }
        Ok(out)
    }

    pub fn scale(&self, s: &Rational) -> Self {
        let mut out = Self::zero(self.dim, self.arity, self.degree, self.sign);
        for (e, f) in &self.families {
            let g = f.scale(s);
            if !g.is_zero() {
                out.families.insert(e.clone(), g);
            }
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&rat(-1))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn truncate(&self, b: i64) -> Self {
        let mut out = Self::zero(self.dim, self.arity, self.degree, self.sign);
        for (e, f) in &self.families {
            let g = f.truncate(b);
            if !g.is_zero() {
                out.families.insert(e.clone(), g);
            }
        }
        out
    }

    /// Equality on the part both operands know exactly.
    pub fn agrees_with(&self, other: &Self) -> bool {
        if self.check_same(other).is_err() {
            return false;
        }
        let keys: std::collections::BTreeSet<&Eps> = self.families.keys().chain(other.families.keys()).collect();
        keys.into_iter().all(|e| match (self.family(e), other.family(e)) {
            (Some(a), Some(b)) => a.agrees_with(&b),
            _ => false,
        })
    }

    /// `Σ_j Σ_{i∉ε_j} (slot sign)·sgn(i, ε_j)·F^{..ε_j∪i..} ∘ d/dx^i_j` for the target `ε⃗`.
    fn right_differential(&self, eps: &[Vec<usize>], out_degree: usize) -> Result<OperatorForm> {
        let mut acc = OperatorForm::zero(self.dim, self.arity, out_degree)?.with_bound(self.bound());
        for j in 0..self.arity {
            let slot_sign = self.sign.slot_sign(self.dim, eps, j);
            for i in 0..self.dim {
                let Some((wsign, raised)) = wedge_insert(&eps[j], i) else { continue };
                let mut e = eps.to_vec();
                e[j] = raised;
                let Some(f) = self.families.get(&e) else { continue };
                let term = f.map_components(|a| a.total_right(i, j))?;
                acc = acc.add(&term.scale(&sign_rat(slot_sign * wsign)))?;
            }
        }
        Ok(acc)
    }

    /// `δf = d_H f − (−1)^k f d_H^{⊗n}`.
    pub fn delta(&self) -> Result<Self> {
        let k = self.degree;
        let mut out = Self::zero(self.dim, self.arity, k - 1, self.sign);
        let Some((lo, hi)) = Self::s_range(self.dim, self.arity, k - 1) else { return Ok(out) };
        let parity = if k % 2 == 0 { rat(-1) } else { rat(1) };
        for s in lo..=hi {
            let d = out.form_degree(s).unwrap();
            for eps in eps_tuples(self.dim, self.arity, s) {
                let mut comp = OperatorForm::zero(self.dim, self.arity, d)?.with_bound(self.bound());
                if let Some(f) = self.families.get(&eps) {
                    comp = comp.add(&f.d_op())?;
                }
                if s >= 1 {
                    comp = comp.add(&self.right_differential(&eps, d)?.scale(&parity))?;
                }
                if !comp.is_zero() {
                    out.families.insert(eps, comp);
                }
            }
        }
        Ok(out)
    }

    /// Evaluates `f_s` on a tuple of homogeneous forms.
    pub fn eval(&self, forms: &[HorizontalForm]) -> Result<HorizontalForm> {
        if forms.len() != self.arity {
            return Err(Error::Arity { expected: self.arity, found: forms.len() });
        }
        let s: usize = forms.iter().map(|w| self.dim - w.degree()).sum();
        let d = self
            .form_degree(s)
            .ok_or_else(|| Error::Degree(format!("no components at s = {s} for degree {}", self.degree)))?;
        let mut out = HorizontalForm::zero(self.dim, d)?;
        let mut stack: Vec<(Eps, Vec<LocalFunction>)> = vec![(Vec::new(), Vec::new())];
        for w in forms {
            let mut next = Vec::new();
            for (e, g) in &stack {
                for (eps, f) in w.components() {
                    let mut e2 = e.clone();
                    e2.push(eps.clone());
                    let mut g2 = g.clone();
                    g2.push(f.clone());
                    next.push((e2, g2));
                }
            }
            stack = next;
        }
        for (eps, args) in stack {
            if let Some(f) = self.families.get(&eps) {
                out = out.add(&f.apply(&args)?)?;
            }
        }
        Ok(out)
    }

    /// `d_H f_s(ω⃗) − (−1)^k f_{s−1}(d_H^{⊗n} ω⃗)`, computed from evaluations only.
    pub fn delta_pointwise(&self, forms: &[HorizontalForm]) -> Result<HorizontalForm> {
        let s: usize = forms.iter().map(|w| self.dim - w.degree()).sum();
        let out_degree = self.dim as i64 - s as i64 - (self.degree - 1);
        if !(0..=self.dim as i64).contains(&out_degree) {
            return Err(Error::Degree("no output in this degree".into()));
        }
        let mut out = HorizontalForm::zero(self.dim, out_degree as usize)?;
        if self.form_degree(s).is_some() {
            out = out.add(&self.eval(forms)?.dh())?;
        }
        let parity = if self.degree % 2 == 0 { -1 } else { 1 };
        let mut before = 0usize;
        for j in 0..self.arity {
            let slot_sign = if before % 2 == 0 { 1 } else { -1 };
            before += match self.sign {
                SignConvention::Regraded => self.dim - forms[j].degree(),
                SignConvention::Classical => forms[j].degree(),
            };
            if forms[j].degree() == self.dim {
                continue;
            }
            let mut args = forms.to_vec();
            args[j] = forms[j].dh();
            if self.form_degree(s - 1).is_none() {
                continue;
            }
            let v = self.eval(&args)?;
            out = out.add(&v.scale(&rat(parity * slot_sign)))?;
        }
        Ok(out)
    }

    /// Components in unpolarized form, for repeated operad operations.
    fn raw(&self) -> Raw {
        self.families
            .iter()
            .map(|(e, f)| (e.clone(), f.components().map(|(o, a)| (o.clone(), a.to_unpolarized())).collect()))
            .collect()
    }

    fn from_raw(dim: usize, arity: usize, degree: i64, sign: SignConvention, raw: Raw) -> Result<Self> {
        let mut out = Self::zero(dim, arity, degree, sign);
        for (eps, comps) in raw {
            let Some(d) = out.form_degree(out.s_of(&eps)) else { continue };
            let comps: Vec<_> = comps.into_iter().filter(|(_, a)| !a.is_zero()).collect();
            if comps.is_empty() {
                continue;
            }
            out.insert(eps, OperatorForm::from_components(dim, arity, d, comps)?)?;
        }
        Ok(out)
    }

    /// Adds `c·(raw·σ)` to `acc`.
    fn add_permuted(&self, acc: &mut Raw, raw: &Raw, sigma: &[usize], c: &Rational) -> Result<()> {
        check_permutation(sigma, self.arity)?;
        let parity = permutation_sign(sigma);
        for (eps_f, comps) in raw {
            // f sees ε_{σ(k)} in slot k; the result is indexed by the original slots
            let mut eps = vec![Vec::new(); self.arity];
            for (k, &s) in sigma.iter().enumerate() {
                eps[s] = eps_f[k].clone();
            }
            let degrees: Vec<usize> = eps.iter().map(|e| self.sign.degree(self.dim, e)).collect();
            let scale = c * rat(parity * koszul_sign(sigma, &degrees));
            let target = acc.entry(eps).or_default();
            for (o, a) in comps {
                let t = permute_args(a, sigma)?.scale(&scale);
                raw_accumulate(target, o, t)?;
            }
        }
        Ok(())
    }

    /// `Σ c_σ (f·σ)` over the given permutations.
    pub fn permutation_sum(&self, terms: &[(Vec<usize>, Rational)]) -> Result<Self> {
        let raw = self.raw();
        let mut acc = Raw::new();
        for (sigma, c) in terms {
            self.add_permuted(&mut acc, &raw, sigma, c)?;
        }
        Self::from_raw(self.dim, self.arity, self.degree, self.sign, acc)
    }

    /// The symmetric group action `(f·σ)(x_1..x_n) = ε(σ) e(σ; x) f(x_{σ(1)}, .., x_{σ(n)})`
    /// with the Koszul sign `e` taken in this element's sign convention.
    pub fn permute(&self, sigma: &[usize]) -> Result<Self> {
        self.permutation_sum(&[(sigma.to_vec(), rat(1))])
    }

    /// `(1/n!) Σ_σ f·σ`.
    pub fn alternate(&self) -> Result<Self> {
        let perms = permutations(self.arity);
        let c = Rational::from_integer(1.into()) / rat(perms.len() as i64);
        let terms: Vec<_> = perms.into_iter().map(|p| (p, c.clone())).collect();
        self.permutation_sum(&terms)
    }

    /// `(f ∘₁ g)(x_1..) = f(g(x_1..x_m), x_{m+1}, ..)`.
    pub fn compose_first(&self, g: &DEndElement) -> Result<Self> {
        if self.dim != g.dim {
            return Err(Error::Dimension { expected: self.dim, found: g.dim });
        }
        if self.sign != g.sign {
            return Err(Error::Unsupported("elements use different sign conventions".into()));
        }
        let arity = self.arity + g.arity - 1;
        let degree = self.degree + g.degree;
        let (outer_raw, inner_raw) = (self.raw(), g.raw());
        let id = Ldo::identity(self.dim);
        let mut acc = Raw::new();
        for (eps_g, comps_g) in &inner_raw {
            for (eps_out_g, inner) in comps_g {
                let mut args = vec![inner.clone()];
                args.extend(std::iter::repeat(id.clone()).take(self.arity - 1));
                for (eps_f, comps_f) in &outer_raw {
                    if &eps_f[0] != eps_out_g {
                        continue;
                    }
                    let mut eps = eps_g.clone();
                    eps.extend(eps_f[1..].iter().cloned());
                    let target = acc.entry(eps).or_default();
                    for (eps_out, outer) in comps_f {
                        raw_accumulate(target, eps_out, outer.compose(&args)?)?;
                    }
                }
            }
        }
        Self::from_raw(self.dim, arity, degree, self.sign, acc)
    }
}

type Raw = BTreeMap<Eps, BTreeMap<Vec<usize>, Ldo>>;

fn raw_accumulate(target: &mut BTreeMap<Vec<usize>, Ldo>, eps: &[usize], a: Ldo) -> Result<()> {
    match target.get_mut(eps) {
        Some(old) => *old = old.add(&a)?,
        None => {
            target.insert(eps.to_vec(), a);
        }
    }
    Ok(())
}

/// Moves the letters of slot `k` of `a` to slot `σ(k)`, so that the result `g` satisfies
/// `g(f_1..f_n) = a(f_{σ(1)}, .., f_{σ(n)})`.
pub fn permute_args(a: &Ldo, sigma: &[usize]) -> Result<Ldo> {
    let n = sigma.len();
    let mut inv = vec![0; n];
    for (k, &s) in sigma.iter().enumerate() {
        inv[s] = k;
    }
    let p = a.is_polarized();
    let out = a.to_unpolarized().sym_action(&inv)?;
    Ok(if p { out.to_polarized() } else { out })
}

/// Sign of a permutation given as its list of images.
pub fn permutation_sign(sigma: &[usize]) -> i64 {
    let mut inv = 0;
    for a in 0..sigma.len() {
        for b in a + 1..sigma.len() {
            if sigma[a] > sigma[b] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Koszul sign of reordering `x_1..x_n` into `x_{σ(1)}..x_{σ(n)}`.
pub fn koszul_sign(sigma: &[usize], degrees: &[usize]) -> i64 {
    let mut total = 0;
    for a in 0..sigma.len() {
        for b in a + 1..sigma.len() {
            if sigma[a] > sigma[b] {
                total += degrees[sigma[a]] * degrees[sigma[b]];
            }
        }
    }
    if total % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// `a₀(A)_{i,j} = χ(A ∘ d/dx^i_j)`, indexed `[i][j]`.
pub fn a0(a: &Ldo) -> Result<Vec<Vec<Ldo>>> {
    let mut out = Vec::with_capacity(a.dim());
    for i in 0..a.dim() {
        let mut row = Vec::with_capacity(a.arity());
        for j in 0..a.arity() {
            row.push(a.total_right(i, j)?.characteristic().to_unpolarized());
        }
        out.push(row);
    }
    Ok(out)
}

/// First `(i, j)` with `a₀(A)_{i,j} ≠ 0`.
pub fn lifting_obstruction(a: &Ldo) -> Result<Option<(usize, usize)>> {
    for (i, row) in a0(a)?.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if !c.is_zero() {
                return Ok(Some((i, j)));
            }
        }
    }
    Ok(None)
}

pub fn is_liftable(a: &Ldo) -> Result<bool> {
    Ok(lifting_obstruction(a)?.is_none())
}

fn full_eps(dim: usize, arity: usize) -> Eps {
    vec![full_set(dim); arity]
}

/// Fills the components of `h` for `s ≥ start` so that `δh = g` (with `g = 0` when absent).
fn build(mut h: DEndElement, g: Option<&DEndElement>, start: usize) -> Result<DEndElement> {
    let (dim, n, kh) = (h.dim, h.arity, h.degree);
    let hi = ((n * dim) as i64).min(dim as i64 - kh + 1);
    let parity = if kh % 2 == 0 { rat(1) } else { rat(-1) };
    for s in start..=hi.max(-1) as usize {
        let y_degree = dim as i64 - s as i64 - kh + 1;
        if !(0..=dim as i64).contains(&y_degree) {
            continue;
        }
        let y_degree = y_degree as usize;
        for eps in eps_tuples(dim, n, s) {
            let mut y = OperatorForm::zero(dim, n, y_degree)?.with_bound(h.bound());
            if let Some(g) = g {
                if let Some(c) = g.families.get(&eps) {
                    y = y.add(c)?;
                }
            }
            if s >= 1 {
                y = y.add(&h.right_differential(&eps, y_degree)?.scale(&parity))?;
            }
            if y_degree == dim {
                let r = reduce_top(&y)?;
                if !r.chi.is_zero() {
                    return Err(Error::NoSolution(format!("the characteristic of the s = {s} right-hand side does not vanish")));
                }
                if !r.tilde.is_zero() {
                    h.insert(eps, r.tilde)?;
                }
            } else if y_degree == 0 {
                if !y.is_zero() {
                    return Err(Error::Internal(format!("nonzero closed right-hand side of degree 0 at s = {s}")));
                }
            } else {
                let x = solve_d(&y)?;
                if !x.is_zero() {
                    h.insert(eps, x)?;
                }
            }
        }
    }
    Ok(h)
}

/// A degree-0 cycle `f` with `f_0 = A`.
pub fn lift(a: &Ldo, sign: SignConvention) -> Result<DEndElement> {
    if let Some((axis, slot)) = lifting_obstruction(a)? {
        return Err(Error::NotLiftable { axis, slot });
    }
    let mut f = DEndElement::zero(a.dim(), a.arity(), 0, sign);
    f.insert(full_eps(a.dim(), a.arity()), OperatorForm::top(a))?;
    build(f, None, 1)
}

/// For `χ(A) = 0`: the lift `δh` with `h_0 = Ã`, `A = d_H Ã`, so that `f_s = 0` for `s ≥ 2`.
pub fn lift_null(a: &Ldo, sign: SignConvention) -> Result<DEndElement> {
    let r = reduce_top(&OperatorForm::top(a))?;
    if !r.chi.is_zero() {
        return Err(Error::Condition("lift_null needs χ(A) = 0".into()));
    }
    let mut h = DEndElement::zero(a.dim(), a.arity(), 1, sign);
    if a.dim() >= 1 {
        h.insert(full_eps(a.dim(), a.arity()), r.tilde)?;
    }
    h.delta()
}

/// Returns `h` of degree `k + 1` with `δh = g` for a cycle `g` of degree `k ≥ 0`.
pub fn solve_delta(g: &DEndElement) -> Result<DEndElement> {
    if g.degree < 0 {
        return Err(Error::Degree("solve_delta needs degree at least 0".into()));
    }
    if !g.delta()?.is_zero() {
        return Err(Error::NotClosed("δg ≠ 0".into()));
    }
    let h = DEndElement::zero(g.dim, g.arity, g.degree + 1, g.sign);
    build(h, Some(g), 0)
}

/// `B₀(f) = f_0`.
pub fn ladder_b0(f: &DEndElement) -> Result<Ldo> {
    if f.degree != 0 {
        return Err(Error::Degree("B₀ is defined on degree 0".into()));
    }
    f.family(&full_eps(f.dim, f.arity)).unwrap().top_component()
}

/// `B₁(h) = d_H h_0`.
pub fn ladder_b1(h: &DEndElement) -> Result<Ldo> {
    if h.degree != 1 {
        return Err(Error::Degree("B₁ is defined on degree 1".into()));
    }
    h.family(&full_eps(h.dim, h.arity)).unwrap().d_op().top_component()
}

/// `B₋₁(g)_{i,j}`: the characteristic of `g_1` restricted to the summand where slot `j`
/// carries `(dx)^{full∖i}`, normalized so that `a₀∘B₀ = B₋₁∘δ`.
pub fn ladder_bm1(g: &DEndElement) -> Result<Vec<Vec<Ldo>>> {
    if g.degree != -1 {
        return Err(Error::Degree("B₋₁ is defined on degree −1".into()));
    }
    let mut out = Vec::new();
    for i in 0..g.dim {
        let mut row = Vec::new();
        for j in 0..g.arity {
            let mut eps = full_eps(g.dim, g.arity);
            eps[j].retain(|&x| x != i);
            let (wsign, _) = wedge_insert(&eps[j], i).unwrap();
            let sign = -wsign * g.sign.slot_sign(g.dim, &eps, j);
            let c = g.family(&eps).unwrap().top_component()?.characteristic().to_unpolarized();
            row.push(c.scale(&rat(sign)));
        }
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::MultiIndex;
    use crate::random::{random_dend, random_form, random_horizontal_ldo, random_ldo, rng, Shape};
    use rand::Rng;

    fn small() -> Shape {
        Shape { max_terms: 2, x_degree: 1, jet_order: 2, u_degree: 2, xi_order: 1, eta_letters: 1, eta_order: 1 }
    }

    fn x_xi(power: u32) -> Ldo {
        let x = LocalFunction::x(1, 0).pow(power);
        Ldo::xi(1, 1, 0, 0).unwrap().mul_function(&x).unwrap()
    }

    /// Random forms whose regraded degrees add up to `s`.
    fn forms_for<R: Rng>(r: &mut R, dim: usize, arity: usize, s: usize, shape: &Shape) -> Option<Vec<HorizontalForm>> {
        if s > arity * dim {
            return None;
        }
        let mut left = s;
        let mut degrees = vec![dim; arity];
        while left > 0 {
            let j = r.gen_range(0..arity);
            if degrees[j] > 0 {
                degrees[j] -= 1;
                left -= 1;
            }
        }
        Some(degrees.into_iter().map(|d| random_form(r, dim, d, shape)).collect())
    }

    #[test]
    fn lift_of_x_xi() {
        let f = lift(&x_xi(1), SignConvention::Regraded).unwrap();
        assert!(f.delta().unwrap().is_zero());
        let g = HorizontalForm::function(LocalFunction::u(MultiIndex(vec![0])));
        let expected = &(&LocalFunction::x(1, 0) * &LocalFunction::u(MultiIndex(vec![1]))) - &LocalFunction::u(MultiIndex(vec![0]));
        assert_eq!(f.eval(&[g]).unwrap(), HorizontalForm::function(expected));
    }

    #[test]
    fn a0_examples() {
        assert!(is_liftable(&x_xi(1)).unwrap());
        assert!(!is_liftable(&x_xi(2)).unwrap());
        assert_eq!(lifting_obstruction(&x_xi(2)).unwrap(), Some((0, 0)));
        assert!(matches!(lift(&x_xi(2), SignConvention::Regraded), Err(Error::NotLiftable { axis: 0, slot: 0 })));
    }

    #[test]
    fn delta_squared_vanishes() {
        let mut r = rng(11);
        for sign in [SignConvention::Regraded, SignConvention::Classical] {
            for (dim, arity) in [(1, 2), (2, 1), (2, 2)] {
                for k in -1..=1 {
                    let f = random_dend(&mut r, dim, arity, k, sign, &small());
                    assert!(f.delta().unwrap().delta().unwrap().is_zero(), "{dim} {arity} {k} {sign:?}");
                }
            }
        }
    }

    #[test]
    fn delta_matches_pointwise_evaluation() {
        let mut r = rng(12);
        for sign in [SignConvention::Regraded, SignConvention::Classical] {
            for (dim, arity) in [(1, 2), (2, 2), (2, 1)] {
                for k in -1..=1 {
                    let f = random_dend(&mut r, dim, arity, k, sign, &small());
                    let df = f.delta().unwrap();
                    let Some((lo, hi)) = DEndElement::s_range(dim, arity, k - 1) else { continue };
                    for s in lo..=hi {
                        let forms = forms_for(&mut r, dim, arity, s, &small()).unwrap();
                        assert_eq!(df.eval(&forms).unwrap(), f.delta_pointwise(&forms).unwrap(), "{dim} {arity} {k} {s}");
                    }
                }
            }
        }
    }

    #[test]
    fn lifts_are_cycles_with_the_given_top() {
        let mut r = rng(13);
        for sign in [SignConvention::Regraded, SignConvention::Classical] {
            for (dim, arity) in [(1, 2), (2, 2), (2, 1)] {
                let c = random_ldo(&mut r, dim, arity, &small());
                let a = c.total_left(0).unwrap();
                let f = lift(&a, sign).unwrap();
                assert!(f.delta().unwrap().is_zero());
                assert!(ladder_b0(&f).unwrap().agrees_with(&a));
                for s in 1..=(arity * dim).min(dim + 1) {
                    let forms = forms_for(&mut r, dim, arity, s, &small()).unwrap();
                    assert!(f.delta_pointwise(&forms).unwrap().is_zero());
                }
                let g = lift_null(&a, sign).unwrap();
                assert!(g.delta().unwrap().is_zero());
                assert!(ladder_b0(&g).unwrap().agrees_with(&a));
                let diff = f.sub(&g).unwrap();
                let h = solve_delta(&diff).unwrap();
                assert_eq!(h.delta().unwrap(), diff);
            }
        }
    }

    #[test]
    fn lift_of_a_horizontal_unary_operator() {
        let mut r = rng(14);
        for dim in 1..=2 {
            let c = random_horizontal_ldo(&mut r, dim, 1, &small());
            let a = c.total_left(dim - 1).unwrap();
            let f = lift(&a, SignConvention::Regraded).unwrap();
            assert!(f.delta().unwrap().is_zero());
        }
    }

    #[test]
    fn ladder_squares_commute() {
        let mut r = rng(15);
        for sign in [SignConvention::Regraded, SignConvention::Classical] {
            for (dim, arity) in [(1, 2), (2, 2), (2, 1)] {
                let f = random_dend(&mut r, dim, arity, 0, sign, &small());
                let left = a0(&ladder_b0(&f).unwrap()).unwrap();
                let right = ladder_bm1(&f.delta().unwrap()).unwrap();
                assert_eq!(left, right, "{dim} {arity} {sign:?}");
                let h = random_dend(&mut r, dim, arity, 1, sign, &small());
                let b1 = ladder_b1(&h).unwrap();
                assert!(b1.characteristic().is_zero());
                assert!(b1.agrees_with(&ladder_b0(&h.delta().unwrap()).unwrap()));
            }
        }
    }

    #[test]
    fn solve_delta_rejects_non_cycles() {
        let mut r = rng(16);
        let g = random_dend(&mut r, 1, 2, 0, SignConvention::Regraded, &small());
        assert!(matches!(solve_delta(&g), Err(Error::NotClosed(_))));
        let h = random_dend(&mut r, 2, 2, 1, SignConvention::Regraded, &small());
        let dh = h.delta().unwrap();
        assert_eq!(solve_delta(&dh).unwrap().delta().unwrap(), dh);
    }

    #[test]
    fn symmetric_group_action() {
        let mut r = rng(17);
        for sign in [SignConvention::Regraded, SignConvention::Classical] {
            for (dim, arity) in [(1, 2), (1, 3), (2, 2)] {
                let f = random_dend(&mut r, dim, arity, 0, sign, &small());
                let alt = f.alternate().unwrap();
                for p in permutations(arity) {
                    assert_eq!(alt.permute(&p).unwrap(), alt);
                    let lhs = f.permute(&p).unwrap().delta().unwrap();
                    let rhs = f.delta().unwrap().permute(&p).unwrap();
                    assert_eq!(lhs, rhs);
                }
                let s = r.gen_range(0..=arity * dim);
                if let Some(forms) = forms_for(&mut r, dim, arity, s, &small()) {
                    for p in permutations(arity) {
                        let permuted: Vec<_> = p.iter().map(|&i| forms[i].clone()).collect();
                        let degrees: Vec<usize> = forms.iter().map(|w| sign.degree(dim, &vec![0; w.degree()])).collect();
                        let e = permutation_sign(&p) * koszul_sign(&p, &degrees);
                        let lhs = f.permute(&p).unwrap().eval(&forms);
                        let rhs = f.eval(&permuted).map(|w| w.scale(&rat(e)));
                        assert_eq!(lhs.ok(), rhs.ok());
                    }
                }
            }
        }
    }

    #[test]
    fn first_composition_matches_evaluation() {
        let mut r = rng(18);
        for (dim, kf, kg) in [(1, 0, 0), (2, 0, 0), (1, 1, 0), (2, 0, -1)] {
            let f = random_dend(&mut r, dim, 2, kf, SignConvention::Regraded, &small());
            let g = random_dend(&mut r, dim, 2, kg, SignConvention::Regraded, &small());
            let fg = f.compose_first(&g).unwrap();
            for s in 0..=3 * dim {
                let Some(forms) = forms_for(&mut r, dim, 3, s, &small()) else { continue };
                let inner = g.eval(&forms[..2]);
                let expected = inner.and_then(|w| f.eval(&[w, forms[2].clone()]));
                match (fg.eval(&forms), expected) {
                    (Ok(a), Ok(b)) => assert_eq!(a, b),
                    (Err(_), Err(_)) => {}
                    (Ok(a), Err(_)) => assert!(a.is_zero()),
                    (Err(e), Ok(b)) => panic!("{e} but expected {b:?}"),
                }
            }
        }
    }
}
