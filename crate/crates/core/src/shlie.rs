//! Strong homotopy Lie structures whose brackets are local differential operators.
//!
//! Starting from a bilinear bracket `l̃₂ ∈ O^N(2)` on top forms, the tower is
//! `l₂ = Alt(lift(skew l̃₂))` and `l_n = Alt(h)` with `δh = −R_n`, where `R_n` is the part of
//! the arity-`n` generalized Jacobi expression built from `l_2 .. l_{n−1}`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::forms::{euler, full_set, HorizontalForm};
use crate::jet::{rat, JetPowers, LocalFunction, MultiIndex, Rational};
use crate::ldo::{Ldo, LdoKey};
use crate::lifting::{
    a0, koszul_sign, lift, permutation_sign, permute_args, solve_delta, DEndElement, SignConvention,
};
use crate::opcomplex::{reduce_top, OperatorForm};
use crate::random::{random_form, random_function, rng, Shape};

/// Default order bound for truncated infinite operators such as the Euler operator.
/// With bound 10 the tower's `l₃` is exact on inputs of jet order 4, which covers `d_H` of the
/// default random forms.
pub const DEFAULT_ORDER_BOUND: i64 = 10;

/// The Euler operator `E = Σ_J (−1)^{|J|} ξ^J η_J`, truncated to `|J| ≤ bound`.
pub fn euler_operator(dim: usize, bound: i64) -> Ldo {
    let mut terms = Vec::new();
    for order in 0..=bound.max(0) as u32 {
        for j in MultiIndex::all_of_order(dim, order) {
            let key = LdoKey { xi: vec![j.clone()], eta: vec![JetPowers::from([(j, 1)])] };
            let c = if order % 2 == 0 { 1 } else { -1 };
            terms.push((key, LocalFunction::constant(dim, rat(c))));
        }
    }
    Ldo::from_terms(dim, 1, false, Some(bound), terms).expect("valid terms")
}

/// `l̃₂(α, β) = E(α)·(d/dx)E(β)·dx` on the line.
pub fn kdv_bracket(bound: i64) -> OperatorForm {
    let e = euler_operator(1, bound);
    let de = e.total_left(0).expect("axis 0");
    OperatorForm::top(&e.tensor(&de).expect("same dimension"))
}

/// `l̃₂(α, β) = E(α)·E(β)·dx` on the line; symmetric rather than skew.
pub fn symmetric_euler_bracket(bound: i64) -> OperatorForm {
    let e = euler_operator(1, bound);
    OperatorForm::top(&e.tensor(&e).expect("same dimension"))
}

/// Unshuffles of type `(i, n − i)`, as image lists `σ(0..n)`.
pub fn unshuffles(i: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for first in crate::forms::subsets(n, i) {
        let mut p = first.clone();
        p.extend((0..n).filter(|x| !first.contains(x)));
        out.push(p);
    }
    out
}

/// The sign `ε(σ)·e(σ; x)·(−1)^{i(j−1)}` of the term `l_j(l_i(x_{σ(1)}..), ..)`.
///
/// `degrees` are the regraded degrees `N − (form degree)` of the inputs.
pub fn shlie_sign(i: usize, j: usize, sigma: &[usize], degrees: &[usize]) -> i64 {
    let base = permutation_sign(sigma) * koszul_sign(sigma, degrees);
    if (i * (j - 1)) % 2 == 0 {
        base
    } else {
        -base
    }
}

fn check_bracket(lt2: &OperatorForm) -> Result<Ldo> {
    if lt2.arity() != 2 {
        return Err(Error::Arity { expected: 2, found: lt2.arity() });
    }
    if lt2.degree() != lt2.dim() {
        return Err(Error::Degree(format!("the bracket must be a top-degree form, got degree {}", lt2.degree())));
    }
    Ok(lt2.top_component()?.to_unpolarized())
}

/// `Σ_{σ∈unsh(2,1)} ε(σ) A(A(f_{σ(1)}, f_{σ(2)}), f_{σ(3)})` for a bracket on top forms.
fn top_jacobiator(a: &Ldo) -> Result<Ldo> {
    let id = Ldo::identity(a.dim());
    let c = a.compose(&[a.clone(), id])?;
    let mut out = Ldo::zero(a.dim(), 3).with_bound(c.bound());
    for sigma in unshuffles(2, 3) {
        let t = permute_args(&c, &sigma)?.scale(&rat(permutation_sign(&sigma)));
        out = out.add(&t)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoissonReport {
    pub i: bool,
    pub ii: bool,
    pub iii: bool,
}

impl PoissonReport {
    pub fn all(&self) -> bool {
        self.i && self.ii && self.iii
    }
}

/// (i) `χ(l̃₂∘d/dx^i_j) = 0`, (ii) `χ(l̃₂ + l̃₂∘τ) = 0`, (iii) `χ` of the jacobiator vanishes.
pub fn check_poisson_conditions(lt2: &OperatorForm) -> Result<PoissonReport> {
    let a = check_bracket(lt2)?;
    let i = a0(&a)?.iter().flatten().all(|c| c.is_zero());
    let ii = symmetric_part(&a)?.characteristic().is_zero();
    let iii = top_jacobiator(&a)?.characteristic().is_zero();
    Ok(PoissonReport { i, ii, iii })
}

fn symmetric_part(a: &Ldo) -> Result<Ldo> {
    a.add(&permute_args(a, &[1, 0])?)
}

/// Replaces `l̃₂` by `l̃₂ − ½ d_H m̃` with `m̃` symmetric and `l̃₂ + l̃₂∘τ = d_H m̃`.
pub fn skew_symmetrize(lt2: &OperatorForm) -> Result<OperatorForm> {
    let a = check_bracket(lt2)?;
    let sym = symmetric_part(&a)?;
    let r = reduce_top(&OperatorForm::top(&sym))?;
    if !r.chi.is_zero() {
        return Err(Error::Condition(format!("condition (ii) fails: χ(l̃₂ + l̃₂∘τ) = {}", r.chi.top_component()?.to_unpolarized())));
    }
    if sym.is_zero() {
        return Ok(lt2.clone());
    }
    let swapped = r.tilde.map_components(|c| permute_args(c, &[1, 0]))?;
    let m = r.tilde.add(&swapped)?.scale(&half());
    lt2.sub(&m.d_op().scale(&half()))
}

fn half() -> Rational {
    Rational::new(1.into(), 2.into())
}

/// `Σ_{i+j=n+1, i,j≥2} (−1)^{i(j−1)} Σ_{σ∈unsh(i,n−i)} (l_j ∘₁ l_i)·σ`.
pub fn defect(brackets: &BTreeMap<usize, DEndElement>, n: usize) -> Result<DEndElement> {
    let any = brackets.values().next().ok_or_else(|| Error::Internal("empty tower".into()))?;
    let (dim, sign) = (any.dim(), any.sign_convention());
    let mut out = DEndElement::zero(dim, n, n as i64 - 3, sign);
    for i in 2..n {
        let j = n + 1 - i;
        let (Some(li), Some(lj)) = (brackets.get(&i), brackets.get(&j)) else { continue };
        let c = lj.compose_first(li)?;
        let s = if (i * (j - 1)) % 2 == 0 { rat(1) } else { rat(-1) };
        let terms: Vec<_> = unshuffles(i, n).into_iter().map(|sigma| (sigma, s.clone())).collect();
        out = out.add(&c.permutation_sum(&terms)?)?;
    }
    Ok(out)
}

/// The arity-3 defect of a degree-0 cycle `l₂`.
pub fn jacobiator(l2: &DEndElement) -> Result<DEndElement> {
    if l2.arity() != 2 || l2.degree() != 0 {
        return Err(Error::Degree("the jacobiator needs a degree-0 element of arity 2".into()));
    }
    if !l2.delta()?.is_zero() {
        return Err(Error::NotClosed("δl₂ ≠ 0".into()));
    }
    defect(&BTreeMap::from([(2, l2.clone())]), 3)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShLieTower {
    pub dim: usize,
    pub brackets: BTreeMap<usize, DEndElement>,
}

impl ShLieTower {
    pub fn kmax(&self) -> usize {
        self.brackets.keys().copied().max().unwrap_or(1)
    }

    pub fn bracket(&self, k: usize) -> Option<&DEndElement> {
        self.brackets.get(&k)
    }
}

/// Builds `l_2 .. l_kmax` from a bracket satisfying the three conditions.
pub fn build_tower(lt2: &OperatorForm, kmax: usize) -> Result<ShLieTower> {
    if kmax < 2 {
        return Err(Error::Degree("kmax must be at least 2".into()));
    }
    let a = check_bracket(lt2)?;
    for (i, row) in a0(&a)?.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if !c.is_zero() {
                return Err(Error::Condition(format!(
                    "condition (i) fails at axis {}, slot {}: χ = {c}",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let chi = top_jacobiator(&a)?.characteristic();
    if !chi.is_zero() {
        return Err(Error::Condition(format!("condition (iii) fails: χ = {}", chi.to_unpolarized())));
    }
    let skew = skew_symmetrize(lt2)?;
    let l2 = lift(&skew.top_component()?, SignConvention::Regraded)?.alternate()?;
    let mut brackets = BTreeMap::from([(2, l2)]);
    for n in 3..=kmax {
        let r = defect(&brackets, n)?;
        let h = solve_delta(&r.neg()).map_err(|e| match e {
            Error::NoSolution(m) => Error::Condition(format!("arity {n} defect is not a boundary: {m}")),
            other => other,
        })?;
        brackets.insert(n, h.alternate()?);
    }
    Ok(ShLieTower { dim: lt2.dim(), brackets })
}

/// Evaluates a bracket on forms; `Ok(None)` when the output degree is empty.
fn eval_bracket(tower: &ShLieTower, k: usize, forms: &[HorizontalForm]) -> Result<Option<HorizontalForm>> {
    let dim = tower.dim;
    let s: usize = forms.iter().map(|w| dim - w.degree()).sum();
    if k == 1 {
        let w = &forms[0];
        return Ok((w.degree() < dim).then(|| w.dh()));
    }
    let out = dim as i64 - s as i64 - (k as i64 - 2);
    if !(0..=dim as i64).contains(&out) {
        return Ok(None);
    }
    match tower.brackets.get(&k) {
        Some(l) => l.eval(forms).map(Some),
        None => Ok(Some(HorizontalForm::zero(dim, out as usize)?)),
    }
}

/// The generalized Jacobi expression of arity `n` evaluated on `forms`.
pub fn jacobi_expression(tower: &ShLieTower, forms: &[HorizontalForm]) -> Result<Option<HorizontalForm>> {
    let n = forms.len();
    let dim = tower.dim;
    let degrees: Vec<usize> = forms.iter().map(|w| dim - w.degree()).collect();
    let mut total: Option<HorizontalForm> = None;
    for i in 1..=n {
        let j = n + 1 - i;
        for sigma in unshuffles(i, n) {
            let inner_args: Vec<_> = sigma[..i].iter().map(|&x| forms[x].clone()).collect();
            let Some(inner) = eval_bracket(tower, i, &inner_args)? else { continue };
            let mut outer_args = vec![inner];
            outer_args.extend(sigma[i..].iter().map(|&x| forms[x].clone()));
            let Some(v) = eval_bracket(tower, j, &outer_args)? else { continue };
            let v = v.scale(&rat(shlie_sign(i, j, &sigma, &degrees)));
            total = Some(match total {
                Some(t) => t.add(&v)?,
                None => v,
            });
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArityReport {
    pub n: usize,
    pub trials: usize,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub arities: Vec<ArityReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.arities.iter().all(|a| a.failures.is_empty())
    }
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for a in &self.arities {
            let status = if a.failures.is_empty() { "pass" } else { "FAIL" };
            writeln!(f, "n = {}: {status} ({} trials, {} failures)", a.n, a.trials, a.failures.len())?;
            for m in &a.failures {
                writeln!(f, "  {m}")?;
            }
        }
        Ok(())
    }
}

/// Randomized default shape: x-degree ≤ 2, jet order ≤ 3, at most 4 terms, and cubic terms
/// in the jet variables so that the Euler operator is nonlinear on the samples.
pub fn verification_shape() -> Shape {
    Shape { u_degree: 3, ..Shape::default() }
}

/// Checks the generalized Jacobi identities for `n = 1..=nmax` on random tuples of forms.
pub fn verify_shlie(tower: &ShLieTower, nmax: usize, trials: usize, seed: u64, shape: &Shape) -> VerifyReport {
    let mut r = rng(seed);
    let dim = tower.dim;
    let mut arities = Vec::new();
    for n in 1..=nmax {
        let mut failures = Vec::new();
        if n > tower.kmax().max(2) {
            failures.push(format!("tower only reaches arity {}", tower.kmax()));
        }
        for t in 0..trials {
            // trial t uses the t-th degree pattern in base N + 1, so every pattern is exercised
            let mut code = t;
            let forms: Vec<HorizontalForm> = (0..n)
                .map(|_| {
                    let d = code % (dim + 1);
                    code /= dim + 1;
                    random_form(&mut r, dim, d, shape)
                })
                .collect();
            match jacobi_expression(tower, &forms) {
                Ok(None) => {}
                Ok(Some(v)) if v.is_zero() => {}
                Ok(Some(v)) => failures.push(format!("trial {t}: nonzero value {v:?}")),
                Err(e) => failures.push(format!("trial {t}: {e}")),
            }
        }
        arities.push(ArityReport { n, trials, failures });
    }
    VerifyReport { arities }
}

/// Searches for `f⃗` with `E(A(f⃗)·dx) ≠ 0`.
pub fn euler_witness(a: &Ldo, trials: usize, seed: u64, shape: &Shape) -> Result<Option<Vec<LocalFunction>>> {
    let mut r = rng(seed);
    let top = full_set(a.dim());
    for _ in 0..trials {
        let args: Vec<_> = (0..a.arity()).map(|_| random_function(&mut r, a.dim(), shape)).collect();
        let v = a.apply(&args)?;
        let form = HorizontalForm::from_components(a.dim(), a.dim(), [(top.clone(), v)])?;
        if !euler(&form)?.is_zero() {
            return Ok(Some(args));
        }
    }
    Ok(None)
}
