//! The characteristic equations of a liftable multilinear operator.
//!
//! For `χ = χ(A)` written without `ζ`, `χ(A∘D^i_j) = 0` for all `i, j` is equivalent to
//!
//! ```text
//! Θ^i_j χ = −ξ^i_j χ                      (j ≥ 2)
//! Θ^i_1 χ + Σ_{j≥2} Θ^i_j χ = d/dx^i χ
//! ```
//!
//! where `d/dx^i` differentiates coefficients only.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::jet::{JetPowers, MultiIndex, Rational};
use crate::ldo::{Ldo, LdoKey};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxisReport {
    pub axis: usize,
    /// `Σ_j Θ^i_j χ = d/dx^i χ`.
    pub sum_relation: bool,
    /// `Θ^i_j χ = −ξ^i_j χ` for slots `1..n` (0-based), in order.
    pub slot_relations: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CruxReport {
    pub axes: Vec<AxisReport>,
}

impl CruxReport {
    pub fn all_true(&self) -> bool {
        self.axes.iter().all(|a| a.sum_relation && a.slot_relations.iter().all(|&b| b))
    }
}

/// Evaluates the characteristic equations on `χ(A)`.
pub fn check_crux(a: &Ldo) -> Result<CruxReport> {
    let n = a.arity();
    if n < 2 {
        return Err(Error::Unsupported("the characteristic equations need arity at least 2".into()));
    }
    let chi = a.characteristic().to_unpolarized();
    let mut axes = Vec::with_capacity(a.dim());
    for i in 0..a.dim() {
        let mut sum = Ldo::zero(a.dim(), n).with_bound(chi.bound());
        let mut slot_relations = Vec::with_capacity(n - 1);
        for j in 0..n {
            let t = chi.theta(i, j)?;
            sum = sum.add(&t)?;
            if j >= 1 {
                let rhs = chi.mul_xi(j, i)?.neg();
                slot_relations.push(t.agrees_with(&rhs));
            }
        }
        let sum_relation = sum.agrees_with(&chi.differentiate_coefficients(i)?);
        axes.push(AxisReport { axis: i, sum_relation, slot_relations });
    }
    Ok(CruxReport { axes })
}

/// Output of [`extend_minimal`].
#[derive(Clone, Debug)]
pub struct Extension {
    pub chi: Ldo,
    /// False when some coefficient was not determined by the equations; such free
    /// coefficients are set to zero.
    pub unique: bool,
}

type Pattern = Vec<JetPowers>;

/// Solves the characteristic equations weight by weight, starting from the part of `χ`
/// whose η letters all have order 0, and returns the solution truncated to letters of
/// order at most `bound`.
pub fn extend_minimal(minimal: &Ldo, bound: u32) -> Result<Extension> {
    let n = minimal.arity();
    let dim = minimal.dim();
    if n < 2 {
        return Err(Error::Unsupported("extend_minimal needs arity at least 2".into()));
    }
    let minimal = minimal.to_unpolarized();
    // group the weight-0 data by η pattern
    let mut by_profile: BTreeMap<Vec<u32>, BTreeMap<Pattern, Ldo>> = BTreeMap::new();
    for (key, c) in minimal.terms() {
        if !key.xi[0].is_zero() {
            return Err(Error::Degree("minimal part must not contain ζ or ξ_1 letters".into()));
        }
        if key.eta_order() > 0 {
            return Err(Error::Degree("minimal part must only contain η letters of order 0".into()));
        }
        let profile: Vec<u32> = key.eta.iter().map(|e| e.values().sum()).collect();
        let entry = by_profile
            .entry(profile)
            .or_default()
            .entry(key.eta.clone())
            .or_insert_with(|| Ldo::zero(dim, n));
        let mut bare = Ldo::zero(dim, n);
        bare.add_term(LdoKey { xi: key.xi.clone(), eta: vec![JetPowers::new(); n] }, c.clone());
        *entry = entry.add(&bare)?;
    }
    let mut out = Ldo::zero(dim, n);
    let mut unique = true;
    for (profile, start) in by_profile {
        let letters: u32 = profile.iter().sum();
        let top = letters * bound;
        let mut layer = start;
        emit(&mut out, &layer, bound)?;
        for w in 0..top {
            let (next, u) = solve_layer(dim, &profile, w, &layer)?;
            unique &= u;
            layer = next;
            emit(&mut out, &layer, bound)?;
        }
    }
    Ok(Extension { chi: out.with_bound(Some(bound as i64)), unique })
}

fn emit(out: &mut Ldo, layer: &BTreeMap<Pattern, Ldo>, bound: u32) -> Result<()> {
    for (pattern, value) in layer {
        if pattern.iter().any(|e| e.keys().any(|j| j.order() > bound)) {
            continue;
        }
        for (key, c) in value.terms() {
            out.add_term(LdoKey { xi: key.xi.clone(), eta: pattern.clone() }, c.clone());
        }
    }
    Ok(())
}

/// Unknowns of weight `w+1` from the known layer of weight `w`.
fn solve_layer(
    dim: usize,
    profile: &[u32],
    w: u32,
    known: &BTreeMap<Pattern, Ldo>,
) -> Result<(BTreeMap<Pattern, Ldo>, bool)> {
    let n = profile.len();
    let unknowns = patterns(dim, profile, w + 1);
    let index: BTreeMap<&Pattern, usize> = unknowns.iter().enumerate().map(|(k, p)| (p, k)).collect();
    let rows_at = patterns(dim, profile, w);
    let zero = Ldo::zero(dim, n);
    let mut rows: Vec<(BTreeMap<usize, Rational>, Ldo)> = Vec::new();
    for i in 0..dim {
        for beta in &rows_at {
            let c_beta = known.get(beta).unwrap_or(&zero);
            // Θ^i_j applied to the unknowns, read off at β
            let mut theta_rows: Vec<BTreeMap<usize, Rational>> = vec![BTreeMap::new(); n];
            for (j, row) in theta_rows.iter_mut().enumerate() {
                for letter in beta[j].keys() {
                    let raised = letter.raised(i);
                    let mut gamma = beta.clone();
                    remove_one(&mut gamma[j], letter);
                    *gamma[j].entry(raised.clone()).or_insert(0) += 1;
                    let mult = gamma[j][&raised];
                    let col = index[&gamma];
                    *row.entry(col).or_insert_with(Rational::zero) += Rational::from_integer(mult.into());
                }
            }
            let mut sum_row: BTreeMap<usize, Rational> = BTreeMap::new();
            for (j, row) in theta_rows.iter().enumerate() {
                if j >= 1 {
                    rows.push((row.clone(), c_beta.mul_xi(j, i)?.neg()));
                }
                for (col, v) in row {
                    *sum_row.entry(*col).or_insert_with(Rational::zero) += v;
                }
            }
            rows.push((sum_row, c_beta.differentiate_coefficients(i)?));
        }
    }
    let (solution, unique) = eliminate(rows, unknowns.len(), &zero)?;
    let mut out = BTreeMap::new();
    for (k, value) in solution.into_iter().enumerate() {
        if !value.is_zero() {
            out.insert(unknowns[k].clone(), value);
        }
    }
    Ok((out, unique))
}

fn remove_one(p: &mut JetPowers, j: &MultiIndex) {
    let m = p.get_mut(j).unwrap();
    *m -= 1;
    if *m == 0 {
        p.remove(j);
    }
}

/// Gauss–Jordan elimination over Q with operator-valued right-hand sides.
fn eliminate(
    mut rows: Vec<(BTreeMap<usize, Rational>, Ldo)>,
    cols: usize,
    zero: &Ldo,
) -> Result<(Vec<Ldo>, bool)> {
    for r in rows.iter_mut() {
        r.0.retain(|_, v| !v.is_zero());
    }
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut next = 0;
    for col in 0..cols {
        let Some(p) = (next..rows.len()).find(|&r| rows[r].0.contains_key(&col)) else { continue };
        rows.swap(next, p);
        let inv = Rational::one() / rows[next].0[&col].clone();
        let (pv, pr) = {
            let (v, r) = &rows[next];
            let v: BTreeMap<usize, Rational> = v.iter().map(|(k, x)| (*k, x * &inv)).collect();
            (v, r.scale(&inv))
        };
        rows[next] = (pv.clone(), pr.clone());
        for r in 0..rows.len() {
            if r == next {
                continue;
            }
            let Some(f) = rows[r].0.get(&col).cloned() else { continue };
            for (k, x) in &pv {
                let e = rows[r].0.entry(*k).or_insert_with(Rational::zero);
                *e -= &f * x;
            }
            rows[r].0.retain(|_, v| !v.is_zero());
            rows[r].1 = rows[r].1.sub(&pr.scale(&f))?;
        }
        pivots.push((next, col));
        next += 1;
    }
    for (v, r) in &rows[next..] {
        debug_assert!(v.is_empty());
        if !r.is_zero() {
            return Err(Error::Inconsistent("the characteristic equations have no solution for this minimal part".into()));
        }
    }
    let mut solution = vec![zero.clone(); cols];
    for &(r, col) in &pivots {
        solution[col] = rows[r].1.clone();
    }
    Ok((solution, pivots.len() == cols))
}

/// η patterns with `profile[j]` letters on slot `j` and total weight `w`.
fn patterns(dim: usize, profile: &[u32], w: u32) -> Vec<Pattern> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    split_weight(dim, profile, w, &mut current, &mut out);
    out
}

fn split_weight(dim: usize, profile: &[u32], left: u32, current: &mut Pattern, out: &mut Vec<Pattern>) {
    let j = current.len();
    if j == profile.len() {
        if left == 0 {
            out.push(current.clone());
        }
        return;
    }
    let range = if profile[j] == 0 { 0..=0 } else { 0..=left };
    for wj in range {
        for m in multisets(dim, profile[j], wj) {
            current.push(m);
            split_weight(dim, profile, left - wj, current, out);
            current.pop();
        }
    }
}

/// Multisets of `size` multi-indices whose orders add up to `w`.
fn multisets(dim: usize, size: u32, w: u32) -> Vec<JetPowers> {
    let mut letters: Vec<MultiIndex> = (0..=w).flat_map(|o| MultiIndex::all_of_order(dim, o)).collect();
    letters.sort();
    let mut out = Vec::new();
    fn rec(letters: &[MultiIndex], start: usize, size: u32, w: u32, cur: &mut Vec<usize>, out: &mut Vec<JetPowers>) {
        if size == 0 {
            if w == 0 {
                let mut p = JetPowers::new();
                for &k in cur.iter() {
                    *p.entry(letters[k].clone()).or_insert(0) += 1;
                }
                out.push(p);
            }
            return;
        }
        for k in start..letters.len() {
            let o = letters[k].order();
            if o > w {
                continue;
            }
            cur.push(k);
            rec(letters, k, size - 1, w - o, cur, out);
            cur.pop();
        }
    }
    rec(&letters, 0, size, w, &mut Vec::new(), &mut out);
    out
}

/// Coefficient of a monomial `η^1_a η^2_b` (one letter per slot, `N = 1`) in `χ`, as an
/// operator in the remaining ξ letters.
pub fn bilinear_coefficient(chi: &Ldo, a: u32, b: u32) -> Ldo {
    let mut out = Ldo::zero(chi.dim(), chi.arity());
    for (key, c) in chi.to_unpolarized().terms() {
        let single = |e: &JetPowers, k: u32| e.len() == 1 && e.get(&MultiIndex(vec![k])) == Some(&1);
        if single(&key.eta[0], a) && single(&key.eta[1], b) {
            out.add_term(LdoKey { xi: key.xi.clone(), eta: vec![JetPowers::new(); 2] }, c.clone());
        }
    }
    out
}
