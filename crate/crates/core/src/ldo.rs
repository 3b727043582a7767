//! Multilinear local differential operators in normal form.
//!
//! A term is `p · ξ^{I_1}..ξ^{I_n} · η^{α_1}..η^{α_n}`: on slot `j` it first applies
//! the vertical derivatives `∂^{α_j}` and then the total derivatives `(d/dx)^{I_j}`,
//! and the slot results are multiplied together with `p`.  In polarized mode slot 0
//! carries `ζ = ξ_1 + .. + ξ_n` instead of `ξ_1`.
//!
//! An operator may be a truncation of an infinite one.  `bound = Some(b)` means the
//! stored terms agree with the true operator on every term whose η letters all have
//! order at most `b`; terms above that are not stored.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::jet::{
    formal_degree, powers_add_one, powers_remove_one, rat, JetPowers, LocalFunction, MultiIndex,
    Rational,
};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LdoKey {
    pub xi: Vec<MultiIndex>,
    pub eta: Vec<JetPowers>,
}

impl LdoKey {
    pub fn identity(dim: usize, arity: usize) -> Self {
        LdoKey { xi: vec![MultiIndex::zero(dim); arity], eta: vec![JetPowers::new(); arity] }
    }

    /// Largest `|J|` over all η letters, `-1` when there are none.
    pub fn eta_order(&self) -> i64 {
        self.eta.iter().map(formal_degree).max().unwrap_or(-1)
    }

    pub fn xi_order(&self, slot: usize) -> u32 {
        self.xi[slot].order()
    }

    pub fn max_xi_order(&self) -> u32 {
        self.xi.iter().map(|i| i.order()).max().unwrap_or(0)
    }

    fn concat(&self, other: &LdoKey) -> LdoKey {
        let mut xi = self.xi.clone();
        xi.extend(other.xi.iter().cloned());
        let mut eta = self.eta.clone();
        eta.extend(other.eta.iter().cloned());
        LdoKey { xi, eta }
    }
}

pub fn min_bound(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    }
}

fn shift_bound(b: Option<i64>, by: i64) -> Option<i64> {
    b.map(|x| x + by)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ldo {
    dim: usize,
    arity: usize,
    polarized: bool,
    bound: Option<i64>,
    terms: BTreeMap<LdoKey, LocalFunction>,
}

impl Ldo {
    pub fn zero(dim: usize, arity: usize) -> Self {
        Ldo { dim, arity, polarized: false, bound: None, terms: BTreeMap::new() }
    }

    /// The identity operator `f ↦ f`.
    pub fn identity(dim: usize) -> Self {
        Self::function(LocalFunction::one(dim), 1)
    }

    /// Multiplication operator `(f_1..f_n) ↦ p·f_1⋯f_n`.
    pub fn function(p: LocalFunction, arity: usize) -> Self {
        let dim = p.dim();
        let mut a = Self::zero(dim, arity);
        a.add_term(LdoKey::identity(dim, arity), p);
        a
    }

    /// `ξ^axis` on `slot`.
    pub fn xi(dim: usize, arity: usize, slot: usize, axis: usize) -> Result<Self> {
        check_range(dim, arity, slot, axis)?;
        let mut key = LdoKey::identity(dim, arity);
        key.xi[slot] = MultiIndex::unit(dim, axis);
        let mut a = Self::zero(dim, arity);
        a.add_term(key, LocalFunction::one(dim));
        Ok(a)
    }

    /// `η_J` on `slot`.
    pub fn eta(arity: usize, slot: usize, j: MultiIndex) -> Result<Self> {
        let dim = j.dim();
        if slot >= arity {
            return Err(Error::Slot { slot, arity });
        }
        let mut key = LdoKey::identity(dim, arity);
        key.eta[slot] = powers_add_one(&JetPowers::new(), &j);
        let mut a = Self::zero(dim, arity);
        a.add_term(key, LocalFunction::one(dim));
        Ok(a)
    }

    pub fn from_terms(
        dim: usize,
        arity: usize,
        polarized: bool,
        bound: Option<i64>,
        terms: impl IntoIterator<Item = (LdoKey, LocalFunction)>,
    ) -> Result<Self> {
        if arity == 0 {
            return Err(Error::Arity { expected: 1, found: 0 });
        }
        let mut a = Self::zero(dim, arity);
        a.polarized = polarized;
        a.bound = bound;
        for (key, c) in terms {
            if key.xi.len() != arity || key.eta.len() != arity {
                return Err(Error::Arity { expected: arity, found: key.xi.len() });
            }
            let bad_dim = key.xi.iter().any(|i| i.dim() != dim)
                || key.eta.iter().any(|e| e.keys().any(|j| j.dim() != dim));
            if bad_dim || c.dim() != dim {
                return Err(Error::Dimension { expected: dim, found: c.dim() });
            }
            a.add_term(key, c);
        }
        a.prune();
        Ok(a)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_polarized(&self) -> bool {
        self.polarized
    }

    pub fn bound(&self) -> Option<i64> {
        self.bound
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&LdoKey, &LocalFunction)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, key: &LdoKey) -> Option<&LocalFunction> {
        self.terms.get(key)
    }

    pub(crate) fn add_term(&mut self, key: LdoKey, c: LocalFunction) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(key) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                o.get_mut().add_assign_ref(&c);
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub(crate) fn empty_like(&self) -> Self {
        Ldo { dim: self.dim, arity: self.arity, polarized: self.polarized, bound: self.bound, terms: BTreeMap::new() }
    }

    /// Drops terms above the bound.
    fn prune(&mut self) {
        if let Some(b) = self.bound {
            self.terms.retain(|k, _| k.eta_order() <= b);
        }
    }

    /// Lowers the bound to `b` (never raises it) and drops terms above it.
    pub fn truncate(&self, b: i64) -> Self {
        let mut out = self.clone();
        out.bound = min_bound(self.bound, Some(b));
        out.prune();
        out
    }

    /// Declares the operator to be exact only up to `b` without changing the terms below it.
    pub fn with_bound(mut self, b: Option<i64>) -> Self {
        self.bound = b;
        self.prune();
        self
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Dimension { expected: self.dim, found: other.dim });
        }
        if self.arity != other.arity {
            return Err(Error::Arity { expected: self.arity, found: other.arity });
        }
        if self.polarized != other.polarized {
            return Err(Error::Mode { expected: if self.polarized { "polarized" } else { "unpolarized" } });
        }
        Ok(())
    }

    fn check_unpolarized(&self) -> Result<()> {
        if self.polarized {
            return Err(Error::Mode { expected: "unpolarized" });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        out.bound = min_bound(self.bound, other.bound);
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.clone());
        }
        out.prune();
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Rational::one())
    }

    pub fn scale(&self, s: &Rational) -> Self {
        let mut out = self.empty_like();
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c.scale(s));
        }
        out
    }

    /// Left multiplication of every coefficient by `f`.
    pub fn mul_function(&self, f: &LocalFunction) -> Result<Self> {
        if f.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, found: f.dim() });
        }
        let mut out = self.empty_like();
        for (k, c) in &self.terms {
            out.add_term(k.clone(), f * c);
        }
        Ok(out)
    }

    /// `p ξ^I η^α ↦ (D_i p) ξ^I η^α`, i.e. differentiating coefficients only.
    pub fn differentiate_coefficients(&self, axis: usize) -> Result<Self> {
        check_axis(self.dim, axis)?;
        let mut out = self.empty_like();
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c.total_derivative_unchecked(axis));
        }
        Ok(out)
    }

    /// Multiplies every term by the letter `ξ^axis` of `slot` (`ζ` when polarized and `slot == 0`).
    pub fn mul_xi(&self, slot: usize, axis: usize) -> Result<Self> {
        check_range(self.dim, self.arity, slot, axis)?;
        let mut out = self.empty_like();
        for (k, c) in &self.terms {
            let mut k = k.clone();
            k.xi[slot] = k.xi[slot].raised(axis);
            out.add_term(k, c.clone());
        }
        Ok(out)
    }

    /// Equality of the parts both operands know exactly.
    pub fn agrees_with(&self, other: &Self) -> bool {
        if self.dim != other.dim || self.arity != other.arity {
            return false;
        }
        let (a, b) = if self.polarized == other.polarized {
            (self.clone(), other.clone())
        } else {
            (self.depolarize_if_needed(), other.depolarize_if_needed())
        };
        let bound = min_bound(a.bound, b.bound);
        let keep = |k: &LdoKey| bound.map_or(true, |b| k.eta_order() <= b);
        let ta: Vec<_> = a.terms.iter().filter(|(k, _)| keep(k)).collect();
        let tb: Vec<_> = b.terms.iter().filter(|(k, _)| keep(k)).collect();
        ta == tb
    }

    fn depolarize_if_needed(&self) -> Self {
        if self.polarized {
            self.depolarize().expect("mode checked")
        } else {
            self.clone()
        }
    }

    /// Tensor product: `(A ⊗ B)(f⃗, g⃗) = A(f⃗)·B(g⃗)`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        self.check_unpolarized()?;
        other.check_unpolarized()?;
        if self.dim != other.dim {
            return Err(Error::Dimension { expected: self.dim, found: other.dim });
        }
        let mut out = Ldo::zero(self.dim, self.arity + other.arity);
        out.bound = min_bound(self.bound, other.bound);
        for (k1, c1) in &self.terms {
            for (k2, c2) in &other.terms {
                out.add_term(k1.concat(k2), c1 * c2);
            }
        }
        out.prune();
        Ok(out)
    }

    /// Evaluates the operator on `n` local functions.
    pub fn apply(&self, args: &[LocalFunction]) -> Result<LocalFunction> {
        if args.len() != self.arity {
            return Err(Error::Arity { expected: self.arity, found: args.len() });
        }
        for f in args {
            if f.dim() != self.dim {
                return Err(Error::Dimension { expected: self.dim, found: f.dim() });
            }
            if let Some(b) = self.bound {
                if f.jet_order() > b {
                    return Err(Error::Truncation(format!(
                        "argument of jet order {} exceeds operator bound {}",
                        f.jet_order(),
                        b
                    )));
                }
            }
        }
        let a = self.depolarize_if_needed();
        let mut caches: Vec<HashMap<(MultiIndex, JetPowers), LocalFunction>> = vec![HashMap::new(); self.arity];
        let mut out = LocalFunction::zero(self.dim);
        'terms: for (key, c) in &a.terms {
            let mut prod = c.clone();
            for slot in 0..self.arity {
                let ck = (key.xi[slot].clone(), key.eta[slot].clone());
                let v = caches[slot]
                    .entry(ck)
                    .or_insert_with(|| {
                        let mut g = args[slot].clone();
                        for (j, &m) in &key.eta[slot] {
                            for _ in 0..m {
                                g = g.partial_u_unchecked(j);
                            }
                        }
                        g.total_derivative_multi(&key.xi[slot])
                    })
                    .clone();
                if v.is_zero() {
                    continue 'terms;
                }
                prod = &prod * &v;
            }
            out.add_assign_ref(&prod);
        }
        Ok(out)
    }

    /// `∂/∂u_J ∘ A`, by the chain rule and `∂_{u_J} D^I = Σ_K C(I,K) D^{I-K} ∂_{u_{J-K}}`.
    pub fn vertical_left(&self, j: &MultiIndex) -> Result<Self> {
        self.check_unpolarized()?;
        if j.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, found: j.dim() });
        }
        let mut out = self.empty_like();
        for (key, c) in &self.terms {
            out.add_term(key.clone(), c.partial_u_unchecked(j));
            for slot in 0..self.arity {
                let i = &key.xi[slot];
                for k in i.sub_indices() {
                    let Some(jk) = j.checked_sub(&k) else { continue };
                    let mut nk = key.clone();
                    nk.xi[slot] = i.checked_sub(&k).unwrap();
                    nk.eta[slot] = powers_add_one(&key.eta[slot], &jk);
                    out.add_term(nk, c.scale(&i.binomial(&k)));
                }
            }
        }
        out.prune();
        Ok(out)
    }

    /// `D_i ∘ A`.
    pub fn total_left(&self, axis: usize) -> Result<Self> {
        check_axis(self.dim, axis)?;
        let mut out = self.empty_like();
        for (key, c) in &self.terms {
            out.add_term(key.clone(), c.total_derivative_unchecked(axis));
            let slots = if self.polarized { 0..1 } else { 0..self.arity };
            for slot in slots {
                let mut nk = key.clone();
                nk.xi[slot] = nk.xi[slot].raised(axis);
                out.add_term(nk, c.clone());
            }
        }
        Ok(out)
    }

    /// `A ∘ D^axis_slot` (total derivative inserted on one argument).
    pub fn total_right(&self, axis: usize, slot: usize) -> Result<Self> {
        check_range(self.dim, self.arity, slot, axis)?;
        let mut out = self.theta(axis, slot)?;
        for (key, c) in &self.terms {
            if self.polarized && slot == 0 {
                let mut nk = key.clone();
                nk.xi[0] = nk.xi[0].raised(axis);
                out.add_term(nk, c.clone());
                for l in 1..self.arity {
                    let mut nk = key.clone();
                    nk.xi[l] = nk.xi[l].raised(axis);
                    out.add_term(nk, -c);
                }
            } else {
                let mut nk = key.clone();
                nk.xi[slot] = nk.xi[slot].raised(axis);
                out.add_term(nk, c.clone());
            }
        }
        out.prune();
        Ok(out)
    }

    /// `Θ^axis_slot`: the derivation `η_J ↦ η_{J/axis}` on the η letters of `slot`.
    pub fn theta(&self, axis: usize, slot: usize) -> Result<Self> {
        check_range(self.dim, self.arity, slot, axis)?;
        let mut out = self.empty_like();
        out.bound = shift_bound(self.bound, -1);
        for (key, c) in &self.terms {
            for j in key.eta[slot].keys() {
                let Some(lower) = j.lowered(axis) else { continue };
                let (m, rest) = powers_remove_one(&key.eta[slot], j).unwrap();
                let mut nk = key.clone();
                nk.eta[slot] = powers_add_one(&rest, &lower);
                out.add_term(nk, c.scale(&rat(m as i64)));
            }
        }
        out.prune();
        Ok(out)
    }

    /// Operadic composition `γ(A; B_1..B_l)`.
    pub fn compose(&self, inner: &[Ldo]) -> Result<Self> {
        self.check_unpolarized()?;
        if inner.len() != self.arity {
            return Err(Error::Arity { expected: self.arity, found: inner.len() });
        }
        for b in inner {
            b.check_unpolarized()?;
            if b.dim != self.dim {
                return Err(Error::Dimension { expected: self.dim, found: b.dim });
            }
        }
        let total: usize = inner.iter().map(|b| b.arity).sum();
        let bound = compose_bound(self, inner)?;
        let inner: Vec<Ldo> = match bound {
            Some(k) => inner.iter().map(|b| b.truncate(k)).collect(),
            None => inner.to_vec(),
        };
        // largest ξ order and coefficient jet order per inner operator, for skipping
        // outer terms that can only produce letters above the bound
        let reach: Vec<(i64, i64)> = inner
            .iter()
            .map(|b| {
                let xi = b.terms.keys().map(|k| k.max_xi_order() as i64).max().unwrap_or(0);
                let jet = b.terms.values().map(|c| c.jet_order()).max().unwrap_or(-1);
                (xi, jet)
            })
            .collect();
        let mut caches: Vec<HashMap<(MultiIndex, JetPowers), Ldo>> = vec![HashMap::new(); self.arity];
        let mut out = Ldo::zero(self.dim, total);
        out.bound = bound;
        for (key, q) in &self.terms {
            if let Some(k) = bound {
                let skip = (0..self.arity).any(|j| {
                    let d = formal_degree(&key.eta[j]);
                    d > k + reach[j].0 && d > reach[j].1
                });
                if skip {
                    continue;
                }
            }
            let mut acc: Vec<(LdoKey, LocalFunction)> = vec![(LdoKey { xi: vec![], eta: vec![] }, q.clone())];
            for slot in 0..self.arity {
                let ck = (key.xi[slot].clone(), key.eta[slot].clone());
                if !caches[slot].contains_key(&ck) {
                    let mut t = inner[slot].clone();
                    for (j, &m) in &key.eta[slot] {
                        for _ in 0..m {
                            t = t.vertical_left(j)?;
                        }
                    }
                    for axis in key.xi[slot].axis_sequence() {
                        t = t.total_left(axis)?;
                    }
                    if let Some(k) = bound {
                        t = t.truncate(k);
                    }
                    caches[slot].insert(ck.clone(), t);
                }
                let t = &caches[slot][&ck];
                if t.is_zero() {
                    acc.clear();
                    break;
                }
                let mut next = Vec::with_capacity(acc.len() * t.len());
                for (k1, c1) in &acc {
                    for (k2, c2) in &t.terms {
                        next.push((k1.concat(k2), c1 * c2));
                    }
                }
                acc = next;
            }
            for (k, c) in acc {
                out.add_term(k, c);
            }
        }
        out.prune();
        Ok(out)
    }

    /// The symmetric group action: slot `k` of the result carries the letters of slot `σ(k)`.
    ///
    /// With this convention `sym_action(σ, A)(f_1..f_n) = A(f_{σ⁻¹(1)}..f_{σ⁻¹(n)})`, and
    /// `sym_action(σ, sym_action(τ, A)) = sym_action(τ∘σ, A)`.
    pub fn sym_action(&self, sigma: &[usize]) -> Result<Self> {
        self.check_unpolarized()?;
        check_permutation(sigma, self.arity)?;
        let mut out = self.empty_like();
        for (key, c) in &self.terms {
            let nk = LdoKey {
                xi: sigma.iter().map(|&s| key.xi[s].clone()).collect(),
                eta: sigma.iter().map(|&s| key.eta[s].clone()).collect(),
            };
            out.add_term(nk, c.clone());
        }
        Ok(out)
    }

    /// Rewrites `ξ_1 = ζ − ξ_2 − .. − ξ_n`.
    pub fn polarize(&self) -> Result<Self> {
        if self.polarized {
            return Err(Error::Mode { expected: "unpolarized" });
        }
        let mut out = self.substitute_first(-Rational::one());
        out.polarized = true;
        Ok(out)
    }

    /// Rewrites `ζ = ξ_1 + .. + ξ_n`.
    pub fn depolarize(&self) -> Result<Self> {
        if !self.polarized {
            return Err(Error::Mode { expected: "polarized" });
        }
        let mut out = self.substitute_first(Rational::one());
        out.polarized = false;
        Ok(out)
    }

    pub fn to_polarized(&self) -> Self {
        if self.polarized {
            self.clone()
        } else {
            self.polarize().expect("mode checked")
        }
    }

    pub fn to_unpolarized(&self) -> Self {
        self.depolarize_if_needed()
    }

    /// Replaces slot-0 letters `y^i` by `y^i + s·Σ_{l≥1} ξ^i_l`.
    fn substitute_first(&self, s: Rational) -> Self {
        let mut out = self.empty_like();
        let mut linear = vec![(0usize, Rational::one())];
        for l in 1..self.arity {
            linear.push((l, s.clone()));
        }
        for (key, c) in &self.terms {
            if key.xi[0].is_zero() || self.arity == 1 {
                out.add_term(key.clone(), c.clone());
                continue;
            }
            for (xis, coeff) in expand_power(self.dim, self.arity, &key.xi[0], &linear) {
                let mut nk = key.clone();
                nk.xi[0] = xis[0].clone();
                for l in 1..self.arity {
                    nk.xi[l] = key.xi[l].add(&xis[l]);
                }
                out.add_term(nk, c.scale(&coeff));
            }
        }
        out
    }

    /// `χ(A)`: in polarized form `q ζ^{I} R ↦ (−1)^{|I|} (D^{I} q) R`.  Returned in the input's mode.
    pub fn characteristic(&self) -> Self {
        let p = self.to_polarized();
        let mut out = p.empty_like();
        for (key, c) in &p.terms {
            let i = &key.xi[0];
            let mut q = c.total_derivative_multi(i);
            if i.order() % 2 == 1 {
                q = -q;
            }
            let mut nk = key.clone();
            nk.xi[0] = MultiIndex::zero(self.dim);
            out.add_term(nk, q);
        }
        // without ζ letters both modes share the same keys
        out.polarized = self.polarized;
        out
    }

    /// Whether the operator has no ζ letters in polarized form, i.e. lies in `LDO⁰(n)`.
    pub fn is_characteristic_form(&self) -> bool {
        self.to_polarized().terms.keys().all(|k| k.xi[0].is_zero())
    }

    /// Formal adjoint of a purely horizontal linear operator: `Σ p_I ξ^I ↦ Σ (−1)^{|I|} D^I ∘ p_I`.
    pub fn adjoint(&self) -> Result<Self> {
        if self.arity != 1 {
            return Err(Error::Unsupported("adjoint is defined for linear operators only".into()));
        }
        if self.terms.keys().any(|k| !k.eta[0].is_empty()) {
            return Err(Error::Unsupported("adjoint of an operator with vertical letters".into()));
        }
        let a = self.to_unpolarized();
        let mut out = a.empty_like();
        for (key, c) in &a.terms {
            let mut t = Ldo::function(c.clone(), 1);
            for axis in key.xi[0].axis_sequence() {
                t = t.total_left(axis)?;
            }
            if key.xi[0].order() % 2 == 1 {
                t = t.neg();
            }
            for (k, c) in t.terms {
                out.add_term(k, c);
            }
        }
        Ok(out)
    }

    /// Largest η order present, `-1` if none.
    pub fn eta_order(&self) -> i64 {
        self.terms.keys().map(|k| k.eta_order()).max().unwrap_or(-1)
    }

    /// Largest per-slot ξ order present.
    pub fn xi_order(&self) -> u32 {
        self.terms.keys().map(|k| k.max_xi_order()).max().unwrap_or(0)
    }
}

/// Result bound of `γ(A; B⃗)`: the largest `k` such that every result term with letters
/// of order at most `k` only receives contributions from stored terms.
fn compose_bound(outer: &Ldo, inner: &[Ldo]) -> Result<Option<i64>> {
    let inner_bound = inner.iter().fold(None, |acc, b| min_bound(acc, b.bound));
    if outer.bound.is_none() {
        return Ok(inner_bound);
    }
    let ba = outer.bound.unwrap();
    let mut k = match inner_bound {
        Some(b) => b,
        None => {
            // every inner term matters once k exceeds all inner letters
            let top = inner.iter().map(|b| b.eta_order()).max().unwrap_or(-1);
            let xi = inner.iter().map(|b| b.xi_order() as i64).max().unwrap_or(0);
            (ba - xi).max(top)
        }
    };
    while k >= -1 {
        let ok = inner.iter().all(|b| {
            b.terms.iter().all(|(key, c)| {
                key.eta_order() > k || (k + key.max_xi_order() as i64 <= ba && c.jet_order() <= ba)
            })
        });
        if ok {
            return Ok(Some(k));
        }
        k -= 1;
    }
    Err(Error::Truncation("composite has no exactly known terms; raise the order bound".into()))
}

/// Expands `Π_i (Σ_l c_l y^i_l)^{e_i}` into per-slot exponent vectors.
fn expand_power(dim: usize, arity: usize, e: &MultiIndex, linear: &[(usize, Rational)]) -> Vec<(Vec<MultiIndex>, Rational)> {
    let mut acc: Vec<(Vec<MultiIndex>, Rational)> = vec![(vec![MultiIndex::zero(dim); arity], Rational::one())];
    for (axis, &exp) in e.0.iter().enumerate() {
        if exp == 0 {
            continue;
        }
        let parts = compositions(exp, linear.len());
        let mut next = Vec::new();
        for (xis, c) in &acc {
            for part in &parts {
                let mut coeff = c * multinomial(exp, part);
                let mut nx = xis.clone();
                for (p, &(slot, ref cl)) in part.iter().zip(linear) {
                    if *p == 0 {
                        continue;
                    }
                    for _ in 0..*p {
                        coeff *= cl;
                    }
                    nx[slot].0[axis] += p;
                }
                if !coeff.is_zero() {
                    next.push((nx, coeff));
                }
            }
        }
        acc = next;
    }
    acc
}

fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn multinomial(total: u32, parts: &[u32]) -> Rational {
    let mut left = total;
    let mut acc = Rational::one();
    for &p in parts {
        acc *= crate::jet::binomial(left, p);
        left -= p;
    }
    acc
}

pub(crate) fn check_axis(dim: usize, axis: usize) -> Result<()> {
    if axis >= dim {
        return Err(Error::Axis { axis, dim });
    }
    Ok(())
}

pub(crate) fn check_range(dim: usize, arity: usize, slot: usize, axis: usize) -> Result<()> {
    check_axis(dim, axis)?;
    if slot >= arity {
        return Err(Error::Slot { slot, arity });
    }
    Ok(())
}

pub(crate) fn check_permutation(sigma: &[usize], n: usize) -> Result<()> {
    if sigma.len() != n {
        return Err(Error::Permutation(format!("expected a permutation of {n} elements, got {}", sigma.len())));
    }
    let mut seen = vec![false; n];
    for &s in sigma {
        if s >= n || seen[s] {
            return Err(Error::Permutation(format!("{sigma:?} is not a bijection")));
        }
        seen[s] = true;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::rat_frac;
    use crate::random::{random_function, random_horizontal_ldo, random_ldo, rng, Shape};
    use proptest::prelude::*;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex(v.to_vec())
    }

    fn u(v: &[u32]) -> LocalFunction {
        LocalFunction::u(mi(v))
    }

    fn xi(dim: usize, n: usize, slot: usize, axis: usize) -> Ldo {
        Ldo::xi(dim, n, slot, axis).unwrap()
    }

    fn eta(n: usize, slot: usize, j: &[u32]) -> Ldo {
        Ldo::eta(n, slot, mi(j)).unwrap()
    }

    fn args(seed: u64, dim: usize, n: usize) -> Vec<LocalFunction> {
        let mut r = rng(seed);
        (0..n).map(|_| random_function(&mut r, dim, &Shape::default())).collect()
    }

    #[test]
    fn apply_examples() {
        let d = xi(1, 1, 0, 0);
        assert_eq!(d.apply(&[u(&[0]).pow(2)]).unwrap(), (&u(&[0]) * &u(&[1])).scale(&rat(2)));
        let v = eta(1, 0, &[0]).mul_function(&u(&[0])).unwrap();
        assert!(v.apply(&[u(&[1])]).unwrap().is_zero());
        assert_eq!(v.apply(&[u(&[0])]).unwrap(), u(&[0]));
        let x = LocalFunction::x(1, 0);
        let a = xi(1, 1, 0, 0).tensor(&xi(1, 1, 0, 0)).unwrap();
        // oracle: evaluate both factors and multiply
        let expected = &u(&[0]).total_derivative(0).unwrap() * &x.total_derivative(0).unwrap();
        assert_eq!(a.apply(&[u(&[0]), x]).unwrap(), expected);
    }

    #[test]
    fn compose_examples() {
        let d = xi(1, 1, 0, 0);
        let ui = Ldo::function(u(&[0]), 1);
        let expected = Ldo::function(u(&[1]), 1).add(&d.mul_function(&u(&[0])).unwrap()).unwrap();
        assert_eq!(d.compose(&[ui.clone()]).unwrap(), expected);
        for seed in 0..20 {
            let f = &args(seed, 1, 1)[0];
            let direct = d.apply(&[ui.apply(&[f.clone()]).unwrap()]).unwrap();
            assert_eq!(expected.apply(&[f.clone()]).unwrap(), direct);
        }
        let e0 = eta(1, 0, &[0]);
        assert_eq!(e0.compose(&[d.clone()]).unwrap(), d.compose(&[e0.clone()]).unwrap());
        let e1 = eta(1, 0, &[1]);
        let expected = d.compose(&[e1.clone()]).unwrap().add(&e0).unwrap();
        assert_eq!(e1.compose(&[d]).unwrap(), expected);
    }

    #[test]
    fn sym_action_examples() {
        let a = xi(1, 2, 0, 0).compose(&[eta(1, 0, &[0]), Ldo::identity(1)]).unwrap();
        let b = xi(1, 2, 1, 0).compose(&[Ldo::identity(1), eta(1, 0, &[0])]).unwrap();
        assert_eq!(a.sym_action(&[1, 0]).unwrap(), b);
        assert_eq!(a.sym_action(&[0, 1]).unwrap(), a);
        assert!(matches!(a.sym_action(&[0, 0]), Err(Error::Permutation(_))));
        assert!(matches!(a.sym_action(&[0]), Err(Error::Permutation(_))));
    }

    #[test]
    fn polarization_examples() {
        let d = xi(1, 1, 0, 0);
        let p = d.polarize().unwrap();
        assert!(p.is_polarized());
        assert_eq!(p.terms().next().unwrap().0, d.terms().next().unwrap().0);
        let x1 = xi(1, 2, 0, 0).polarize().unwrap();
        let mut zeta = x1.empty_like();
        zeta.add_term(LdoKey { xi: vec![mi(&[1]), mi(&[0])], eta: vec![JetPowers::new(); 2] }, LocalFunction::one(1));
        zeta.add_term(LdoKey { xi: vec![mi(&[0]), mi(&[1])], eta: vec![JetPowers::new(); 2] }, -LocalFunction::one(1));
        assert_eq!(x1, zeta);
        assert!(matches!(x1.polarize(), Err(Error::Mode { .. })));
        assert!(matches!(d.depolarize(), Err(Error::Mode { .. })));
    }

    #[test]
    fn characteristic_examples() {
        let x = LocalFunction::x(1, 0);
        let a = xi(1, 1, 0, 0).mul_function(&x).unwrap();
        assert_eq!(a.characteristic(), Ldo::function(-LocalFunction::one(1), 1));
        // the formal adjoint applied to 1 gives the same function
        assert_eq!(a.adjoint().unwrap().apply(&[LocalFunction::one(1)]).unwrap(), -LocalFunction::one(1));
        let mut b = Ldo::zero(1, 2);
        b.polarized = true;
        let mut e = JetPowers::new();
        e.insert(mi(&[0]), 1);
        b.add_term(LdoKey { xi: vec![mi(&[1]), mi(&[0])], eta: vec![e.clone(), e.clone()] }, x);
        let mut expected = Ldo::zero(1, 2);
        expected.polarized = true;
        expected.add_term(LdoKey { xi: vec![mi(&[0]), mi(&[0])], eta: vec![e.clone(), e] }, -LocalFunction::one(1));
        assert_eq!(b.characteristic(), expected);
    }

    #[test]
    fn adjoint_examples() {
        let d = xi(1, 1, 0, 0);
        assert_eq!(d.adjoint().unwrap(), d.neg());
        let x = LocalFunction::x(1, 0);
        let xd = d.mul_function(&x).unwrap();
        let expected = Ldo::function(-LocalFunction::one(1), 1).sub(&xd).unwrap();
        assert_eq!(xd.adjoint().unwrap(), expected);
        assert!(matches!(eta(1, 0, &[0]).adjoint(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn theta_examples() {
        assert_eq!(eta(1, 0, &[1]).theta(0, 0).unwrap(), eta(1, 0, &[0]));
        assert!(eta(1, 0, &[0]).theta(0, 0).unwrap().is_zero());
        let prod = eta(1, 0, &[0]).compose(&[eta(1, 0, &[1])]).unwrap();
        let sq = eta(1, 0, &[0]).compose(&[eta(1, 0, &[0])]).unwrap();
        assert_eq!(prod.theta(0, 0).unwrap(), sq);
        assert!(matches!(prod.theta(1, 0), Err(Error::Axis { .. })));
        assert!(matches!(prod.theta(0, 1), Err(Error::Slot { .. })));
    }

    #[test]
    fn truncated_composites_agree_below_their_bound() {
        let s = Shape::default();
        for seed in 0..30 {
            let mut r = rng(seed);
            let a = random_ldo(&mut r, 1, 2, &s);
            let b = [random_ldo(&mut r, 1, 1, &s), random_ldo(&mut r, 1, 1, &s)];
            let exact = a.compose(&b).unwrap();
            let cut = a.truncate(2).compose(&b).unwrap();
            assert!(cut.bound().unwrap() <= 2);
            assert!(cut.agrees_with(&exact), "seed {seed}");
            let cut_inner = a.compose(&[b[0].truncate(1), b[1].clone()]).unwrap();
            assert!(cut_inner.agrees_with(&exact), "seed {seed}");
        }
    }

    #[test]
    fn bounded_apply_rejects_deep_arguments() {
        let a = eta(1, 0, &[0]).with_bound(Some(1));
        assert!(a.apply(&[u(&[1])]).is_ok());
        assert!(matches!(a.apply(&[u(&[2])]), Err(Error::Truncation(_))));
    }

    #[test]
    fn multinomial_expansion() {
        // (ζ - ξ_2)^2 on N=1
        let out = expand_power(1, 2, &mi(&[2]), &[(0, rat(1)), (1, rat(-1))]);
        let total: Vec<_> = out.iter().map(|(x, c)| (x[0].0[0], x[1].0[0], c.clone())).collect();
        assert!(total.contains(&(2, 0, rat(1))));
        assert!(total.contains(&(1, 1, rat(-2))));
        assert!(total.contains(&(0, 2, rat(1))));
        assert_eq!(multinomial(4, &[2, 1, 1]), rat(12));
        assert_eq!(rat_frac(2, 4), rat_frac(1, 2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn compose_is_sound(seed in any::<u64>(), dim in 1usize..=2) {
            let s = Shape::default();
            let mut r = rng(seed);
            let a = random_ldo(&mut r, dim, 2, &s);
            let b1 = random_ldo(&mut r, dim, 1, &s);
            let b2 = random_ldo(&mut r, dim, 2, &s);
            let c = a.compose(&[b1.clone(), b2.clone()]).unwrap();
            let f = args(seed ^ 0x55, dim, 3);
            let lhs = c.apply(&f).unwrap();
            let rhs = a.apply(&[b1.apply(&f[..1]).unwrap(), b2.apply(&f[1..]).unwrap()]).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn operad_associativity_and_units(seed in any::<u64>()) {
            let s = Shape { max_terms: 2, ..Shape::default() };
            let mut r = rng(seed);
            let a = random_ldo(&mut r, 1, 2, &s);
            let b = [random_ldo(&mut r, 1, 1, &s), random_ldo(&mut r, 1, 2, &s)];
            let c = [random_ldo(&mut r, 1, 1, &s), random_ldo(&mut r, 1, 1, &s), random_ldo(&mut r, 1, 1, &s)];
            let left = a.compose(&b).unwrap().compose(&c).unwrap();
            let right = a.compose(&[b[0].compose(&c[..1]).unwrap(), b[1].compose(&c[1..]).unwrap()]).unwrap();
            prop_assert_eq!(left, right);
            let id = Ldo::identity(1);
            prop_assert_eq!(a.compose(&[id.clone(), id.clone()]).unwrap(), a.clone());
            prop_assert_eq!(id.compose(&[a.clone()]).unwrap(), a);
        }

        #[test]
        fn symmetric_group_acts_on_the_right(seed in any::<u64>()) {
            let mut r = rng(seed);
            let a = random_ldo(&mut r, 2, 3, &Shape::default());
            let sigma = [1usize, 2, 0];
            let tau = [1usize, 0, 2];
            let tau_sigma: Vec<usize> = sigma.iter().map(|&k| tau[k]).collect();
            let lhs = a.sym_action(&tau).unwrap().sym_action(&sigma).unwrap();
            prop_assert_eq!(lhs, a.sym_action(&tau_sigma).unwrap());
            prop_assert_eq!(a.sym_action(&tau).unwrap().sym_action(&tau).unwrap(), a.clone());
            let f = args(seed, 2, 3);
            // σA(f_1..f_n) = A(f_{σ⁻¹(1)}..)
            let inv = [2usize, 0, 1];
            let permuted: Vec<_> = inv.iter().map(|&k| f[k].clone()).collect();
            prop_assert_eq!(a.sym_action(&sigma).unwrap().apply(&f).unwrap(), a.apply(&permuted).unwrap());
        }

        #[test]
        fn polarization_round_trip(seed in any::<u64>(), n in 1usize..=3) {
            let mut r = rng(seed);
            let a = random_ldo(&mut r, 2, n, &Shape::default());
            prop_assert_eq!(a.polarize().unwrap().depolarize().unwrap(), a.clone());
            let f = args(seed, 2, n);
            prop_assert_eq!(a.polarize().unwrap().apply(&f).unwrap(), a.apply(&f).unwrap());
        }

        #[test]
        fn characteristic_is_a_projector_killing_left_derivatives(seed in any::<u64>(), n in 1usize..=3) {
            let mut r = rng(seed);
            let a = random_ldo(&mut r, 2, n, &Shape::default());
            let chi = a.characteristic();
            prop_assert_eq!(chi.characteristic(), chi.clone());
            prop_assert!(chi.is_characteristic_form());
            for axis in 0..2 {
                let d = xi(2, 1, 0, axis);
                prop_assert!(d.compose(&[a.clone()]).unwrap().characteristic().is_zero());
            }
        }

        #[test]
        fn adjoint_laws(seed in any::<u64>()) {
            let mut r = rng(seed);
            let a = random_horizontal_ldo(&mut r, 1, 1, &Shape::default());
            let b = random_horizontal_ldo(&mut r, 1, 1, &Shape::default());
            prop_assert_eq!(a.adjoint().unwrap().adjoint().unwrap(), a.clone());
            let ab = a.compose(&[b.clone()]).unwrap();
            prop_assert_eq!(ab.adjoint().unwrap(), b.adjoint().unwrap().compose(&[a.adjoint().unwrap()]).unwrap());
            let one = LocalFunction::one(1);
            let chi = |x: &Ldo| x.adjoint().unwrap().apply(&[one.clone()]).unwrap();
            prop_assert_eq!(ab.characteristic(), Ldo::function(chi(&ab), 1));
            prop_assert_eq!(chi(&ab), b.adjoint().unwrap().apply(&[chi(&a)]).unwrap());
            // χ(A∘d/dx) = −d/dx χ(A)
            let ad = a.compose(&[xi(1, 1, 0, 0)]).unwrap();
            prop_assert_eq!(ad.characteristic(), a.characteristic().differentiate_coefficients(0).unwrap().neg());
        }

        #[test]
        fn commutator_with_total_derivative_is_theta_minus_d(seed in any::<u64>(), axis in 0usize..2) {
            let mut r = rng(seed);
            let a = random_ldo(&mut r, 2, 1, &Shape::default());
            let d = xi(2, 1, 0, axis);
            let comm = a.compose(&[d.clone()]).unwrap().sub(&d.compose(&[a.clone()]).unwrap()).unwrap();
            let expected = a.theta(axis, 0).unwrap().with_bound(None).sub(&a.differentiate_coefficients(axis).unwrap()).unwrap();
            prop_assert_eq!(comm, expected);
            prop_assert_eq!(a.total_right(axis, 0).unwrap().with_bound(None), a.compose(&[d.clone()]).unwrap());
            prop_assert_eq!(a.total_left(axis).unwrap(), d.compose(&[a.clone()]).unwrap());
        }

        #[test]
        fn left_derivative_never_annihilates(seed in any::<u64>(), axis in 0usize..2) {
            let mut r = rng(seed);
            let a = random_ldo(&mut r, 2, 2, &Shape::default());
            prop_assume!(!a.is_zero());
            let da = a.total_left(axis).unwrap();
            prop_assert!(!da.is_zero());
            prop_assert_eq!(da.xi_order(), a.xi_order() + 1);
        }

        #[test]
        fn right_derivative_matches_compose_in_both_modes(seed in any::<u64>(), slot in 0usize..3, axis in 0usize..2) {
            let mut r = rng(seed);
            let a = random_ldo(&mut r, 2, 3, &Shape::default());
            let mut inner = vec![Ldo::identity(2); 3];
            inner[slot] = xi(2, 1, 0, axis);
            let expected = a.compose(&inner).unwrap();
            prop_assert_eq!(a.total_right(axis, slot).unwrap().with_bound(None), expected.clone());
            let pol = a.polarize().unwrap().total_right(axis, slot).unwrap().with_bound(None);
            prop_assert_eq!(pol.depolarize().unwrap(), expected);
            let left = a.polarize().unwrap().total_left(axis).unwrap().depolarize().unwrap();
            prop_assert_eq!(left, a.total_left(axis).unwrap());
        }
    }
}
