//! The differential polynomial ring of local functions.
//!
//! A local function is a polynomial with rational coefficients in the base
//! coordinates `x^1..x^N` and finitely many jet coordinates `u_J`.  Axes are
//! 0-based throughout the Rust API; the text syntax uses 1-based indices.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn rat_frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Binomial coefficient as a rational.
pub fn binomial(n: u32, k: u32) -> Rational {
    if k > n {
        return Rational::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    Rational::from_integer(acc)
}

/// A multi-index `(j_1, .., j_N)` counting derivatives per base direction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut v = vec![0; dim];
        v[axis] = 1;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// `iJ`: one more derivative along `axis`.
    pub fn raised(&self, axis: usize) -> Self {
        let mut v = self.0.clone();
        v[axis] += 1;
        MultiIndex(v)
    }

    /// `J/i`: defined only when `j_i >= 1`.
    pub fn lowered(&self, axis: usize) -> Option<Self> {
        if self.0[axis] == 0 {
            return None;
        }
        let mut v = self.0.clone();
        v[axis] -= 1;
        Some(MultiIndex(v))
    }

    pub fn add(&self, other: &Self) -> Self {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self - other` if `other <= self` componentwise.
    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        let mut v = Vec::with_capacity(self.0.len());
        for (a, b) in self.0.iter().zip(&other.0) {
            if b > a {
                return None;
            }
            v.push(a - b);
        }
        Some(MultiIndex(v))
    }

    /// All `K <= self` componentwise.
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let mut out = vec![Vec::new()];
        for &e in &self.0 {
            let mut next = Vec::with_capacity(out.len() * (e as usize + 1));
            for prefix in &out {
                for k in 0..=e {
                    let mut p = prefix.clone();
                    p.push(k);
                    next.push(p);
                }
            }
            out = next;
        }
        out.into_iter().map(MultiIndex).collect()
    }

    /// Product of per-axis binomials `C(self, k)`.
    pub fn binomial(&self, k: &MultiIndex) -> Rational {
        self.0
            .iter()
            .zip(&k.0)
            .fold(Rational::one(), |acc, (&n, &m)| acc * binomial(n, m))
    }

    /// Lists the axis sequence of `self`, e.g. `(2,1)` becomes `[0,0,1]`.
    pub fn axis_sequence(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (axis, &e) in self.0.iter().enumerate() {
            for _ in 0..e {
                out.push(axis);
            }
        }
        out
    }

    /// All multi-indices of dimension `dim` and order exactly `order`.
    pub fn all_of_order(dim: usize, order: u32) -> Vec<MultiIndex> {
        fn rec(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if prefix.len() + 1 == dim {
                prefix.push(left);
                out.push(MultiIndex(prefix.clone()));
                prefix.pop();
                return;
            }
            for e in 0..=left {
                prefix.push(e);
                rec(dim, left - e, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if dim == 0 {
            if order == 0 {
                out.push(MultiIndex(Vec::new()));
            }
            return out;
        }
        rec(dim, order, &mut Vec::new(), &mut out);
        out
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Power product of jet coordinates `Π u_J^{m_J}` (also reused for `η` letters).
pub type JetPowers = BTreeMap<MultiIndex, u32>;

/// Highest `|J|` present, or `-1` when empty.
pub fn formal_degree(p: &JetPowers) -> i64 {
    p.keys().map(|j| j.order() as i64).max().unwrap_or(-1)
}

pub(crate) fn powers_mul(a: &JetPowers, b: &JetPowers) -> JetPowers {
    let mut out = a.clone();
    for (j, m) in b {
        *out.entry(j.clone()).or_insert(0) += m;
    }
    out
}

pub(crate) fn powers_add_one(a: &JetPowers, j: &MultiIndex) -> JetPowers {
    let mut out = a.clone();
    *out.entry(j.clone()).or_insert(0) += 1;
    out
}

/// Removes one factor `j`; returns the multiplicity it had.
pub(crate) fn powers_remove_one(a: &JetPowers, j: &MultiIndex) -> Option<(u32, JetPowers)> {
    let m = *a.get(j)?;
    let mut out = a.clone();
    if m == 1 {
        out.remove(j);
    } else {
        out.insert(j.clone(), m - 1);
    }
    Some((m, out))
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub x: MultiIndex,
    pub u: JetPowers,
}

impl Monomial {
    pub fn one(dim: usize) -> Self {
        Monomial { x: MultiIndex::zero(dim), u: JetPowers::new() }
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial { x: self.x.add(&other.x), u: powers_mul(&self.u, &other.u) }
    }
}

/// An element of the ring of local functions with exact rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalFunction {
    dim: usize,
    terms: BTreeMap<Monomial, Rational>,
}

impl LocalFunction {
    pub fn zero(dim: usize) -> Self {
        LocalFunction { dim, terms: BTreeMap::new() }
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, Rational::one())
    }

    pub fn constant(dim: usize, c: Rational) -> Self {
        Self::monomial(dim, c, Monomial::one(dim))
    }

    pub fn monomial(dim: usize, c: Rational, m: Monomial) -> Self {
        let mut f = Self::zero(dim);
        if !c.is_zero() {
            f.terms.insert(m, c);
        }
        f
    }

    /// The base coordinate `x^axis`.
    pub fn x(dim: usize, axis: usize) -> Self {
        Self::monomial(dim, Rational::one(), Monomial { x: MultiIndex::unit(dim, axis), u: JetPowers::new() })
    }

    /// The jet coordinate `u_J`.
    pub fn u(j: MultiIndex) -> Self {
        let dim = j.dim();
        let mut u = JetPowers::new();
        u.insert(j, 1);
        Self::monomial(dim, Rational::one(), Monomial { x: MultiIndex::zero(dim), u })
    }

    /// Builds a function from raw terms, dropping zero coefficients and merging duplicates.
    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (Monomial, Rational)>) -> Result<Self> {
        let mut f = Self::zero(dim);
        for (m, c) in terms {
            if m.x.dim() != dim || m.u.keys().any(|j| j.dim() != dim) {
                return Err(Error::Dimension { expected: dim, found: m.x.dim() });
            }
            f.add_term(m, c);
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
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

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    /// Returns the constant value if the function has no `x` or `u` dependence.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                (m.x.is_zero() && m.u.is_empty()).then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    /// Largest `|J|` of any jet coordinate present, `-1` if `u`-free.
    pub fn jet_order(&self) -> i64 {
        self.terms.keys().map(|m| formal_degree(&m.u)).max().unwrap_or(-1)
    }

    pub fn depends_on_u(&self) -> bool {
        self.terms.keys().any(|m| !m.u.is_empty())
    }

    pub(crate) fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Dimension { expected: self.dim, found: other.dim });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(self + other)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(self - other)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(self * other)
    }

    pub fn add_assign_ref(&mut self, other: &Self) {
        debug_assert_eq!(self.dim, other.dim);
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn add_scaled(&mut self, other: &Self, s: &Rational) {
        if s.is_zero() {
            return;
        }
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c * s);
        }
    }

    pub fn scale(&self, s: &Rational) -> Self {
        if s.is_zero() {
            return Self::zero(self.dim);
        }
        LocalFunction { dim: self.dim, terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect() }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one(self.dim);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim {
            return Err(Error::Axis { axis, dim: self.dim });
        }
        Ok(())
    }

    /// `∂f/∂x^axis`.
    pub fn partial_x(&self, axis: usize) -> Result<Self> {
        self.check_axis(axis)?;
        let mut out = Self::zero(self.dim);
        for (m, c) in &self.terms {
            let e = m.x.0[axis];
            if e == 0 {
                continue;
            }
            let mut mm = m.clone();
            mm.x.0[axis] -= 1;
            out.add_term(mm, c * rat(e as i64));
        }
        Ok(out)
    }

    /// `∂f/∂u_J`.
    pub fn partial_u(&self, j: &MultiIndex) -> Result<Self> {
        if j.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, found: j.dim() });
        }
        Ok(self.partial_u_unchecked(j))
    }

    pub(crate) fn partial_u_unchecked(&self, j: &MultiIndex) -> Self {
        let mut out = Self::zero(self.dim);
        for (m, c) in &self.terms {
            if let Some((e, rest)) = powers_remove_one(&m.u, j) {
                out.add_term(Monomial { x: m.x.clone(), u: rest }, c * rat(e as i64));
            }
        }
        out
    }

    /// Total derivative `d/dx^i = ∂/∂x^i + Σ_J u_{iJ} ∂/∂u_J`.
    pub fn total_derivative(&self, axis: usize) -> Result<Self> {
        self.check_axis(axis)?;
        Ok(self.total_derivative_unchecked(axis))
    }

    pub(crate) fn total_derivative_unchecked(&self, axis: usize) -> Self {
        let mut out = Self::zero(self.dim);
        for (m, c) in &self.terms {
            let e = m.x.0[axis];
            if e > 0 {
                let mut mm = m.clone();
                mm.x.0[axis] -= 1;
                out.add_term(mm, c * rat(e as i64));
            }
            for (j, &p) in &m.u {
                let (_, rest) = powers_remove_one(&m.u, j).unwrap();
                let u = powers_add_one(&rest, &j.raised(axis));
                out.add_term(Monomial { x: m.x.clone(), u }, c * rat(p as i64));
            }
        }
        out
    }

    /// `(d/dx)^I f`.
    pub fn total_derivative_multi(&self, index: &MultiIndex) -> Self {
        let mut f = self.clone();
        for axis in index.axis_sequence() {
            if f.is_zero() {
                break;
            }
            f = f.total_derivative_unchecked(axis);
        }
        f
    }

    /// Polynomial antiderivative in `u_J` (no integration constant).
    pub fn integrate_u(&self, j: &MultiIndex) -> Self {
        let mut out = Self::zero(self.dim);
        for (m, c) in &self.terms {
            let e = m.u.get(j).copied().unwrap_or(0);
            let u = powers_add_one(&m.u, j);
            out.add_term(Monomial { x: m.x.clone(), u }, c / rat(e as i64 + 1));
        }
        out
    }

    /// Polynomial antiderivative in `x^axis` (no integration constant).
    pub fn integrate_x(&self, axis: usize) -> Self {
        let mut out = Self::zero(self.dim);
        for (m, c) in &self.terms {
            let mut mm = m.clone();
            mm.x.0[axis] += 1;
            let e = mm.x.0[axis];
            out.add_term(mm, c / rat(e as i64));
        }
        out
    }

    /// Splits `f` by the power of `u_J`: returns `power -> coefficient`.
    pub fn split_by_power(&self, j: &MultiIndex) -> BTreeMap<u32, LocalFunction> {
        let mut out: BTreeMap<u32, LocalFunction> = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut mm = m.clone();
            let e = mm.u.remove(j).unwrap_or(0);
            out.entry(e).or_insert_with(|| Self::zero(self.dim)).add_term(mm, c.clone());
        }
        out
    }

    /// Jet coordinates occurring in `f`.
    pub fn jet_variables(&self) -> Vec<MultiIndex> {
        let mut v: Vec<MultiIndex> = self.terms.keys().flat_map(|m| m.u.keys().cloned()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Largest absolute numerator/denominator size, used to keep random data bounded.
    pub fn max_coeff_bits(&self) -> u64 {
        self.terms
            .values()
            .map(|c| c.numer().abs().bits().max(c.denom().bits()))
            .max()
            .unwrap_or(0)
    }
}

impl<'a> Add<&'a LocalFunction> for &'a LocalFunction {
    type Output = LocalFunction;
    fn add(self, rhs: &'a LocalFunction) -> LocalFunction {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let mut out = self.clone();
        out.add_assign_ref(rhs);
        out
    }
}

impl<'a> Sub<&'a LocalFunction> for &'a LocalFunction {
    type Output = LocalFunction;
    fn sub(self, rhs: &'a LocalFunction) -> LocalFunction {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl<'a> Mul<&'a LocalFunction> for &'a LocalFunction {
    type Output = LocalFunction;
    fn mul(self, rhs: &'a LocalFunction) -> LocalFunction {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let mut out = LocalFunction::zero(self.dim);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

impl Neg for &LocalFunction {
    type Output = LocalFunction;
    fn neg(self) -> LocalFunction {
        self.scale(&-Rational::one())
    }
}

impl Add for LocalFunction {
    type Output = LocalFunction;
    fn add(mut self, rhs: LocalFunction) -> LocalFunction {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl Sub for LocalFunction {
    type Output = LocalFunction;
    fn sub(self, rhs: LocalFunction) -> LocalFunction {
        &self - &rhs
    }
}

impl Mul for LocalFunction {
    type Output = LocalFunction;
    fn mul(self, rhs: LocalFunction) -> LocalFunction {
        &self * &rhs
    }
}

impl Neg for LocalFunction {
    type Output = LocalFunction;
    fn neg(self) -> LocalFunction {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u1(j: &[u32]) -> LocalFunction {
        LocalFunction::u(MultiIndex(j.to_vec()))
    }

    #[test]
    fn cancellation_and_absorption() {
        let x = LocalFunction::x(1, 0);
        let u = u1(&[0]);
        assert_eq!(&(&u + &x) + &(-&u), x);
        let z = LocalFunction::zero(1);
        assert!((&z * &u1(&[3]).pow(2)).is_zero());
        assert_eq!(&u * &u1(&[1]), &u1(&[1]) * &u);
    }

    #[test]
    fn partial_u_power_rule() {
        let f = &u1(&[0]).pow(2) * &u1(&[1]);
        assert_eq!(f.partial_u(&MultiIndex(vec![0])).unwrap(), (&u1(&[0]) * &u1(&[1])).scale(&rat(2)));
        assert_eq!(f.partial_u(&MultiIndex(vec![1])).unwrap(), u1(&[0]).pow(2));
        assert!(f.partial_u(&MultiIndex(vec![2])).unwrap().is_zero());
    }

    #[test]
    fn total_derivative_examples() {
        assert_eq!(u1(&[0]).total_derivative(0).unwrap(), u1(&[1]));
        // d/dx (x u_1^2) = u_1^2 + 2 x u_1 u_2, expanded term by term
        let x = LocalFunction::x(1, 0);
        let f = &x * &u1(&[1]).pow(2);
        let expected = &u1(&[1]).pow(2) + &(&(&x * &u1(&[1])) * &u1(&[2])).scale(&rat(2));
        assert_eq!(f.total_derivative(0).unwrap(), expected);
        assert_eq!(u1(&[0, 1]).total_derivative(0).unwrap(), u1(&[1, 1]));
    }

    #[test]
    fn axis_and_dimension_errors() {
        let u = u1(&[0]);
        assert!(matches!(u.total_derivative(1), Err(Error::Axis { .. })));
        assert!(matches!(u.partial_x(3), Err(Error::Axis { .. })));
        assert!(matches!(u.try_add(&u1(&[0, 0])), Err(Error::Dimension { .. })));
        assert!(matches!(u.partial_u(&MultiIndex(vec![0, 0])), Err(Error::Dimension { .. })));
    }

    #[test]
    fn multi_index_helpers() {
        let j = MultiIndex(vec![2, 1]);
        assert_eq!(j.order(), 3);
        assert_eq!(j.raised(1), MultiIndex(vec![2, 2]));
        assert_eq!(j.lowered(1), Some(MultiIndex(vec![2, 0])));
        assert_eq!(MultiIndex(vec![0, 1]).lowered(0), None);
        assert_eq!(j.sub_indices().len(), 6);
        assert_eq!(MultiIndex::all_of_order(2, 2).len(), 3);
        assert_eq!(binomial(5, 2), rat(10));
    }

    #[test]
    fn integration_inverts_differentiation() {
        let f = &(&LocalFunction::x(1, 0) * &u1(&[1])) + &u1(&[2]).pow(2);
        let j = MultiIndex(vec![1]);
        assert_eq!(f.integrate_u(&j).partial_u(&j).unwrap(), f);
        assert_eq!(f.integrate_x(0).partial_x(0).unwrap(), f);
    }
}
