//! Seeded random generation of test data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::forms::{subsets, HorizontalForm};
use crate::jet::{rat, JetPowers, LocalFunction, Monomial, MultiIndex};
use crate::ldo::{Ldo, LdoKey};
use crate::lifting::{eps_tuples, DEndElement, SignConvention};
use crate::opcomplex::OperatorForm;

pub const SEED_ENV: &str = "JETLIFT_SEED";

/// Seed from `JETLIFT_SEED`, or `default` when unset or malformed.
pub fn seed_from_env(default: u64) -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(default)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug)]
pub struct Shape {
    pub max_terms: usize,
    pub x_degree: u32,
    pub jet_order: u32,
    pub u_degree: u32,
    pub xi_order: u32,
    pub eta_letters: u32,
    pub eta_order: u32,
}

impl Default for Shape {
    fn default() -> Self {
        Shape { max_terms: 4, x_degree: 2, jet_order: 3, u_degree: 2, xi_order: 2, eta_letters: 2, eta_order: 2 }
    }
}

impl Shape {
    /// A lighter shape for operator coefficients, so composites stay small.
    pub fn coefficient(&self) -> Shape {
        Shape { max_terms: 2, x_degree: 1, jet_order: self.jet_order.min(2), u_degree: 1, ..self.clone() }
    }
}

fn multi_index<R: Rng>(rng: &mut R, dim: usize, order: u32) -> MultiIndex {
    let mut v = vec![0u32; dim];
    for _ in 0..order {
        v[rng.gen_range(0..dim)] += 1;
    }
    MultiIndex(v)
}

fn coefficient<R: Rng>(rng: &mut R) -> crate::jet::Rational {
    let mut c = 0;
    while c == 0 {
        c = rng.gen_range(-3..=3);
    }
    rat(c)
}

pub fn random_function<R: Rng>(rng: &mut R, dim: usize, shape: &Shape) -> LocalFunction {
    let mut f = LocalFunction::zero(dim);
    let n = rng.gen_range(1..=shape.max_terms.max(1));
    for _ in 0..n {
        let xdeg = rng.gen_range(0..=shape.x_degree);
        let x = multi_index(rng, dim, xdeg);
        let mut u = JetPowers::new();
        for _ in 0..rng.gen_range(0..=shape.u_degree) {
            let order = rng.gen_range(0..=shape.jet_order);
            *u.entry(multi_index(rng, dim, order)).or_insert(0) += 1;
        }
        f.add_term(Monomial { x, u }, coefficient(rng));
    }
    f
}

fn random_eta<R: Rng>(rng: &mut R, dim: usize, shape: &Shape) -> JetPowers {
    let mut e = JetPowers::new();
    for _ in 0..rng.gen_range(0..=shape.eta_letters) {
        let order = rng.gen_range(0..=shape.eta_order);
        *e.entry(multi_index(rng, dim, order)).or_insert(0) += 1;
    }
    e
}

/// A random unpolarized operator with vertical letters.
pub fn random_ldo<R: Rng>(rng: &mut R, dim: usize, arity: usize, shape: &Shape) -> Ldo {
    random_ldo_with(rng, dim, arity, shape, true)
}

/// A random unpolarized operator without vertical letters.
pub fn random_horizontal_ldo<R: Rng>(rng: &mut R, dim: usize, arity: usize, shape: &Shape) -> Ldo {
    random_ldo_with(rng, dim, arity, shape, false)
}

fn random_ldo_with<R: Rng>(rng: &mut R, dim: usize, arity: usize, shape: &Shape, vertical: bool) -> Ldo {
    let mut a = Ldo::zero(dim, arity);
    let n = rng.gen_range(1..=shape.max_terms.max(1));
    let cshape = shape.coefficient();
    for _ in 0..n {
        let mut key = LdoKey::identity(dim, arity);
        for slot in 0..arity {
            let order = rng.gen_range(0..=shape.xi_order);
            key.xi[slot] = multi_index(rng, dim, order);
            if vertical {
                key.eta[slot] = random_eta(rng, dim, shape);
            }
        }
        a.add_term(key, random_function(rng, dim, &cshape));
    }
    a
}

pub fn random_form<R: Rng>(rng: &mut R, dim: usize, degree: usize, shape: &Shape) -> HorizontalForm {
    let comps: Vec<_> = subsets(dim, degree).into_iter().map(|e| (e, random_function(rng, dim, shape))).collect();
    HorizontalForm::from_components(dim, degree, comps).expect("valid subsets")
}

/// A random operator form with every component present.
pub fn random_operator_form<R: Rng>(rng: &mut R, dim: usize, arity: usize, degree: usize, shape: &Shape) -> OperatorForm {
    let comps: Vec<_> = subsets(dim, degree).into_iter().map(|e| (e, random_ldo(rng, dim, arity, shape))).collect();
    OperatorForm::from_components(dim, arity, degree, comps).expect("valid subsets")
}

/// A random element of the given degree with every component present.
pub fn random_dend<R: Rng>(
    rng: &mut R,
    dim: usize,
    arity: usize,
    degree: i64,
    sign: SignConvention,
    shape: &Shape,
) -> DEndElement {
    let mut f = DEndElement::zero(dim, arity, degree, sign);
    if let Some((lo, hi)) = DEndElement::s_range(dim, arity, degree) {
        for s in lo..=hi {
            let d = (dim as i64 - s as i64 - degree) as usize;
            for eps in eps_tuples(dim, arity, s) {
                let form = random_operator_form(rng, dim, arity, d, shape);
                f.insert(eps, form).expect("valid component");
            }
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let s = Shape::default();
        let a = random_ldo(&mut rng(7), 2, 2, &s);
        let b = random_ldo(&mut rng(7), 2, 2, &s);
        assert_eq!(a, b);
        assert!(random_function(&mut rng(3), 1, &s).jet_order() <= 3);
    }
}
