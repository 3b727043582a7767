//! Invariants checked on seeded random data.

use proptest::prelude::*;
use rand::Rng;

use jetlift::forms::{euler, HorizontalForm};
use jetlift::json::{from_json, to_json, Document};
use jetlift::ldo::Ldo;
use jetlift::lifting::{lift, permutations, DEndElement, SignConvention};
use jetlift::opcomplex::{reduce_top, solve_d};
use jetlift::random::{
    random_dend, random_form, random_function, random_ldo, random_operator_form, rng, Shape,
};
use jetlift::shlie::{build_tower, kdv_bracket};
use jetlift::syntax::{parse_form, parse_ldo, parse_operator_form, Context};

fn small() -> Shape {
    Shape { max_terms: 2, x_degree: 1, jet_order: 1, u_degree: 1, xi_order: 1, eta_letters: 1, eta_order: 1 }
}

fn sign_of(b: bool) -> SignConvention {
    if b {
        SignConvention::Regraded
    } else {
        SignConvention::Classical
    }
}

/// Forms with total codegree `s` over `arity` slots.
fn forms_with_codegree(r: &mut impl Rng, dim: usize, arity: usize, s: usize) -> Vec<HorizontalForm> {
    let mut degrees = vec![dim; arity];
    let mut left = s;
    while left > 0 {
        let j = r.gen_range(0..arity);
        if degrees[j] > 0 {
            degrees[j] -= 1;
            left -= 1;
        }
    }
    degrees.into_iter().map(|d| random_form(r, dim, d, &small())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn characteristic_is_idempotent_and_kills_total_derivatives(seed in any::<u64>(), dim in 1usize..=2, arity in 1usize..=2) {
        let a = random_ldo(&mut rng(seed), dim, arity, &Shape::default());
        let chi = a.characteristic();
        prop_assert_eq!(chi.characteristic(), chi);
        for i in 0..dim {
            prop_assert!(a.total_left(i).unwrap().characteristic().is_zero());
        }
    }

    #[test]
    fn composition_matches_nested_application(seed in any::<u64>(), dim in 1usize..=2) {
        let mut r = rng(seed);
        let outer = random_ldo(&mut r, dim, 2, &small());
        let inner = vec![random_ldo(&mut r, dim, 1, &small()), random_ldo(&mut r, dim, 2, &small())];
        let args: Vec<_> = (0..3).map(|_| random_function(&mut r, dim, &small())).collect();
        let nested = outer.apply(&[inner[0].apply(&args[..1]).unwrap(), inner[1].apply(&args[1..]).unwrap()]).unwrap();
        prop_assert_eq!(outer.compose(&inner).unwrap().apply(&args).unwrap(), nested);
    }

    #[test]
    fn polarization_round_trips(seed in any::<u64>(), dim in 1usize..=2, arity in 1usize..=3) {
        let a = random_ldo(&mut rng(seed), dim, arity, &Shape::default());
        prop_assert_eq!(a.to_polarized().to_unpolarized(), a);
    }

    #[test]
    fn printing_and_parsing_are_inverse(seed in any::<u64>(), dim in 1usize..=2, arity in 1usize..=3) {
        let mut r = rng(seed);
        let a = random_ldo(&mut r, dim, arity, &Shape::default());
        let ctx = Context::new(dim, arity);
        prop_assert_eq!(parse_ldo(&a.to_string(), &ctx).unwrap(), a.clone());
        let polar = Context { polarized: true, ..ctx };
        prop_assert_eq!(parse_ldo(&a.to_polarized().to_string(), &polar).unwrap(), a.to_polarized());
        let degree = r.gen_range(0..=dim);
        let w = random_form(&mut r, dim, degree, &Shape::default());
        prop_assert_eq!(parse_form(&w.to_string(), dim, Some(degree)).unwrap(), w);
        let f = random_operator_form(&mut r, dim, arity, degree, &small());
        prop_assert_eq!(parse_operator_form(&f.to_string(), &ctx, Some(degree)).unwrap(), f);
    }

    #[test]
    fn json_round_trips(seed in any::<u64>(), dim in 1usize..=2, arity in 1usize..=2, k in -1i64..=1, regraded: bool) {
        let mut r = rng(seed);
        let docs = vec![
            Document::Function(random_function(&mut r, dim, &Shape::default())),
            Document::Ldo(random_ldo(&mut r, dim, arity, &Shape::default())),
            Document::Form(random_form(&mut r, dim, dim, &Shape::default())),
            Document::OperatorForm(random_operator_form(&mut r, dim, arity, dim, &small())),
            Document::DEnd(random_dend(&mut r, dim, arity, k, sign_of(regraded), &small())),
        ];
        for d in docs {
            let text = to_json(&d);
            prop_assert_eq!(to_json(&from_json(&text).unwrap()), text.clone());
            prop_assert_eq!(from_json(&text).unwrap(), d);
        }
    }

    #[test]
    fn euler_annihilates_total_divergences(seed in any::<u64>(), dim in 1usize..=2) {
        let w = random_form(&mut rng(seed), dim, dim - 1, &Shape::default());
        prop_assert!(euler(&w.dh()).unwrap().is_zero());
    }

    #[test]
    fn top_forms_split_into_exact_and_characteristic_parts(seed in any::<u64>(), dim in 1usize..=2, arity in 1usize..=2) {
        let a = random_operator_form(&mut rng(seed), dim, arity, dim, &small());
        let red = reduce_top(&a).unwrap();
        prop_assert!(red.tilde.d_op().add(&red.chi).unwrap().agrees_with(&a));
        prop_assert!(red.chi.top_component().unwrap().is_characteristic_form());
    }

    #[test]
    fn d_op_is_inverted_below_top_degree(seed in any::<u64>(), arity in 1usize..=2) {
        let x = random_operator_form(&mut rng(seed), 2, arity, 0, &small());
        let y = x.d_op();
        prop_assert!(y.d_op().is_zero());
        prop_assert!(solve_d(&y).unwrap().d_op().agrees_with(&y));
    }

    #[test]
    fn delta_squares_to_zero(seed in any::<u64>(), dim in 1usize..=2, arity in 1usize..=2, k in -1i64..=2, regraded: bool) {
        let f = random_dend(&mut rng(seed), dim, arity, k, sign_of(regraded), &small());
        prop_assert!(f.delta().unwrap().delta().unwrap().is_zero());
    }

    #[test]
    fn delta_agrees_with_pointwise_evaluation(seed in any::<u64>(), dim in 1usize..=2, arity in 1usize..=2, k in -1i64..=1, regraded: bool) {
        let mut r = rng(seed);
        let f = random_dend(&mut r, dim, arity, k, sign_of(regraded), &small());
        let df = f.delta().unwrap();
        if let Some((lo, hi)) = DEndElement::s_range(dim, arity, k - 1) {
            for s in lo..=hi {
                let forms = forms_with_codegree(&mut r, dim, arity, s);
                prop_assert_eq!(df.eval(&forms).unwrap(), f.delta_pointwise(&forms).unwrap());
            }
        }
    }

    #[test]
    fn symmetric_action_is_a_right_action_commuting_with_delta(seed in any::<u64>(), k in -1i64..=1) {
        let f = random_dend(&mut rng(seed), 1, 3, k, SignConvention::Regraded, &small());
        let perms = permutations(3);
        let (s, t) = (&perms[seed as usize % 6], &perms[(seed / 6) as usize % 6]);
        // ((f·σ)·τ)(x) = f(x_{τ(σ(1))}, ..), so (f·σ)·τ = f·(τ∘σ)
        let ts: Vec<usize> = (0..3).map(|i| t[s[i]]).collect();
        prop_assert!(f.permute(s).unwrap().permute(t).unwrap().agrees_with(&f.permute(&ts).unwrap()));
        prop_assert!(f.delta().unwrap().permute(s).unwrap().agrees_with(&f.permute(s).unwrap().delta().unwrap()));
        let alt = f.alternate().unwrap();
        prop_assert!(alt.permute(s).unwrap().agrees_with(&alt));
    }

    #[test]
    fn lifts_are_cycles(seed in any::<u64>(), dim in 1usize..=2, arity in 1usize..=2) {
        let b = random_ldo(&mut rng(seed), dim, arity, &small());
        let a: Ldo = b.sub(&b.characteristic().to_unpolarized()).unwrap();
        for sign in [SignConvention::Regraded, SignConvention::Classical] {
            prop_assert!(lift(&a, sign).unwrap().delta().unwrap().is_zero());
        }
    }
}

#[test]
fn tower_brackets_are_skew() {
    let tower = build_tower(&kdv_bracket(4), 3).unwrap();
    for k in 2..=3 {
        let l = tower.bracket(k).unwrap();
        for sigma in permutations(k) {
            assert!(l.permute(&sigma).unwrap().agrees_with(l), "l_{k} is not skew under {sigma:?}");
        }
    }
}
