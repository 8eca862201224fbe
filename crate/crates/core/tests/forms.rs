use dimcontract::fields::FieldSampler;
use dimcontract::forms::*;
use dimcontract::harness::identities::{run_identity_suite, IdentityOptions};
use dimcontract::*;
use proptest::prelude::*;

fn circle(n: usize) -> WeightedSpace {
    WeightedSpace::flat(build_model_space(SpaceKind::Circle, &[n]).unwrap())
}

fn small_suite() -> IdentityOptions {
    IdentityOptions {
        resolution: 256,
        triples: 3,
        ..IdentityOptions::default()
    }
}

#[test]
fn identity_suite_is_seeded() {
    let a = run_identity_suite(&small_suite(), 9).unwrap();
    let b = run_identity_suite(&small_suite(), 9).unwrap();
    assert_eq!(a, b);
    assert!(a.pass, "{:?}", a.checks);
    let c = run_identity_suite(&small_suite(), 10).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn identity_suite_rejects_odd_resolution() {
    let opts = IdentityOptions {
        resolution: 255,
        ..small_suite()
    };
    assert!(matches!(run_identity_suite(&opts, 1), Err(Error::Config(_))));
}

#[test]
fn exact_forms_commute_with_the_flows() {
    let ws = circle(256);
    let f = ScalarField::from_fn(&ws, |x| x[0].sin() + 0.2 * (3.0 * x[0]).cos()).unwrap();
    let omega = OneFormField::exact(&ws, &f).unwrap();
    let res = check_commutation(&omega, 0.2, &ws).unwrap();
    assert!(res < 1e-3, "{res}");
    assert_eq!(check_commutation(&omega, 0.0, &ws).unwrap(), 0.0);
}

#[test]
fn hodge_flow_damps_the_norm() {
    let ws = circle(128);
    let omega = OneFormField::from_fn(&ws, |x| vec![x[0].cos() + 0.5 * (2.0 * x[0]).sin()]).unwrap();
    let norm = |w: &OneFormField| ws.measure().integrate(&w.norm_sq());
    let mut prev = norm(&omega);
    for t in [0.1, 0.2, 0.4] {
        let e = norm(&hodge_evolve(&omega, t, &ws).unwrap());
        assert!(e < prev);
        prev = e;
    }
    assert!(hodge_evolve(&omega, -0.1, &ws).is_err());
}

#[test]
fn coercive_estimate_tightens_under_refinement() {
    let mut mins = Vec::new();
    for n in [64, 128, 256] {
        let ws = circle(n);
        let cd = cd_best_R(ws.space(), ws.weight(), Dimension::Finite(1.0)).unwrap();
        let omega = OneFormField::from_fn(&ws, |x| vec![x[0].cos()]).unwrap();
        let g = ScalarField::from_fn(&ws, |x| 1.0 + 0.5 * x[0].sin()).unwrap();
        let u: Vec<f64> = (0..32).map(|i| 0.5 * i as f64 / 31.0).collect();
        let est = check_coercive_estimate(&omega, &g, 0.5, &u, &cd, &ws).unwrap();
        assert!(est.deficit.min >= -1e-3);
        mins.push(est.deficit.min);
    }
    // the discretization error of the floor shrinks at second order
    let ratio = (mins[0] - mins[1]).abs() / (mins[1] - mins[2]).abs();
    assert!(ratio >= 3.0, "{mins:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn refined_blw_holds_for_random_forms(seed in 0u64..10_000, b in -2.0f64..2.0) {
        let ws = circle(256);
        let mut r = FieldSampler::new(ws.space(), seed, 4).unwrap();
        let eta = OneFormField::random(&ws, &mut r);
        let alpha = OneFormField::random(&ws, &mut r);
        let res = check_refined_blw(&eta, &alpha, b, &ws).unwrap();
        prop_assert!(res.sup_abs() <= 1e-2, "{}", res.sup_abs());
    }
}
