use std::collections::HashMap;

use dimcontract::expr::Expr;
use dimcontract::geometry::ricci_operator_field;
use dimcontract::*;
use proptest::prelude::*;

fn weight(space: &ModelSpace, form: &str, a: f64) -> WeightField {
    let p: HashMap<String, f64> = [("a".to_string(), a)].into_iter().collect();
    let e = Expr::parse(form, space.kind().variables(), &p).unwrap();
    WeightField::from_expr(space, &e, form).unwrap()
}

/// `min_θ (−a cos θ − a² sin²θ/(m − 1))` in closed form.
fn circle_oracle(a: f64, m: f64) -> f64 {
    let c = (m - 1.0) / (2.0 * a.abs());
    if c <= 1.0 {
        -(m - 1.0) / 4.0 - a * a / (m - 1.0)
    } else {
        -a.abs()
    }
}

#[test]
fn unweighted_spaces_have_their_riemannian_curvature() {
    for (kind, res, want) in [
        (SpaceKind::Circle, vec![64], 0.0),
        (SpaceKind::Torus2, vec![32, 32], 0.0),
        (SpaceKind::SphereZonal, vec![256], 1.0),
    ] {
        let s = build_model_space(kind, &res).unwrap();
        let w = WeightField::zero(&s);
        let n = s.dim() as f64;
        for m in [Dimension::Finite(n), Dimension::Finite(n + 1.5), Dimension::Infinite] {
            let cd = cd_best_R(&s, &w, m).unwrap();
            assert!((cd.r - want).abs() < 1e-6, "{kind:?} {m:?}: {}", cd.r);
        }
    }
}

#[test]
fn sphere_ricci_is_the_metric() {
    let s = build_model_space(SpaceKind::SphereZonal, &[128]).unwrap();
    for t in ricci_operator_field(&s, &WeightField::zero(&s)) {
        assert!((t.xx - 1.0).abs() < 1e-12 && t.xy.abs() < 1e-12 && (t.yy - 1.0).abs() < 1e-12);
    }
}

#[test]
fn weighted_circle_matches_closed_form() {
    let s = build_model_space(SpaceKind::Circle, &[512]).unwrap();
    let w = weight(&s, "a*cos(theta)", 0.1);
    assert_eq!(cd_best_R(&s, &w, Dimension::Finite(2.0)).unwrap().r, -0.1);
    assert_eq!(cd_best_R(&s, &w, Dimension::Infinite).unwrap().r, -0.1);
    assert!(matches!(cd_best_R(&s, &w, Dimension::Finite(1.0)), Err(Error::Domain(_))));
    assert!(cd_best_R(&s, &w, Dimension::Finite(0.5)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn circle_best_constant(a in 0.05f64..2.0, m in 1.2f64..6.0) {
        let s = build_model_space(SpaceKind::Circle, &[1024]).unwrap();
        let w = weight(&s, "a*cos(theta)", a);
        let cd = cd_best_R(&s, &w, Dimension::Finite(m)).unwrap();
        let want = circle_oracle(a, m);
        prop_assert!(cd.r >= want - 1e-12);
        prop_assert!(cd.r - want <= 1e-4, "{} vs {want}", cd.r);
        cd.check_feasible(&s, &w).unwrap();
        let over = CDParams { r: cd.r + 1e-6, ..cd };
        prop_assert!(over.check_feasible(&s, &w).is_err());
    }

    #[test]
    fn best_constant_grows_with_dimension(a in 0.05f64..1.0, m in 1.5f64..4.0) {
        let s = build_model_space(SpaceKind::Torus2, &[32, 32]).unwrap();
        let w = weight(&s, "a*cos(x)*sin(y) + 0.3*a*cos(2*y)", a);
        let lo = cd_best_R(&s, &w, Dimension::Finite(2.0 + m)).unwrap().r;
        let hi = cd_best_R(&s, &w, Dimension::Finite(4.0 + m)).unwrap().r;
        let inf = cd_best_R(&s, &w, Dimension::Infinite).unwrap().r;
        prop_assert!(lo <= hi && hi <= inf);
    }

    #[test]
    fn measure_is_a_probability(a in -1.0f64..1.0) {
        for (kind, res, form) in [
            (SpaceKind::Circle, vec![128], "a*sin(theta)"),
            (SpaceKind::Torus2, vec![16, 16], "a*cos(x + y)"),
            (SpaceKind::SphereZonal, vec![128], "a*cos(theta)"),
        ] {
            let s = build_model_space(kind, &res).unwrap();
            let w = weight(&s, form, a);
            let ws = WeightedSpace::new(s, w).unwrap();
            let one = vec![1.0; ws.len()];
            prop_assert!((ws.measure().integrate(&one) - 1.0).abs() < 1e-12);
        }
    }
}
