use std::f64::consts::{FRAC_PI_2, PI};

use dimcontract::fields::FieldSampler;
use dimcontract::semigroup::heat_evolve;
use dimcontract::transport::*;
use dimcontract::*;
use proptest::prelude::*;

fn circle(n: usize) -> WeightedSpace {
    WeightedSpace::flat(build_model_space(SpaceKind::Circle, &[n]).unwrap())
}

fn sphere(n: usize) -> WeightedSpace {
    WeightedSpace::flat(build_model_space(SpaceKind::SphereZonal, &[n]).unwrap())
}

fn von_mises(ws: &WeightedSpace, kappa: f64, centre: f64) -> DensityField {
    DensityField::from_fn(ws, |x| (kappa * ((x[0] - centre).cos() - 1.0)).exp()).unwrap()
}

/// Zonal bump `exp(κ(cos d − 1))` with `d` the colatitude distance to `centre`.
fn cap(ws: &WeightedSpace, kappa: f64, centre: f64) -> DensityField {
    DensityField::from_fn(ws, |x| {
        (kappa * (x[0].cos() * centre.cos() + x[0].sin() * centre.sin() - 1.0)).exp()
    })
    .unwrap()
}

fn smooth_pair(ws: &WeightedSpace) -> (DensityField, DensityField) {
    (
        DensityField::from_fn(ws, |x| 1.0 + 0.5 * x[0].cos() + 0.2 * (2.0 * x[0]).sin()).unwrap(),
        DensityField::from_fn(ws, |x| (1.5 * (x[0] - 1.0).cos()).exp()).unwrap(),
    )
}

fn random_density(ws: &WeightedSpace, seed: u64) -> DensityField {
    let mut s = FieldSampler::new(ws.space(), seed, 4).unwrap();
    DensityField::normalized(ws, s.positive(ws.space(), 0.8)).unwrap()
}

#[test]
fn equal_inputs_are_at_distance_zero() {
    let ws = circle(256);
    let (a, _) = smooth_pair(&ws);
    assert_eq!(w2_circle_exact(&a, &a, &ws).unwrap().w2, 0.0);
    let ws = sphere(128);
    let a = cap(&ws, 3.0, 0.4);
    assert_eq!(w2_monotone_1d(&a, &a, &ws).unwrap().w2, 0.0);
}

#[test]
fn rotated_bump_moves_by_the_angle() {
    let ws = circle(512);
    let r = w2_circle_exact(&von_mises(&ws, 30.0, 1.0), &von_mises(&ws, 30.0, 1.3), &ws).unwrap();
    assert!((r.w2 - 0.3).abs() < 1e-3, "{}", r.w2);
    assert_eq!(r.method, TransportMethod::CircleExact);
    assert!(r.diagnostics.cut.is_some());
}

#[test]
fn sharp_bumps_a_quarter_turn_apart() {
    let ws = circle(512);
    let r = w2_circle_exact(&von_mises(&ws, 200.0, 0.0), &von_mises(&ws, 200.0, FRAC_PI_2), &ws).unwrap();
    assert!((r.w2 - FRAC_PI_2).abs() < 2e-2, "{}", r.w2);
}

#[test]
fn wrong_space_or_grid_is_rejected() {
    let ws = circle(64);
    let other = circle(128);
    let a = DensityField::uniform(&ws);
    let b = DensityField::uniform(&other);
    assert!(matches!(w2_circle_exact(&a, &b, &ws), Err(Error::Input(_))));
    let sp = sphere(64);
    let c = DensityField::uniform(&sp);
    assert!(matches!(w2_circle_exact(&c, &c, &sp), Err(Error::UnsupportedSpace(_))));
    assert!(matches!(w2_monotone_1d(&a, &a, &ws), Err(Error::UnsupportedSpace(_))));
}

#[test]
fn pole_to_pole_matches_lifted_sinkhorn() {
    let ws = sphere(128);
    let north = cap(&ws, 100.0, 0.0);
    let south = cap(&ws, 100.0, PI);
    let mono = w2_monotone_1d(&north, &south, &ws).unwrap().w2;
    assert!(mono < PI && mono > PI - 0.4, "{mono}");
    let sink = w2_sinkhorn(&north, &south, &ws, &SinkhornOptions::default()).unwrap();
    assert!((mono - sink.w2).abs() < 3e-2, "{mono} vs {}", sink.w2);
}

#[test]
fn heat_flow_displacement_is_at_most_square_root() {
    let ws = sphere(256);
    let rho = cap(&ws, 100.0, 0.0);
    let times = [1e-3, 1e-2, 1e-1];
    let w: Vec<f64> = times
        .iter()
        .map(|t| {
            let moved = heat_evolve(&rho, *t, Scheme::Spectral, &ws).unwrap();
            w2_monotone_1d(&rho, &moved, &ws).unwrap().w2
        })
        .collect();
    // on a 2-manifold a point mass spreads to W₂ = √(4t)
    for (t, v) in times.iter().zip(&w) {
        assert!(*v <= 2.0 * t.sqrt() * 1.05, "t={t}: {v}");
    }
    let slope = (w[2] / w[0]).ln() / (times[2] / times[0]).ln();
    assert!(slope >= 0.45, "log-log slope {slope}");
}

#[test]
fn sinkhorn_matches_exact_circle_solver() {
    let ws = circle(128);
    let (a, b) = smooth_pair(&ws);
    let exact = w2_circle_exact(&a, &b, &ws).unwrap().w2;
    let s = w2_sinkhorn(&a, &b, &ws, &SinkhornOptions::default()).unwrap();
    assert!((s.w2 - exact).abs() < 5e-3, "{} vs {exact}", s.w2);
    let d = &s.diagnostics;
    assert_eq!(d.stages.len(), 8);
    assert!(d.marginal_error.unwrap() <= 1e-8);
    assert_eq!(d.final_eps, Some(0.002));
    assert_eq!(d.extrapolation.as_ref().unwrap().eps.len(), 3);
}

#[test]
fn sinkhorn_of_equal_inputs_is_negligible() {
    let ws = circle(64);
    let (a, _) = smooth_pair(&ws);
    let s = w2_sinkhorn(&a, &a, &ws, &SinkhornOptions::default()).unwrap();
    assert!(s.w2.abs() <= 1e-4, "{}", s.w2);
}

#[test]
fn raw_entropic_value_decreases_with_eps() {
    let ws = circle(128);
    let (a, b) = smooth_pair(&ws);
    let s = w2_sinkhorn(&a, &b, &ws, &SinkhornOptions::default()).unwrap();
    for w in s.diagnostics.stages.windows(2) {
        assert!(w[1].raw <= w[0].raw + 1e-9, "{} then {}", w[0].raw, w[1].raw);
    }
}

#[test]
fn sinkhorn_is_symmetric() {
    let ws = circle(64);
    let (a, b) = smooth_pair(&ws);
    let opts = SinkhornOptions {
        eps_schedule: geometric_schedule(0.5, 0.02, 5),
        ..Default::default()
    };
    let ab = w2_sinkhorn(&a, &b, &ws, &opts).unwrap().w2;
    let ba = w2_sinkhorn(&b, &a, &ws, &opts).unwrap().w2;
    assert!((ab - ba).abs() <= 1e-8, "{ab} vs {ba}");
}

#[test]
fn torus_transport_acts_on_the_x_marginal() {
    let (nx, ny) = (48, 16);
    let ws = WeightedSpace::flat(build_model_space(SpaceKind::Torus2, &[nx, ny]).unwrap());
    let a = DensityField::uniform(&ws);
    let b = DensityField::from_fn(&ws, |x| 1.0 + 0.5 * x[0].cos()).unwrap();
    let line = circle(nx);
    let a1 = DensityField::uniform(&line);
    let b1 = DensityField::from_fn(&line, |x| 1.0 + 0.5 * x[0].cos()).unwrap();
    let exact = w2_circle_exact(&a1, &b1, &line).unwrap().w2;
    let opts = SinkhornOptions {
        eps_schedule: geometric_schedule(0.5, 0.02, 5),
        ..Default::default()
    };
    let torus = w2_sinkhorn(&a, &b, &ws, &opts).unwrap().w2;
    assert!((torus - exact).abs() < 5e-3, "{torus} vs {exact}");
    let flat = w2_sinkhorn(&a1, &b1, &line, &opts).unwrap().w2;
    assert!((torus - flat).abs() < 1e-8, "{torus} vs {flat}");
}

#[test]
fn band_reduction_equals_dense_lift() {
    let ws = sphere(128);
    let a = DensityField::from_fn(&ws, |x| (2.0 * x[0].cos()).exp()).unwrap();
    let b = DensityField::from_fn(&ws, |x| 1.0 + 0.5 * (2.0 * x[0]).cos()).unwrap();
    let base = SinkhornOptions {
        sphere_lift: [32, 16],
        eps_schedule: geometric_schedule(0.5, 0.05, 4),
        ..Default::default()
    };
    let dense = SinkhornOptions {
        dense_lift: true,
        ..base.clone()
    };
    let r1 = w2_sinkhorn(&a, &b, &ws, &base).unwrap();
    let r2 = w2_sinkhorn(&a, &b, &ws, &dense).unwrap();
    for (x, y) in r1.diagnostics.stages.iter().zip(&r2.diagnostics.stages) {
        assert!((x.debiased - y.debiased).abs() < 1e-10);
    }
}

#[test]
fn cost_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let ws = circle(32);
    let (a, b) = smooth_pair(&ws);
    let opts = SinkhornOptions {
        eps_schedule: vec![0.5, 0.2, 0.1],
        cache_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let first = w2_sinkhorn(&a, &b, &ws, &opts).unwrap();
    assert!(dir.path().join("cost-circle-32.bin").exists());
    let second = w2_sinkhorn(&a, &b, &ws, &opts).unwrap();
    assert_eq!(first, second);
}

#[test]
fn sinkhorn_rejects_bad_schedules() {
    let ws = circle(32);
    let a = DensityField::uniform(&ws);
    for sched in [vec![], vec![0.1, 0.2], vec![0.1, -0.1]] {
        let opts = SinkhornOptions {
            eps_schedule: sched,
            ..Default::default()
        };
        assert!(matches!(w2_sinkhorn(&a, &a, &ws, &opts), Err(Error::Config(_))));
    }
}

#[test]
fn sinkhorn_reports_non_convergence() {
    let ws = circle(64);
    let (a, b) = smooth_pair(&ws);
    let opts = SinkhornOptions {
        eps_schedule: vec![0.01],
        max_iterations: 5,
        ..Default::default()
    };
    match w2_sinkhorn(&a, &b, &ws, &opts) {
        Err(Error::Convergence { iterations, last_value, .. }) => {
            assert!(iterations >= 5);
            assert!(last_value.is_finite());
        }
        other => panic!("expected convergence error, got {other:?}"),
    }
}

#[test]
fn rigid_rotation_path_has_the_rotation_action() {
    let ws = circle(512);
    let k = 64;
    let phi = 0.3;
    let rho_s: Vec<DensityField> = (0..=k)
        .map(|i| von_mises(&ws, 30.0, 1.0 + phi * i as f64 / k as f64))
        .collect();
    let omega_s: Vec<_> = (0..k)
        .map(|i| {
            let mid = von_mises(&ws, 30.0, 1.0 + phi * (i as f64 + 0.5) / k as f64);
            forms::OneFormField::new(&ws, vec![mid.values().iter().map(|r| phi * r).collect()]).unwrap()
        })
        .collect();
    let path = BBPath::new(&ws, rho_s, omega_s, 5e-2).unwrap();
    let action = bb_action(&path, &ws).unwrap();
    assert!((action - 0.09).abs() < 1e-3, "{action}");
}

#[test]
fn mccann_path_recovers_the_rotation() {
    let ws = circle(512);
    let k = 64;
    let path = build_mccann_path(&von_mises(&ws, 30.0, 1.0), &von_mises(&ws, 30.0, 1.3), &ws, k).unwrap();
    let rmax = path.rho_s.iter().flat_map(|r| r.values().iter().copied()).fold(0.0, f64::max);
    for i in 0..k {
        let (a, b) = (path.rho_s[i].values(), path.rho_s[i + 1].values());
        for j in 0..ws.len() {
            let rho = 0.5 * (a[j] + b[j]);
            if rho > 1e-2 * rmax {
                let v = path.omega_s[i].comps()[0][j] / rho;
                assert!((v - 0.3).abs() < 1e-3, "step {i} node {j}: {v}");
            }
        }
    }
}

#[test]
fn mccann_action_matches_exact_distance() {
    let ws = circle(512);
    let (a, b) = smooth_pair(&ws);
    let w = w2_circle_exact(&a, &b, &ws).unwrap().w2;
    let path = build_mccann_path(&a, &b, &ws, 64).unwrap();
    let action = bb_action(&path, &ws).unwrap();
    assert!(action >= w * w - 1e-4, "{action} < {}", w * w);
    assert!((action - w * w).abs() < 2e-3, "{action} vs {}", w * w);
    assert_eq!(path.rho_s.len(), 65);
    assert_eq!(path.rho_s[0], a);
    assert_eq!(path.rho_s[64], b);
    for r in &path.rho_s {
        DensityField::new(&ws, r.values().to_vec()).unwrap();
    }

    let sp = sphere(256);
    let a = DensityField::from_fn(&sp, |x| (2.0 * x[0].cos()).exp()).unwrap();
    let b = DensityField::from_fn(&sp, |x| 1.0 + 0.5 * (2.0 * x[0]).cos()).unwrap();
    let w = w2_monotone_1d(&a, &b, &sp).unwrap().w2;
    let action = bb_action(&build_mccann_path(&a, &b, &sp, 64).unwrap(), &sp).unwrap();
    assert!((action - w * w).abs() < 2e-3, "{action} vs {}", w * w);
}

#[test]
fn mccann_residual_halves_with_k() {
    let ws = circle(2048);
    let (a, b) = smooth_pair(&ws);
    let r16 = build_mccann_path(&a, &b, &ws, 16).unwrap().continuity_residual;
    let r32 = build_mccann_path(&a, &b, &ws, 32).unwrap().continuity_residual;
    assert!(r16 / r32 >= 2.0, "{r16} -> {r32}");
}

#[test]
fn constant_mccann_path() {
    let ws = circle(128);
    let (a, _) = smooth_pair(&ws);
    let path = build_mccann_path(&a, &a, &ws, 8).unwrap();
    assert_eq!(path.continuity_residual, 0.0);
    assert_eq!(bb_action(&path, &ws).unwrap(), 0.0);
}

#[test]
fn dispatch_covers_every_method() {
    let ws = circle(128);
    let (a, b) = smooth_pair(&ws);
    let opts = SinkhornOptions::default();
    let exact = w2(&a, &b, &ws, TransportMethod::CircleExact, &opts).unwrap().w2;
    let bb = w2(&a, &b, &ws, TransportMethod::BbAction, &opts).unwrap();
    assert_eq!(bb.method, TransportMethod::BbAction);
    assert!((bb.w2 - exact).abs() < 5e-3);
    assert_eq!(exact_method(SpaceKind::Torus2), None);
    assert_eq!("monotone_1d".parse::<TransportMethod>().unwrap(), TransportMethod::Monotone1d);
    let json = serde_json::to_string(&TransportMethod::CircleExact).unwrap();
    assert_eq!(json, "\"circle_exact\"");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn circle_distance_is_a_metric(s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000) {
        let ws = circle(128);
        let (a, b, c) = (random_density(&ws, s1), random_density(&ws, s2), random_density(&ws, s3));
        let d = |x: &DensityField, y: &DensityField| w2_circle_exact(x, y, &ws).unwrap().w2;
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-6);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &b) >= 0.0);
    }

    #[test]
    fn zonal_distance_is_a_metric(s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000) {
        let ws = sphere(128);
        let (a, b, c) = (random_density(&ws, s1), random_density(&ws, s2), random_density(&ws, s3));
        let d = |x: &DensityField, y: &DensityField| w2_monotone_1d(x, y, &ws).unwrap().w2;
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-6);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
    }

    #[test]
    fn path_action_bounds_the_distance(s1 in 0u64..1000, s2 in 0u64..1000) {
        let ws = circle(256);
        let (a, b) = (random_density(&ws, s1), random_density(&ws, s2));
        let w = w2_circle_exact(&a, &b, &ws).unwrap().w2;
        let action = bb_action(&build_mccann_path(&a, &b, &ws, 32).unwrap(), &ws).unwrap();
        prop_assert!(action >= w * w - 1e-4, "{} < {}", action, w * w);
    }
}
