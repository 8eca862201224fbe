//! Seeded sweep over the pointwise identities and inequalities of the form
//! calculus, with convergence orders from a grid twice as coarse.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldSampler;
use crate::forms::{
    check_coercive_estimate, check_commutation, check_form_identities, check_refined_blw,
    observed_order, OneFormField, ResidualRecord,
};
use crate::geometry::{build_model_space, cd_best_R, CDParams, Dimension, SpaceKind, WeightField};
use crate::harness::config::FormSpec;
use crate::harness::linspace;
use crate::ops::WeightedSpace;
use crate::semigroup::{check_gamma2_cd, ScalarField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentityOptions {
    /// Fine circle resolution; the coarse grid has half as many nodes.
    pub resolution: usize,
    pub psi: FormSpec,
    /// Random `(η, α, b)` triples.
    pub triples: usize,
    /// `b` is drawn uniformly from `[−b_max, b_max]`.
    pub b_max: f64,
    pub max_freq: usize,
    pub commutation_t: f64,
    pub sphere_resolution: usize,
    /// `(R, m)` for the `Γ₂` inequality on the sphere.
    pub sphere_cd: [f64; 2],
    pub residual_bound: f64,
    pub order: f64,
    pub order_band: f64,
    /// Coercive estimate on the flat circle.
    pub coercive_t: f64,
    pub coercive_u_points: usize,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        IdentityOptions {
            resolution: 512,
            psi: FormSpec::new("0.1*cos(theta)"),
            triples: 20,
            b_max: 2.0,
            max_freq: 4,
            commutation_t: 0.1,
            sphere_resolution: 512,
            sphere_cd: [1.0, 2.0],
            residual_bound: 1e-3,
            order: 2.0,
            order_band: 0.3,
            coercive_t: 0.5,
            coercive_u_points: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    /// Largest fine-grid residual, or the negative part of the worst slack.
    pub max_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub min_order: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_order: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitySuite {
    pub seed: u64,
    pub checks: Vec<IdentityCheck>,
    pub records: Vec<ResidualRecord>,
    pub pass: bool,
}

fn circle(n: usize, psi: &FormSpec) -> Result<WeightedSpace> {
    let s = build_model_space(SpaceKind::Circle, &[n])?;
    let e = psi.parse(SpaceKind::Circle)?;
    let w = if e.is_zero() {
        WeightField::zero(&s)
    } else {
        WeightField::from_expr(&s, &e, &psi.descriptor())?
    };
    WeightedSpace::new(s, w)
}

/// Sampler for triple `i`, identical on every grid.
fn sampler(ws: &WeightedSpace, seed: u64, i: usize, max_freq: usize) -> Result<FieldSampler> {
    FieldSampler::new(ws.space(), seed.wrapping_mul(1_000_003).wrapping_add(i as u64), max_freq)
}

struct Triple {
    eta: OneFormField,
    alpha: OneFormField,
    f: ScalarField,
    b: f64,
}

fn triple(ws: &WeightedSpace, seed: u64, i: usize, opts: &IdentityOptions) -> Result<Triple> {
    let mut r = sampler(ws, seed, i, opts.max_freq)?;
    let eta = OneFormField::random(ws, &mut r);
    let alpha = OneFormField::random(ws, &mut r);
    let f = ScalarField::new(ws, r.field(ws.space()))?;
    let b = r.uniform(-opts.b_max, opts.b_max);
    Ok(Triple { eta, alpha, f, b })
}

fn convergence_check(name: &str, fine: &[ResidualRecord], opts: &IdentityOptions) -> IdentityCheck {
    let max_residual = fine.iter().fold(0.0, |m, r| f64::max(m, r.residual));
    let orders: Vec<f64> = fine.iter().filter_map(|r| r.order_estimate).collect();
    let min_order = orders.iter().copied().reduce(f64::min);
    let max_order = orders.iter().copied().reduce(f64::max);
    let in_band = |o: Option<f64>| o.is_some_and(|o| (o - opts.order).abs() <= opts.order_band);
    IdentityCheck {
        name: name.to_string(),
        max_residual,
        min_order,
        max_order,
        pass: max_residual <= opts.residual_bound && in_band(min_order) && in_band(max_order),
    }
}

fn slack_check(name: &str, records: &[ResidualRecord], opts: &IdentityOptions) -> IdentityCheck {
    let max_residual = records.iter().fold(0.0, |m, r| f64::max(m, r.residual));
    let orders = records.iter().filter_map(|r| r.order_estimate);
    IdentityCheck {
        name: name.to_string(),
        max_residual,
        min_order: orders.clone().reduce(f64::min),
        max_order: orders.reduce(f64::max),
        pass: max_residual <= opts.residual_bound,
    }
}

/// Runs every check and collects one record per (identity, triple).
pub fn run_identity_suite(opts: &IdentityOptions, seed: u64) -> Result<IdentitySuite> {
    if !opts.resolution.is_multiple_of(2) || opts.triples == 0 {
        return Err(Error::Config(
            "identity suite needs an even resolution and at least one triple".into(),
        ));
    }
    let fine = circle(opts.resolution, &opts.psi)?;
    let coarse = circle(opts.resolution / 2, &opts.psi)?;
    let names = ["refined_blw", "lemma1", "lemma2", "lemma3", "commutation"];
    let mut by_name: BTreeMap<&str, Vec<ResidualRecord>> = BTreeMap::new();
    for i in 0..opts.triples {
        let residuals = |ws: &WeightedSpace| -> Result<[f64; 5]> {
            let tr = triple(ws, seed, i, opts)?;
            let blw = check_refined_blw(&tr.eta, &tr.alpha, tr.b, ws)?.sup_abs();
            let lem = check_form_identities(&tr.eta, &tr.alpha, &tr.f, ws)?;
            let com = check_commutation(&tr.eta, opts.commutation_t, ws)?;
            Ok([blw, lem.lemma1, lem.lemma2, lem.lemma3, com])
        };
        let rc = residuals(&coarse)?;
        let rf = residuals(&fine)?;
        let b = triple(&fine, seed, i, opts)?.b;
        for (j, name) in names.iter().enumerate() {
            let mut rec = ResidualRecord::new(name, &fine, rf[j])
                .param("triple", i as f64)
                .param("b", b)
                .with_order(rc[j]);
            if *name == "commutation" {
                rec = rec.param("t", opts.commutation_t);
            }
            by_name.entry(name).or_default().push(rec);
        }
    }

    let mut checks: Vec<IdentityCheck> = names
        .iter()
        .map(|n| convergence_check(n, &by_name[n], opts))
        .collect();
    let mut records: Vec<ResidualRecord> = names.iter().flat_map(|n| by_name[n].clone()).collect();

    // Γ₂ inequality on the round sphere with random zonal fields
    let cd_sphere = CDParams {
        r: opts.sphere_cd[0],
        m: Dimension::Finite(opts.sphere_cd[1]),
        witness_node: 0,
    };
    let slacks = |n: usize| -> Result<(WeightedSpace, Vec<(f64, f64)>)> {
        let sphere = WeightedSpace::flat(build_model_space(SpaceKind::SphereZonal, &[n])?);
        cd_sphere.check_feasible(sphere.space(), sphere.weight())?;
        let mut out = Vec::new();
        for i in 0..opts.triples {
            let mut r = sampler(&sphere, seed, i, opts.max_freq)?;
            let f = ScalarField::new(&sphere, r.field(sphere.space()))?;
            let g = ScalarField::new(&sphere, r.field(sphere.space()))?;
            let b = r.uniform(-opts.b_max, opts.b_max);
            out.push((b, check_gamma2_cd(&f, &g, b, &cd_sphere, &sphere)?.min));
        }
        Ok((sphere, out))
    };
    let (_, coarse_slack) = slacks(opts.sphere_resolution / 2)?;
    let (sphere, fine_slack) = slacks(opts.sphere_resolution)?;
    let mut g2 = Vec::new();
    for (i, ((b, sf), (_, sc))) in fine_slack.iter().zip(&coarse_slack).enumerate() {
        let mut rec = ResidualRecord::new("gamma2_cd", &sphere, (-sf).max(0.0))
            .param("triple", i as f64)
            .param("b", *b)
            .param("min_slack", *sf)
            .param("R", cd_sphere.r)
            .param("m", opts.sphere_cd[1]);
        if *sf < 0.0 && *sc < 0.0 {
            rec.order_estimate = Some(observed_order(-sc, -sf));
        }
        g2.push(rec);
    }
    checks.push(slack_check("gamma2_cd", &g2, opts));
    records.extend(g2);

    // coercive estimate for ω = cos θ dθ, g = 1 + ½ sin θ on the flat circle
    let mut ce = Vec::new();
    let mut deficits = Vec::new();
    for n in [opts.resolution / 2, opts.resolution] {
        let ws = WeightedSpace::flat(build_model_space(SpaceKind::Circle, &[n])?);
        let cd = cd_best_R(ws.space(), ws.weight(), Dimension::Finite(1.0))?;
        let omega = OneFormField::from_fn(&ws, |x| vec![x[0].cos()])?;
        let g = ScalarField::from_fn(&ws, |x| 1.0 + 0.5 * x[0].sin())?;
        let u = linspace(0.0, opts.coercive_t, opts.coercive_u_points);
        let est = check_coercive_estimate(&omega, &g, opts.coercive_t, &u, &cd, &ws)?;
        deficits.push(est.deficit.min);
        ce.push(
            ResidualRecord::new("coercive_estimate", &ws, (-est.deficit.min).max(0.0))
                .param("min_deficit", est.deficit.min)
                .param("t", opts.coercive_t)
                .param("u_points", opts.coercive_u_points as f64),
        );
    }
    if deficits[0] < 0.0 && deficits[1] < 0.0 {
        let order = observed_order(-deficits[0], -deficits[1]);
        ce[1].order_estimate = Some(order);
    }
    let fine_ce = ce[1].clone();
    checks.push(slack_check("coercive_estimate", std::slice::from_ref(&fine_ce), opts));
    records.extend(ce);

    let pass = checks.iter().all(|c| c.pass);
    Ok(IdentitySuite {
        seed,
        checks,
        records,
        pass,
    })
}
