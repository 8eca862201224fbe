//! Debiased entropic transport with ε-scaling and Richardson extrapolation.
//!
//! Each stage runs stabilized Sinkhorn scaling: potentials `f, g` are kept in
//! the log domain and periodically absorbed into the kernel
//! `exp((f_i + g_j − C_ij)/ε)`, so the inner loop is plain matrix-vector
//! products. Rows whose kernel underflows fall back to a log-sum-exp update.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{circle_dist, SpaceKind};
use crate::ops::WeightedSpace;
use crate::semigroup::{DensityField, NodalField};
use crate::transport::cost_cache::{CostCache, CostKey, CostKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SinkhornOptions {
    /// Strictly decreasing regularization values.
    pub eps_schedule: Vec<f64>,
    /// L1 marginal violation at which a stage stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Longitude × colatitude grid used to lift zonal sphere densities.
    pub sphere_lift: [usize; 2],
    /// Solve the lifted sphere problem on every grid point instead of
    /// reducing it by longitude symmetry.
    pub dense_lift: bool,
    pub cache_dir: Option<PathBuf>,
}

/// Geometric schedule from `start` to `end` in `stages` values.
pub fn geometric_schedule(start: f64, end: f64, stages: usize) -> Vec<f64> {
    if stages <= 1 {
        return vec![end];
    }
    let r = (end / start).powf(1.0 / (stages - 1) as f64);
    (0..stages)
        .map(|i| if i + 1 == stages { end } else { start * r.powi(i as i32) })
        .collect()
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        SinkhornOptions {
            eps_schedule: geometric_schedule(0.5, 0.002, 8),
            tolerance: 1e-9,
            max_iterations: 100_000,
            sphere_lift: [64, 32],
            dense_lift: false,
            cache_dir: None,
        }
    }
}

impl SinkhornOptions {
    pub fn validate(&self) -> Result<()> {
        if self.eps_schedule.is_empty() {
            return Err(Error::Config("empty epsilon schedule".into()));
        }
        if self.eps_schedule.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::Config("epsilon values must be positive".into()));
        }
        if self.eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("epsilon schedule must be strictly decreasing".into()));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::Config("bad sinkhorn tolerance or iteration cap".into()));
        }
        Ok(())
    }
}

/// One stage of the ε-schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkhornStage {
    pub eps: f64,
    /// Debiased value `OT_ε(a,b) − ½OT_ε(a,a) − ½OT_ε(b,b)`.
    pub debiased: f64,
    /// `OT_ε(a,b)` alone.
    pub raw: f64,
    pub iterations: usize,
    pub marginal_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub eps: Vec<f64>,
    pub values: Vec<f64>,
    /// Polynomial fit through `(eps, values)` evaluated at zero.
    pub extrapolated: f64,
}

/// Cost of a discrete problem.
pub(crate) enum Cost {
    Dense(Vec<f64>),
    /// Longitude-invariant measures on a longitude × colatitude grid of the
    /// sphere. Rotation invariance keeps the potentials constant on bands,
    /// so the lifted problem is exactly a problem between bands with cost
    /// `−ε log((1/n_lon) Σ_l exp(−d²(θ_i, θ_j, Δφ_l)/ε))`.
    Bands { nlat: usize, nlon: usize },
}

impl Cost {
    fn matrix(&self, eps: f64) -> std::borrow::Cow<'_, [f64]> {
        match self {
            Cost::Dense(c) => std::borrow::Cow::Borrowed(c),
            Cost::Bands { nlat, nlon } => std::borrow::Cow::Owned(band_cost(*nlat, *nlon, eps)),
        }
    }
}

fn band_cost(nlat: usize, nlon: usize, eps: f64) -> Vec<f64> {
    let th: Vec<f64> = (0..nlat).map(|j| (j as f64 + 0.5) * PI / nlat as f64).collect();
    let cphi: Vec<f64> = (0..nlon)
        .map(|l| (2.0 * PI * l as f64 / nlon as f64).cos())
        .collect();
    let mut out = vec![0.0; nlat * nlat];
    let mut e = vec![0.0; nlon];
    for i in 0..nlat {
        for j in 0..nlat {
            let (ci, si, cj, sj) = (th[i].cos(), th[i].sin(), th[j].cos(), th[j].sin());
            for (el, cp) in e.iter_mut().zip(&cphi) {
                *el = -(ci * cj + si * sj * cp).clamp(-1.0, 1.0).acos().powi(2) / eps;
            }
            let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = e.iter().map(|v| (v - m).exp()).sum();
            out[i * nlat + j] = -eps * (m + (s / nlon as f64).ln());
        }
    }
    out
}

/// Discrete measures and their cost.
pub(crate) struct Problem {
    pub(crate) a: Vec<f64>,
    pub(crate) b: Vec<f64>,
    pub(crate) cost: Cost,
    pub(crate) notes: Vec<String>,
}

struct Potentials {
    f: Vec<f64>,
    g: Vec<f64>,
}

struct StageOutcome {
    value: f64,
    iterations: usize,
    marginal_error: f64,
}

fn lse_row(cost_row: &[f64], g: &[f64], logb: &[f64], eps: f64) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for j in 0..g.len() {
        m = m.max((g[j] - cost_row[j]) / eps + logb[j]);
    }
    let s: f64 = (0..g.len())
        .map(|j| ((g[j] - cost_row[j]) / eps + logb[j] - m).exp())
        .sum();
    m + s.ln()
}

/// Runs one ε stage to the marginal tolerance, updating the potentials.
fn stage(
    cost: &[f64],
    a: &[f64],
    b: &[f64],
    eps: f64,
    pot: &mut Potentials,
    tol: f64,
    max_iter: usize,
) -> Result<StageOutcome> {
    let (n, m) = (a.len(), b.len());
    let loga: Vec<f64> = a.iter().map(|v| v.ln()).collect();
    let logb: Vec<f64> = b.iter().map(|v| v.ln()).collect();
    let mut kernel = vec![0.0; n * m];
    let mut iterations = 0;
    let mut err;
    let absorb_bound = 1e30;
    'outer: loop {
        for i in 0..n {
            let row = &cost[i * m..(i + 1) * m];
            let kr = &mut kernel[i * m..(i + 1) * m];
            for j in 0..m {
                kr[j] = ((pot.f[i] + pot.g[j] - row[j]) / eps).exp();
            }
        }
        let mut u = vec![1.0; n];
        let mut v = vec![1.0; m];
        let mut col = vec![0.0; m];
        loop {
            // row sums with the current v
            let mut degenerate = false;
            let mut new_err = 0.0;
            for i in 0..n {
                let kr = &kernel[i * m..(i + 1) * m];
                let r: f64 = kr.iter().zip(&v).zip(b).map(|((k, v), b)| k * v * b).sum();
                if !(r > 0.0 && r.is_finite()) {
                    degenerate = true;
                    break;
                }
                new_err += (a[i] * u[i] * r - a[i]).abs();
                u[i] = 1.0 / r;
            }
            if degenerate {
                // absorb, repair rows in the log domain, rebuild the kernel
                for (f, uu) in pot.f.iter_mut().zip(&u) {
                    *f += eps * uu.ln();
                }
                for (g, vv) in pot.g.iter_mut().zip(&v) {
                    *g += eps * vv.ln();
                }
                for i in 0..n {
                    pot.f[i] = -eps * lse_row(&cost[i * m..(i + 1) * m], &pot.g, &logb, eps);
                }
                iterations += 1;
                continue 'outer;
            }
            err = new_err;
            col.iter_mut().for_each(|c| *c = 0.0);
            for i in 0..n {
                let kr = &kernel[i * m..(i + 1) * m];
                let w = u[i] * a[i];
                for (c, k) in col.iter_mut().zip(kr) {
                    *c += k * w;
                }
            }
            let mut col_ok = true;
            for j in 0..m {
                if !(col[j] > 0.0 && col[j].is_finite()) {
                    col_ok = false;
                    break;
                }
                v[j] = 1.0 / col[j];
            }
            iterations += 1;
            let big = u
                .iter()
                .chain(&v)
                .any(|x| *x > absorb_bound || *x < 1.0 / absorb_bound);
            let done = err <= tol;
            if !col_ok {
                for j in 0..m {
                    let colc: Vec<f64> = (0..n).map(|i| cost[i * m + j]).collect();
                    pot.g[j] = -eps * lse_row(&colc, &pot.f, &loga, eps);
                }
                continue 'outer;
            }
            if big || done || iterations >= max_iter {
                for (f, uu) in pot.f.iter_mut().zip(&u) {
                    *f += eps * uu.ln();
                }
                for (g, vv) in pot.g.iter_mut().zip(&v) {
                    *g += eps * vv.ln();
                }
                if done || iterations >= max_iter {
                    break 'outer;
                }
                continue 'outer;
            }
        }
    }
    let value: f64 = pot.f.iter().zip(a).map(|(f, a)| f * a).sum::<f64>()
        + pot.g.iter().zip(b).map(|(g, b)| g * b).sum::<f64>();
    if err > tol {
        return Err(Error::Convergence {
            eps,
            iterations,
            marginal_error: err,
            last_value: value,
        });
    }
    Ok(StageOutcome {
        value,
        iterations,
        marginal_error: err,
    })
}

/// Debiased ε-scaling run on a symmetric square cost.
pub(crate) fn solve(problem: &Problem, opts: &SinkhornOptions) -> Result<(Vec<SinkhornStage>, Extrapolation)> {
    opts.validate()?;
    let n = problem.a.len();
    let m = problem.b.len();
    let support = match &problem.cost {
        Cost::Dense(c) => c.len() == n * n,
        Cost::Bands { nlat, .. } => *nlat == n,
    };
    if n != m || !support {
        return Err(Error::Input("sinkhorn needs two measures on one support".into()));
    }
    let mut pab = Potentials {
        f: vec![0.0; n],
        g: vec![0.0; m],
    };
    let mut paa = Potentials {
        f: vec![0.0; n],
        g: vec![0.0; n],
    };
    let mut pbb = Potentials {
        f: vec![0.0; m],
        g: vec![0.0; m],
    };
    let mut stages = Vec::with_capacity(opts.eps_schedule.len());
    for &eps in &opts.eps_schedule {
        let cost = problem.cost.matrix(eps);
        let ab = stage(&cost, &problem.a, &problem.b, eps, &mut pab, opts.tolerance, opts.max_iterations)?;
        let aa = stage(&cost, &problem.a, &problem.a, eps, &mut paa, opts.tolerance, opts.max_iterations)?;
        let bb = stage(&cost, &problem.b, &problem.b, eps, &mut pbb, opts.tolerance, opts.max_iterations)?;
        stages.push(SinkhornStage {
            eps,
            debiased: ab.value - 0.5 * (aa.value + bb.value),
            raw: ab.value,
            iterations: ab.iterations + aa.iterations + bb.iterations,
            marginal_error: ab.marginal_error.max(aa.marginal_error).max(bb.marginal_error),
        });
    }
    let tail = &stages[stages.len().saturating_sub(3)..];
    let eps: Vec<f64> = tail.iter().map(|s| s.eps).collect();
    let values: Vec<f64> = tail.iter().map(|s| s.debiased).collect();
    let extrapolated = lagrange_at_zero(&eps, &values);
    Ok((
        stages,
        Extrapolation {
            eps,
            values,
            extrapolated,
        },
    ))
}

/// Value at zero of the interpolating polynomial through the points.
pub(crate) fn lagrange_at_zero(x: &[f64], y: &[f64]) -> f64 {
    (0..x.len())
        .map(|i| {
            let w: f64 = (0..x.len())
                .filter(|&j| j != i)
                .map(|j| x[j] / (x[j] - x[i]))
                .product();
            w * y[i]
        })
        .sum()
}

fn cost_for(key: &CostKey, cache: Option<&CostCache>, build: impl FnOnce() -> Vec<f64>) -> Result<Vec<f64>> {
    match cache {
        Some(c) => c.get_or_build(key, build),
        None => Ok(build()),
    }
}

/// Splits a zonal density's band masses over an `nlon × nlat` sphere grid.
pub(crate) fn lift_zonal(ws: &WeightedSpace, rho: &[f64], nlat: usize, nlon: usize) -> Vec<f64> {
    let masses: Vec<f64> = rho
        .iter()
        .zip(ws.measure().weights())
        .map(|(r, w)| (r * w).max(0.0))
        .collect();
    let n = masses.len();
    let hf = PI / n as f64;
    let hc = PI / nlat as f64;
    let mut bands = vec![0.0; nlat];
    for (k, mk) in masses.iter().enumerate() {
        let (a, b) = (k as f64 * hf, (k + 1) as f64 * hf);
        let j0 = ((a / hc).floor() as usize).min(nlat - 1);
        let j1 = ((b / hc).ceil() as usize).min(nlat);
        for j in j0..j1 {
            let (ca, cb) = (j as f64 * hc, (j + 1) as f64 * hc);
            let overlap = (b.min(cb) - a.max(ca)).max(0.0);
            bands[j] += mk * overlap / hf;
        }
    }
    let mut out = Vec::with_capacity(nlat * nlon);
    for band in &bands {
        for _ in 0..nlon {
            out.push(band / nlon as f64);
        }
    }
    out
}

fn sphere_lift_cost(nlat: usize, nlon: usize) -> Vec<f64> {
    let pts: Vec<(f64, f64)> = (0..nlat)
        .flat_map(|j| {
            let th = (j as f64 + 0.5) * PI / nlat as f64;
            (0..nlon).map(move |i| (th, 2.0 * PI * i as f64 / nlon as f64))
        })
        .collect();
    let n = pts.len();
    let mut c = vec![0.0; n * n];
    for (p, &(t1, p1)) in pts.iter().enumerate() {
        for (q, &(t2, p2)) in pts.iter().enumerate() {
            let cosd = t1.cos() * t2.cos() + t1.sin() * t2.sin() * (p1 - p2).cos();
            c[p * n + q] = cosd.clamp(-1.0, 1.0).acos().powi(2);
        }
    }
    c
}

/// Assembles masses and the squared geodesic cost for a pair of densities.
pub(crate) fn build_problem(
    rho0: &DensityField,
    rho1: &DensityField,
    ws: &WeightedSpace,
    opts: &SinkhornOptions,
) -> Result<Problem> {
    let space = ws.space();
    let cache = opts.cache_dir.as_ref().map(CostCache::new);
    let masses = |r: &DensityField| -> Vec<f64> {
        r.values()
            .iter()
            .zip(ws.measure().weights())
            .map(|(v, w)| (v * w).max(0.0))
            .collect()
    };
    match space.kind() {
        SpaceKind::Circle | SpaceKind::Torus2 => {
            let kind = if space.kind() == SpaceKind::Circle {
                CostKind::Circle
            } else {
                CostKind::Torus2
            };
            let key = CostKey {
                kind,
                dims: space.dims().to_vec(),
            };
            let n = space.len();
            let cost = cost_for(&key, cache.as_ref(), || {
                let coords: Vec<Vec<f64>> = (0..n).map(|k| space.coords(k)).collect();
                let mut c = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        c[i * n + j] = coords[i]
                            .iter()
                            .zip(&coords[j])
                            .map(|(a, b)| circle_dist(*a, *b).powi(2))
                            .sum();
                    }
                }
                c
            })?;
            Ok(Problem {
                a: masses(rho0),
                b: masses(rho1),
                cost: Cost::Dense(cost),
                notes: Vec::new(),
            })
        }
        SpaceKind::SphereZonal => {
            let [nlon, nlat] = opts.sphere_lift;
            if nlon < 4 || nlat < 2 {
                return Err(Error::Config(format!("sphere lift grid {nlon}x{nlat} too small")));
            }
            let (a, b) = (
                lift_zonal(ws, rho0.values(), nlat, nlon),
                lift_zonal(ws, rho1.values(), nlat, nlon),
            );
            if !opts.dense_lift {
                let band = |v: Vec<f64>| -> Vec<f64> { v.chunks(nlon).map(|c| c.iter().sum()).collect() };
                return Ok(Problem {
                    a: band(a),
                    b: band(b),
                    cost: Cost::Bands { nlat, nlon },
                    notes: vec![format!(
                        "lifted to a {nlon}x{nlat} longitude-colatitude grid, reduced to bands by longitude symmetry"
                    )],
                });
            }
            let key = CostKey {
                kind: CostKind::SphereLift,
                dims: vec![nlat, nlon],
            };
            let cost = cost_for(&key, cache.as_ref(), || sphere_lift_cost(nlat, nlon))?;
            Ok(Problem {
                a,
                b,
                cost: Cost::Dense(cost),
                notes: vec![format!("lifted to a {nlon}x{nlat} longitude-colatitude grid")],
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_and_extrapolation() {
        let s = geometric_schedule(0.5, 0.002, 8);
        assert_eq!(s.len(), 8);
        assert_eq!(s[0], 0.5);
        assert_eq!(s[7], 0.002);
        assert!(s.windows(2).all(|w| w[1] < w[0]));
        // exact for quadratics
        let x = [0.3, 0.2, 0.1];
        let y: Vec<f64> = x.iter().map(|e| 2.0 - 3.0 * e + 5.0 * e * e).collect();
        assert!((lagrange_at_zero(&x, &y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_problem_matches_closed_form() {
        // equal masses on two points, cost 1 off diagonal: OT_ε(a,a) with
        // the diagonal plan tends to 0 and OT(a,b) to 1 for point masses.
        let problem = Problem {
            a: vec![1.0 - 1e-12, 1e-12],
            b: vec![1e-12, 1.0 - 1e-12],
            cost: Cost::Dense(vec![0.0, 1.0, 1.0, 0.0]),
            notes: vec![],
        };
        let opts = SinkhornOptions {
            eps_schedule: vec![0.5, 0.1, 0.05],
            ..Default::default()
        };
        let (stages, ex) = solve(&problem, &opts).unwrap();
        assert!(stages.iter().all(|s| s.marginal_error <= 1e-9));
        assert!((ex.extrapolated - 1.0).abs() < 1e-6, "{ex:?}");
    }
}
