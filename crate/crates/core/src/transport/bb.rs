//! Dynamic transport: density/momentum paths, their continuity residual and
//! kinetic action, and displacement interpolation between 1D densities.

use crate::error::{Error, Result};
use crate::forms::{delta_psi_raw, OneFormField};
use crate::geometry::{GridKey, SpaceKind};
use crate::ops::WeightedSpace;
use crate::semigroup::{DensityField, NodalField};
use crate::transport::oned::circle_optimum;
use crate::transport::smooth::{Layout, SmoothLaw, SmoothMap};
use crate::transport::{cell_masses, circle_quantile};

/// A discrete path `ρ_s` at `s = k/K` with momenta `ω` at the midpoints
/// `s = (k + ½)/K`.
#[derive(Debug, Clone, PartialEq)]
pub struct BBPath {
    pub grid: GridKey,
    pub rho_s: Vec<DensityField>,
    pub omega_s: Vec<OneFormField>,
    /// `sup |∂_sρ + δ_Ψω|` over nodes and midpoints.
    pub continuity_residual: f64,
    /// Midpoint index at which the residual peaks.
    pub worst_step: usize,
    pub tolerance: f64,
}

impl BBPath {
    pub fn new(
        ws: &WeightedSpace,
        rho_s: Vec<DensityField>,
        omega_s: Vec<OneFormField>,
        tolerance: f64,
    ) -> Result<Self> {
        if rho_s.len() < 2 || omega_s.len() + 1 != rho_s.len() {
            return Err(Error::Input(format!(
                "path needs K+1 densities and K momenta, got {} and {}",
                rho_s.len(),
                omega_s.len()
            )));
        }
        let key = ws.key();
        if let Some(k) = rho_s.iter().position(|r| r.grid() != &key) {
            return Err(Error::Input(format!("path density {k} is not on {key}")));
        }
        if let Some(k) = omega_s.iter().position(|w| w.grid() != &key) {
            return Err(Error::Input(format!("path momentum {k} is not on {key}")));
        }
        if !(tolerance >= 0.0) {
            return Err(Error::Input("path tolerance must be nonnegative".into()));
        }
        let res = continuity_residuals_raw(ws, &rho_s, &omega_s);
        let (worst_step, continuity_residual) = res
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |acc, (k, r)| if r > acc.1 { (k, r) } else { acc });
        Ok(BBPath {
            grid: key,
            rho_s,
            omega_s,
            continuity_residual,
            worst_step,
            tolerance,
        })
    }

    pub fn steps(&self) -> usize {
        self.omega_s.len()
    }

    /// Path time of midpoint `k`.
    pub fn midpoint(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.steps() as f64
    }
}

fn continuity_residuals_raw(ws: &WeightedSpace, rho: &[DensityField], omega: &[OneFormField]) -> Vec<f64> {
    let kk = omega.len() as f64;
    omega
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let div = delta_psi_raw(ws, w.comps());
            let (a, b) = (rho[k].values(), rho[k + 1].values());
            (0..div.len())
                .map(|j| ((b[j] - a[j]) * kk + div[j]).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Sup-norm continuity residual at each midpoint of the path.
pub fn continuity_residuals(path: &BBPath, ws: &WeightedSpace) -> Result<Vec<f64>> {
    if path.grid != ws.key() {
        return Err(Error::Input(format!("path on {} used with {}", path.grid, ws.key())));
    }
    Ok(continuity_residuals_raw(ws, &path.rho_s, &path.omega_s))
}

/// Kinetic action `∫₀¹ ∫ |ω|²/ρ dμ ds`, midpoint rule in `s` with
/// `ρ_{k+½} = ½(ρ_k + ρ_{k+1})`.
pub fn bb_action(path: &BBPath, ws: &WeightedSpace) -> Result<f64> {
    if path.grid != ws.key() {
        return Err(Error::Input(format!("path on {} used with {}", path.grid, ws.key())));
    }
    if path.continuity_residual > path.tolerance {
        return Err(Error::Input(format!(
            "continuity residual {:.3e} exceeds tolerance {:.3e} at s = {}",
            path.continuity_residual,
            path.tolerance,
            path.midpoint(path.worst_step)
        )));
    }
    let w = ws.measure().weights();
    let kk = path.steps() as f64;
    let mut total = 0.0;
    for (k, om) in path.omega_s.iter().enumerate() {
        let (a, b) = (path.rho_s[k].values(), path.rho_s[k + 1].values());
        let sq = om.norm_sq();
        let step: f64 = (0..w.len())
            .map(|j| w[j] * sq[j] / (0.5 * (a[j] + b[j])))
            .sum();
        total += step / kk;
    }
    Ok(total)
}

/// Constant in front of `h + 1/K` in the tolerance assigned to McCann paths,
/// relative to the largest density and displacement on the path.
pub const MCCANN_TOLERANCE_FACTOR: f64 = 10.0;

/// Displacement interpolation between two densities on the circle or the
/// zonal sphere, sampled at `K + 1` path times. The monotone map comes from
/// smooth reconstructions of both laws, with the circle shift taken from
/// the exact solver; `ρ_s` is the pushforward evaluated at the nodes.
pub fn build_mccann_path(rho0: &DensityField, rho1: &DensityField, ws: &WeightedSpace, k: usize) -> Result<BBPath> {
    if k == 0 {
        return Err(Error::Input("path needs at least one step".into()));
    }
    for r in [rho0, rho1] {
        if r.grid() != &ws.key() {
            return Err(Error::Input(format!("density on {} used with {}", r.grid(), ws.key())));
        }
    }
    if rho0.values() == rho1.values() {
        let zero = OneFormField::zero(ws);
        return BBPath::new(ws, vec![rho0.clone(); k + 1], vec![zero; k], 0.0);
    }
    let space = ws.space();
    let h = space.h();
    let m0 = cell_masses(rho0, ws);
    let m1 = cell_masses(rho1, ws);
    let per_unit = |m: &[f64]| m.iter().map(|v| v / h).collect::<Vec<f64>>();
    let map = match space.kind() {
        SpaceKind::Circle => {
            // the exact solver's shift, moved from cell-boundary to node origin
            let opt = circle_optimum(&circle_quantile(&m0, h), &circle_quantile(&m1, h));
            let t0: f64 = m0.iter().sum();
            let t1: f64 = m1.iter().sum();
            let shift = opt.alpha + 0.5 * m0[0] / t0 - 0.5 * m1[0] / t1;
            SmoothMap::new(
                SmoothLaw::new(per_unit(&m0), h, Layout::Periodic),
                SmoothLaw::new(per_unit(&m1), h, Layout::Periodic),
                shift,
            )
        }
        SpaceKind::SphereZonal => SmoothMap::new(
            SmoothLaw::new(per_unit(&m0), h, Layout::Poles),
            SmoothLaw::new(per_unit(&m1), h, Layout::Poles),
            0.0,
        ),
        SpaceKind::Torus2 => {
            return Err(Error::UnsupportedSpace(
                "displacement interpolation needs a one-dimensional space".into(),
            ))
        }
    };
    let weights = ws.measure().weights();
    let nodes = space.axis(0).to_vec();
    // normalized density and displacement at every node at path time s
    let state_at = |s: f64| -> (Vec<f64>, Vec<f64>) {
        let (mut rho, vel): (Vec<f64>, Vec<f64>) = nodes
            .iter()
            .zip(weights)
            .map(|(z, w)| {
                let (q, v) = map.at(s, *z);
                (q * h / w, v)
            })
            .unzip();
        let mass: f64 = rho.iter().zip(weights).map(|(r, w)| r * w).sum();
        rho.iter_mut().for_each(|r| *r /= mass);
        (rho, vel)
    };
    let mut rho_s = Vec::with_capacity(k + 1);
    rho_s.push(rho0.clone());
    for i in 1..k {
        rho_s.push(DensityField::from_raw(ws.key(), state_at(i as f64 / k as f64).0));
    }
    rho_s.push(rho1.clone());
    for (i, r) in rho_s.iter().enumerate() {
        if let Some(j) = r.values().iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!(
                "interpolated density is not positive at node {j}, s = {}",
                i as f64 / k as f64
            )));
        }
    }
    let omega_s: Vec<OneFormField> = (0..k)
        .map(|i| {
            let (rho, vel) = state_at((i as f64 + 0.5) / k as f64);
            let comp = rho.iter().zip(&vel).map(|(r, v)| r * v).collect();
            OneFormField::from_raw(ws.key(), vec![comp])
        })
        .collect();
    let rmax = rho_s
        .iter()
        .flat_map(|r| r.values().iter().copied())
        .fold(0.0, f64::max);
    let tol = MCCANN_TOLERANCE_FACTOR * rmax * map.max_displacement().max(1.0) * (h + 1.0 / k as f64);
    BBPath::new(ws, rho_s, omega_s, tol)
}
