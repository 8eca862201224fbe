//! Wasserstein-2 distances between densities relative to `μ`.
//!
//! Exact solvers exist for the circle (quantile coupling with an optimal
//! shift) and the zonal sphere (monotone rearrangement in colatitude, exact
//! because colatitude is 1-Lipschitz and meridian-preserving couplings
//! attain the bound). Entropic Sinkhorn covers every space.

pub mod bb;
pub mod cost_cache;
pub(crate) mod oned;
pub mod sinkhorn;
mod smooth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SpaceKind;
use crate::ops::WeightedSpace;
use crate::semigroup::{DensityField, NodalField};

pub use bb::{bb_action, build_mccann_path, continuity_residuals, BBPath};
pub use sinkhorn::{geometric_schedule, Extrapolation, SinkhornOptions, SinkhornStage};

use oned::{circle_optimum, shifted_cost, Quantile, TWO_PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMethod {
    CircleExact,
    Monotone1d,
    Sinkhorn,
    BbAction,
}

impl TransportMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TransportMethod::CircleExact => "circle_exact",
            TransportMethod::Monotone1d => "monotone_1d",
            TransportMethod::Sinkhorn => "sinkhorn",
            TransportMethod::BbAction => "bb_action",
        }
    }
}

impl std::str::FromStr for TransportMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle_exact" => Ok(TransportMethod::CircleExact),
            "monotone_1d" => Ok(TransportMethod::Monotone1d),
            "sinkhorn" => Ok(TransportMethod::Sinkhorn),
            "bb_action" => Ok(TransportMethod::BbAction),
            _ => Err(Error::Config(format!("unknown transport method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginal_error: Option<f64>,
    /// Grid boundary at which the optimal circle coupling starts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cut: Option<usize>,
    /// Optimal quantile shift of the circle coupling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extrapolation: Option<Extrapolation>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<SinkhornStage>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub w2: f64,
    pub method: TransportMethod,
    pub diagnostics: Diagnostics,
}

impl TransportResult {
    pub fn w2_sq(&self) -> f64 {
        self.w2 * self.w2
    }
}

fn check_pair(rho0: &DensityField, rho1: &DensityField, ws: &WeightedSpace) -> Result<()> {
    for r in [rho0, rho1] {
        if r.grid() != &ws.key() {
            return Err(Error::Input(format!(
                "density on {} used with {}",
                r.grid(),
                ws.key()
            )));
        }
    }
    Ok(())
}

/// Cell masses `ρ_k μ_k`, with roundoff-level negative values set to zero.
pub(crate) fn cell_masses(rho: &DensityField, ws: &WeightedSpace) -> Vec<f64> {
    rho.values()
        .iter()
        .zip(ws.measure().weights())
        .map(|(r, w)| (r * w).max(0.0))
        .collect()
}

/// Relative size of negative values accepted as roundoff.
const NEGATIVE_ROUNDOFF: f64 = 1e-12;

fn check_normalized(rho: &DensityField, ws: &WeightedSpace) -> Result<()> {
    let v = rho.values();
    let top = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(k) = v.iter().position(|x| !(x.is_finite() && *x >= -NEGATIVE_ROUNDOFF * top)) {
        return Err(Error::Input(format!(
            "transport needs a nonnegative density (node {k} = {})",
            v[k]
        )));
    }
    let mass = ws.measure().integrate(v);
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::Input(format!(
            "transport needs a normalized density (mass {mass})"
        )));
    }
    Ok(())
}

/// Orders a pair canonically so that swapped arguments run the identical
/// computation.
fn canonical<'a>(a: &'a DensityField, b: &'a DensityField) -> (&'a DensityField, &'a DensityField, bool) {
    let swap = a
        .values()
        .iter()
        .zip(b.values())
        .find(|(x, y)| x != y)
        .is_some_and(|(x, y)| x > y);
    if swap {
        (b, a, true)
    } else {
        (a, b, false)
    }
}

pub(crate) fn circle_quantile(masses: &[f64], h: f64) -> Quantile {
    Quantile::from_masses(masses, -0.5 * h, h, Some(TWO_PI))
}

pub(crate) fn zonal_quantile(masses: &[f64], h: f64) -> Quantile {
    Quantile::from_masses(masses, 0.0, h, None)
}

/// Exact `W₂` on the circle. Cell masses are spread uniformly over their
/// arcs and the best shift of the unrolled quantile coupling is found by
/// exhaustive search over grid cuts followed by golden-section refinement.
pub fn w2_circle_exact(rho0: &DensityField, rho1: &DensityField, ws: &WeightedSpace) -> Result<TransportResult> {
    check_pair(rho0, rho1, ws)?;
    if ws.space().kind() != SpaceKind::Circle {
        return Err(Error::UnsupportedSpace(format!(
            "circle transport on {}",
            ws.key()
        )));
    }
    check_normalized(rho0, ws)?;
    check_normalized(rho1, ws)?;
    let (a, b, swapped) = canonical(rho0, rho1);
    let h = ws.space().h();
    let f = circle_quantile(&cell_masses(a, ws), h);
    let g = circle_quantile(&cell_masses(b, ws), h);
    let opt = circle_optimum(&f, &g);
    Ok(TransportResult {
        w2: opt.cost.max(0.0).sqrt(),
        method: TransportMethod::CircleExact,
        diagnostics: Diagnostics {
            iterations: opt.evaluations,
            cut: Some(opt.cut),
            shift: Some(if swapped { -opt.alpha } else { opt.alpha }),
            ..Default::default()
        },
    })
}

/// Exact `W₂` between zonal densities on the sphere by monotone
/// rearrangement of the colatitude laws.
pub fn w2_monotone_1d(rho0: &DensityField, rho1: &DensityField, ws: &WeightedSpace) -> Result<TransportResult> {
    check_pair(rho0, rho1, ws)?;
    if ws.space().kind() != SpaceKind::SphereZonal {
        return Err(Error::UnsupportedSpace(format!(
            "monotone rearrangement on {}",
            ws.key()
        )));
    }
    check_normalized(rho0, ws)?;
    check_normalized(rho1, ws)?;
    let (a, b, _) = canonical(rho0, rho1);
    let h = ws.space().h();
    let f = zonal_quantile(&cell_masses(a, ws), h);
    let g = zonal_quantile(&cell_masses(b, ws), h);
    let cost = shifted_cost(&f, &g, 0.0);
    Ok(TransportResult {
        w2: cost.max(0.0).sqrt(),
        method: TransportMethod::Monotone1d,
        diagnostics: Diagnostics {
            iterations: 1,
            notes: vec![
                "zonal reduction: colatitude coupling along meridians".into(),
            ],
            ..Default::default()
        },
    })
}

/// Debiased entropic `W₂`, extrapolated to `ε → 0` from the last three
/// stages of the schedule. Zonal sphere densities are lifted onto a full
/// longitude × colatitude grid with the great-circle cost.
pub fn w2_sinkhorn(
    rho0: &DensityField,
    rho1: &DensityField,
    ws: &WeightedSpace,
    opts: &SinkhornOptions,
) -> Result<TransportResult> {
    check_pair(rho0, rho1, ws)?;
    check_normalized(rho0, ws)?;
    check_normalized(rho1, ws)?;
    let problem = sinkhorn::build_problem(rho0, rho1, ws, opts)?;
    let (stages, ex) = sinkhorn::solve(&problem, opts)?;
    let last = stages.last().expect("nonempty schedule");
    Ok(TransportResult {
        w2: ex.extrapolated.max(0.0).sqrt(),
        method: TransportMethod::Sinkhorn,
        diagnostics: Diagnostics {
            iterations: stages.iter().map(|s| s.iterations).sum(),
            final_eps: Some(last.eps),
            marginal_error: Some(stages.iter().fold(0.0, |m, s| m.max(s.marginal_error))),
            extrapolation: Some(ex),
            stages,
            notes: problem.notes,
            ..Default::default()
        },
    })
}

/// Path steps used when `W₂` is estimated from a displacement path.
pub const DEFAULT_PATH_STEPS: usize = 64;

/// Dispatches to the requested solver.
pub fn w2(
    rho0: &DensityField,
    rho1: &DensityField,
    ws: &WeightedSpace,
    method: TransportMethod,
    opts: &SinkhornOptions,
) -> Result<TransportResult> {
    match method {
        TransportMethod::CircleExact => w2_circle_exact(rho0, rho1, ws),
        TransportMethod::Monotone1d => w2_monotone_1d(rho0, rho1, ws),
        TransportMethod::Sinkhorn => w2_sinkhorn(rho0, rho1, ws, opts),
        TransportMethod::BbAction => {
            let path = build_mccann_path(rho0, rho1, ws, DEFAULT_PATH_STEPS)?;
            let action = bb_action(&path, ws)?;
            Ok(TransportResult {
                w2: action.max(0.0).sqrt(),
                method,
                diagnostics: Diagnostics {
                    iterations: path.steps(),
                    notes: vec![format!(
                        "continuity residual {:.3e}",
                        path.continuity_residual
                    )],
                    ..Default::default()
                },
            })
        }
    }
}

/// The exact solver for a space, if one exists.
pub fn exact_method(kind: SpaceKind) -> Option<TransportMethod> {
    match kind {
        SpaceKind::Circle => Some(TransportMethod::CircleExact),
        SpaceKind::SphereZonal => Some(TransportMethod::Monotone1d),
        SpaceKind::Torus2 => None,
    }
}
