//! JSON run configuration.
//!
//! ```json
//! {
//!   "space": {"kind": "circle", "resolution": [512]},
//!   "psi": {"form": "a*cos(theta)", "a": 0.1},
//!   "f": {"form": "1 + 0.5*cos(theta)"},
//!   "g": {"form": "1"},
//!   "m": 2,
//!   "t_grid": {"start": 0, "stop": 1, "points": 10},
//!   "run": {"u_points": 33}
//! }
//! ```
//!
//! Densities may also come from a CSV file (`{"csv": "f.csv"}`, relative to
//! the config file) or from the seeded sampler (`{"random": {"contrast":
//! 0.5}}`). Closed-form densities are normalized against `μ`.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::FieldSampler;
use crate::geometry::{build_model_space, cd_best_R, CDParams, Dimension, SpaceKind, WeightField};
use crate::harness::identities::IdentityOptions;
use crate::harness::{linspace, product_grid, RunOptions};
use crate::io;
use crate::ops::WeightedSpace;
use crate::semigroup::DensityField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub kind: SpaceKind,
    pub resolution: Vec<usize>,
}

/// A closed-form expression with named numeric parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormSpec {
    pub form: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

impl FormSpec {
    pub fn new(form: &str) -> Self {
        FormSpec {
            form: form.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn parse(&self, kind: SpaceKind) -> Result<Expr> {
        let params: HashMap<String, f64> = self.params.clone().into_iter().collect();
        Expr::parse(&self.form, kind.variables(), &params)
    }

    /// Expression text with parameter values, for report headers.
    pub fn descriptor(&self) -> String {
        if self.params.is_empty() {
            return self.form.clone();
        }
        let p: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{} ({})", self.form, p.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    /// Relative amplitude of the fluctuation around 1, below 1.
    pub contrast: f64,
    #[serde(default = "default_max_freq")]
    pub max_freq: usize,
}

fn default_max_freq() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Csv { csv: PathBuf },
    Random { random: RandomSpec },
    Form(FormSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeGrid {
    List(Vec<f64>),
    Even { start: f64, stop: f64, points: usize },
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        match self {
            TimeGrid::List(v) => v.clone(),
            TimeGrid::Even { start, stop, points } => linspace(*start, *stop, *points),
        }
    }
}

/// Pairs `(s, t)` for the two-time bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairGrid {
    /// Every combination of the two lists.
    Product { s: TimeGrid, t: TimeGrid },
    /// `s = t` at each time.
    Diagonal(TimeGrid),
    Pairs(Vec<[f64; 2]>),
}

impl PairGrid {
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        match self {
            PairGrid::Product { s, t } => product_grid(&s.times(), &t.times()),
            PairGrid::Diagonal(t) => t.times().into_iter().map(|x| (x, x)).collect(),
            PairGrid::Pairs(p) => p.iter().map(|[s, t]| (*s, *t)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    pub space: SpaceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<FormSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<FieldSpec>,
    /// Effective dimension; a number or `"inf"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Dimension>,
    /// Curvature constant; the best one for `m` when absent.
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Evolution time for `evolve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<TimeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub st_grid: Option<PairGrid>,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub identities: IdentityOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl LabConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        io::from_json(text, origin)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: LabConfig = io::read_json(path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn weighted_space(&self) -> Result<WeightedSpace> {
        let space = build_model_space(self.space.kind, &self.space.resolution)?;
        match &self.psi {
            None => Ok(WeightedSpace::flat(space)),
            Some(p) => {
                let e = p.parse(self.space.kind)?;
                let w = if e.is_zero() {
                    WeightField::zero(&space)
                } else {
                    WeightField::from_expr(&space, &e, &p.descriptor())?
                };
                WeightedSpace::new(space, w)
            }
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Builds a density; `stream` separates the random streams of `f` and `g`.
    pub fn density(&self, spec: &FieldSpec, ws: &WeightedSpace, seed: u64, stream: u64) -> Result<DensityField> {
        match spec {
            FieldSpec::Csv { csv } => io::read_density_csv(ws, &self.resolve(csv)),
            FieldSpec::Random { random } => {
                if !(random.contrast >= 0.0 && random.contrast < 1.0) {
                    return Err(Error::Config(format!(
                        "random density contrast must lie in [0, 1), got {}",
                        random.contrast
                    )));
                }
                let mut sampler = FieldSampler::new(
                    ws.space(),
                    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream),
                    random.max_freq,
                )?;
                DensityField::normalized(ws, sampler.positive(ws.space(), random.contrast))
            }
            FieldSpec::Form(f) => {
                let e = f.parse(ws.space().kind())?;
                DensityField::from_fn(ws, |x| e.eval(x))
                    .map_err(|e| Error::Config(format!("density {:?}: {e}", f.form)))
            }
        }
    }

    /// `f` and `g`, both required.
    pub fn densities(&self, ws: &WeightedSpace, seed: u64) -> Result<(DensityField, DensityField)> {
        let f = self.f.as_ref().ok_or_else(|| Error::Config("config needs \"f\"".into()))?;
        let g = self.g.as_ref().ok_or_else(|| Error::Config("config needs \"g\"".into()))?;
        Ok((self.density(f, ws, seed, 0)?, self.density(g, ws, seed, 1)?))
    }

    pub fn dimension(&self) -> Result<Dimension> {
        self.m.ok_or_else(|| Error::Config("config needs the dimension \"m\"".into()))
    }

    /// `(R, m)`: the configured `R` checked for feasibility, or the best one.
    pub fn cd_params(&self, ws: &WeightedSpace) -> Result<CDParams> {
        let best = cd_best_R(ws.space(), ws.weight(), self.dimension()?)?;
        match self.r {
            None => Ok(best),
            Some(r) => {
                let cd = CDParams { r, ..best };
                cd.check_feasible(ws.space(), ws.weight())?;
                Ok(cd)
            }
        }
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        self.t_grid
            .as_ref()
            .map(TimeGrid::times)
            .ok_or_else(|| Error::Config("config needs \"t_grid\"".into()))
    }

    pub fn pairs(&self) -> Result<Vec<(f64, f64)>> {
        match (&self.st_grid, &self.t_grid) {
            (Some(p), _) => Ok(p.pairs()),
            (None, Some(t)) => {
                let t = t.times();
                Ok(product_grid(&t, &t))
            }
            (None, None) => Err(Error::Config("config needs \"st_grid\" or \"t_grid\"".into())),
        }
    }
}
