//! End-to-end checks of the Wasserstein contraction inequalities along
//! computed heat flows.
//!
//! Every checker smooths its inputs, evolves them once through all the times
//! it needs, and compares the two sides row by row. A row's deficit is
//! `rhs − lhs`; negative deficits inside the discretization tolerance are
//! flagged as warnings, beyond it as failures.

pub mod config;
pub mod identities;
pub mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cd_best_R, CDParams, Dimension, SpaceKind};
use crate::ops::WeightedSpace;
use crate::semigroup::{default_dt_max, entropy_clamped, DensityField, HeatSemigroup, NodalField, Scheme};
use crate::transport::{self, exact_method, SinkhornOptions, TransportMethod};

pub use report::{emit_report, read_report_csv, read_report_json, render_report, CsvRow, ReportFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityName {
    MainDimensional,
    VrsLimit,
    SimpleTwoTime,
    Eks,
}

impl InequalityName {
    pub fn as_str(self) -> &'static str {
        match self {
            InequalityName::MainDimensional => "main_dimensional",
            InequalityName::VrsLimit => "vrs_limit",
            InequalityName::SimpleTwoTime => "simple_two_time",
            InequalityName::Eks => "eks",
        }
    }
}

impl std::str::FromStr for InequalityName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "main_dimensional" => Ok(InequalityName::MainDimensional),
            "vrs_limit" => Ok(InequalityName::VrsLimit),
            "simple_two_time" => Ok(InequalityName::SimpleTwoTime),
            "eks" => Ok(InequalityName::Eks),
            _ => Err(Error::Config(format!("unknown inequality {s:?}"))),
        }
    }
}

/// `tol = c_h·h² + c_dt·dt² + c_u/u_points + solver`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceModel {
    pub c_h: f64,
    pub c_dt: f64,
    pub c_u: f64,
    /// Overrides the per-method transport tolerance, in units of `W₂²`.
    pub solver: Option<f64>,
}

impl Default for ToleranceModel {
    fn default() -> Self {
        ToleranceModel {
            c_h: 0.05,
            c_dt: 1.0,
            c_u: 1e-3,
            solver: None,
        }
    }
}

/// Accuracy of each transport solver in units of `W₂²`.
pub fn solver_tolerance(method: TransportMethod) -> f64 {
    match method {
        TransportMethod::CircleExact | TransportMethod::Monotone1d => 1e-10,
        TransportMethod::Sinkhorn => 5e-3,
        TransportMethod::BbAction => 2e-3,
    }
}

impl ToleranceModel {
    pub fn evaluate(&self, h: f64, dt: Option<f64>, u_points: Option<usize>, method: TransportMethod) -> f64 {
        let dt = dt.unwrap_or(0.0);
        let quad = u_points.map_or(0.0, |u| self.c_u / u as f64);
        self.c_h * h * h + self.c_dt * dt * dt + quad + self.solver.unwrap_or_else(|| solver_tolerance(method))
    }
}

/// Numerical choices shared by all checkers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    /// Nodes of the trapezoid rule for the dimensional integral.
    pub u_points: usize,
    /// Defaults to the exact solver of the space, else Sinkhorn.
    pub w2_method: Option<TransportMethod>,
    /// Defaults to spectral when `Ψ ≡ 0`, else Crank–Nicolson.
    pub scheme: Option<Scheme>,
    /// Crank–Nicolson step cap, default `h²/2`.
    pub dt_max: Option<f64>,
    /// `f ↦ (P_ε f + ε)/(1 + ε)` before anything else; zero disables it.
    pub smoothing_eps: f64,
    pub tolerance: ToleranceModel,
    pub sinkhorn: SinkhornOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            u_points: 33,
            w2_method: None,
            scheme: None,
            dt_max: None,
            smoothing_eps: 1e-4,
            tolerance: ToleranceModel::default(),
            sinkhorn: SinkhornOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub space: SpaceKind,
    pub grid: String,
    pub resolution: Vec<usize>,
    pub psi: String,
    pub m: Dimension,
    #[serde(rename = "R")]
    pub r: f64,
    pub scheme: Scheme,
    /// Crank–Nicolson step cap; absent for the exact spectral flow.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dt: Option<f64>,
    pub w2_method: TransportMethod,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub u_points: Option<usize>,
    pub smoothing_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub s: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub deficit: f64,
    /// The transport distance entering the left side.
    pub w2_t: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ent_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ent_g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dim_term: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    PassWithWarning,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::PassWithWarning => "PASS-with-warning",
            Verdict::Fail => "FAIL",
        }
    }

    pub fn passed(self) -> bool {
        self != Verdict::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub min_deficit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub argmin_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub argmin_s: Option<f64>,
    pub tolerance: f64,
    pub tolerance_model: ToleranceModel,
    /// Rows with `−tol ≤ deficit < 0`.
    pub warnings: usize,
    /// Rows with `deficit < −tol`.
    pub failures: usize,
    pub verdict: Verdict,
}

impl Summary {
    pub fn of(rows: &[ReportRow], tolerance: f64, model: ToleranceModel) -> Self {
        let worst = rows
            .iter()
            .fold(None::<&ReportRow>, |acc, r| match acc {
                Some(a) if a.deficit <= r.deficit => Some(a),
                _ => Some(r),
            });
        let warnings = rows
            .iter()
            .filter(|r| r.deficit < 0.0 && r.deficit >= -tolerance)
            .count();
        let failures = rows.iter().filter(|r| !(r.deficit >= -tolerance)).count();
        let verdict = if failures > 0 {
            Verdict::Fail
        } else if warnings > 0 {
            Verdict::PassWithWarning
        } else {
            Verdict::Pass
        };
        Summary {
            min_deficit: worst.map(|r| r.deficit),
            argmin_t: worst.map(|r| r.t),
            argmin_s: worst.and_then(|r| r.s),
            tolerance,
            tolerance_model: model,
            warnings,
            failures,
            verdict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: InequalityName,
    pub params: ReportParams,
    pub rows: Vec<ReportRow>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl InequalityReport {
    /// Rows with a deficit below `−tolerance`.
    pub fn failing_rows(&self) -> Vec<&ReportRow> {
        self.rows
            .iter()
            .filter(|r| !(r.deficit >= -self.summary.tolerance))
            .collect()
    }
}

/// `n` evenly spaced times from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    stop
                } else {
                    start + (stop - start) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// All `(s, t)` pairs of two time lists.
pub fn product_grid(s: &[f64], t: &[f64]) -> Vec<(f64, f64)> {
    s.iter().flat_map(|&a| t.iter().map(move |&b| (a, b))).collect()
}

fn check_times(times: &[f64]) -> Result<()> {
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    Ok(())
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// The evolution, transport solver and tolerance shared by one run.
struct Setup<'a> {
    ws: &'a WeightedSpace,
    sg: HeatSemigroup<'a>,
    scheme: Scheme,
    dt: Option<f64>,
    method: TransportMethod,
    opts: &'a RunOptions,
    notes: Vec<String>,
}

impl<'a> Setup<'a> {
    fn new(ws: &'a WeightedSpace, opts: &'a RunOptions) -> Result<Self> {
        let scheme = opts.scheme.unwrap_or(if ws.weight().is_zero() {
            Scheme::Spectral
        } else {
            Scheme::CrankNicolson
        });
        let (sg, dt) = match scheme {
            Scheme::Spectral => (HeatSemigroup::new(ws, Scheme::Spectral)?, None),
            Scheme::CrankNicolson => {
                let dt = opts.dt_max.unwrap_or_else(|| default_dt_max(ws));
                if !(dt > 0.0) {
                    return Err(Error::Config(format!("dt_max must be positive, got {dt}")));
                }
                (HeatSemigroup::crank_nicolson(ws, dt), Some(dt))
            }
        };
        let method = match opts.w2_method {
            Some(m) => m,
            None => exact_method(ws.space().kind()).unwrap_or(TransportMethod::Sinkhorn),
        };
        if !(opts.smoothing_eps >= 0.0) {
            return Err(Error::Config("smoothing_eps must be nonnegative".into()));
        }
        Ok(Setup {
            ws,
            sg,
            scheme,
            dt,
            method,
            opts,
            notes: Vec::new(),
        })
    }

    fn check_inputs(&self, f: &DensityField, g: &DensityField) -> Result<()> {
        for r in [f, g] {
            if r.grid() != &self.ws.key() {
                return Err(Error::Input(format!(
                    "density on {} used with {}",
                    r.grid(),
                    self.ws.key()
                )));
            }
        }
        Ok(())
    }

    fn smooth(&self, f: &DensityField) -> Result<DensityField> {
        let eps = self.opts.smoothing_eps;
        if eps == 0.0 {
            return Ok(f.clone());
        }
        let p = self.sg.evolve(f.values(), eps)?;
        Ok(f.with_values(p.iter().map(|v| (v + eps) / (1.0 + eps)).collect()))
    }

    fn trajectory(&self, f: &DensityField, times: &[f64]) -> Result<Trajectory> {
        let values = self.sg.trajectory(f.values(), times)?;
        Ok(Trajectory {
            times: times.to_vec(),
            values,
        })
    }

    fn w2(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let key = self.ws.key();
        let ra = DensityField::from_raw(key.clone(), a.to_vec());
        let rb = DensityField::from_raw(key, b.to_vec());
        Ok(transport::w2(&ra, &rb, self.ws, self.method, &self.opts.sinkhorn)?.w2)
    }

    fn entropy(&mut self, v: &[f64], t: f64) -> f64 {
        let e = entropy_clamped(v, self.ws);
        if e.clamped_nodes > 0 {
            self.notes.push(format!(
                "entropy floor applied at {} nodes at t = {t}",
                e.clamped_nodes
            ));
        }
        e.value
    }

    fn params(&self, m: Dimension, r: f64, u_points: Option<usize>) -> ReportParams {
        let space = self.ws.space();
        ReportParams {
            space: space.kind(),
            grid: self.ws.key().to_string(),
            resolution: space.dims().to_vec(),
            psi: self.ws.weight().descriptor().to_string(),
            m,
            r,
            scheme: self.scheme,
            dt: self.dt,
            w2_method: self.method,
            u_points,
            smoothing_eps: self.opts.smoothing_eps,
        }
    }

    fn tolerance(&self, u_points: Option<usize>) -> f64 {
        self.opts
            .tolerance
            .evaluate(self.ws.space().h(), self.dt, u_points, self.method)
    }
}

struct Trajectory {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl Trajectory {
    fn index(&self, t: f64) -> usize {
        self.times
            .binary_search_by(|x| x.total_cmp(&t))
            .expect("time was requested")
    }

    fn at(&self, t: f64) -> &[f64] {
        &self.values[self.index(t)]
    }
}

/// The `u`-nodes of the trapezoid rule on `[0, t]`.
fn u_nodes(t: f64, u_points: usize) -> Vec<f64> {
    linspace(0.0, t, u_points)
}

/// `W₂²(P_tf, P_tg) ≤ e^{−2Rt}W₂²(f, g) − (2/m)∫₀ᵗ e^{−2R(t−u)}[Ent(P_ug) − Ent(P_uf)]² du`
/// at every time of `t_grid`.
pub fn run_main_contraction(
    f: &DensityField,
    g: &DensityField,
    ws: &WeightedSpace,
    cd: &CDParams,
    t_grid: &[f64],
    opts: &RunOptions,
) -> Result<InequalityReport> {
    contraction(InequalityName::MainDimensional, f, g, ws, cd, t_grid, opts)
}

/// `W₂²(P_tf, P_tg) ≤ e^{−2Rt}W₂²(f, g)`; needs `m = ∞`.
pub fn run_vrs_limit(
    f: &DensityField,
    g: &DensityField,
    ws: &WeightedSpace,
    cd: &CDParams,
    t_grid: &[f64],
    opts: &RunOptions,
) -> Result<InequalityReport> {
    if cd.m != Dimension::Infinite {
        return Err(Error::Input(format!(
            "the dimension-free bound needs m = inf, got m = {}",
            cd.m
        )));
    }
    contraction(InequalityName::VrsLimit, f, g, ws, cd, t_grid, opts)
}

fn contraction(
    name: InequalityName,
    f: &DensityField,
    g: &DensityField,
    ws: &WeightedSpace,
    cd: &CDParams,
    t_grid: &[f64],
    opts: &RunOptions,
) -> Result<InequalityReport> {
    cd.check_feasible(ws.space(), ws.weight())?;
    check_times(t_grid)?;
    let dimensional = name == InequalityName::MainDimensional && cd.m.recip() > 0.0;
    if dimensional && opts.u_points < 2 {
        return Err(Error::Config(format!(
            "u_points must be at least 2, got {}",
            opts.u_points
        )));
    }
    let mut setup = Setup::new(ws, opts)?;
    setup.check_inputs(f, g)?;
    let f = setup.smooth(f)?;
    let g = setup.smooth(g)?;

    let t_grid = sorted_unique(t_grid.to_vec());
    let mut times = t_grid.clone();
    if dimensional {
        for &t in &t_grid {
            times.extend(u_nodes(t, opts.u_points));
        }
    }
    times.push(0.0);
    let times = sorted_unique(times);
    let pf = setup.trajectory(&f, &times)?;
    let pg = setup.trajectory(&g, &times)?;
    let ent_f: Vec<f64> = times
        .iter()
        .zip(&pf.values)
        .map(|(t, v)| setup.entropy(v, *t))
        .collect();
    let ent_g: Vec<f64> = times
        .iter()
        .zip(&pg.values)
        .map(|(t, v)| setup.entropy(v, *t))
        .collect();

    let w0 = setup.w2(pf.at(0.0), pg.at(0.0))?;
    let w0_sq = w0 * w0;
    let inv_m = cd.m.recip();
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in &t_grid {
        let w = if t == 0.0 { w0 } else { setup.w2(pf.at(t), pg.at(t))? };
        let lhs = w * w;
        let dim_term = if dimensional {
            let u = u_nodes(t, opts.u_points);
            let integrand: Vec<f64> = u
                .iter()
                .map(|&uu| {
                    let k = pf.index(uu);
                    let d = ent_g[k] - ent_f[k];
                    (-2.0 * cd.r * (t - uu)).exp() * d * d
                })
                .collect();
            let integral: f64 = (1..u.len())
                .map(|j| 0.5 * (u[j] - u[j - 1]) * (integrand[j] + integrand[j - 1]))
                .sum();
            Some(2.0 * inv_m * integral)
        } else if name == InequalityName::MainDimensional {
            Some(0.0)
        } else {
            None
        };
        let rhs = (-2.0 * cd.r * t).exp() * w0_sq - dim_term.unwrap_or(0.0);
        let k = pf.index(t);
        rows.push(ReportRow {
            t,
            s: None,
            lhs,
            rhs,
            deficit: rhs - lhs,
            w2_t: w,
            ent_f: Some(ent_f[k]),
            ent_g: Some(ent_g[k]),
            dim_term,
        });
    }
    let u_points = dimensional.then_some(opts.u_points);
    let tol = setup.tolerance(u_points);
    let params = setup.params(cd.m, cd.r, u_points);
    let mut notes = std::mem::take(&mut setup.notes);
    notes.dedup();
    Ok(InequalityReport {
        name,
        params,
        summary: Summary::of(&rows, tol, opts.tolerance),
        rows,
        notes,
    })
}

/// Best `R` for `m = n`, which must be admissible on `ws`.
fn intrinsic_cd(ws: &WeightedSpace, what: &str) -> Result<CDParams> {
    let n = ws.space().dim() as f64;
    if !ws.weight().is_zero() {
        return Err(Error::Precondition(format!(
            "{what} uses the intrinsic dimension m = n, which requires Ψ ≡ 0"
        )));
    }
    cd_best_R(ws.space(), ws.weight(), Dimension::Finite(n))
}

/// Both flows at the times of a two-time grid, plus the initial distance.
struct TwoTime<'a> {
    setup: Setup<'a>,
    pf: Trajectory,
    pg: Trajectory,
    w0: f64,
    pairs: Vec<(f64, f64)>,
}

fn two_time<'a>(
    f: &DensityField,
    g: &DensityField,
    ws: &'a WeightedSpace,
    st_grid: &[(f64, f64)],
    opts: &'a RunOptions,
) -> Result<TwoTime<'a>> {
    let flat: Vec<f64> = st_grid.iter().flat_map(|(s, t)| [*s, *t]).collect();
    check_times(&flat)?;
    let setup = Setup::new(ws, opts)?;
    setup.check_inputs(f, g)?;
    let f = setup.smooth(f)?;
    let g = setup.smooth(g)?;
    let mut times = flat;
    times.push(0.0);
    let times = sorted_unique(times);
    let pf = setup.trajectory(&f, &times)?;
    let pg = setup.trajectory(&g, &times)?;
    let w0 = setup.w2(pf.at(0.0), pg.at(0.0))?;
    let mut pairs = st_grid.to_vec();
    // rows sorted by time, then by the second time
    pairs.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    pairs.dedup();
    Ok(TwoTime {
        setup,
        pf,
        pg,
        w0,
        pairs,
    })
}

/// `W₂²(P_sf, P_tg) ≤ W₂²(f, g) + 2n(√s − √t)²` under nonnegative curvature.
pub fn run_simple_two_time(
    f: &DensityField,
    g: &DensityField,
    ws: &WeightedSpace,
    st_grid: &[(f64, f64)],
    opts: &RunOptions,
) -> Result<InequalityReport> {
    let cd = intrinsic_cd(ws, "the two-time bound")?;
    if cd.r < 0.0 {
        return Err(Error::Precondition(format!(
            "the two-time bound needs nonnegative curvature, best R = {}",
            cd.r
        )));
    }
    let run = two_time(f, g, ws, st_grid, opts)?;
    let n = ws.space().dim() as f64;
    let w0_sq = run.w0 * run.w0;
    let mut rows = Vec::with_capacity(run.pairs.len());
    for &(s, t) in &run.pairs {
        let w = if s == 0.0 && t == 0.0 {
            run.w0
        } else {
            run.setup.w2(run.pf.at(s), run.pg.at(t))?
        };
        let lhs = w * w;
        let gap = s.sqrt() - t.sqrt();
        let rhs = w0_sq + 2.0 * n * gap * gap;
        rows.push(ReportRow {
            t,
            s: Some(s),
            lhs,
            rhs,
            deficit: rhs - lhs,
            w2_t: w,
            ent_f: None,
            ent_g: None,
            dim_term: None,
        });
    }
    let tol = run.setup.tolerance(None);
    Ok(InequalityReport {
        name: InequalityName::SimpleTwoTime,
        params: run.setup.params(cd.m, cd.r, None),
        summary: Summary::of(&rows, tol, opts.tolerance),
        rows,
        notes: Vec::new(),
    })
}

/// `s_r(x) = sin(√r x)/√r` for `r > 0`, `sinh(√−r x)/√−r` for `r < 0`, and
/// `x` for `r = 0`.
pub fn s_r(r: f64, x: f64) -> f64 {
    if r > 0.0 {
        let q = r.sqrt();
        (q * x).sin() / q
    } else if r < 0.0 {
        let q = (-r).sqrt();
        (q * x).sinh() / q
    } else {
        x
    }
}

/// `(1 − e^{−x})/x`, continuous at `x = 0`.
fn one_minus_exp_ratio(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// `s_{R/n}(½W₂(P_tf, P_sg))² ≤ e^{−R(t+s)}s_{R/n}(½W₂(f, g))²
/// + (n/R)(1 − e^{−R(s+t)})(√t − √s)²/(2(t+s))`, with `R` the best constant
/// for `m = n`. The second term is evaluated through its continuous extension
/// `(n/2)(√t − √s)²·(1 − e^{−R(s+t)})/(R(s+t))`, which covers `R = 0` and
/// `s + t = 0`.
pub fn run_eks_bound(
    f: &DensityField,
    g: &DensityField,
    ws: &WeightedSpace,
    st_grid: &[(f64, f64)],
    opts: &RunOptions,
) -> Result<InequalityReport> {
    let cd = intrinsic_cd(ws, "the two-time curvature bound")?;
    let run = two_time(f, g, ws, st_grid, opts)?;
    let n = ws.space().dim() as f64;
    let r = cd.r / n;
    let half0 = s_r(r, 0.5 * run.w0);
    let init = half0 * half0;
    let mut rows = Vec::with_capacity(run.pairs.len());
    let mut limit_rows = 0;
    for &(s, t) in &run.pairs {
        let w = if s == 0.0 && t == 0.0 {
            run.w0
        } else {
            run.setup.w2(run.pf.at(t), run.pg.at(s))?
        };
        let half = s_r(r, 0.5 * w);
        let lhs = half * half;
        let sum = s + t;
        if sum == 0.0 {
            limit_rows += 1;
        }
        let gap = t.sqrt() - s.sqrt();
        let rhs = (-cd.r * sum).exp() * init + 0.5 * n * one_minus_exp_ratio(cd.r * sum) * gap * gap;
        rows.push(ReportRow {
            t,
            s: Some(s),
            lhs,
            rhs,
            deficit: rhs - lhs,
            w2_t: w,
            ent_f: None,
            ent_g: None,
            dim_term: None,
        });
    }
    let mut notes = Vec::new();
    if limit_rows > 0 {
        notes.push(
            "the second term at s + t = 0 is taken as its limit value 0".to_string(),
        );
    }
    if cd.r == 0.0 {
        notes.push("R = 0: second term (n/2)(√t − √s)²".to_string());
    }
    let tol = run.setup.tolerance(None);
    Ok(InequalityReport {
        name: InequalityName::Eks,
        params: run.setup.params(cd.m, cd.r, None),
        summary: Summary::of(&rows, tol, opts.tolerance),
        rows,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_r_branches() {
        assert_eq!(s_r(0.0, 0.7), 0.7);
        assert!((s_r(4.0, 0.3) - (0.6f64).sin() / 2.0).abs() < 1e-15);
        assert!((s_r(-4.0, 0.3) - (0.6f64).sinh() / 2.0).abs() < 1e-15);
        assert!((s_r(1e-12, 0.3) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn exp_ratio_is_continuous() {
        assert_eq!(one_minus_exp_ratio(0.0), 1.0);
        assert!((one_minus_exp_ratio(1e-20) - 1.0).abs() < 1e-15);
        assert!((one_minus_exp_ratio(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn linspace_hits_both_ends() {
        let t = linspace(0.0, 1.0, 10);
        assert_eq!(t.len(), 10);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[9], 1.0);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }
}
