//! The weighted diffusion semigroup `P_t = e^{tL}`, the carré du champ
//! operators and relative entropy.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CDParams, GridKey, SpaceKind};
use crate::ops::WeightedSpace;
use crate::stepper::{split_interval, CnStepper};

/// Default lower bound a density must respect before its logarithm is taken.
pub const DENSITY_FLOOR: f64 = 1e-10;

/// Common view of nodal fields.
pub trait NodalField: Sized {
    fn grid(&self) -> &GridKey;
    fn values(&self) -> &[f64];
    /// Same kind of field on the same grid with new values.
    fn with_values(&self, values: Vec<f64>) -> Self;
}

/// A generic smooth function sampled at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridKey,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(ws: &WeightedSpace, values: Vec<f64>) -> Result<Self> {
        ws.check_len(values.len(), "scalar field")?;
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("scalar field not finite at node {k}")));
        }
        Ok(ScalarField {
            grid: ws.key(),
            values,
        })
    }

    pub fn from_fn(ws: &WeightedSpace, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::new(ws, ws.space().sample(f))
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl NodalField for ScalarField {
    fn grid(&self) -> &GridKey {
        &self.grid
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
    fn with_values(&self, values: Vec<f64>) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }
}

/// A probability density with respect to `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: GridKey,
    values: Vec<f64>,
}

impl DensityField {
    /// Wraps values that must already be positive with `∫ ρ dμ = 1` to 1e-10.
    pub fn new(ws: &WeightedSpace, values: Vec<f64>) -> Result<Self> {
        ws.check_len(values.len(), "density")?;
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Input(format!(
                "density must be positive and finite (node {k} = {})",
                values[k]
            )));
        }
        let mass = ws.measure().integrate(&values);
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::Input(format!(
                "density integrates to {mass} against the reference measure"
            )));
        }
        Ok(DensityField {
            grid: ws.key(),
            values,
        })
    }

    /// Divides positive values by their `μ`-integral.
    pub fn normalized(ws: &WeightedSpace, values: Vec<f64>) -> Result<Self> {
        ws.check_len(values.len(), "density")?;
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Input(format!(
                "density must be positive and finite (node {k} = {})",
                values[k]
            )));
        }
        let mass = ws.measure().integrate(&values);
        Self::new(ws, values.into_iter().map(|v| v / mass).collect())
    }

    pub fn from_fn(ws: &WeightedSpace, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::normalized(ws, ws.space().sample(f))
    }

    pub fn uniform(ws: &WeightedSpace) -> Self {
        DensityField {
            grid: ws.key(),
            values: vec![1.0; ws.len()],
        }
    }

    pub(crate) fn from_raw(grid: GridKey, values: Vec<f64>) -> Self {
        DensityField { grid, values }
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `(P_ε ρ + ε)/(1 + ε)`, the smoothing that makes densities bounded
    /// away from zero.
    pub fn smoothed(&self, ws: &WeightedSpace, eps: f64, scheme: Scheme) -> Result<Self> {
        if eps <= 0.0 {
            return Ok(self.clone());
        }
        let p = heat_evolve(self, eps, scheme, ws)?;
        Ok(self.with_values(
            p.values
                .iter()
                .map(|v| (v + eps) / (1.0 + eps))
                .collect(),
        ))
    }
}

impl NodalField for DensityField {
    fn grid(&self) -> &GridKey {
        &self.grid
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
    fn with_values(&self, values: Vec<f64>) -> Self {
        DensityField {
            grid: self.grid.clone(),
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exact exponential of the discrete generator in its eigenbasis
    /// (Fourier on the circle and torus, discrete Legendre functions on the
    /// zonal sphere). Requires `Ψ ≡ 0`.
    Spectral,
    CrankNicolson,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Scheme::Spectral),
            "crank_nicolson" | "cn" => Ok(Scheme::CrankNicolson),
            _ => Err(Error::Config(format!("unknown scheme {s:?}"))),
        }
    }
}

enum Plan {
    Fourier1d {
        eig: Vec<f64>,
        fwd: Arc<dyn Fft<f64>>,
        inv: Arc<dyn Fft<f64>>,
    },
    Fourier2d {
        nx: usize,
        ny: usize,
        eig_x: Vec<f64>,
        eig_y: Vec<f64>,
        fwd_x: Arc<dyn Fft<f64>>,
        inv_x: Arc<dyn Fft<f64>>,
        fwd_y: Arc<dyn Fft<f64>>,
        inv_y: Arc<dyn Fft<f64>>,
    },
    Eigen {
        sqrt_mass: Vec<f64>,
        vectors: DMatrix<f64>,
        values: Vec<f64>,
    },
    CrankNicolson {
        dt_max: f64,
    },
}

/// A prepared semigroup on one weighted space. Building it does the
/// expensive factorizations once so repeated evolutions are cheap.
pub struct HeatSemigroup<'a> {
    ws: &'a WeightedSpace,
    plan: Plan,
}

/// Default Crank–Nicolson step cap `h²/2`.
pub fn default_dt_max(ws: &WeightedSpace) -> f64 {
    let h = ws
        .space()
        .spacing()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    0.5 * h * h
}

fn periodic_eigenvalues(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            -2.0 * (1.0 - theta.cos()) / (h * h)
        })
        .collect()
}

impl<'a> HeatSemigroup<'a> {
    pub fn new(ws: &'a WeightedSpace, scheme: Scheme) -> Result<Self> {
        match scheme {
            Scheme::CrankNicolson => Ok(Self::crank_nicolson(ws, default_dt_max(ws))),
            Scheme::Spectral => Self::spectral(ws),
        }
    }

    /// Crank–Nicolson with an explicit step cap.
    pub fn crank_nicolson(ws: &'a WeightedSpace, dt_max: f64) -> Self {
        HeatSemigroup {
            ws,
            plan: Plan::CrankNicolson { dt_max },
        }
    }

    fn spectral(ws: &'a WeightedSpace) -> Result<Self> {
        if !ws.weight().is_zero() {
            return Err(Error::Config(
                "spectral scheme requires a vanishing potential".into(),
            ));
        }
        let space = ws.space();
        let mut planner = FftPlanner::new();
        let plan = match space.kind() {
            SpaceKind::Circle => {
                let n = space.len();
                Plan::Fourier1d {
                    eig: periodic_eigenvalues(n, space.spacing()[0]),
                    fwd: planner.plan_fft_forward(n),
                    inv: planner.plan_fft_inverse(n),
                }
            }
            SpaceKind::Torus2 => {
                let (nx, ny) = (space.dims()[0], space.dims()[1]);
                Plan::Fourier2d {
                    nx,
                    ny,
                    eig_x: periodic_eigenvalues(nx, space.spacing()[0]),
                    eig_y: periodic_eigenvalues(ny, space.spacing()[1]),
                    fwd_x: planner.plan_fft_forward(nx),
                    inv_x: planner.plan_fft_inverse(nx),
                    fwd_y: planner.plan_fft_forward(ny),
                    inv_y: planner.plan_fft_inverse(ny),
                }
            }
            SpaceKind::SphereZonal => {
                // Symmetrized generator M^{-1/2} K M^{-1/2} is tridiagonal.
                let n = space.len();
                let ax = &ws.axes()[0];
                let m = ws.mass();
                let sqrt_mass: Vec<f64> = m.iter().map(|v| v.sqrt()).collect();
                let mut s = DMatrix::<f64>::zeros(n, n);
                for k in 0..n {
                    let c_next = ax.cond[k];
                    let c_prev = ax.prev[k].map_or(0.0, |j| ax.cond[j]);
                    s[(k, k)] = -(c_next + c_prev) / m[k];
                    if k + 1 < n {
                        let off = c_next / (sqrt_mass[k] * sqrt_mass[k + 1]);
                        s[(k, k + 1)] = off;
                        s[(k + 1, k)] = off;
                    }
                }
                let eig = SymmetricEigen::new(s);
                Plan::Eigen {
                    sqrt_mass,
                    vectors: eig.eigenvectors,
                    values: eig.eigenvalues.iter().map(|v| v.min(0.0)).collect(),
                }
            }
        };
        Ok(HeatSemigroup { ws, plan })
    }

    pub fn space(&self) -> &WeightedSpace {
        self.ws
    }

    /// Eigenvalues of the discrete generator, when the plan is spectral.
    pub fn spectrum(&self) -> Option<Vec<f64>> {
        match &self.plan {
            Plan::Fourier1d { eig, .. } => Some(eig.clone()),
            Plan::Fourier2d { eig_x, eig_y, .. } => Some(
                eig_x
                    .iter()
                    .flat_map(|a| eig_y.iter().map(move |b| a + b))
                    .collect(),
            ),
            Plan::Eigen { values, .. } => Some(values.clone()),
            Plan::CrankNicolson { .. } => None,
        }
    }

    /// `P_t f` for raw nodal values.
    pub fn evolve(&self, f: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
        }
        self.ws.check_len(f.len(), "evolved field")?;
        if t == 0.0 {
            return Ok(f.to_vec());
        }
        Ok(match &self.plan {
            Plan::CrankNicolson { .. } => self
                .trajectory(f, &[t])?
                .pop()
                .expect("one time requested"),
            _ => self.spectral_apply(f, t),
        })
    }

    /// `P_t f` at each of the given times, which must be nondecreasing.
    /// Crank–Nicolson integrates through them in one pass.
    pub fn trajectory(&self, f: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.ws.check_len(f.len(), "evolved field")?;
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0)) {
            return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Input("trajectory times must be sorted".into()));
        }
        match &self.plan {
            Plan::CrankNicolson { dt_max } => {
                let mut out = Vec::with_capacity(times.len());
                let mut u = f.to_vec();
                let mut now = 0.0;
                let mut cached: Option<CnStepper<'_>> = None;
                for &t in times {
                    let (steps, dt) = split_interval(t - now, *dt_max);
                    if steps > 0 {
                        let reuse = cached.as_ref().is_some_and(|s| s.dt() == dt);
                        if !reuse {
                            cached = Some(CnStepper::new(self.ws, dt, None));
                        }
                        let stepper = cached.as_ref().expect("stepper prepared");
                        for _ in 0..steps {
                            u = guarded_step(self.ws, stepper, &u, 0);
                        }
                    }
                    now = t;
                    out.push(u.clone());
                }
                Ok(out)
            }
            _ => Ok(times
                .iter()
                .map(|&t| {
                    if t == 0.0 {
                        f.to_vec()
                    } else {
                        self.spectral_apply(f, t)
                    }
                })
                .collect()),
        }
    }

    fn spectral_apply(&self, f: &[f64], t: f64) -> Vec<f64> {
        match &self.plan {
            Plan::Fourier1d { eig, fwd, inv } => {
                let n = f.len();
                let mut buf: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
                fwd.process(&mut buf);
                for (c, l) in buf.iter_mut().zip(eig) {
                    *c *= (l * t).exp();
                }
                inv.process(&mut buf);
                buf.iter().map(|c| c.re / n as f64).collect()
            }
            Plan::Fourier2d {
                nx,
                ny,
                eig_x,
                eig_y,
                fwd_x,
                inv_x,
                fwd_y,
                inv_y,
            } => {
                let (nx, ny) = (*nx, *ny);
                let mut buf: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
                // rows are contiguous along y
                for row in buf.chunks_mut(ny) {
                    fwd_y.process(row);
                }
                let mut col = vec![Complex::new(0.0, 0.0); nx];
                for j in 0..ny {
                    for i in 0..nx {
                        col[i] = buf[i * ny + j];
                    }
                    fwd_x.process(&mut col);
                    for i in 0..nx {
                        col[i] *= ((eig_x[i] + eig_y[j]) * t).exp();
                    }
                    inv_x.process(&mut col);
                    for i in 0..nx {
                        buf[i * ny + j] = col[i];
                    }
                }
                for row in buf.chunks_mut(ny) {
                    inv_y.process(row);
                }
                let scale = (nx * ny) as f64;
                buf.iter().map(|c| c.re / scale).collect()
            }
            Plan::Eigen {
                sqrt_mass,
                vectors,
                values,
            } => {
                let g = DVector::from_iterator(
                    f.len(),
                    f.iter().zip(sqrt_mass).map(|(v, s)| v * s),
                );
                let mut coef = vectors.tr_mul(&g);
                for (c, l) in coef.iter_mut().zip(values) {
                    *c *= (l * t).exp();
                }
                let back = vectors * coef;
                back.iter().zip(sqrt_mass).map(|(v, s)| v / s).collect()
            }
            Plan::CrankNicolson { .. } => unreachable!("spectral_apply on a stepping plan"),
        }
    }
}

/// One Crank–Nicolson step that falls back to two half steps when the
/// result would leave a nonnegative field negative.
fn guarded_step(ws: &WeightedSpace, stepper: &CnStepper<'_>, u: &[f64], depth: usize) -> Vec<f64> {
    let next = stepper.step(u);
    let was_nonneg = u.iter().all(|v| *v >= 0.0);
    if !was_nonneg || depth >= 8 || next.iter().all(|v| *v >= 0.0) {
        return next;
    }
    let half = CnStepper::new(ws, 0.5 * stepper.dt(), None);
    let mid = guarded_step(ws, &half, u, depth + 1);
    guarded_step(ws, &half, &mid, depth + 1)
}

/// `P_t f` for a density or scalar field.
pub fn heat_evolve<F: NodalField>(f: &F, t: f64, scheme: Scheme, ws: &WeightedSpace) -> Result<F> {
    if f.grid() != &ws.key() {
        return Err(Error::Input(format!(
            "field on {} evolved on {}",
            f.grid(),
            ws.key()
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(f.with_values(f.values().to_vec()));
    }
    let sg = HeatSemigroup::new(ws, scheme)?;
    Ok(f.with_values(sg.evolve(f.values(), t)?))
}

fn check_grid<F: NodalField>(f: &F, ws: &WeightedSpace) -> Result<()> {
    if f.grid() != &ws.key() {
        return Err(Error::Input(format!(
            "field on {} used with {}",
            f.grid(),
            ws.key()
        )));
    }
    Ok(())
}

/// `Lf` with the conservative second-order stencil.
pub fn apply_generator(f: &ScalarField, ws: &WeightedSpace) -> Result<ScalarField> {
    check_grid(f, ws)?;
    Ok(f.with_values(ws.generator(f.values())))
}

/// Relative entropy `∫ ρ log ρ dμ`. Densities below [`DENSITY_FLOOR`] are
/// rejected.
pub fn entropy(rho: &DensityField, ws: &WeightedSpace) -> Result<f64> {
    check_grid(rho, ws)?;
    if let Some(k) = rho.values().iter().position(|v| *v < DENSITY_FLOOR) {
        return Err(Error::Input(format!(
            "density {} at node {k} below the entropy floor {DENSITY_FLOOR}",
            rho.values()[k]
        )));
    }
    Ok(entropy_clamped(rho.values(), ws).value)
}

/// Entropy of raw nodal values together with how much clamping was needed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEval {
    pub value: f64,
    pub clamped_nodes: usize,
    /// Largest `floor − ρ` over clamped nodes; zero when nothing was clamped.
    pub clamp_magnitude: f64,
}

pub fn entropy_clamped(values: &[f64], ws: &WeightedSpace) -> EntropyEval {
    let mut clamped_nodes = 0;
    let mut clamp_magnitude: f64 = 0.0;
    let value = values
        .iter()
        .zip(ws.measure().weights())
        .map(|(&r, &w)| {
            let rr = if r < DENSITY_FLOOR {
                clamped_nodes += 1;
                clamp_magnitude = clamp_magnitude.max(DENSITY_FLOOR - r);
                DENSITY_FLOOR
            } else {
                r
            };
            rr * rr.ln() * w
        })
        .sum();
    EntropyEval {
        value,
        clamped_nodes,
        clamp_magnitude,
    }
}

pub(crate) fn gamma_raw(ws: &WeightedSpace, f: &[f64], g: &[f64]) -> Vec<f64> {
    let df = ws.gradient(f);
    let dg = ws.gradient(g);
    let mut out = vec![0.0; f.len()];
    for (a, b) in df.iter().zip(&dg) {
        for (o, (x, y)) in out.iter_mut().zip(a.iter().zip(b)) {
            *o += x * y;
        }
    }
    out
}

/// Carré du champ `Γ(f, g) = ∇f · ∇g`.
pub fn gamma(f: &ScalarField, g: &ScalarField, ws: &WeightedSpace) -> Result<ScalarField> {
    check_grid(f, ws)?;
    check_grid(g, ws)?;
    Ok(f.with_values(gamma_raw(ws, f.values(), g.values())))
}

pub(crate) fn gamma2_raw(ws: &WeightedSpace, f: &[f64]) -> Vec<f64> {
    let g = gamma_raw(ws, f, f);
    let lg = ws.generator(&g);
    let lf = ws.generator(f);
    let cross = gamma_raw(ws, f, &lf);
    lg.iter()
        .zip(&cross)
        .map(|(a, b)| 0.5 * (a - 2.0 * b))
        .collect()
}

/// Iterated carré du champ `Γ₂(f) = ½(LΓ(f) − 2Γ(f, Lf))` built from
/// nested discrete operators.
pub fn gamma2(f: &ScalarField, ws: &WeightedSpace) -> Result<ScalarField> {
    check_grid(f, ws)?;
    Ok(f.with_values(gamma2_raw(ws, f.values())))
}

/// Pointwise slack of an inequality, with its minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackField {
    pub values: Vec<f64>,
    pub min: f64,
    pub argmin: usize,
}

impl SlackField {
    pub fn from_values(values: Vec<f64>) -> Self {
        let (argmin, min) = values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
        SlackField {
            values,
            min,
            argmin,
        }
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Slack of `Γ₂(f) + 2bΓ(g,Γ(f)) + 4b²Γ(f)Γ(g) ≥ (Lf + 2bΓ(f,g))²/m + RΓ(f)`,
/// the 1-form inequality for `η = df`, `α = dg`.
pub fn check_gamma2_cd(
    f: &ScalarField,
    g: &ScalarField,
    b: f64,
    cd: &CDParams,
    ws: &WeightedSpace,
) -> Result<SlackField> {
    check_grid(f, ws)?;
    check_grid(g, ws)?;
    let (fv, gv) = (f.values(), g.values());
    let g2 = gamma2_raw(ws, fv);
    let gam_f = gamma_raw(ws, fv, fv);
    let gam_g = gamma_raw(ws, gv, gv);
    let gam_fg = gamma_raw(ws, fv, gv);
    let gam_g_ff = gamma_raw(ws, gv, &gam_f);
    let lf = ws.generator(fv);
    let inv_m = cd.m.recip();
    let values = (0..fv.len())
        .map(|k| {
            let lhs = g2[k] + 2.0 * b * gam_g_ff[k] + 4.0 * b * b * gam_f[k] * gam_g[k];
            let rhs = inv_m * (lf[k] + 2.0 * b * gam_fg[k]).powi(2) + cd.r * gam_f[k];
            lhs - rhs
        })
        .collect();
    Ok(SlackField::from_values(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_model_space, cd_best_R, Dimension, WeightField};
    use crate::expr::Expr;
    use std::collections::HashMap;
    use std::f64::consts::PI;

    fn circle(n: usize) -> WeightedSpace {
        WeightedSpace::flat(build_model_space(SpaceKind::Circle, &[n]).unwrap())
    }

    fn weighted_circle(n: usize, a: f64) -> WeightedSpace {
        let s = build_model_space(SpaceKind::Circle, &[n]).unwrap();
        let mut p = HashMap::new();
        p.insert("a".to_string(), a);
        let e = Expr::parse("a*cos(theta)", &["theta"], &p).unwrap();
        let w = WeightField::from_expr(&s, &e, "a*cos(theta)").unwrap();
        WeightedSpace::new(s, w).unwrap()
    }

    fn sphere(n: usize) -> WeightedSpace {
        WeightedSpace::flat(build_model_space(SpaceKind::SphereZonal, &[n]).unwrap())
    }

    fn sup(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn generator_on_eigenfunctions() {
        let mut errs = Vec::new();
        for n in [128, 256] {
            let ws = circle(n);
            let f = ScalarField::from_fn(&ws, |x| x[0].cos()).unwrap();
            let lf = apply_generator(&f, &ws).unwrap();
            let want: Vec<f64> = f.values().iter().map(|v| -v).collect();
            errs.push(sup(lf.values(), &want));
        }
        assert!(errs[1] < 1e-4);
        assert!((errs[0] / errs[1] - 4.0).abs() < 0.2);
    }

    #[test]
    fn weighted_generator_matches_closed_form() {
        // L cos = cos'' − Ψ' cos' = −cos θ − 0.1 sin²θ for Ψ = 0.1 cos θ.
        let ws = weighted_circle(512, 0.1);
        let f = ScalarField::from_fn(&ws, |x| x[0].cos()).unwrap();
        let lf = apply_generator(&f, &ws).unwrap();
        let want = ws.space().sample(|x| -x[0].cos() - 0.1 * x[0].sin().powi(2));
        assert!(sup(lf.values(), &want) < 1e-4);
    }

    #[test]
    fn sphere_generator_on_first_legendre() {
        let ws = sphere(512);
        let f = ScalarField::from_fn(&ws, |x| x[0].cos()).unwrap();
        let lf = apply_generator(&f, &ws).unwrap();
        let want: Vec<f64> = f.values().iter().map(|v| -2.0 * v).collect();
        assert!(sup(lf.values(), &want) < 1e-4, "{}", sup(lf.values(), &want));
    }

    #[test]
    fn mismatched_grid_rejected() {
        let a = circle(64);
        let b = circle(32);
        let f = ScalarField::from_fn(&a, |x| x[0].cos()).unwrap();
        assert!(matches!(apply_generator(&f, &b), Err(Error::Input(_))));
    }

    #[test]
    fn spectral_circle_against_fourier_oracle() {
        let ws = circle(2048);
        let f = ScalarField::from_fn(&ws, |x| 1.0 + x[0].cos()).unwrap();
        let p = heat_evolve(&f, 1.0, Scheme::Spectral, &ws).unwrap();
        let want = ws.space().sample(|x| 1.0 + (-1.0f64).exp() * x[0].cos());
        assert!(sup(p.values(), &want) < 1e-6);
    }

    #[test]
    fn zero_time_is_identity() {
        for ws in [circle(64), weighted_circle(64, 0.2), sphere(64)] {
            let f = DensityField::from_fn(&ws, |x| 1.0 + 0.3 * (2.0 * x[0]).sin()).unwrap();
            for scheme in [Scheme::CrankNicolson, Scheme::Spectral] {
                if let Ok(p) = heat_evolve(&f, 0.0, scheme, &ws) {
                    assert_eq!(p, f);
                }
            }
        }
    }

    #[test]
    fn spectral_sphere_against_legendre_oracle() {
        let ws = sphere(512);
        let p2 = |t: f64| 0.5 * (3.0 * t.cos().powi(2) - 1.0);
        let f = DensityField::from_fn(&ws, |x| 1.0 + 0.5 * p2(x[0])).unwrap();
        let p = heat_evolve(&f, 0.5, Scheme::Spectral, &ws).unwrap();
        let want = ws.space().sample(|x| 1.0 + 0.5 * (-3.0f64).exp() * p2(x[0]));
        assert!(sup(p.values(), &want) < 1e-4, "{}", sup(p.values(), &want));
    }

    #[test]
    fn spectral_rejects_potential_and_negative_time() {
        let ws = weighted_circle(64, 0.1);
        let f = DensityField::uniform(&ws);
        assert!(matches!(
            heat_evolve(&f, 1.0, Scheme::Spectral, &ws),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            heat_evolve(&f, -1.0, Scheme::CrankNicolson, &ws),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn crank_nicolson_preserves_mass_and_positivity() {
        let ws = weighted_circle(128, 0.5);
        let f = DensityField::from_fn(&ws, |x| (20.0 * (x[0].cos() - 1.0)).exp() + 1e-6).unwrap();
        let p = heat_evolve(&f, 0.3, Scheme::CrankNicolson, &ws).unwrap();
        let mass = ws.measure().integrate(p.values());
        assert!((mass - 1.0).abs() < 1e-10);
        let min0 = f.values().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(p.values().iter().all(|v| *v >= min0));
    }

    #[test]
    fn torus_spectral_and_crank_nicolson_agree() {
        let s = build_model_space(SpaceKind::Torus2, &[32, 32]).unwrap();
        let ws = WeightedSpace::flat(s);
        let f = ScalarField::from_fn(&ws, |x| x[0].cos() + 0.5 * (x[0] + 2.0 * x[1]).sin()).unwrap();
        let a = heat_evolve(&f, 0.2, Scheme::Spectral, &ws).unwrap();
        let b = heat_evolve(&f, 0.2, Scheme::CrankNicolson, &ws).unwrap();
        let d = sup(a.values(), b.values());
        let dt = default_dt_max(&ws);
        let fine = HeatSemigroup::crank_nicolson(&ws, 0.5 * dt)
            .evolve(f.values(), 0.2)
            .unwrap();
        let d_fine = sup(a.values(), &fine);
        assert!(d < 2e-4, "{d}");
        assert!(d / d_fine > 3.0, "{d} {d_fine}");
        // continuum oracle with discrete-eigenvalue accuracy
        let want = ws
            .space()
            .sample(|x| (-0.2f64).exp() * x[0].cos() + 0.5 * (-1.0f64).exp() * (x[0] + 2.0 * x[1]).sin());
        assert!(sup(a.values(), &want) < 5e-3);
    }

    #[test]
    fn entropy_examples() {
        let ws = circle(256);
        assert_eq!(entropy(&DensityField::uniform(&ws), &ws).unwrap(), 0.0);
        let f = DensityField::from_fn(&ws, |x| 1.0 + 0.5 * x[0].cos()).unwrap();
        // Oracle: midpoint quadrature at 2^16 nodes.
        let m = 1 << 16;
        let oracle: f64 = (0..m)
            .map(|k| {
                let t = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                let r = 1.0 + 0.5 * t.cos();
                r * r.ln() / m as f64
            })
            .sum();
        assert!((oracle - 0.0646).abs() < 5e-5, "{oracle}");
        assert!((entropy(&f, &ws).unwrap() - oracle).abs() < 1e-10);

        let vm = |kappa: f64| {
            DensityField::from_fn(&ws, move |x| (kappa * (x[0].cos() - 1.0)).exp()).unwrap()
        };
        let e2 = entropy(&vm(2.0), &ws).unwrap();
        let e8 = entropy(&vm(8.0), &ws).unwrap();
        assert!(e8 > e2 && e2 > 0.0);
    }

    #[test]
    fn entropy_rejects_floor_violation() {
        let ws = circle(32);
        let mut v = vec![1.0; 32];
        v[0] = 1e-12;
        let f = DensityField::normalized(&ws, v).unwrap();
        assert!(matches!(entropy(&f, &ws), Err(Error::Input(_))));
        let eval = entropy_clamped(f.values(), &ws);
        assert_eq!(eval.clamped_nodes, 1);
    }

    #[test]
    fn gamma_examples() {
        let ws = circle(512);
        let f = ScalarField::from_fn(&ws, |x| x[0].cos()).unwrap();
        let g = ScalarField::from_fn(&ws, |x| x[0].sin()).unwrap();
        let fg = gamma(&f, &g, &ws).unwrap();
        let want = ws.space().sample(|x| -x[0].sin() * x[0].cos());
        assert!(sup(fg.values(), &want) < 1e-4);
        let gf = gamma(&g, &f, &ws).unwrap();
        assert_eq!(fg, gf);

        let s = build_model_space(SpaceKind::Torus2, &[64, 64]).unwrap();
        let tws = WeightedSpace::flat(s);
        let h = ScalarField::from_fn(&tws, |x| x[1].sin()).unwrap();
        let gh = gamma(&h, &h, &tws).unwrap();
        let want = tws.space().sample(|x| x[1].cos().powi(2));
        assert!(sup(gh.values(), &want) < 1e-2);
    }

    #[test]
    fn gamma2_flat_circle_is_second_derivative_squared() {
        let ws = circle(512);
        let f = ScalarField::from_fn(&ws, |x| x[0].cos()).unwrap();
        let g2 = gamma2(&f, &ws).unwrap();
        let want = ws.space().sample(|x| x[0].cos().powi(2));
        assert!(sup(g2.values(), &want) < 1e-3);
        let c = ScalarField::new(&ws, vec![2.0; 512]).unwrap();
        assert!(gamma2(&c, &ws).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gamma2_cd_on_sphere() {
        let ws = sphere(512);
        let cd = cd_best_R(ws.space(), ws.weight(), Dimension::Finite(2.0)).unwrap();
        let f = ScalarField::from_fn(&ws, |x| x[0].cos()).unwrap();
        let slack = check_gamma2_cd(&f, &f, 0.0, &cd, &ws).unwrap();
        assert!(slack.min > -1e-3, "{}", slack.min);
        let fg = ScalarField::from_fn(&ws, |x| 1.0 + 0.3 * x[0].cos()).unwrap();
        let slack = check_gamma2_cd(&fg, &fg, -0.5, &cd, &ws).unwrap();
        assert!(slack.min > -1e-3, "{}", slack.min);
    }

    #[test]
    fn gamma2_cd_equality_flat_circle() {
        let ws = circle(512);
        let cd = cd_best_R(ws.space(), ws.weight(), Dimension::Finite(1.0)).unwrap();
        let f = ScalarField::from_fn(&ws, |x| x[0].cos()).unwrap();
        let slack = check_gamma2_cd(&f, &f, 0.0, &cd, &ws).unwrap();
        assert!(slack.sup_abs() < 1e-3);
        let c = ScalarField::new(&ws, vec![1.0; 512]).unwrap();
        let slack = check_gamma2_cd(&c, &f, 0.7, &cd, &ws).unwrap();
        assert!(slack.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gamma2_cd_with_distinct_f_and_g() {
        // in 1D the slack is 4b·f'g'(f'' − f'') = 0 up to discretization
        let ws = circle(512);
        let cd = cd_best_R(ws.space(), ws.weight(), Dimension::Finite(1.0)).unwrap();
        let f = ScalarField::from_fn(&ws, |x| x[0].cos()).unwrap();
        let g = ScalarField::from_fn(&ws, |x| (2.0 * x[0]).sin() + 0.3 * x[0].cos()).unwrap();
        for b in [-2.0, 0.7] {
            let slack = check_gamma2_cd(&f, &g, b, &cd, &ws).unwrap();
            assert!(slack.sup_abs() < 1e-3, "{}", slack.sup_abs());
        }
    }
}
