//! 1-forms, the weighted divergence `δ_Ψ`, the Hodge–de Rham semigroup
//! `R_t = e^{tL⃗}` and pointwise checks of the Bochner-type identities it
//! satisfies.
//!
//! On the circle and the flat torus the Levi-Civita connection is trivial in
//! the angle coordinates, so `∇η` is the matrix of component derivatives and
//! `L⃗ω = Lω − Hess Ψ(ω, ·)` componentwise.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldSampler;
use crate::geometry::{CDParams, GridKey, SpaceKind, Sym2};
use crate::ops::{Parity, WeightedSpace};
use crate::semigroup::{default_dt_max, HeatSemigroup, NodalField, ScalarField, SlackField};
use crate::stepper::{split_interval, CnStepper};

/// A covector field: `comps[c][k]` is component `c` at node `k` in the
/// orthonormal frame (`dθ` on the circle and sphere, `dx, dy` on the torus).
#[derive(Debug, Clone, PartialEq)]
pub struct OneFormField {
    grid: GridKey,
    comps: Vec<Vec<f64>>,
}

impl OneFormField {
    pub fn new(ws: &WeightedSpace, comps: Vec<Vec<f64>>) -> Result<Self> {
        let want = ws.space().form_components();
        if comps.len() != want {
            return Err(Error::Input(format!(
                "1-form on {} needs {want} components, got {}",
                ws.key(),
                comps.len()
            )));
        }
        for (c, comp) in comps.iter().enumerate() {
            ws.check_len(comp.len(), "1-form component")?;
            if let Some(k) = comp.iter().position(|v| !v.is_finite()) {
                return Err(Error::Input(format!(
                    "1-form component {c} not finite at node {k}"
                )));
            }
        }
        Ok(OneFormField {
            grid: ws.key(),
            comps,
        })
    }

    pub fn zero(ws: &WeightedSpace) -> Self {
        OneFormField {
            grid: ws.key(),
            comps: vec![vec![0.0; ws.len()]; ws.space().form_components()],
        }
    }

    /// Samples component functions `f(x) -> [ω_1, ω_2]`.
    pub fn from_fn(ws: &WeightedSpace, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let nc = ws.space().form_components();
        let mut comps = vec![Vec::with_capacity(ws.len()); nc];
        for k in 0..ws.len() {
            let v = f(&ws.space().coords(k));
            if v.len() != nc {
                return Err(Error::Input(format!(
                    "1-form sampler returned {} components, expected {nc}",
                    v.len()
                )));
            }
            for (c, x) in v.into_iter().enumerate() {
                comps[c].push(x);
            }
        }
        Self::new(ws, comps)
    }

    /// The exact form `df` from central differences.
    pub fn exact(ws: &WeightedSpace, f: &ScalarField) -> Result<Self> {
        check_grid(&f.grid().clone(), ws)?;
        Ok(OneFormField {
            grid: ws.key(),
            comps: ws.gradient(f.values()),
        })
    }

    /// A seeded truncated Fourier 1-form.
    pub fn random(ws: &WeightedSpace, sampler: &mut FieldSampler) -> Self {
        let comps = (0..ws.space().form_components())
            .map(|_| sampler.field(ws.space()))
            .collect();
        OneFormField {
            grid: ws.key(),
            comps,
        }
    }

    pub fn grid(&self) -> &GridKey {
        &self.grid
    }

    pub fn comps(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn into_comps(self) -> Vec<Vec<f64>> {
        self.comps
    }

    pub fn len(&self) -> usize {
        self.comps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Components at one node.
    pub fn at(&self, k: usize) -> Vec<f64> {
        self.comps.iter().map(|c| c[k]).collect()
    }

    /// Pointwise `η · α`.
    pub fn dot(&self, other: &OneFormField) -> Vec<f64> {
        dot(&self.comps, &other.comps)
    }

    /// Pointwise `|η|²`.
    pub fn norm_sq(&self) -> Vec<f64> {
        dot(&self.comps, &self.comps)
    }

    /// Pointwise product `f ω`.
    pub fn scaled(&self, f: &[f64]) -> OneFormField {
        OneFormField {
            grid: self.grid.clone(),
            comps: self
                .comps
                .iter()
                .map(|c| c.iter().zip(f).map(|(a, b)| a * b).collect())
                .collect(),
        }
    }

    pub(crate) fn from_raw(grid: GridKey, comps: Vec<Vec<f64>>) -> Self {
        OneFormField { grid, comps }
    }
}

fn dot(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; a[0].len()];
    for (x, y) in a.iter().zip(b) {
        for (o, (p, q)) in out.iter_mut().zip(x.iter().zip(y)) {
            *o += p * q;
        }
    }
    out
}

fn check_grid(grid: &GridKey, ws: &WeightedSpace) -> Result<()> {
    if grid != &ws.key() {
        return Err(Error::Input(format!("field on {grid} used with {}", ws.key())));
    }
    Ok(())
}

fn require_flat(ws: &WeightedSpace, what: &str) -> Result<()> {
    if ws.space().kind() == SpaceKind::SphereZonal {
        return Err(Error::UnsupportedSpace(format!(
            "{what} is only available on the circle and the flat torus"
        )));
    }
    Ok(())
}

pub(crate) fn delta_psi_raw(ws: &WeightedSpace, comps: &[Vec<f64>]) -> Vec<f64> {
    let grad = ws.weight().grad();
    match ws.space().kind() {
        SpaceKind::SphereZonal => {
            // (1/sin θ) ∂_θ(sin θ ω) − Ψ' ω; sin θ·ω is even across the poles.
            let theta = ws.space().axis(0);
            let sw: Vec<f64> = comps[0]
                .iter()
                .zip(theta)
                .map(|(w, t)| w * t.sin())
                .collect();
            let d = ws.derivative(0, &sw, Parity::Even);
            (0..sw.len())
                .map(|k| d[k] / theta[k].sin() - grad[0][k] * comps[0][k])
                .collect()
        }
        _ => {
            let mut out = vec![0.0; comps[0].len()];
            for (a, w) in comps.iter().enumerate() {
                let d = ws.derivative(a, w, Parity::Even);
                for k in 0..out.len() {
                    out[k] += d[k] - grad[a][k] * w[k];
                }
            }
            out
        }
    }
}

/// Weighted divergence `δ_Ψω = ∇·ω* − ∇Ψ·ω*`, the `L²(μ)` adjoint of `−d`.
pub fn delta_psi(omega: &OneFormField, ws: &WeightedSpace) -> Result<ScalarField> {
    check_grid(omega.grid(), ws)?;
    ScalarField::new(ws, delta_psi_raw(ws, &omega.comps))
}

fn hessian_apply(hess: &[Sym2], comps: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = comps[0].len();
    let mut out = vec![vec![0.0; n]; comps.len()];
    for (k, h) in hess.iter().enumerate() {
        let v: Vec<f64> = comps.iter().map(|c| c[k]).collect();
        for (o, x) in out.iter_mut().zip(h.apply(&v)) {
            o[k] = x;
        }
    }
    out
}

pub(crate) fn hodge_generator_raw(ws: &WeightedSpace, comps: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let hw = hessian_apply(ws.weight().hess(), comps);
    comps
        .iter()
        .zip(hw)
        .map(|(c, h)| {
            ws.generator(c)
                .into_iter()
                .zip(h)
                .map(|(l, h)| l - h)
                .collect()
        })
        .collect()
}

/// `L⃗ω = Lω − Hess Ψ(ω*, ·)`.
pub fn hodge_generator(omega: &OneFormField, ws: &WeightedSpace) -> Result<OneFormField> {
    check_grid(omega.grid(), ws)?;
    require_flat(ws, "the Hodge–de Rham operator")?;
    Ok(omega.with_comps(hodge_generator_raw(ws, &omega.comps)))
}

impl OneFormField {
    fn with_comps(&self, comps: Vec<Vec<f64>>) -> Self {
        OneFormField {
            grid: self.grid.clone(),
            comps,
        }
    }
}

/// `exp(−τ H)` for a symmetric 2×2 matrix.
fn sym2_exp_neg(h: &Sym2, tau: f64) -> [[f64; 2]; 2] {
    let mean = 0.5 * (h.xx + h.yy);
    let half_diff = 0.5 * (h.xx - h.yy);
    let d = (half_diff * half_diff + h.xy * h.xy).sqrt();
    let e = (-tau * mean).exp();
    let ch = (tau * d).cosh();
    let sh = if d * tau > 1e-8 {
        (tau * d).sinh() / d
    } else {
        tau * (1.0 + (tau * d).powi(2) / 6.0)
    };
    [
        [e * (ch - sh * half_diff), -e * sh * h.xy],
        [-e * sh * h.xy, e * (ch + sh * half_diff)],
    ]
}

struct HodgeStep<'a> {
    cn: CnStepper<'a>,
    /// Strang half-step factors for the torus Hessian coupling.
    half_exp: Option<Vec<[[f64; 2]; 2]>>,
}

impl<'a> HodgeStep<'a> {
    fn new(ws: &'a WeightedSpace, dt: f64) -> Self {
        match ws.space().kind() {
            SpaceKind::Circle => {
                let r = ws.weight().hess().iter().map(|h| h.xx).collect();
                HodgeStep {
                    cn: CnStepper::new(ws, dt, Some(r)),
                    half_exp: None,
                }
            }
            _ => {
                let half_exp = (!ws.weight().is_zero()).then(|| {
                    ws.weight()
                        .hess()
                        .iter()
                        .map(|h| sym2_exp_neg(h, 0.5 * dt))
                        .collect()
                });
                HodgeStep {
                    cn: CnStepper::new(ws, dt, None),
                    half_exp,
                }
            }
        }
    }

    fn apply_exp(e: &[[[f64; 2]; 2]], comps: &mut [Vec<f64>]) {
        for (k, m) in e.iter().enumerate() {
            let (a, b) = (comps[0][k], comps[1][k]);
            comps[0][k] = m[0][0] * a + m[0][1] * b;
            comps[1][k] = m[1][0] * a + m[1][1] * b;
        }
    }

    fn step(&self, comps: &mut [Vec<f64>]) {
        if let Some(e) = &self.half_exp {
            Self::apply_exp(e, comps);
        }
        for c in comps.iter_mut() {
            *c = self.cn.step(c);
        }
        if let Some(e) = &self.half_exp {
            Self::apply_exp(e, comps);
        }
    }
}

/// A prepared Hodge–de Rham semigroup on the circle or the flat torus.
pub struct HodgeSemigroup<'a> {
    ws: &'a WeightedSpace,
    dt_max: f64,
}

impl<'a> HodgeSemigroup<'a> {
    pub fn new(ws: &'a WeightedSpace) -> Result<Self> {
        Self::with_dt_max(ws, default_dt_max(ws))
    }

    pub fn with_dt_max(ws: &'a WeightedSpace, dt_max: f64) -> Result<Self> {
        require_flat(ws, "the Hodge–de Rham semigroup")?;
        Ok(HodgeSemigroup { ws, dt_max })
    }

    /// `R_t ω` at each of the nondecreasing `times`.
    pub fn trajectory(&self, omega: &OneFormField, times: &[f64]) -> Result<Vec<OneFormField>> {
        check_grid(omega.grid(), self.ws)?;
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0)) {
            return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Input("trajectory times must be sorted".into()));
        }
        let mut u = omega.comps.clone();
        let mut now = 0.0;
        let mut out = Vec::with_capacity(times.len());
        let mut cached: Option<HodgeStep<'_>> = None;
        for &t in times {
            let (steps, dt) = split_interval(t - now, self.dt_max);
            if steps > 0 {
                if !cached.as_ref().is_some_and(|s| s.cn.dt() == dt) {
                    cached = Some(HodgeStep::new(self.ws, dt));
                }
                let stepper = cached.as_ref().expect("stepper prepared");
                for _ in 0..steps {
                    stepper.step(&mut u);
                }
            }
            now = t;
            out.push(omega.with_comps(u.clone()));
        }
        Ok(out)
    }

    pub fn evolve(&self, omega: &OneFormField, t: f64) -> Result<OneFormField> {
        Ok(self.trajectory(omega, &[t])?.pop().expect("one time requested"))
    }
}

/// `R_t ω`, the solution of `∂_t u = L⃗u` with `u(0) = ω`.
pub fn hodge_evolve(omega: &OneFormField, t: f64, ws: &WeightedSpace) -> Result<OneFormField> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    HodgeSemigroup::new(ws)?.evolve(omega, t)
}

/// `sup |P_t δ_Ψω − δ_Ψ R_t ω|`, both sides by Crank–Nicolson.
pub fn check_commutation(omega: &OneFormField, t: f64, ws: &WeightedSpace) -> Result<f64> {
    check_grid(omega.grid(), ws)?;
    require_flat(ws, "the commutation check")?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let div = delta_psi_raw(ws, &omega.comps);
    let lhs = HeatSemigroup::crank_nicolson(ws, default_dt_max(ws)).evolve(&div, t)?;
    let r = HodgeSemigroup::new(ws)?.evolve(omega, t)?;
    let rhs = delta_psi_raw(ws, &r.comps);
    Ok(lhs
        .iter()
        .zip(&rhs)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// Pieces shared by the refined BLW identity and the coercive corollary.
struct BochnerTerms {
    /// `L(|η|²/2) − η·L⃗η + 2bα·d|η|² + 4b²|α|²|η|²`
    lhs: Vec<f64>,
    /// `|∇η + 2b α⊗η|²`
    tensor_sq: Vec<f64>,
    /// `Ricci(L)(η*, η*)`
    ricci: Vec<f64>,
}

fn bochner_terms(ws: &WeightedSpace, eta: &[Vec<f64>], alpha: &[Vec<f64>], b: f64) -> BochnerTerms {
    let n = eta[0].len();
    let eta_sq = dot(eta, eta);
    let alpha_sq = dot(alpha, alpha);
    let half: Vec<f64> = eta_sq.iter().map(|v| 0.5 * v).collect();
    let l_half = ws.generator(&half);
    let le = hodge_generator_raw(ws, eta);
    let eta_le = dot(eta, &le);
    let d_eta_sq = ws.gradient(&eta_sq);
    let alpha_d = dot(alpha, &d_eta_sq);
    let lhs = (0..n)
        .map(|k| {
            l_half[k] - eta_le[k] + 2.0 * b * alpha_d[k] + 4.0 * b * b * alpha_sq[k] * eta_sq[k]
        })
        .collect();
    // ∇_i η_j for direction i, component j
    let grads: Vec<Vec<Vec<f64>>> = eta.iter().map(|c| ws.gradient(c)).collect();
    let mut tensor_sq = vec![0.0; n];
    for (j, gj) in grads.iter().enumerate() {
        for (i, gij) in gj.iter().enumerate() {
            for k in 0..n {
                let v = gij[k] + 2.0 * b * alpha[i][k] * eta[j][k];
                tensor_sq[k] += v * v;
            }
        }
    }
    let ricci = ws
        .weight()
        .hess()
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let v: Vec<f64> = eta.iter().map(|c| c[k]).collect();
            h.quad(&v)
        })
        .collect();
    BochnerTerms {
        lhs,
        tensor_sq,
        ricci,
    }
}

fn check_pair(eta: &OneFormField, alpha: &OneFormField, ws: &WeightedSpace) -> Result<()> {
    check_grid(eta.grid(), ws)?;
    check_grid(alpha.grid(), ws)?;
    Ok(())
}

/// Pointwise `LHS − RHS` of the refined Bochner–Lichnerowicz–Weitzenböck
/// identity `L(|η|²/2) − η·L⃗η + 2bα·d|η|² + 4b²|α|²|η|² =
/// |∇η + 2bα⊗η|² + Ricci(L)(η*, η*)`.
pub fn check_refined_blw(
    eta: &OneFormField,
    alpha: &OneFormField,
    b: f64,
    ws: &WeightedSpace,
) -> Result<SlackField> {
    check_pair(eta, alpha, ws)?;
    require_flat(ws, "the refined BLW check")?;
    let t = bochner_terms(ws, &eta.comps, &alpha.comps, b);
    Ok(SlackField::from_values(
        (0..t.lhs.len())
            .map(|k| t.lhs[k] - t.tensor_sq[k] - t.ricci[k])
            .collect(),
    ))
}

/// Sup-norm residuals of the three pointwise lemmas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormIdentityResiduals {
    /// `d(|η|²/2) = η^i ∇η_i`
    pub lemma1: f64,
    /// `d(η·α) = ∇η·α + ∇α·η`
    pub lemma2: f64,
    /// `Δ⃗(fη) = fΔ⃗η + ηΔf + 2∇_{∇f}η`
    pub lemma3: f64,
}

impl FormIdentityResiduals {
    pub fn max(&self) -> f64 {
        self.lemma1.max(self.lemma2).max(self.lemma3)
    }
}

/// Residuals of the three lemmas, computed with central differences and the
/// unweighted three-point Laplacian.
pub fn check_form_identities(
    eta: &OneFormField,
    alpha: &OneFormField,
    f: &ScalarField,
    ws: &WeightedSpace,
) -> Result<FormIdentityResiduals> {
    check_pair(eta, alpha, ws)?;
    check_grid(f.grid(), ws)?;
    require_flat(ws, "the form identities")?;
    let (e, a) = (&eta.comps, &alpha.comps);
    let n = eta.len();
    let ge: Vec<Vec<Vec<f64>>> = e.iter().map(|c| ws.gradient(c)).collect();
    let ga: Vec<Vec<Vec<f64>>> = a.iter().map(|c| ws.gradient(c)).collect();
    let dims = e.len();

    let half: Vec<f64> = eta.norm_sq().iter().map(|v| 0.5 * v).collect();
    let dh = ws.gradient(&half);
    let mut lemma1: f64 = 0.0;
    for i in 0..dims {
        for k in 0..n {
            let rhs: f64 = (0..dims).map(|j| e[j][k] * ge[j][i][k]).sum();
            lemma1 = lemma1.max((dh[i][k] - rhs).abs());
        }
    }

    let dea = ws.gradient(&eta.dot(alpha));
    let mut lemma2: f64 = 0.0;
    for i in 0..dims {
        for k in 0..n {
            let rhs: f64 = (0..dims)
                .map(|j| a[j][k] * ge[j][i][k] + e[j][k] * ga[j][i][k])
                .sum();
            lemma2 = lemma2.max((dea[i][k] - rhs).abs());
        }
    }

    let flat = WeightedSpace::flat(ws.space().clone());
    let fv = f.values();
    let df = flat.gradient(fv);
    let lap_f = flat.generator(fv);
    let mut lemma3: f64 = 0.0;
    for j in 0..dims {
        let fe: Vec<f64> = fv.iter().zip(&e[j]).map(|(x, y)| x * y).collect();
        let lap_fe = flat.generator(&fe);
        let lap_e = flat.generator(&e[j]);
        for k in 0..n {
            let cov: f64 = (0..dims).map(|i| df[i][k] * ge[j][i][k]).sum();
            let rhs = fv[k] * lap_e[k] + e[j][k] * lap_f[k] + 2.0 * cov;
            lemma3 = lemma3.max((lap_fe[k] - rhs).abs());
        }
    }
    Ok(FormIdentityResiduals {
        lemma1,
        lemma2,
        lemma3,
    })
}

/// Pointwise slack of `L(|η|²/2) − η·L⃗η + 2bα·d|η|² + 4b²|α|²|η|² ≥
/// (δ_Ψη + 2bα·η)²/m + R|η|²`.
pub fn check_coercive_corollary(
    eta: &OneFormField,
    alpha: &OneFormField,
    b: f64,
    cd: &CDParams,
    ws: &WeightedSpace,
) -> Result<SlackField> {
    check_pair(eta, alpha, ws)?;
    require_flat(ws, "the coercive corollary")?;
    cd.check_feasible(ws.space(), ws.weight())?;
    let t = bochner_terms(ws, &eta.comps, &alpha.comps, b);
    let div = delta_psi_raw(ws, &eta.comps);
    let ea = eta.dot(alpha);
    let e2 = eta.norm_sq();
    let inv_m = cd.m.recip();
    Ok(SlackField::from_values(
        (0..e2.len())
            .map(|k| t.lhs[k] - inv_m * (div[k] + 2.0 * b * ea[k]).powi(2) - cd.r * e2[k])
            .collect(),
    ))
}

/// Pointwise terms of the coercive semigroup estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CoerciveEstimate {
    /// `|R_tω|²/P_tg`
    pub lhs: Vec<f64>,
    /// `e^{−2Rt}P_t(|ω|²/g)`
    pub contraction: Vec<f64>,
    /// `(2/m)∫₀ᵗ e^{−2Ru}[P_tδ_Ψω − P_u(d log P_{t−u}g · R_{t−u}ω)]²/P_tg du`
    pub dim_term: Vec<f64>,
    /// `contraction − dim_term − lhs`
    pub deficit: SlackField,
}

/// Evaluates `|R_tω|²/P_tg ≤ e^{−2Rt}P_t(|ω|²/g) − (2/m)∫₀ᵗ …` pointwise,
/// with the `u`-integral by the trapezoid rule on `u_grid`.
pub fn check_coercive_estimate(
    omega: &OneFormField,
    g: &ScalarField,
    t: f64,
    u_grid: &[f64],
    cd: &CDParams,
    ws: &WeightedSpace,
) -> Result<CoerciveEstimate> {
    check_grid(omega.grid(), ws)?;
    check_grid(g.grid(), ws)?;
    require_flat(ws, "the coercive estimate")?;
    cd.check_feasible(ws.space(), ws.weight())?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    let gv = g.values();
    if let Some(k) = gv.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Input(format!(
            "g must be bounded away from zero (node {k} = {})",
            gv[k]
        )));
    }
    if u_grid.iter().any(|u| !(*u >= 0.0 && *u <= t)) || u_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Input(format!(
            "u grid must be sorted inside [0, {t}]"
        )));
    }
    let heat = HeatSemigroup::crank_nicolson(ws, default_dt_max(ws));
    let hodge = HodgeSemigroup::new(ws)?;
    let n = ws.len();

    let pg = heat.evolve(gv, t)?;
    let rw = hodge.evolve(omega, t)?;
    let lhs: Vec<f64> = rw.norm_sq().iter().zip(&pg).map(|(a, b)| a / b).collect();
    let w2g: Vec<f64> = omega.norm_sq().iter().zip(gv).map(|(a, b)| a / b).collect();
    let decay = (-2.0 * cd.r * t).exp();
    let contraction: Vec<f64> = heat.evolve(&w2g, t)?.iter().map(|v| decay * v).collect();

    let mut dim_term = vec![0.0; n];
    let inv_m = cd.m.recip();
    if inv_m > 0.0 && u_grid.len() >= 2 {
        let a = heat.evolve(&delta_psi_raw(ws, &omega.comps), t)?;
        // remaining times t − u in increasing order
        let taus: Vec<f64> = u_grid.iter().rev().map(|u| t - u).collect();
        for tau in &taus {
            if *tau < 0.0 {
                return Err(Error::Input("u grid exceeds t".into()));
            }
        }
        let taus: Vec<f64> = taus.iter().map(|v| v.max(0.0)).collect();
        let gs = heat.trajectory(gv, &taus)?;
        let ws_forms = hodge.trajectory(omega, &taus)?;
        let mut integrand = Vec::with_capacity(u_grid.len());
        for (j, &u) in u_grid.iter().enumerate() {
            let idx = u_grid.len() - 1 - j;
            let gg = &gs[idx];
            let dg = ws.gradient(gg);
            let eta = ws_forms[idx].comps();
            let q: Vec<f64> = (0..n)
                .map(|k| {
                    (0..dg.len()).map(|c| dg[c][k] * eta[c][k]).sum::<f64>() / gg[k]
                })
                .collect();
            let pq = heat.evolve(&q, u)?;
            let w = (-2.0 * cd.r * u).exp();
            integrand.push(
                (0..n)
                    .map(|k| w * (a[k] - pq[k]).powi(2) / pg[k])
                    .collect::<Vec<f64>>(),
            );
        }
        for j in 1..u_grid.len() {
            let du = u_grid[j] - u_grid[j - 1];
            for k in 0..n {
                dim_term[k] += 0.5 * du * (integrand[j][k] + integrand[j - 1][k]);
            }
        }
        for v in dim_term.iter_mut() {
            *v *= 2.0 * inv_m;
        }
    }
    let deficit = SlackField::from_values(
        (0..n)
            .map(|k| contraction[k] - dim_term[k] - lhs[k])
            .collect(),
    );
    Ok(CoerciveEstimate {
        lhs,
        contraction,
        dim_term,
        deficit,
    })
}

/// One residual of an identity check, optionally with an observed
/// convergence order from a coarser companion grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub name: String,
    pub grid: String,
    pub params: BTreeMap<String, f64>,
    pub residual: f64,
    pub order_estimate: Option<f64>,
}

impl ResidualRecord {
    pub fn new(name: &str, ws: &WeightedSpace, residual: f64) -> Self {
        ResidualRecord {
            name: name.to_string(),
            grid: ws.key().to_string(),
            params: BTreeMap::new(),
            residual,
            order_estimate: None,
        }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Records `log₂(coarse/fine)` for residuals at `h` and `h/2`.
    pub fn with_order(mut self, coarse: f64) -> Self {
        self.order_estimate = Some(observed_order(coarse, self.residual));
        self
    }
}

/// Observed order `log₂(e_coarse / e_fine)` under `h → h/2`.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}
