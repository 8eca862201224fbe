//! Model spaces, reference measures and the curvature-dimension constant.
//!
//! Three compact model spaces are supported: the unit circle, the flat
//! square torus `[0, 2π)²` and the unit sphere restricted to zonal
//! (colatitude-only) data. Covariant derivatives are never assembled in
//! general form; each space hard-codes its metric factors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Minimum number of grid nodes per axis.
pub const MIN_RESOLUTION: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Circle,
    Torus2,
    SphereZonal,
}

impl SpaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpaceKind::Circle => "circle",
            SpaceKind::Torus2 => "torus2",
            SpaceKind::SphereZonal => "sphere_zonal",
        }
    }

    /// Names of the coordinates closed-form expressions may refer to.
    pub fn variables(self) -> &'static [&'static str] {
        match self {
            SpaceKind::Circle | SpaceKind::SphereZonal => &["theta"],
            SpaceKind::Torus2 => &["x", "y"],
        }
    }
}

impl std::str::FromStr for SpaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(SpaceKind::Circle),
            "torus2" | "torus" => Ok(SpaceKind::Torus2),
            "sphere_zonal" | "sphere" => Ok(SpaceKind::SphereZonal),
            _ => Err(Error::Config(format!("unknown space kind {s:?}"))),
        }
    }
}

/// Identity of a grid; fields carry one so that mismatched inputs are caught.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridKey {
    pub kind: SpaceKind,
    pub dims: Vec<usize>,
}

impl std::fmt::Display for GridKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}[{}]", self.kind.as_str(), dims.join("x"))
    }
}

/// A discretized compact manifold.
///
/// Circle nodes sit at `θ_k = 2πk/N`. Torus nodes are the product grid with
/// flat index `i * ny + j`. Sphere nodes sit at cell midpoints
/// `θ_k = (k + ½)π/N` so the poles are never nodes, and each node carries the
/// exact area of its colatitude band.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpace {
    kind: SpaceKind,
    dims: Vec<usize>,
    axes: Vec<Vec<f64>>,
    h: Vec<f64>,
    vol_weights: Vec<f64>,
}

impl ModelSpace {
    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn key(&self) -> GridKey {
        GridKey {
            kind: self.kind,
            dims: self.dims.clone(),
        }
    }

    /// Intrinsic dimension `n` of the manifold.
    pub fn dim(&self) -> usize {
        match self.kind {
            SpaceKind::Circle => 1,
            SpaceKind::Torus2 | SpaceKind::SphereZonal => 2,
        }
    }

    /// Number of covector components stored per node.
    pub fn form_components(&self) -> usize {
        match self.kind {
            SpaceKind::Torus2 => 2,
            _ => 1,
        }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-axis node coordinates.
    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    /// Largest grid spacing, the `h` of error estimates.
    pub fn h(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    pub fn vol_weights(&self) -> &[f64] {
        &self.vol_weights
    }

    pub fn analytic_volume(&self) -> f64 {
        match self.kind {
            SpaceKind::Circle => 2.0 * PI,
            SpaceKind::Torus2 => 4.0 * PI * PI,
            SpaceKind::SphereZonal => 4.0 * PI,
        }
    }

    /// Coordinates of node `k`: `[θ]` or `[x, y]`.
    pub fn coords(&self, k: usize) -> Vec<f64> {
        match self.kind {
            SpaceKind::Torus2 => {
                let ny = self.dims[1];
                vec![self.axes[0][k / ny], self.axes[1][k % ny]]
            }
            _ => vec![self.axes[0][k]],
        }
    }

    /// Samples a closure of the node coordinates.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|k| f(&self.coords(k))).collect()
    }

    /// Squared geodesic distance between two nodes.
    pub fn geodesic_sq(&self, a: usize, b: usize) -> f64 {
        match self.kind {
            SpaceKind::Circle => circle_dist(self.axes[0][a], self.axes[0][b]).powi(2),
            SpaceKind::Torus2 => {
                let (ca, cb) = (self.coords(a), self.coords(b));
                circle_dist(ca[0], cb[0]).powi(2) + circle_dist(ca[1], cb[1]).powi(2)
            }
            // Zonal nodes stand for whole latitude bands; this is the
            // distance along a meridian.
            SpaceKind::SphereZonal => (self.axes[0][a] - self.axes[0][b]).powi(2),
        }
    }
}

/// Shortest arc between two angles on the unit circle.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Builds a model space. `resolution` holds one entry per axis; a single
/// entry for the torus is used for both axes.
pub fn build_model_space(kind: SpaceKind, resolution: &[usize]) -> Result<ModelSpace> {
    let dims: Vec<usize> = match (kind, resolution) {
        (SpaceKind::Torus2, [n]) => vec![*n, *n],
        (SpaceKind::Torus2, [nx, ny]) => vec![*nx, *ny],
        (SpaceKind::Circle | SpaceKind::SphereZonal, [n]) => vec![*n],
        _ => {
            return Err(Error::Config(format!(
                "{} needs {} resolution entries, got {}",
                kind.as_str(),
                if kind == SpaceKind::Torus2 { "1 or 2" } else { "1" },
                resolution.len()
            )))
        }
    };
    if let Some(&bad) = dims.iter().find(|&&n| n < MIN_RESOLUTION) {
        return Err(Error::Config(format!(
            "resolution {bad} below minimum {MIN_RESOLUTION}"
        )));
    }

    let space = match kind {
        SpaceKind::Circle => {
            let n = dims[0];
            let h = 2.0 * PI / n as f64;
            ModelSpace {
                kind,
                axes: vec![(0..n).map(|k| k as f64 * h).collect()],
                h: vec![h],
                vol_weights: vec![h; n],
                dims,
            }
        }
        SpaceKind::Torus2 => {
            let (nx, ny) = (dims[0], dims[1]);
            let hx = 2.0 * PI / nx as f64;
            let hy = 2.0 * PI / ny as f64;
            ModelSpace {
                kind,
                axes: vec![
                    (0..nx).map(|i| i as f64 * hx).collect(),
                    (0..ny).map(|j| j as f64 * hy).collect(),
                ],
                h: vec![hx, hy],
                vol_weights: vec![hx * hy; nx * ny],
                dims,
            }
        }
        SpaceKind::SphereZonal => {
            let n = dims[0];
            let h = PI / n as f64;
            let theta: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * h).collect();
            // Exact band areas 2π(cos θ_{k-½} − cos θ_{k+½}) = 4π sin(h/2) sin θ_k.
            let band = 4.0 * PI * (0.5 * h).sin();
            let vol_weights = theta.iter().map(|t| band * t.sin()).collect();
            ModelSpace {
                kind,
                axes: vec![theta],
                h: vec![h],
                vol_weights,
                dims,
            }
        }
    };
    Ok(space)
}

/// Symmetric 2×2 tensor in an orthonormal frame. On the circle only `xx`
/// is meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub fn scalar(v: f64) -> Self {
        Sym2 {
            xx: v,
            xy: 0.0,
            yy: 0.0,
        }
    }

    /// Smallest eigenvalue restricted to the first `n` axes.
    pub fn min_eigenvalue(&self, n: usize) -> f64 {
        if n == 1 {
            return self.xx;
        }
        let mean = 0.5 * (self.xx + self.yy);
        let rad = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        mean - rad
    }

    /// Quadratic form `T(v, v)`.
    pub fn quad(&self, v: &[f64]) -> f64 {
        match v {
            [a] => self.xx * a * a,
            [a, b] => self.xx * a * a + 2.0 * self.xy * a * b + self.yy * b * b,
            _ => unreachable!("covectors have one or two components"),
        }
    }

    /// Matrix-vector product `T v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match v {
            [a] => vec![self.xx * a],
            [a, b] => vec![self.xx * a + self.xy * b, self.xy * a + self.yy * b],
            _ => unreachable!("covectors have one or two components"),
        }
    }
}

/// The potential `Ψ` sampled on a grid with its gradient and Hessian.
///
/// `grad[c][k]` is component `c` of `∇Ψ` at node `k` in the orthonormal
/// frame of the space; `hess[k]` is the covariant Hessian there (for the
/// zonal sphere `diag(Ψ'', cot θ Ψ')`).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    grid: GridKey,
    psi: Vec<f64>,
    grad: Vec<Vec<f64>>,
    hess: Vec<Sym2>,
    analytic: bool,
    descriptor: String,
}

impl WeightField {
    pub fn zero(space: &ModelSpace) -> Self {
        let n = space.len();
        WeightField {
            grid: space.key(),
            psi: vec![0.0; n],
            grad: vec![vec![0.0; n]; space.form_components()],
            hess: vec![Sym2::default(); n],
            analytic: true,
            descriptor: "0".into(),
        }
    }

    /// Closed-form potential with symbolically differentiated derivatives.
    pub fn from_expr(space: &ModelSpace, expr: &Expr, descriptor: &str) -> Result<Self> {
        let n = space.len();
        let psi = space.sample(|x| expr.eval(x));
        check_finite(&psi, "psi")?;
        let (grad, hess) = match space.kind() {
            SpaceKind::Circle | SpaceKind::SphereZonal => {
                let d1 = expr.diff(0);
                let d2 = d1.diff(0);
                let g = space.sample(|x| d1.eval(x));
                let gg = space.sample(|x| d2.eval(x));
                let hess = (0..n)
                    .map(|k| {
                        if space.kind() == SpaceKind::Circle {
                            Sym2::scalar(gg[k])
                        } else {
                            let t = space.axis(0)[k];
                            Sym2 {
                                xx: gg[k],
                                xy: 0.0,
                                yy: t.cos() / t.sin() * g[k],
                            }
                        }
                    })
                    .collect();
                (vec![g], hess)
            }
            SpaceKind::Torus2 => {
                let dx = expr.diff(0);
                let dy = expr.diff(1);
                let (dxx, dxy, dyy) = (dx.diff(0), dx.diff(1), dy.diff(1));
                let gx = space.sample(|x| dx.eval(x));
                let gy = space.sample(|x| dy.eval(x));
                let hess = (0..n)
                    .map(|k| {
                        let c = space.coords(k);
                        Sym2 {
                            xx: dxx.eval(&c),
                            xy: dxy.eval(&c),
                            yy: dyy.eval(&c),
                        }
                    })
                    .collect();
                (vec![gx, gy], hess)
            }
        };
        Ok(WeightField {
            grid: space.key(),
            psi,
            grad,
            hess,
            analytic: true,
            descriptor: descriptor.to_string(),
        })
    }

    /// Grid-sampled potential; derivatives from 4th-order central
    /// differences (periodic wrap, even reflection across the sphere poles).
    pub fn from_samples(space: &ModelSpace, psi: Vec<f64>) -> Result<Self> {
        if psi.len() != space.len() {
            return Err(Error::Input(format!(
                "psi has {} samples, grid {} has {}",
                psi.len(),
                space.key(),
                space.len()
            )));
        }
        check_finite(&psi, "psi")?;
        let n = space.len();
        let (grad, hess) = match space.kind() {
            SpaceKind::Circle => {
                let h = space.spacing()[0];
                let g = d1_fourth(&psi, h, Boundary::Periodic);
                let gg = d2_fourth(&psi, h, Boundary::Periodic);
                (vec![g], gg.into_iter().map(Sym2::scalar).collect())
            }
            SpaceKind::SphereZonal => {
                let h = space.spacing()[0];
                let g = d1_fourth(&psi, h, Boundary::EvenReflect);
                let gg = d2_fourth(&psi, h, Boundary::EvenReflect);
                let hess = (0..n)
                    .map(|k| {
                        let t = space.axis(0)[k];
                        Sym2 {
                            xx: gg[k],
                            xy: 0.0,
                            yy: t.cos() / t.sin() * g[k],
                        }
                    })
                    .collect();
                (vec![g], hess)
            }
            SpaceKind::Torus2 => {
                let (nx, ny) = (space.dims()[0], space.dims()[1]);
                let (hx, hy) = (space.spacing()[0], space.spacing()[1]);
                let along_x = |v: &[f64], op: &dyn Fn(&[f64]) -> Vec<f64>| {
                    let mut out = vec![0.0; n];
                    for j in 0..ny {
                        let line: Vec<f64> = (0..nx).map(|i| v[i * ny + j]).collect();
                        for (i, d) in op(&line).into_iter().enumerate() {
                            out[i * ny + j] = d;
                        }
                    }
                    out
                };
                let along_y = |v: &[f64], op: &dyn Fn(&[f64]) -> Vec<f64>| {
                    let mut out = vec![0.0; n];
                    for i in 0..nx {
                        let d = op(&v[i * ny..(i + 1) * ny]);
                        out[i * ny..(i + 1) * ny].copy_from_slice(&d);
                    }
                    out
                };
                let dx = |l: &[f64]| d1_fourth(l, hx, Boundary::Periodic);
                let dy = |l: &[f64]| d1_fourth(l, hy, Boundary::Periodic);
                let gx = along_x(&psi, &dx);
                let gy = along_y(&psi, &dy);
                let gxx = along_x(&psi, &|l| d2_fourth(l, hx, Boundary::Periodic));
                let gyy = along_y(&psi, &|l| d2_fourth(l, hy, Boundary::Periodic));
                let gxy = along_y(&gx, &dy);
                let hess = (0..n)
                    .map(|k| Sym2 {
                        xx: gxx[k],
                        xy: gxy[k],
                        yy: gyy[k],
                    })
                    .collect();
                (vec![gx, gy], hess)
            }
        };
        Ok(WeightField {
            grid: space.key(),
            psi,
            grad,
            hess,
            analytic: false,
            descriptor: "samples".into(),
        })
    }

    pub fn grid(&self) -> &GridKey {
        &self.grid
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn grad(&self) -> &[Vec<f64>] {
        &self.grad
    }

    pub fn grad_at(&self, k: usize) -> Vec<f64> {
        self.grad.iter().map(|c| c[k]).collect()
    }

    pub fn hess(&self) -> &[Sym2] {
        &self.hess
    }

    pub fn is_analytic(&self) -> bool {
        self.analytic
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    /// True when `Ψ ≡ 0` exactly on the grid.
    pub fn is_zero(&self) -> bool {
        self.psi.iter().all(|&v| v == 0.0)
    }
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(k) => Err(Error::Input(format!("{what} is not finite at node {k}"))),
        None => Ok(()),
    }
}

#[derive(Clone, Copy)]
enum Boundary {
    Periodic,
    EvenReflect,
}

fn fetch(v: &[f64], k: isize, bc: Boundary) -> f64 {
    let n = v.len() as isize;
    match bc {
        Boundary::Periodic => v[k.rem_euclid(n) as usize],
        Boundary::EvenReflect => {
            // Midpoint grid: node -1 mirrors node 0, node n mirrors node n-1.
            let j = if k < 0 {
                -k - 1
            } else if k >= n {
                2 * n - 1 - k
            } else {
                k
            };
            v[j as usize]
        }
    }
}

fn d1_fourth(v: &[f64], h: f64, bc: Boundary) -> Vec<f64> {
    (0..v.len() as isize)
        .map(|k| {
            let f = |o: isize| fetch(v, k + o, bc);
            (-f(2) + 8.0 * f(1) - 8.0 * f(-1) + f(-2)) / (12.0 * h)
        })
        .collect()
}

fn d2_fourth(v: &[f64], h: f64, bc: Boundary) -> Vec<f64> {
    (0..v.len() as isize)
        .map(|k| {
            let f = |o: isize| fetch(v, k + o, bc);
            (-f(2) + 16.0 * f(1) - 30.0 * f(0) + 16.0 * f(-1) - f(-2)) / (12.0 * h * h)
        })
        .collect()
}

/// The reference probability measure `μ = e^{−Ψ} dx / Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureField {
    grid: GridKey,
    weights: Vec<f64>,
    normalization_constant: f64,
}

impl MeasureField {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The divisor `Z = Σ e^{−Ψ} dx`.
    pub fn normalization_constant(&self) -> f64 {
        self.normalization_constant
    }

    pub fn grid(&self) -> &GridKey {
        &self.grid
    }

    /// `∫ f dμ` with a fixed summation order.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }
}

pub fn measure_of(space: &ModelSpace, w: &WeightField) -> Result<MeasureField> {
    if w.grid() != &space.key() {
        return Err(Error::Input(format!(
            "weight field on {} used with space {}",
            w.grid(),
            space.key()
        )));
    }
    check_finite(w.psi(), "psi")?;
    let raw: Vec<f64> = w
        .psi()
        .iter()
        .zip(space.vol_weights())
        .map(|(p, v)| (-p).exp() * v)
        .collect();
    let z: f64 = raw.iter().sum();
    Ok(MeasureField {
        grid: space.key(),
        weights: raw.iter().map(|r| r / z).collect(),
        normalization_constant: z,
    })
}

/// Per-node Bakry–Émery tensor `Ricci_g + Hess Ψ`.
pub fn ricci_operator_field(space: &ModelSpace, w: &WeightField) -> Vec<Sym2> {
    let ricci_g = match space.kind() {
        SpaceKind::SphereZonal => Sym2 {
            xx: 1.0,
            xy: 0.0,
            yy: 1.0,
        },
        _ => Sym2::default(),
    };
    w.hess()
        .iter()
        .map(|h| Sym2 {
            xx: ricci_g.xx + h.xx,
            xy: ricci_g.xy + h.xy,
            yy: ricci_g.yy + h.yy,
        })
        .collect()
}

/// Effective dimension `m ≥ n`, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dimension {
    Finite(f64),
    Infinite,
}

impl Dimension {
    /// `1/m`, zero for the infinite dimension.
    pub fn recip(self) -> f64 {
        match self {
            Dimension::Finite(m) => 1.0 / m,
            Dimension::Infinite => 0.0,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Dimension::Finite(m) => m,
            Dimension::Infinite => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dimension::Finite(m) => write!(f, "{m}"),
            Dimension::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Dimension {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Dimension::Finite(m) => s.serialize_f64(*m),
            Dimension::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Dimension {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(m) => Ok(Dimension::Finite(m)),
            Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "+inf") => {
                Ok(Dimension::Infinite)
            }
            Raw::Text(s) => Err(serde::de::Error::custom(format!("bad dimension {s:?}"))),
        }
    }
}

/// Curvature-dimension parameters `(R, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CDParams {
    #[serde(rename = "R")]
    pub r: f64,
    pub m: Dimension,
    pub witness_node: usize,
}

fn check_dimension(space: &ModelSpace, w: &WeightField, m: Dimension) -> Result<()> {
    let n = space.dim() as f64;
    if let Dimension::Finite(mv) = m {
        if !(mv >= n) {
            return Err(Error::Domain(format!("dimension m={mv} below n={n}")));
        }
        if mv == n && !w.is_zero() {
            return Err(Error::Domain(
                "m = n requires the potential to vanish identically".into(),
            ));
        }
    }
    Ok(())
}

/// Largest `R` with `Ricci(L) ≥ R + ∇Ψ⊗∇Ψ/(m−n)` at every node.
#[allow(non_snake_case)]
pub fn cd_best_R(space: &ModelSpace, w: &WeightField, m: Dimension) -> Result<CDParams> {
    check_dimension(space, w, m)?;
    let n = space.dim();
    let coupling = match m {
        Dimension::Finite(mv) if mv > n as f64 && !w.is_zero() => 1.0 / (mv - n as f64),
        _ => 0.0,
    };
    let ricci = ricci_operator_field(space, w);
    let mut best = (f64::INFINITY, 0usize);
    for (k, t) in ricci.iter().enumerate() {
        let g = w.grad_at(k);
        let gy = g.get(1).copied().unwrap_or(0.0);
        let shifted = Sym2 {
            xx: t.xx - coupling * g[0] * g[0],
            xy: t.xy - coupling * g[0] * gy,
            yy: t.yy - coupling * gy * gy,
        };
        let lam = shifted.min_eigenvalue(n);
        if lam < best.0 {
            best = (lam, k);
        }
    }
    Ok(CDParams {
        r: best.0,
        m,
        witness_node: best.1,
    })
}

impl CDParams {
    /// Checks that `(R, m)` is admissible for `(space, w)`, that is `R` does
    /// not exceed the best constant for the same `m`.
    pub fn check_feasible(&self, space: &ModelSpace, w: &WeightField) -> Result<()> {
        let best = cd_best_R(space, w, self.m)?;
        let slack = 1e-12 * (1.0 + best.r.abs());
        if self.r > best.r + slack {
            return Err(Error::Domain(format!(
                "R={} exceeds the best curvature-dimension constant {} for m={}",
                self.r, best.r, self.m
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn psi_expr(src: &str, kind: SpaceKind) -> Expr {
        let mut params = HashMap::new();
        params.insert("a".to_string(), 0.1);
        Expr::parse(src, kind.variables(), &params).unwrap()
    }

    #[test]
    fn circle_grid_is_uniform() {
        let s = build_model_space(SpaceKind::Circle, &[256]).unwrap();
        assert_eq!(s.len(), 256);
        assert_eq!(s.axis(0)[1], 2.0 * PI / 256.0);
        assert!(s.vol_weights().iter().all(|&w| w == 2.0 * PI / 256.0));
        let total: f64 = s.vol_weights().iter().sum();
        assert!((total / (2.0 * PI) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn torus_volume_is_product() {
        let s = build_model_space(SpaceKind::Torus2, &[64, 64]).unwrap();
        assert_eq!(s.len(), 4096);
        let total: f64 = s.vol_weights().iter().sum();
        assert!((total / (4.0 * PI * PI) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_band_weights_sum_to_area() {
        let s = build_model_space(SpaceKind::SphereZonal, &[512]).unwrap();
        let total: f64 = s.vol_weights().iter().sum();
        assert!((total / (4.0 * PI) - 1.0).abs() < 1e-10);
        // Independent oracle: midpoint quadrature of 2π sin θ.
        let h = PI / 512.0;
        let oracle: f64 = (0..512).map(|k| 2.0 * PI * ((k as f64 + 0.5) * h).sin() * h).sum();
        assert!((total - oracle).abs() / oracle < 1e-5);
        // ∝ sin θ and vanishing towards the poles
        let r0 = s.vol_weights()[0] / s.axis(0)[0].sin();
        let r1 = s.vol_weights()[200] / s.axis(0)[200].sin();
        assert!((r0 - r1).abs() < 1e-14);
        assert!(s.vol_weights()[0] < s.vol_weights()[256] * 0.01);
    }

    #[test]
    fn low_resolution_rejected() {
        assert!(matches!(
            build_model_space(SpaceKind::Circle, &[8]),
            Err(Error::Config(_))
        ));
        assert!(build_model_space(SpaceKind::Torus2, &[32, 15]).is_err());
        assert!(build_model_space(SpaceKind::Circle, &[32, 32]).is_err());
    }

    #[test]
    fn uniform_measure_on_flat_circle() {
        let s = build_model_space(SpaceKind::Circle, &[256]).unwrap();
        let mu = measure_of(&s, &WeightField::zero(&s)).unwrap();
        assert!(mu.weights().iter().all(|w| (w - 1.0 / 256.0).abs() < 1e-16));
    }

    #[test]
    fn weighted_circle_normalization_matches_bessel_quadrature() {
        let s = build_model_space(SpaceKind::Circle, &[256]).unwrap();
        let w = WeightField::from_expr(&s, &psi_expr("a*cos(theta)", SpaceKind::Circle), "")
            .unwrap();
        let mu = measure_of(&s, &w).unwrap();
        // Oracle: fine midpoint quadrature of ∫ e^{-0.1 cos θ} dθ = 2π I0(0.1).
        let m = 1 << 16;
        let hh = 2.0 * PI / m as f64;
        let oracle: f64 = (0..m)
            .map(|k| (-0.1 * ((k as f64 + 0.5) * hh).cos()).exp() * hh)
            .sum();
        assert!((mu.normalization_constant() - oracle).abs() < 1e-12);
        assert!((oracle - 2.0 * PI * 1.002_501_562_934_095).abs() < 1e-12);
        let sum: f64 = mu.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_measure_proportional_to_sin() {
        let s = build_model_space(SpaceKind::SphereZonal, &[128]).unwrap();
        let mu = measure_of(&s, &WeightField::zero(&s)).unwrap();
        let sum: f64 = mu.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let t = s.axis(0);
        assert!((mu.weights()[10] / t[10].sin() - mu.weights()[70] / t[70].sin()).abs() < 1e-15);
    }

    #[test]
    fn non_finite_psi_rejected() {
        let s = build_model_space(SpaceKind::Circle, &[32]).unwrap();
        let mut psi = vec![0.0; 32];
        psi[3] = f64::NAN;
        assert!(WeightField::from_samples(&s, psi).is_err());
    }

    #[test]
    fn ricci_fields() {
        let s = build_model_space(SpaceKind::Circle, &[128]).unwrap();
        let flat = ricci_operator_field(&s, &WeightField::zero(&s));
        assert!(flat.iter().all(|t| t.xx == 0.0));
        let w = WeightField::from_expr(&s, &psi_expr("a*cos(theta)", SpaceKind::Circle), "")
            .unwrap();
        for (k, t) in ricci_operator_field(&s, &w).iter().enumerate() {
            assert!((t.xx + 0.1 * s.axis(0)[k].cos()).abs() < 1e-15);
        }
        let sp = build_model_space(SpaceKind::SphereZonal, &[64]).unwrap();
        for t in ricci_operator_field(&sp, &WeightField::zero(&sp)) {
            assert_eq!((t.xx, t.xy, t.yy), (1.0, 0.0, 1.0));
        }
    }

    #[test]
    fn best_curvature_constants() {
        let s = build_model_space(SpaceKind::Circle, &[512]).unwrap();
        let z = WeightField::zero(&s);
        assert_eq!(cd_best_R(&s, &z, Dimension::Finite(1.0)).unwrap().r, 0.0);

        let sp = build_model_space(SpaceKind::SphereZonal, &[512]).unwrap();
        let cd = cd_best_R(&sp, &WeightField::zero(&sp), Dimension::Finite(2.0)).unwrap();
        assert_eq!(cd.r, 1.0);

        let w = WeightField::from_expr(&s, &psi_expr("a*cos(theta)", SpaceKind::Circle), "")
            .unwrap();
        let cd = cd_best_R(&s, &w, Dimension::Finite(2.0)).unwrap();
        // Dense-grid oracle of min_θ(−0.1 cos θ − 0.01 sin²θ).
        let oracle = (0..100_000)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 100_000.0;
                -0.1 * t.cos() - 0.01 * t.sin().powi(2)
            })
            .fold(f64::INFINITY, f64::min);
        assert!((cd.r - oracle).abs() < 1e-15);
        assert!((cd.r + 0.1).abs() < 1e-15);
        assert_eq!(cd.witness_node, 0);
    }

    #[test]
    fn dimension_domain_errors() {
        let s = build_model_space(SpaceKind::Circle, &[64]).unwrap();
        let w = WeightField::from_expr(&s, &psi_expr("a*cos(theta)", SpaceKind::Circle), "")
            .unwrap();
        assert!(matches!(
            cd_best_R(&s, &w, Dimension::Finite(0.5)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            cd_best_R(&s, &w, Dimension::Finite(1.0)),
            Err(Error::Domain(_))
        ));
        let inf = cd_best_R(&s, &w, Dimension::Infinite).unwrap();
        assert!((inf.r + 0.1).abs() < 1e-15);
    }

    #[test]
    fn sampled_derivatives_are_fourth_order() {
        let src = "a*cos(theta) + 0.05*sin(2*theta)";
        let mut errs = Vec::new();
        for n in [64usize, 128] {
            let s = build_model_space(SpaceKind::Circle, &[n]).unwrap();
            let e = psi_expr(src, SpaceKind::Circle);
            let exact = WeightField::from_expr(&s, &e, src).unwrap();
            let fd = WeightField::from_samples(&s, exact.psi().to_vec()).unwrap();
            let err = (0..n)
                .map(|k| (exact.hess()[k].xx - fd.hess()[k].xx).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.7, "order {order}");
    }

    #[test]
    fn torus_sampled_hessian() {
        let s = build_model_space(SpaceKind::Torus2, &[48, 48]).unwrap();
        let e = Expr::parse("0.2*cos(x)*sin(y)", &["x", "y"], &HashMap::new()).unwrap();
        let exact = WeightField::from_expr(&s, &e, "").unwrap();
        let fd = WeightField::from_samples(&s, exact.psi().to_vec()).unwrap();
        for k in (0..s.len()).step_by(37) {
            assert!((exact.hess()[k].xy - fd.hess()[k].xy).abs() < 1e-5);
            assert!((exact.grad()[1][k] - fd.grad()[1][k]).abs() < 1e-5);
        }
    }
}
