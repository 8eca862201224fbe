//! Discrete differential operators on a weighted model space.
//!
//! The generator `L = Δ − ∇Ψ·∇` is assembled in conservative flux form,
//! `(Lf)_k = m_k⁻¹ Σ c_{kj} (f_j − f_k)`, with node masses `m_k = e^{−Ψ_k} dx_k`
//! and symmetric edge conductances. This makes `L` exactly self-adjoint in
//! the discrete `L²(μ)` and exactly mass preserving. First derivatives are
//! second-order central differences.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{measure_of, GridKey, MeasureField, ModelSpace, SpaceKind, WeightField};

/// Reflection parity used for ghost nodes across the sphere poles: zonal
/// functions are even, the `dθ` component of a 1-form is odd.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone)]
pub(crate) struct AxisOp {
    /// Families of node indices, each a 1D line along this axis.
    pub(crate) lines: Vec<Vec<usize>>,
    pub(crate) periodic: bool,
    /// Conductance between node `k` and its successor on the line
    /// (zero past the last node of a non-periodic line).
    pub(crate) cond: Vec<f64>,
    pub(crate) next: Vec<Option<usize>>,
    pub(crate) prev: Vec<Option<usize>>,
    pub(crate) h: f64,
}

/// A model space together with its potential, reference measure and
/// assembled generator.
#[derive(Debug, Clone)]
pub struct WeightedSpace {
    space: ModelSpace,
    weight: WeightField,
    measure: MeasureField,
    mass: Vec<f64>,
    axes: Vec<AxisOp>,
}

impl WeightedSpace {
    pub fn new(space: ModelSpace, weight: WeightField) -> Result<Self> {
        let measure = measure_of(&space, &weight)?;
        let ex: Vec<f64> = weight.psi().iter().map(|p| (-p).exp()).collect();
        let mass: Vec<f64> = ex
            .iter()
            .zip(space.vol_weights())
            .map(|(e, v)| e * v)
            .collect();
        let axes = build_axes(&space, &ex);
        Ok(WeightedSpace {
            space,
            weight,
            measure,
            mass,
            axes,
        })
    }

    /// The unweighted space `Ψ = 0`.
    pub fn flat(space: ModelSpace) -> Self {
        let w = WeightField::zero(&space);
        Self::new(space, w).expect("zero potential is always valid")
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn weight(&self) -> &WeightField {
        &self.weight
    }

    pub fn measure(&self) -> &MeasureField {
        &self.measure
    }

    pub fn key(&self) -> GridKey {
        self.space.key()
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub(crate) fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub(crate) fn axes(&self) -> &[AxisOp] {
        &self.axes
    }

    pub(crate) fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.len() {
            return Err(Error::Input(format!(
                "{what} has {len} nodes but grid {} has {}",
                self.key(),
                self.len()
            )));
        }
        Ok(())
    }

    /// `Lf` for nodal values `f`.
    pub fn generator(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for ax in &self.axes {
            for (k, o) in out.iter_mut().enumerate() {
                if let Some(j) = ax.next[k] {
                    *o += ax.cond[k] * (f[j] - f[k]);
                }
                if let Some(j) = ax.prev[k] {
                    *o += ax.cond[j] * (f[j] - f[k]);
                }
            }
        }
        for (o, m) in out.iter_mut().zip(&self.mass) {
            *o /= m;
        }
        out
    }

    /// Central difference along `axis`, with ghost nodes of the given parity
    /// across the sphere poles.
    pub fn derivative(&self, axis: usize, f: &[f64], parity: Parity) -> Vec<f64> {
        let ax = &self.axes[axis];
        let sign = match parity {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        };
        (0..f.len())
            .map(|k| {
                let fwd = ax.next[k].map_or(sign * f[k], |j| f[j]);
                let bwd = ax.prev[k].map_or(sign * f[k], |j| f[j]);
                (fwd - bwd) / (2.0 * ax.h)
            })
            .collect()
    }

    /// Orthonormal-frame gradient components of a function.
    pub fn gradient(&self, f: &[f64]) -> Vec<Vec<f64>> {
        (0..self.space.form_components())
            .map(|a| self.derivative(a, f, Parity::Even))
            .collect()
    }
}

fn build_axes(space: &ModelSpace, ex: &[f64]) -> Vec<AxisOp> {
    let avg = |a: usize, b: usize| 0.5 * (ex[a] + ex[b]);
    match space.kind() {
        SpaceKind::Circle => {
            let n = space.len();
            let h = space.spacing()[0];
            let next: Vec<Option<usize>> = (0..n).map(|k| Some((k + 1) % n)).collect();
            let prev: Vec<Option<usize>> = (0..n).map(|k| Some((k + n - 1) % n)).collect();
            let cond = (0..n).map(|k| avg(k, (k + 1) % n) / h).collect();
            vec![AxisOp {
                lines: vec![(0..n).collect()],
                periodic: true,
                cond,
                next,
                prev,
                h,
            }]
        }
        SpaceKind::SphereZonal => {
            let n = space.len();
            let h = space.spacing()[0];
            let next: Vec<Option<usize>> = (0..n).map(|k| (k + 1 < n).then_some(k + 1)).collect();
            let prev: Vec<Option<usize>> = (0..n).map(|k| k.checked_sub(1)).collect();
            let cond = (0..n)
                .map(|k| {
                    if k + 1 < n {
                        let face = (k as f64 + 1.0) * h;
                        2.0 * PI * face.sin() * avg(k, k + 1) / h
                    } else {
                        0.0
                    }
                })
                .collect();
            vec![AxisOp {
                lines: vec![(0..n).collect()],
                periodic: false,
                cond,
                next,
                prev,
                h,
            }]
        }
        SpaceKind::Torus2 => {
            let (nx, ny) = (space.dims()[0], space.dims()[1]);
            let (hx, hy) = (space.spacing()[0], space.spacing()[1]);
            let idx = |i: usize, j: usize| i * ny + j;
            let n = nx * ny;
            let mut x_next = vec![None; n];
            let mut x_prev = vec![None; n];
            let mut y_next = vec![None; n];
            let mut y_prev = vec![None; n];
            let mut x_cond = vec![0.0; n];
            let mut y_cond = vec![0.0; n];
            for i in 0..nx {
                for j in 0..ny {
                    let k = idx(i, j);
                    let xn = idx((i + 1) % nx, j);
                    let yn = idx(i, (j + 1) % ny);
                    x_next[k] = Some(xn);
                    x_prev[k] = Some(idx((i + nx - 1) % nx, j));
                    y_next[k] = Some(yn);
                    y_prev[k] = Some(idx(i, (j + ny - 1) % ny));
                    x_cond[k] = avg(k, xn) * hy / hx;
                    y_cond[k] = avg(k, yn) * hx / hy;
                }
            }
            vec![
                AxisOp {
                    lines: (0..ny).map(|j| (0..nx).map(|i| idx(i, j)).collect()).collect(),
                    periodic: true,
                    cond: x_cond,
                    next: x_next,
                    prev: x_prev,
                    h: hx,
                },
                AxisOp {
                    lines: (0..nx).map(|i| (0..ny).map(|j| idx(i, j)).collect()).collect(),
                    periodic: true,
                    cond: y_cond,
                    next: y_next,
                    prev: y_prev,
                    h: hy,
                },
            ]
        }
    }
}
