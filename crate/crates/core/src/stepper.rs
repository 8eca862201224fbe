//! Crank–Nicolson stepping for `∂_t u = (L − r) u`.
//!
//! One-axis spaces take a plain Crank–Nicolson step. The torus composes
//! per-axis Crank–Nicolson steps symmetrically, `x` for `dt/2`, `y` for `dt`,
//! `x` for `dt/2`. Each factor is self-adjoint in `L²(μ)`, so the step is too,
//! and every solve is a cyclic tridiagonal line.

use crate::linalg::{CyclicTridiag, Tridiag};
use crate::ops::{AxisOp, WeightedSpace};

#[derive(Debug, Clone)]
enum LineSolver {
    Cyclic(CyclicTridiag),
    Plain(Tridiag),
}

impl LineSolver {
    fn solve_in_place(&self, d: &mut [f64]) {
        match self {
            LineSolver::Cyclic(s) => s.solve_in_place(d),
            LineSolver::Plain(s) => s.solve_in_place(d),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CnStepper<'a> {
    ws: &'a WeightedSpace,
    dt: f64,
    /// Step taken along each axis.
    tau: Vec<f64>,
    reaction: Option<Vec<f64>>,
    /// Per axis, per line.
    solvers: Vec<Vec<LineSolver>>,
}

/// `(K_a u)_k = Σ c (u_j − u_k)` along one axis, without the mass division.
pub(crate) fn axis_flux(ax: &AxisOp, u: &[f64]) -> Vec<f64> {
    (0..u.len())
        .map(|k| {
            let mut s = 0.0;
            if let Some(j) = ax.next[k] {
                s += ax.cond[k] * (u[j] - u[k]);
            }
            if let Some(j) = ax.prev[k] {
                s += ax.cond[j] * (u[j] - u[k]);
            }
            s
        })
        .collect()
}

impl<'a> CnStepper<'a> {
    /// `reaction` is a per-node rate subtracted from the generator; only
    /// one-axis spaces accept it.
    pub(crate) fn new(ws: &'a WeightedSpace, dt: f64, reaction: Option<Vec<f64>>) -> Self {
        let axes = ws.axes();
        assert!(
            reaction.is_none() || axes.len() == 1,
            "reaction terms are only stepped implicitly on one-axis spaces"
        );
        let mass = ws.mass();
        let tau = axis_steps(axes.len(), dt);
        let solvers = axes
            .iter()
            .zip(&tau)
            .map(|(ax, &tau)| {
                ax.lines
                    .iter()
                    .map(|line| {
                        let n = line.len();
                        let mut sub = vec![0.0; n];
                        let mut diag = vec![0.0; n];
                        let mut sup = vec![0.0; n];
                        for (i, &k) in line.iter().enumerate() {
                            let c_next = ax.cond[k];
                            let c_prev = ax.prev[k].map_or(0.0, |j| ax.cond[j]);
                            diag[i] = mass[k] + 0.5 * tau * (c_next + c_prev);
                            if let Some(r) = &reaction {
                                diag[i] += 0.5 * tau * mass[k] * r[k];
                            }
                            sup[i] = -0.5 * tau * c_next;
                            sub[i] = -0.5 * tau * c_prev;
                        }
                        if ax.periodic {
                            LineSolver::Cyclic(CyclicTridiag::new(&sub, &diag, &sup))
                        } else {
                            LineSolver::Plain(Tridiag::new(&sub, &diag, &sup))
                        }
                    })
                    .collect()
            })
            .collect();
        CnStepper {
            ws,
            dt,
            tau,
            reaction,
            solvers,
        }
    }

    pub(crate) fn dt(&self) -> f64 {
        self.dt
    }

    fn solve_axis(&self, a: usize, rhs: &[f64]) -> Vec<f64> {
        let ax = &self.ws.axes()[a];
        let mut out = vec![0.0; rhs.len()];
        let mut buf = Vec::new();
        for (line, solver) in ax.lines.iter().zip(&self.solvers[a]) {
            buf.clear();
            buf.extend(line.iter().map(|&k| rhs[k]));
            solver.solve_in_place(&mut buf);
            for (&k, v) in line.iter().zip(&buf) {
                out[k] = *v;
            }
        }
        out
    }

    /// Crank–Nicolson along axis `a` for its own step.
    fn axis_step(&self, a: usize, u: &[f64]) -> Vec<f64> {
        let mass = self.ws.mass();
        let half = 0.5 * self.tau[a];
        let flux = axis_flux(&self.ws.axes()[a], u);
        let rhs: Vec<f64> = (0..u.len())
            .map(|k| {
                let mut v = mass[k] * u[k] + half * flux[k];
                if let Some(r) = &self.reaction {
                    v -= half * mass[k] * r[k] * u[k];
                }
                v
            })
            .collect();
        self.solve_axis(a, &rhs)
    }

    pub(crate) fn step(&self, u: &[f64]) -> Vec<f64> {
        match self.ws.axes().len() {
            1 => self.axis_step(0, u),
            2 => {
                let v = self.axis_step(0, u);
                let v = self.axis_step(1, &v);
                self.axis_step(0, &v)
            }
            _ => unreachable!("model spaces have one or two axes"),
        }
    }
}

fn axis_steps(axes: usize, dt: f64) -> Vec<f64> {
    match axes {
        1 => vec![dt],
        _ => vec![0.5 * dt, dt],
    }
}

/// Step count and step size covering `span` with steps no longer than `dt_max`.
pub(crate) fn split_interval(span: f64, dt_max: f64) -> (usize, f64) {
    if span <= 0.0 {
        return (0, 0.0);
    }
    let steps = (span / dt_max).ceil().max(1.0) as usize;
    (steps, span / steps as f64)
}
