//! Smooth one-dimensional laws for displacement interpolation.
//!
//! Nodal masses per unit coordinate are interpolated by cubic Hermite
//! pieces with fourth-order slopes, limited so every piece stays
//! nonnegative. Cumulative distributions are the exact integrals of these
//! pieces. On the zonal sphere the density vanishes at the poles and is
//! continued oddly across them.

use std::f64::consts::PI;

/// Where the nodes sit and how the law continues past the ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Layout {
    /// Nodes `x_j = j h` on a circle of length `n h`.
    Periodic,
    /// Nodes `x_j = (j + ½) h` on `[0, n h]`, odd across both ends.
    Poles,
}

#[derive(Debug, Clone)]
pub(crate) struct SmoothLaw {
    layout: Layout,
    h: f64,
    q: Vec<f64>,
    d: Vec<f64>,
    /// CDF at each node, measured from `x = 0`.
    cum: Vec<f64>,
    total: f64,
}

fn hermite(t: f64, qa: f64, ma: f64, qb: f64, mb: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * qa
        + (t3 - 2.0 * t2 + t) * ma
        + (-2.0 * t3 + 3.0 * t2) * qb
        + (t3 - t2) * mb
}

/// `∫₀^τ` of the Hermite piece in the unit variable.
fn hermite_integral(t: f64, qa: f64, ma: f64, qb: f64, mb: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    (t - t3 + 0.5 * t4) * qa
        + (0.5 * t2 - 2.0 * t3 / 3.0 + 0.25 * t4) * ma
        + (t3 - 0.5 * t4) * qb
        + (-t3 / 3.0 + 0.25 * t4) * mb
}

impl SmoothLaw {
    pub(crate) fn new(q: Vec<f64>, h: f64, layout: Layout) -> Self {
        let n = q.len();
        let fetch = |j: isize| -> f64 {
            match layout {
                Layout::Periodic => q[j.rem_euclid(n as isize) as usize],
                Layout::Poles if j < 0 => -q[(-1 - j) as usize],
                Layout::Poles if j >= n as isize => -q[(2 * n as isize - 1 - j) as usize],
                Layout::Poles => q[j as usize],
            }
        };
        let d: Vec<f64> = (0..n as isize)
            .map(|j| {
                let f = |o: isize| fetch(j + o);
                let raw = (-f(2) + 8.0 * f(1) - 8.0 * f(-1) + f(-2)) / (12.0 * h);
                let cap = 3.0 * q[j as usize].abs() / h;
                raw.clamp(-cap, cap)
            })
            .collect();
        let mut law = SmoothLaw {
            layout,
            h,
            q,
            d,
            cum: Vec::new(),
            total: 0.0,
        };
        let mut cum = Vec::with_capacity(n);
        let mut acc = match layout {
            Layout::Periodic => 0.0,
            Layout::Poles => law.piece_integral(-1, 1.0) - law.piece_integral(-1, 0.5),
        };
        for j in 0..n {
            cum.push(acc);
            if j + 1 < n {
                acc += law.piece_integral(j as isize, 1.0);
            }
        }
        law.total = match layout {
            Layout::Periodic => acc + law.piece_integral(n as isize - 1, 1.0),
            Layout::Poles => acc + law.piece_integral(n as isize - 1, 0.5),
        };
        law.cum = cum;
        law
    }

    fn n(&self) -> usize {
        self.q.len()
    }

    /// End data `(q_a, h d_a, q_b, h d_b)` of piece `j` (between nodes `j`
    /// and `j + 1`); `j = -1` and `j = n - 1` are the pole pieces.
    fn piece(&self, j: isize) -> (f64, f64, f64, f64) {
        let n = self.n() as isize;
        let h = self.h;
        match self.layout {
            Layout::Periodic => {
                let a = j.rem_euclid(n) as usize;
                let b = (j + 1).rem_euclid(n) as usize;
                (self.q[a], h * self.d[a], self.q[b], h * self.d[b])
            }
            Layout::Poles => {
                if j < 0 {
                    (-self.q[0], h * self.d[0], self.q[0], h * self.d[0])
                } else if j >= n - 1 {
                    let l = self.n() - 1;
                    (self.q[l], h * self.d[l], -self.q[l], h * self.d[l])
                } else {
                    let a = j as usize;
                    (self.q[a], h * self.d[a], self.q[a + 1], h * self.d[a + 1])
                }
            }
        }
    }

    fn piece_integral(&self, j: isize, t: f64) -> f64 {
        let (qa, ma, qb, mb) = self.piece(j);
        self.h * hermite_integral(t, qa, ma, qb, mb)
    }

    fn piece_value(&self, j: isize, t: f64) -> f64 {
        let (qa, ma, qb, mb) = self.piece(j);
        hermite(t, qa, ma, qb, mb)
    }

    fn node_x(&self, j: isize) -> f64 {
        match self.layout {
            Layout::Periodic => j as f64 * self.h,
            Layout::Poles => (j as f64 + 0.5) * self.h,
        }
    }

    fn period(&self) -> f64 {
        self.n() as f64 * self.h
    }

    /// Piece index, unit offset and number of whole periods for `x`.
    fn locate(&self, x: f64) -> (isize, f64, f64) {
        let n = self.n() as isize;
        match self.layout {
            Layout::Periodic => {
                let p = self.period();
                let k = (x / p).floor();
                let xr = x - k * p;
                let j = ((xr / self.h).floor() as isize).clamp(0, n - 1);
                (j, (xr - j as f64 * self.h) / self.h, k)
            }
            Layout::Poles => {
                let xc = x.clamp(0.0, self.period());
                let j = (((xc - 0.5 * self.h) / self.h).floor() as isize).clamp(-1, n - 1);
                (j, (xc - self.node_x(j)) / self.h, 0.0)
            }
        }
    }

    pub(crate) fn density(&self, x: f64) -> f64 {
        let (j, t, _) = self.locate(x);
        self.piece_value(j, t)
    }

    pub(crate) fn cdf(&self, x: f64) -> f64 {
        let (j, t, k) = self.locate(x);
        match self.layout {
            Layout::Periodic => k * self.total + self.cum[j as usize] + self.piece_integral(j, t),
            Layout::Poles => {
                if j < 0 {
                    self.piece_integral(-1, t) - self.piece_integral(-1, 0.5)
                } else {
                    self.cum[j as usize] + self.piece_integral(j, t)
                }
            }
        }
    }

    pub(crate) fn quantile(&self, u: f64) -> f64 {
        let n = self.n();
        let (k, ur) = match self.layout {
            Layout::Periodic => {
                let k = (u / self.total).floor();
                (k, u - k * self.total)
            }
            Layout::Poles => (0.0, u.clamp(0.0, self.total)),
        };
        let (j, base, t0, t1) = match self.layout {
            Layout::Poles if ur < self.cum[0] => {
                (-1, -self.piece_integral(-1, 0.5), 0.5, 1.0)
            }
            Layout::Poles if ur >= self.cum[n - 1] => {
                (n as isize - 1, self.cum[n - 1], 0.0, 0.5)
            }
            _ => {
                let i = self.cum.partition_point(|&c| c <= ur).clamp(1, n) - 1;
                (i as isize, self.cum[i], 0.0, 1.0)
            }
        };
        let target = ur - base;
        let t = solve_increasing(
            |t| (self.piece_integral(j, t), self.h * self.piece_value(j, t)),
            t0,
            t1,
            target,
        );
        self.node_x(j) + t * self.h + k * self.period()
    }
}

/// Root of `g(t) = target` for increasing `g` on `[lo, hi]`, by Newton steps
/// kept inside a shrinking bracket.
pub(crate) fn solve_increasing(g: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64, target: f64) -> f64 {
    let mut t = 0.5 * (lo + hi);
    for _ in 0..100 {
        let (v, dv) = g(t);
        let r = v - target;
        if r > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        if r == 0.0 || hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
        let newton = t - r / dv;
        t = if dv > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (t - lo).min(hi - t) <= 0.0 {
            break;
        }
    }
    t
}

/// The monotone map `T` with `G(T(x)) = F(x) + shift` between normalized
/// laws, and its displacement interpolation.
#[derive(Debug, Clone)]
pub(crate) struct SmoothMap {
    f: SmoothLaw,
    g: SmoothLaw,
    shift: f64,
    vmin: f64,
    vmax: f64,
}

impl SmoothMap {
    pub(crate) fn new(f: SmoothLaw, g: SmoothLaw, shift: f64) -> Self {
        let mut m = SmoothMap {
            f,
            g,
            shift,
            vmin: 0.0,
            vmax: 0.0,
        };
        let n = m.f.n();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..=4 * n {
            let x = j as f64 * m.f.h / 4.0;
            let v = m.map(x) - x;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        m.vmin = lo;
        m.vmax = hi;
        m
    }

    pub(crate) fn map(&self, x: f64) -> f64 {
        let u = self.f.cdf(x) / self.f.total + self.shift;
        self.g.quantile(u * self.g.total)
    }

    fn map_slope(&self, x: f64, tx: f64) -> f64 {
        let a = self.f.density(x) / self.f.total;
        let b = self.g.density(tx) / self.g.total;
        a / b
    }

    /// Largest absolute displacement `|T(x) − x|` seen on a fine sample.
    pub(crate) fn max_displacement(&self) -> f64 {
        self.vmin.abs().max(self.vmax.abs())
    }

    /// At path time `s`, the preimage `x` of `z` under `(1−s)x + sT(x)`,
    /// with the normalized density per unit coordinate at `z` and the
    /// displacement carried there.
    pub(crate) fn at(&self, s: f64, z: f64) -> (f64, f64) {
        let interp = |x: f64| -> (f64, f64) {
            let tx = self.map(x);
            let slope = self.map_slope(x, tx);
            ((1.0 - s) * x + s * tx, (1.0 - s) + s * slope)
        };
        let (lo, hi) = match self.f.layout {
            Layout::Periodic => {
                let pad = self.f.h;
                (z - s * self.vmax - pad, z - s * self.vmin + pad)
            }
            Layout::Poles => (0.0, PI.min(self.f.period())),
        };
        let x = solve_increasing(interp, lo, hi, z);
        let tx = self.map(x);
        let jac = (1.0 - s) + s * self.map_slope(x, tx);
        let q = self.f.density(x) / self.f.total / jac;
        (q, tx - x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_cdf_integrates_trig_exactly() {
        let n = 64;
        let h = 2.0 * PI / n as f64;
        let q: Vec<f64> = (0..n).map(|j| 1.0 + 0.5 * (j as f64 * h).cos()).collect();
        let law = SmoothLaw::new(q, h, Layout::Periodic);
        assert!((law.total - 2.0 * PI).abs() < 1e-12);
        for x in [0.3, 1.7, 4.0] {
            let exact = x + 0.5 * f64::sin(x);
            assert!((law.cdf(x) - exact).abs() < 1e-6, "{x}");
            assert!((law.quantile(law.cdf(x)) - x).abs() < 1e-12);
        }
        assert!((law.cdf(2.0 * PI + 1.0) - law.cdf(1.0) - law.total).abs() < 1e-12);
    }

    #[test]
    fn pole_layout_matches_sine_law() {
        let n = 64;
        let h = PI / n as f64;
        let q: Vec<f64> = (0..n).map(|j| ((j as f64 + 0.5) * h).sin()).collect();
        let law = SmoothLaw::new(q, h, Layout::Poles);
        assert!((law.total - 2.0).abs() < 1e-6);
        for x in [0.01, 0.5, 2.0, PI - 0.01] {
            assert!((law.cdf(x) - (1.0 - x.cos())).abs() < 1e-6, "{x}");
            assert!((law.quantile(law.cdf(x)) - x).abs() < 1e-12);
        }
    }
}
