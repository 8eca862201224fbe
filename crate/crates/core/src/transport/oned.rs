//! Exact one-dimensional transport: quantile couplings on the circle (with
//! an optimal shift) and on the colatitude interval of the zonal sphere.
//!
//! Cell masses are spread uniformly over their cells, so every quantile
//! function is piecewise linear and all integrals below are exact.

use std::f64::consts::PI;

/// Piecewise-linear quantile `Q(u)` on `[0, 1]`, optionally extended by
/// `Q(u + 1) = Q(u) + period`.
#[derive(Debug, Clone)]
pub(crate) struct Quantile {
    u: Vec<f64>,
    x: Vec<f64>,
    period: Option<f64>,
}

impl Quantile {
    /// Cells are `[x0 + k h, x0 + (k+1) h]` with the given masses.
    pub(crate) fn from_masses(masses: &[f64], x0: f64, h: f64, period: Option<f64>) -> Self {
        let total: f64 = masses.iter().sum();
        let mut u = Vec::with_capacity(masses.len() + 1);
        let mut acc = 0.0;
        u.push(0.0);
        for m in masses {
            acc += m / total;
            u.push(acc);
        }
        *u.last_mut().expect("nonempty") = 1.0;
        let x = (0..=masses.len()).map(|k| x0 + k as f64 * h).collect();
        Quantile { u, x, period }
    }

    /// CDF values at the cell boundaries.
    pub(crate) fn knots_u(&self) -> &[f64] {
        &self.u
    }

    /// Index of the linear piece `[u_i, u_{i+1}]` holding `u ∈ [0, 1]`,
    /// skipping empty pieces.
    fn piece(&self, u: f64) -> usize {
        let n = self.u.len() - 1;
        let i = self.u.partition_point(|&v| v <= u);
        i.clamp(1, n) - 1
    }

    /// `Q` on the linear piece holding `mid`, evaluated at `at`. Using the
    /// piece of an interior point gives one-sided limits at jumps.
    fn eval_on_piece(&self, mid: f64, at: f64) -> f64 {
        let (wrap, m) = self.split(mid);
        let i = self.piece(m);
        let a = at - wrap as f64;
        let (u0, u1) = (self.u[i], self.u[i + 1]);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let lin = if u1 > u0 {
            x0 + (x1 - x0) * ((a - u0) / (u1 - u0)).clamp(0.0, 1.0)
        } else {
            x0
        };
        lin + wrap as f64 * self.period.unwrap_or(0.0)
    }

    fn split(&self, u: f64) -> (i64, f64) {
        match self.period {
            Some(_) => {
                let w = u.floor();
                (w as i64, u - w)
            }
            None => (0, u.clamp(0.0, 1.0)),
        }
    }
}

/// One linear piece of a coupling `u ↦ (X(u), Y(u))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Segment {
    pub(crate) u0: f64,
    pub(crate) u1: f64,
    pub(crate) x0: f64,
    pub(crate) x1: f64,
    pub(crate) y0: f64,
    pub(crate) y1: f64,
}

/// Linear pieces of the coupling `X = Q_F`, `Y(u) = Q_G(u + α)` over `[0, 1]`.
pub(crate) fn coupling_segments(f: &Quantile, g: &Quantile, alpha: f64) -> Vec<Segment> {
    let mut br: Vec<f64> = f.knots_u().to_vec();
    let lo = (alpha).floor() as i64 - 1;
    let hi = (alpha + 1.0).ceil() as i64 + 1;
    for w in lo..=hi {
        for &v in g.knots_u() {
            let s = v + w as f64 - alpha;
            if s > 0.0 && s < 1.0 {
                br.push(s);
            }
        }
    }
    br.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    br.dedup();
    let mut out = Vec::with_capacity(br.len());
    for w in br.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        out.push(Segment {
            u0: a,
            u1: b,
            x0: f.eval_on_piece(mid, a),
            x1: f.eval_on_piece(mid, b),
            y0: g.eval_on_piece(mid + alpha, a + alpha),
            y1: g.eval_on_piece(mid + alpha, b + alpha),
        });
    }
    out
}

/// `∫₀¹ (X − Y)² du` over the segments, exact for linear pieces.
pub(crate) fn coupling_cost(segs: &[Segment]) -> f64 {
    segs.iter()
        .map(|s| {
            let da = s.x0 - s.y0;
            let db = s.x1 - s.y1;
            (s.u1 - s.u0) * (da * da + da * db + db * db) / 3.0
        })
        .sum()
}

pub(crate) fn shifted_cost(f: &Quantile, g: &Quantile, alpha: f64) -> f64 {
    coupling_cost(&coupling_segments(f, g, alpha))
}

/// Optimal coupling on the circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CircleOptimum {
    pub(crate) cost: f64,
    pub(crate) alpha: f64,
    pub(crate) cut: usize,
    pub(crate) evaluations: usize,
}

/// Minimizes the shift cost, which is convex in the shift. The shifts
/// induced by cutting the circle at each grid boundary are sorted and
/// searched by ternary search (convex samples at sorted points are
/// unimodal), then the optimum is refined by golden-section search between
/// the neighbouring candidates.
pub(crate) fn circle_optimum(f: &Quantile, g: &Quantile) -> CircleOptimum {
    let n = f.knots_u().len() - 1;
    let mut cand: Vec<(f64, usize)> = (0..n)
        .map(|c| (g.knots_u()[c] - f.knots_u()[c], c))
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut evaluations = 0;
    let mut memo = vec![f64::NAN; n];
    let mut cost_at = |i: usize| {
        if memo[i].is_nan() {
            evaluations += 1;
            memo[i] = shifted_cost(f, g, cand[i].0);
        }
        memo[i]
    };
    let (mut lo, mut hi) = (0, n - 1);
    while hi - lo > 3 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        if cost_at(m1) < cost_at(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let mut best = (f64::INFINITY, lo);
    for i in lo..=hi {
        let c = cost_at(i);
        if c < best.0 {
            best = (c, i);
        }
    }
    let (alpha_best, cut) = cand[best.1];
    // By convexity no candidate lies strictly between the best one and the
    // optimum, so the nearest distinct candidates on either side bracket it.
    // Symmetric inputs produce duplicate shifts; those are skipped.
    let gap = 1e-9;
    let lo = cand
        .iter()
        .map(|c| c.0)
        .filter(|a| *a < alpha_best - gap)
        .fold(alpha_best - 1.0, f64::max);
    let hi = cand
        .iter()
        .map(|c| c.0)
        .filter(|a| *a > alpha_best + gap)
        .fold(alpha_best + 1.0, f64::min);
    let (alpha, cost, evals) = golden_min(|a| shifted_cost(f, g, a), lo, hi, alpha_best, best.0);
    evaluations += evals;
    CircleOptimum {
        cost,
        alpha,
        cut,
        evaluations,
    }
}

/// Golden-section search on `[lo, hi]`; never returns worse than `(x0, f0)`.
fn golden_min(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    f0: f64,
) -> (f64, f64, usize) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut evals = 2;
    while hi - lo > 1e-13 && evals < 200 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
        evals += 1;
    }
    let (x, v) = if fc < fd { (c, fc) } else { (d, fd) };
    if v < f0 {
        (x, v, evals)
    } else {
        (x0, f0, evals)
    }
}

pub(crate) const TWO_PI: f64 = 2.0 * PI;
