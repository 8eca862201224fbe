//! Banded solvers used by the implicit time steppers.

/// Pre-factored tridiagonal system `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = d[i]`.
#[derive(Debug, Clone)]
pub(crate) struct Tridiag {
    sub: Vec<f64>,
    cprime: Vec<f64>,
    denom: Vec<f64>,
}

impl Tridiag {
    /// `sub[0]` and `sup[n-1]` are ignored. The system must be diagonally
    /// dominant; no pivoting is done.
    pub(crate) fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Self {
        let n = diag.len();
        let mut cprime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        denom[0] = diag[0];
        if n > 1 {
            cprime[0] = sup[0] / denom[0];
        }
        for i in 1..n {
            denom[i] = diag[i] - sub[i] * cprime[i - 1];
            if i + 1 < n {
                cprime[i] = sup[i] / denom[i];
            }
        }
        Tridiag {
            sub: sub.to_vec(),
            cprime,
            denom,
        }
    }

    pub(crate) fn solve_in_place(&self, d: &mut [f64]) {
        let n = d.len();
        d[0] /= self.denom[0];
        for i in 1..n {
            d[i] = (d[i] - self.sub[i] * d[i - 1]) / self.denom[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            d[i] -= self.cprime[i] * d[i + 1];
        }
    }
}

/// Cyclic tridiagonal system with corner entries, solved by the
/// Sherman–Morrison correction of a plain tridiagonal factorization.
///
/// Row `i` reads `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1]` with indices
/// taken modulo `n`.
#[derive(Debug, Clone)]
pub(crate) struct CyclicTridiag {
    inner: Tridiag,
    gamma: f64,
    top: f64,
    z: Vec<f64>,
    zfac: f64,
}

impl CyclicTridiag {
    pub(crate) fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Self {
        let n = diag.len();
        assert!(n >= 3, "cyclic system needs at least three unknowns");
        let top = sub[0]; // couples row 0 to x[n-1]
        let bottom = sup[n - 1]; // couples row n-1 to x[0]
        let gamma = -diag[0];
        let mut dd = diag.to_vec();
        dd[0] -= gamma;
        dd[n - 1] -= top * bottom / gamma;
        let inner = Tridiag::new(sub, &dd, sup);
        let mut z = vec![0.0; n];
        z[0] = gamma;
        z[n - 1] = bottom;
        inner.solve_in_place(&mut z);
        let zfac = 1.0 + z[0] + top * z[n - 1] / gamma;
        CyclicTridiag {
            inner,
            gamma,
            top,
            z,
            zfac,
        }
    }

    pub(crate) fn solve_in_place(&self, d: &mut [f64]) {
        let n = d.len();
        self.inner.solve_in_place(d);
        let fac = (d[0] + self.top * d[n - 1] / self.gamma) / self.zfac;
        for (x, z) in d.iter_mut().zip(&self.z) {
            *x -= fac * z;
        }
    }
}
