//! Norms, spectral gap and the symmetric log-determinant kernel on the
//! doubly stochastic polytope.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{DeviationMatrix, DoublyStochasticMatrix, SquareMatrix};

/// Pivots at or below this fraction of the mean diagonal are treated as zero.
pub const PD_REL_TOL: f64 = 1e-12;

/// Asymmetry tolerated by [`log_det_spd`], relative to the largest entry.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// `Σ A_ij² − 1`, the squared distance from the uniform matrix J.
pub fn l2_norm_sq(a: &DoublyStochasticMatrix) -> f64 {
    // Σ (A_ij − 1/n)² avoids cancellation near J and equals Σ A² − 1 on DS_n.
    let inv = 1.0 / a.n() as f64;
    a.matrix()
        .as_slice()
        .iter()
        .map(|x| (x - inv) * (x - inv))
        .sum()
}

pub fn distance_sq(a: &DoublyStochasticMatrix, b: &DoublyStochasticMatrix) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            left: a.n(),
            right: b.n(),
        });
    }
    Ok(a.matrix()
        .as_slice()
        .iter()
        .zip(b.matrix().as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}

pub fn deviation(a: &DoublyStochasticMatrix) -> DeviationMatrix {
    DeviationMatrix::from_doubly_stochastic(a)
}

/// Every eigenvalue of `A − J`, possibly complex, as `(re, im)` pairs.
pub fn centered_spectrum(a: &DoublyStochasticMatrix) -> Result<Vec<(f64, f64)>> {
    let n = a.n();
    let inv = 1.0 / n as f64;
    let m = DMatrix::from_fn(n, n, |i, j| a.matrix().get(i, j) - inv);
    let schur =
        nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 10_000).ok_or(Error::EigenNoConvergence)?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect())
}

/// `1 − max |λ(A − J)|` over the full complex spectrum, clamped to `[0, 1]`.
pub fn spectral_gap(a: &DoublyStochasticMatrix) -> Result<f64> {
    if a.n() == 1 {
        return Ok(1.0);
    }
    let radius = centered_spectrum(a)?
        .into_iter()
        .fold(0.0_f64, |r, (re, im)| r.max(re.hypot(im)));
    Ok((1.0 - radius).clamp(0.0, 1.0))
}

/// `(1/n²) Σ |X_ij|^p`, the finite-n weak-boundedness moment.
pub fn weak_bound_moment(x: &SquareMatrix, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("moment order {p} < 1")));
    }
    let n = x.n() as f64;
    Ok(x.as_slice().iter().map(|v| v.abs().powf(p)).sum::<f64>() / (n * n))
}

/// `log det M` for symmetric positive definite `M`, by Cholesky with
/// diagonal pivoting. Fails instead of regularizing when a pivot vanishes.
pub fn log_det_spd(m: &SquareMatrix) -> Result<f64> {
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let n = m.n();
    let mut work = m.to_rows();
    let mut perm: Vec<usize> = (0..n).collect();
    let threshold = PD_REL_TOL * (m.trace().abs() / n as f64).max(f64::MIN_POSITIVE);
    let mut log_det = 0.0;

    for step in 0..n {
        // Largest remaining diagonal entry goes first.
        let (best, &pivot_row) = perm[step..]
            .iter()
            .enumerate()
            .max_by(|(_, &a), (_, &b)| work[a][a].total_cmp(&work[b][b]))
            .expect("non-empty");
        perm.swap(step, step + best);
        let p = pivot_row;
        let pivot = work[p][p];
        if !(pivot > threshold) {
            return Err(Error::NotPositiveDefinite { step, pivot });
        }
        log_det += pivot.ln();
        // Rank-one update of the trailing Schur complement.
        let col: Vec<f64> = perm[step + 1..].iter().map(|&r| work[r][p] / pivot).collect();
        for (a, &ra) in perm[step + 1..].iter().enumerate() {
            let la = col[a];
            for &rb in &perm[step + 1..] {
                let upd = la * work[p][rb];
                work[ra][rb] -= upd;
            }
        }
    }
    Ok(log_det)
}
