//! Doubly stochastic projection by iterative proportional scaling.
//!
//! A non-negative `Y` is written as `Y_ij = n·A_ij·exp(β_i + γ_j)` with `A`
//! doubly stochastic. The factors are accumulated in log space and fixed by
//! the gauge `Σβ = Σγ`.

use serde::{Deserialize, Serialize};

use crate::approx::{self, ApproxConfig, ApproxOrder};
use crate::error::{Error, Result};
use crate::estimate::LogPermanentEstimate;
use crate::matrix::{marginal_error, DoublyStochasticMatrix, SquareMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    pub tol: f64,
    pub max_iters: usize,
    /// Sweeps without a 1% improvement in marginal error before giving up.
    pub stall_window: usize,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 10_000,
            stall_window: 500,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol = {} must be > 0", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingResult {
    #[serde(rename = "A")]
    pub a: DoublyStochasticMatrix,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub iterations: usize,
    #[serde(rename = "marginal_error")]
    pub final_marginal_error: f64,
    pub converged: bool,
}

impl ScalingResult {
    pub fn n(&self) -> usize {
        self.a.n()
    }

    /// `Σβ_i + Σγ_j`, so that `log per(Y) = log per(nA) + log_scale()`.
    pub fn log_scale(&self) -> f64 {
        self.beta.iter().sum::<f64>() + self.gamma.iter().sum::<f64>()
    }

    /// `n·A_ij·exp(β_i + γ_j)`.
    pub fn reconstruct(&self) -> SquareMatrix {
        let n = self.n();
        let m = self.a.matrix();
        SquareMatrix::from_fn(n, |i, j| {
            n as f64 * m.get(i, j) * (self.beta[i] + self.gamma[j]).exp()
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n(),
            "A": self.a.matrix().to_rows(),
            "beta": self.beta,
            "gamma": self.gamma,
            "iterations": self.iterations,
            "marginal_error": self.final_marginal_error,
            "converged": self.converged,
        })
    }
}

/// Alternately normalizes rows then columns until every margin is within
/// `cfg.tol` of one.
pub fn project(y: &SquareMatrix, cfg: &SinkhornConfig) -> Result<ScalingResult> {
    cfg.validate()?;
    let n = y.n();
    for (k, &v) in y.as_slice().iter().enumerate() {
        if v < 0.0 {
            return Err(Error::NegativeEntry {
                row: k / n,
                col: k % n,
                value: v,
            });
        }
    }
    if let Some(i) = y.row_sums().iter().position(|&s| s == 0.0) {
        return Err(Error::NotScalable(format!("row {i} is zero")));
    }
    if let Some(j) = y.col_sums().iter().position(|&s| s == 0.0) {
        return Err(Error::NotScalable(format!("column {j} is zero")));
    }

    let mut a = y.as_slice().to_vec();
    let mut log_row = vec![0.0; n];
    let mut log_col = vec![0.0; n];
    let mut err = marginal_error(y);
    let mut iterations = 0;
    let mut best = err;
    let mut best_at = 0;

    while err > cfg.tol {
        if iterations == cfg.max_iters {
            let result = finish(n, a, &log_row, &log_col, iterations, err, false)?;
            return Err(Error::MaxItersExceeded(Box::new(result)));
        }
        iterations += 1;

        for (row, lr) in a.chunks_exact_mut(n).zip(log_row.iter_mut()) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
            *lr += s.ln();
        }
        let mut col_sums = vec![0.0; n];
        for row in a.chunks_exact(n) {
            for (c, x) in col_sums.iter_mut().zip(row) {
                *c += x;
            }
        }
        for row in a.chunks_exact_mut(n) {
            for (x, c) in row.iter_mut().zip(&col_sums) {
                *x /= c;
            }
        }
        for (lc, c) in log_col.iter_mut().zip(&col_sums) {
            *lc += c.ln();
        }

        err = slice_marginal_error(&a, n);
        if err < 0.99 * best {
            best = err;
            best_at = iterations;
        } else if iterations - best_at >= cfg.stall_window {
            return Err(Error::NotScalable(format!(
                "marginal error stalled at {err:e} after {iterations} sweeps"
            )));
        }
    }
    finish(n, a, &log_row, &log_col, iterations, err, true)
}

fn slice_marginal_error(a: &[f64], n: usize) -> f64 {
    let mut err: f64 = 0.0;
    let mut col_sums = vec![0.0; n];
    for row in a.chunks_exact(n) {
        err = err.max((row.iter().sum::<f64>() - 1.0).abs());
        for (c, x) in col_sums.iter_mut().zip(row) {
            *c += x;
        }
    }
    col_sums.iter().fold(err, |e, c| e.max((c - 1.0).abs()))
}

fn finish(
    n: usize,
    a: Vec<f64>,
    log_row: &[f64],
    log_col: &[f64],
    iterations: usize,
    err: f64,
    converged: bool,
) -> Result<ScalingResult> {
    // Y_ij = A_ij·R_i·C_j, so β_i + γ_j = log R_i + log C_j − log n, split
    // so that Σβ = Σγ.
    let nf = n as f64;
    let shift = (log_col.iter().sum::<f64>() - log_row.iter().sum::<f64>()) / nf;
    let row_offset = (shift - nf.ln()) / 2.0;
    let col_offset = (-shift - nf.ln()) / 2.0;
    let beta = log_row.iter().map(|b| b + row_offset).collect();
    let gamma = log_col.iter().map(|g| g + col_offset).collect();
    let m = SquareMatrix::from_vec(n, a)?;
    let tol = if converged { err.max(crate::matrix::DS_TOL) } else { f64::INFINITY };
    Ok(ScalingResult {
        a: DoublyStochasticMatrix::with_tol(m, tol)?,
        beta,
        gamma,
        iterations,
        final_marginal_error: err,
        converged,
    })
}

/// Residual deviance `−2 Σ log(n·A_ij)`.
pub fn deviance(a: &DoublyStochasticMatrix) -> Result<f64> {
    let n = a.n();
    let nf = n as f64;
    let mut total = 0.0;
    for (k, &x) in a.matrix().as_slice().iter().enumerate() {
        if x <= 0.0 {
            return Err(Error::ZeroEntry {
                row: k / n,
                col: k % n,
            });
        }
        total += (nf * x).ln();
    }
    // Tiny negative values are rounding at the uniform matrix.
    Ok((-2.0 * total).max(0.0))
}

/// `log per(Y)` through the projection: `Σβ + Σγ + x(A)` where `x` is the
/// determinantal estimate of `log per(nA)`.
pub fn approximate_log_permanent(
    y: &SquareMatrix,
    sinkhorn: &SinkhornConfig,
    cfg: &ApproxConfig,
) -> Result<LogPermanentEstimate> {
    let scaled = project(y, sinkhorn)?;
    let est = match cfg.order {
        ApproxOrder::First => approx::det_approx_first(&scaled.a, cfg)?,
        ApproxOrder::Second => approx::det_approx_second(&scaled.a, cfg)?,
    };
    Ok(est.to_raw(scaled.n()).shifted(scaled.log_scale(), "log_scale"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SinkhornConfig {
        SinkhornConfig::default()
    }

    #[test]
    fn ones_project_to_uniform_in_one_sweep() {
        let r = project(&SquareMatrix::constant(5, 1.0), &cfg()).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        for &x in r.a.matrix().as_slice() {
            assert!((x - 0.2).abs() < 1e-16);
        }
        assert!(r.log_scale().abs() < 1e-14);
    }

    #[test]
    fn two_by_two_keeps_cross_ratio() {
        let y = SquareMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let r = project(&y, &cfg()).unwrap();
        let a = r.a.matrix();
        assert!((a.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((a.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        let back = r.reconstruct();
        for (u, v) in back.as_slice().iter().zip(y.as_slice()) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_is_already_doubly_stochastic() {
        let r = project(&SquareMatrix::identity(2), &cfg()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.a.matrix(), &SquareMatrix::identity(2));
        let half_log2 = -(2.0_f64).ln() / 2.0;
        for b in r.beta.iter().chain(&r.gamma) {
            assert!((b - half_log2).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let neg = SquareMatrix::from_rows(&[vec![1.0, -1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(project(&neg, &cfg()), Err(Error::NegativeEntry { .. })));
        let zero_row = SquareMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(project(&zero_row, &cfg()), Err(Error::NotScalable(_))));
        let bad_cfg = SinkhornConfig { tol: 0.0, ..cfg() };
        assert!(project(&SquareMatrix::identity(2), &bad_cfg).is_err());
    }

    #[test]
    fn zero_permanent_pattern_stalls() {
        // per(Y) = 0: rows 0 and 1 can only use column 0.
        let y = SquareMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 1.0],
        ])
        .unwrap();
        let cfg = SinkhornConfig {
            stall_window: 50,
            ..cfg()
        };
        assert!(matches!(
            project(&y, &cfg),
            Err(Error::NotScalable(_) | Error::MaxItersExceeded(_))
        ));
    }

    #[test]
    fn max_iters_carries_last_iterate() {
        let y = SquareMatrix::from_rows(&[vec![1.0, 1e-6], vec![1.0, 1.0]]).unwrap();
        let cfg = SinkhornConfig {
            max_iters: 1,
            ..cfg()
        };
        match project(&y, &cfg) {
            Err(Error::MaxItersExceeded(last)) => {
                assert_eq!(last.iterations, 1);
                assert!(!last.converged);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn deviance_examples() {
        assert_eq!(deviance(&DoublyStochasticMatrix::uniform(4)).unwrap(), 0.0);
        let a = DoublyStochasticMatrix::new(
            SquareMatrix::from_rows(&[vec![2.0 / 3.0, 1.0 / 3.0], vec![1.0 / 3.0, 2.0 / 3.0]]).unwrap(),
        )
        .unwrap();
        assert!((deviance(&a).unwrap() - 4.0 * (9.0_f64 / 8.0).ln()).abs() < 1e-14);
        assert!(matches!(
            deviance(&DoublyStochasticMatrix::permutation(&[1, 0]).unwrap()),
            Err(Error::ZeroEntry { .. })
        ));
    }

    #[test]
    fn deviance_grows_toward_the_corners() {
        let mix = |w: f64| {
            DoublyStochasticMatrix::new(SquareMatrix::from_fn(3, |i, j| {
                w * if i == j { 1.0 } else { 0.0 } + (1.0 - w) / 3.0
            }))
            .unwrap()
        };
        let d: Vec<f64> = [0.1, 0.5, 0.9, 0.99].iter().map(|&w| deviance(&mix(w)).unwrap()).collect();
        assert!(d.windows(2).all(|p| p[0] < p[1]), "{d:?}");
    }

    #[test]
    fn ones_have_factorial_permanent() {
        let est = approximate_log_permanent(
            &SquareMatrix::constant(6, 3.0),
            &cfg(),
            &ApproxConfig::default(),
        )
        .unwrap();
        let expected = 720.0_f64.ln() + 6.0 * 3.0_f64.ln();
        assert!((est.log_value - expected).abs() < 1e-12);
    }
}
