//! Determinantal approximation to `log per(nA)` for doubly stochastic `A`.
//!
//! First order:
//!
//! ```text
//! log per(nA) ≈ log n! − ½ log det(I + t²J − t²AᵀA),   t² ∈ {1, n/(n−1)}
//! ```
//!
//! Second order adds the degree 3–6 terms of the `O(n⁻¹)` correction, built
//! from the deviation `ε = nA − 1` and meant to sit on top of the modified
//! first-order term. In those terms `Σ` of a matrix means the
//! sum of all its entries, `tr` the trace, and a numeric subscript an
//! entrywise power.

use serde::{Deserialize, Serialize};

use crate::dense::log_det_spd;
use crate::error::{Error, Result};
use crate::estimate::{Basis, LogPermanentEstimate, Method};
use crate::matrix::{DeviationMatrix, DoublyStochasticMatrix, SquareMatrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TSquaredMode {
    /// t² = 1.
    Unit,
    /// t² = n/(n−1).
    #[default]
    Modified,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxOrder {
    #[default]
    First,
    Second,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproxConfig {
    pub t_squared_mode: TSquaredMode,
    pub order: ApproxOrder,
}

impl ApproxConfig {
    pub fn new(t_squared_mode: TSquaredMode, order: ApproxOrder) -> Self {
        Self {
            t_squared_mode,
            order,
        }
    }

    pub fn t_squared(&self, n: usize) -> Result<f64> {
        match self.t_squared_mode {
            TSquaredMode::Unit => Ok(1.0),
            TSquaredMode::Modified if n >= 2 => Ok(n as f64 / (n as f64 - 1.0)),
            TSquaredMode::Modified => Err(Error::InvalidParameter(
                "t² = n/(n−1) needs n ≥ 2".into(),
            )),
        }
    }
}

/// Degree-grouped pieces of the second-order correction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrectionBreakdown {
    #[serde(rename = "d3")]
    pub degree3: f64,
    #[serde(rename = "d4")]
    pub degree4: f64,
    #[serde(rename = "d5")]
    pub degree5: f64,
    #[serde(rename = "d6")]
    pub degree6: f64,
    pub total: f64,
}

impl CorrectionBreakdown {
    fn new(degree3: f64, degree4: f64, degree5: f64, degree6: f64) -> Self {
        Self {
            degree3,
            degree4,
            degree5,
            degree6,
            total: degree3 + degree4 + degree5 + degree6,
        }
    }
}

/// `I + t²J − t²AᵀA`.
pub fn det_kernel(a: &DoublyStochasticMatrix, t_squared: f64) -> SquareMatrix {
    let n = a.n();
    let gram = a.matrix().gram();
    let j = t_squared / n as f64;
    SquareMatrix::from_fn(n, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id + j - t_squared * gram.get(r, c)
    })
}

/// First-order estimate of `log(per(nA)/n!) = −½ log det(I + t²J − t²AᵀA)`.
///
/// Fails with [`Error::ApproximationUndefined`] when the kernel is not
/// positive definite, which happens at and near permutation matrices.
pub fn det_approx_first(
    a: &DoublyStochasticMatrix,
    cfg: &ApproxConfig,
) -> Result<LogPermanentEstimate> {
    let n = a.n();
    if n == 1 {
        return Ok(LogPermanentEstimate::new(0.0, Basis::RatioToFactorial, Method::DetOrder1));
    }
    let t2 = cfg.t_squared(n)?;
    let log_det = match log_det_spd(&det_kernel(a, t2)) {
        Ok(v) => v,
        Err(e @ Error::NotPositiveDefinite { .. }) => {
            return Err(Error::ApproximationUndefined(Box::new(e)))
        }
        Err(e) => return Err(e),
    };
    Ok(
        LogPermanentEstimate::new(-0.5 * log_det, Basis::RatioToFactorial, Method::DetOrder1)
            .with_term("t_squared", t2),
    )
}

/// The degree 3–6 correction terms evaluated at `ε`, relative to the
/// modified-t² first-order term.
///
/// Besides the connected index patterns, degree 4 carries the disconnected
/// `tr²(εᵀε)` pattern and degree 6 the disconnected `tr(εᵀε)·tr((εᵀε)²)`
/// one. Degrees 4 and 6 also carry the leading part of
/// `tr((εᵀε)^k)·(1/n↓2k − 1/(n↓2)^k)/(2k)`, the gap between the exact
/// trace coefficient and the one built into the modified first-order term.
pub fn second_order_correction(eps: &DeviationMatrix) -> CorrectionBreakdown {
    let e = eps.matrix();
    let n = e.n() as f64;
    let et = e.transpose();
    let e2 = e.powi(2);
    let e2t = e2.transpose();
    let ete = e.gram(); // εᵀε
    let eet = e.gram_rows(); // εεᵀ
    let mm = |a: &SquareMatrix, b: &SquareMatrix| a.matmul(b).expect("same order");
    let tr1 = ete.trace();
    let ete2 = mm(&ete, &ete);
    let tr2 = ete2.trace();
    let tr3 = mm(&ete2, &ete).trace();

    let degree3 = 2.0 / (3.0 * n.powi(3)) * e.powi(3).grand_sum();

    let degree4 = -3.0 / (4.0 * n.powi(4)) * (mm(&e2t, &e2).grand_sum() + mm(&e2, &e2t).grand_sum())
        + (0.5 * tr1 * tr1 + tr2) / n.powi(5);

    // ε₂ εᵀ ε εᵀ = ε₂ (εᵀε) εᵀ
    let degree5 = 2.0 / n.powi(5) * mm(&mm(&e2, &ete), &et).trace()
        + 1.0 / n.powi(5) * mm(&mm(&e2, &et), &e2).grand_sum();

    let cubes = ete.powi(3).grand_sum() + eet.powi(3).grand_sum();
    // ε₂ᵀ (εεᵀ) ε₂ and ε₂ (εᵀε) ε₂ᵀ
    let sandwiches = mm(&mm(&e2t, &eet), &e2).grand_sum() + mm(&mm(&e2, &ete), &e2t).grand_sum();
    let squares = mm(&e2, &ete.powi(2)).grand_sum() + mm(&e2t, &eet.powi(2)).grand_sum();
    let degree6 = -(cubes / 3.0 + sandwiches / 2.0 + 1.5 * squares) / n.powi(6)
        + (tr1 * tr2 + 2.0 * tr3) / n.powi(7);

    CorrectionBreakdown::new(degree3, degree4, degree5, degree6)
}

/// First-order estimate plus the unit-scale correction, ratio basis.
pub fn det_approx_second(
    a: &DoublyStochasticMatrix,
    cfg: &ApproxConfig,
) -> Result<LogPermanentEstimate> {
    let first = det_approx_first(a, cfg)?;
    let corr = second_order_correction(&DeviationMatrix::from_doubly_stochastic(a));
    let mut est = first.shifted(corr.total, "correction");
    est.method = Method::DetOrder2;
    Ok(est
        .with_term("d3", corr.degree3)
        .with_term("d4", corr.degree4)
        .with_term("d5", corr.degree5)
        .with_term("d6", corr.degree6))
}

/// Both orders at once, sharing the kernel factorization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetEstimates {
    pub x0: f64,
    pub x1: f64,
    pub t_squared: f64,
    pub correction: CorrectionBreakdown,
    pub basis: Basis,
}

pub fn det_estimates(a: &DoublyStochasticMatrix, mode: TSquaredMode) -> Result<DetEstimates> {
    let cfg = ApproxConfig::new(mode, ApproxOrder::First);
    let first = det_approx_first(a, &cfg)?;
    let correction = second_order_correction(&DeviationMatrix::from_doubly_stochastic(a));
    Ok(DetEstimates {
        x0: first.log_value,
        x1: first.log_value + correction.total,
        t_squared: cfg.t_squared(a.n().max(2))?,
        correction,
        basis: Basis::RatioToFactorial,
    })
}

/// Partial sum `Σ_{k=1}^{k_max} t^{2k}/(2k) · tr((εᵀε / n↓2)^k)`.
///
/// A term that fails to decrease means the spectral radius of
/// `t² εᵀε / n↓2` exceeds one, and the series is reported as divergent.
pub fn h0_series(eps: &DeviationMatrix, t: f64, k_max: usize) -> Result<f64> {
    let n = eps.n();
    if n < 2 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let m = eps.matrix().gram().scale(t * t / (nf * (nf - 1.0)));
    let mut power = m.clone();
    let mut total = 0.0;
    let mut prev = f64::INFINITY;
    for k in 1..=k_max {
        if k > 1 {
            power = power.matmul(&m)?;
        }
        let term = power.trace() / k as f64 / 2.0;
        if !term.is_finite() || (term > 0.0 && term >= prev) {
            return Err(Error::SeriesDiverges(k));
        }
        total += term;
        prev = term;
        // Later terms cannot change the sum in double precision.
        if term <= total * 1e-18 {
            break;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::ln_factorial;

    fn two_thirds() -> DoublyStochasticMatrix {
        DoublyStochasticMatrix::new(
            SquareMatrix::from_rows(&[vec![2.0 / 3.0, 1.0 / 3.0], vec![1.0 / 3.0, 2.0 / 3.0]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn exact_at_the_center() {
        for mode in [TSquaredMode::Unit, TSquaredMode::Modified] {
            for n in [2, 7, 20] {
                let j = DoublyStochasticMatrix::uniform(n);
                let cfg = ApproxConfig::new(mode, ApproxOrder::First);
                let first = det_approx_first(&j, &cfg).unwrap();
                assert!(first.log_value.abs() < 1e-14);
                assert!((first.to_raw(n).log_value - ln_factorial(n)).abs() < 1e-12);
                let second = det_approx_second(&j, &cfg).unwrap();
                assert!(second.log_value.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn two_by_two_unit_mode() {
        let cfg = ApproxConfig::new(TSquaredMode::Unit, ApproxOrder::First);
        let x0 = det_approx_first(&two_thirds(), &cfg).unwrap().log_value;
        assert!((x0 - 0.5 * (9.0_f64 / 8.0).ln()).abs() < 1e-15);
        let kernel = det_kernel(&two_thirds(), 1.0);
        let expected = [17.0 / 18.0, 1.0 / 18.0, 1.0 / 18.0, 17.0 / 18.0];
        for (a, b) in kernel.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn two_by_two_correction_by_hand() {
        // ε = ±1/3 in a checkerboard, εᵀε = 2/9·[[1,−1],[−1,1]], so
        // tr(εᵀε) = 4/9, tr((εᵀε)²) = 16/81, tr((εᵀε)³) = 64/729.
        let c = second_order_correction(&DeviationMatrix::from_doubly_stochastic(&two_thirds()));
        // Entrywise cubes cancel.
        assert!(c.degree3.abs() < 1e-17);
        // ε₂ = J/9 gives Σ(ε₂ᵀε₂) = 8/81: −3/64·16/81 + (½·16/81 + 16/81)/32.
        let d4 = -3.0 / 64.0 * (16.0 / 81.0) + 1.5 * (16.0 / 81.0) / 32.0;
        assert!((c.degree4 - d4).abs() < 1e-16, "{}", c.degree4);
        // εᵀε annihilates the constant ε₂ and its entrywise cube cancels;
        // Σ ε₂(εᵀε)₂ and its transpose are 32/729 each.
        assert!(c.degree5.abs() < 1e-17);
        let d6 = -1.5 * (64.0 / 729.0) / 64.0 + (4.0 / 9.0 * 16.0 / 81.0 + 2.0 * 64.0 / 729.0) / 128.0;
        assert!((c.degree6 - d6).abs() < 1e-16, "{}", c.degree6);
        assert_eq!(c.total, c.degree3 + c.degree4 + c.degree5 + c.degree6);
    }

    #[test]
    fn correction_vanishes_at_the_center() {
        let c = second_order_correction(&DeviationMatrix::from_doubly_stochastic(
            &DoublyStochasticMatrix::uniform(6),
        ));
        assert_eq!(c, CorrectionBreakdown::default());
    }

    #[test]
    fn permutations_are_undefined() {
        let p = DoublyStochasticMatrix::permutation(&[2, 0, 1, 3]).unwrap();
        for mode in [TSquaredMode::Unit, TSquaredMode::Modified] {
            let r = det_approx_first(&p, &ApproxConfig::new(mode, ApproxOrder::First));
            assert!(matches!(r, Err(Error::ApproximationUndefined(_))), "{r:?}");
        }
    }

    #[test]
    fn h0_small_cases() {
        let zero = DeviationMatrix::from_doubly_stochastic(&DoublyStochasticMatrix::uniform(5));
        assert_eq!(h0_series(&zero, 1.0, 50).unwrap(), 0.0);
        let eps = DeviationMatrix::from_doubly_stochastic(&two_thirds());
        let one = h0_series(&eps, 0.7, 1).unwrap();
        let quad = 0.49 * eps.matrix().gram().trace() / (2.0 * 2.0);
        assert!((one - quad).abs() < 1e-16);
    }

    #[test]
    fn h0_detects_divergence() {
        let p = DoublyStochasticMatrix::permutation(&[1, 2, 0]).unwrap();
        let eps = DeviationMatrix::from_doubly_stochastic(&p);
        assert!(matches!(h0_series(&eps, 1.0, 10), Err(Error::SeriesDiverges(_))));
    }
}
