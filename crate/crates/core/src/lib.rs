//! Permanents of doubly stochastic and scalable non-negative matrices: exact
//! evaluation at small order, the determinantal approximation at any order,
//! an exact partition-lattice expansion for checking it, and random matrix
//! ensembles for validation.

// Guards written as `!(x > 0.0)` are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod dense;
pub mod ensembles;
pub mod error;
pub mod estimate;
pub mod exact;
pub mod matrix;
pub mod oracle;
pub mod partition;
pub mod simulation;
pub mod sinkhorn;
pub mod special;
pub mod tables;

pub use approx::{
    det_approx_first, det_approx_second, det_estimates, h0_series, second_order_correction,
    ApproxConfig, ApproxOrder, CorrectionBreakdown, DetEstimates, TSquaredMode,
};
pub use dense::{centered_spectrum, l2_norm_sq, log_det_spd, spectral_gap};
pub use ensembles::{
    estimate_nu, sample_crp, sample_dsd, sample_gamma, table1_kernel, two_block_matrix, RngStream,
};
pub use error::{Error, Result};
pub use estimate::{ln_factorial, Basis, LogPermanentEstimate, Method};
pub use exact::{log_per_ratio, permanent_brute, permanent_ryser, permanent_two_block};
pub use matrix::{DeviationMatrix, DoublyStochasticMatrix, SquareMatrix};
pub use partition::SetPartition;
pub use simulation::{run_simulation, SimulationRecord, Structure};
pub use sinkhorn::{approximate_log_permanent, deviance, project, ScalingResult, SinkhornConfig};
