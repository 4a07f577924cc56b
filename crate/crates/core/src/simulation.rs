//! Seeded replicate study comparing exact log permanent ratios with the
//! first- and second-order determinantal estimates.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::approx::{det_estimates, TSquaredMode};
use crate::dense::{l2_norm_sq, spectral_gap};
use crate::ensembles::{
    apply_block_pattern, estimate_nu, gamma_matrix, residual, sample_crp, sample_gamma, RngStream,
};
use crate::error::{Error, Result};
use crate::exact::{log_per_ratio, MAX_RYSER_ORDER};
use crate::matrix::fmt17;
use crate::sinkhorn::{project, SinkhornConfig};

/// Shape of the gamma law the per-matrix index is drawn from; the scale is
/// its reciprocal so the mean is one.
pub const NU_SHAPE: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    PlainDsd,
    BlockPatterned,
}

impl Structure {
    pub fn as_str(self) -> &'static str {
        match self {
            Structure::PlainDsd => "plain_dsd",
            Structure::BlockPatterned => "block_patterned",
        }
    }

    fn code(self) -> u64 {
        match self {
            Structure::PlainDsd => 0,
            Structure::BlockPatterned => 1,
        }
    }

    /// Even orders are plain, odd orders carry a block pattern.
    pub fn for_order(n: usize) -> Self {
        if n.is_multiple_of(2) {
            Structure::PlainDsd
        } else {
            Structure::BlockPatterned
        }
    }
}

/// The stream a replicate draws from; depends only on its coordinates.
pub fn stream_id(n: usize, structure: Structure, rep: usize) -> u64 {
    ((n as u64) << 40) | (structure.code() << 32) | rep as u64
}

pub fn default_plan(orders: &[usize]) -> Vec<(usize, Structure)> {
    orders.iter().map(|&n| (n, Structure::for_order(n))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub n: usize,
    pub structure: Structure,
    pub rep: usize,
    pub nu: f64,
    pub y: f64,
    pub x0: Option<f64>,
    pub x1: Option<f64>,
    pub resid0: Option<f64>,
    pub resid1: Option<f64>,
    pub l2: f64,
    pub gap: f64,
    pub nu_hat: f64,
    pub flags: String,
}

pub const CSV_HEADER: &str = "n,structure,rep,nu,y,x0,x1,resid0,resid1,l2,gap,nu_hat,flags";

fn opt17(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

impl SimulationRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.structure.as_str(),
            self.rep,
            fmt17(self.nu),
            fmt17(self.y),
            opt17(self.x0),
            opt17(self.x1),
            opt17(self.resid0),
            opt17(self.resid1),
            fmt17(self.l2),
            fmt17(self.gap),
            fmt17(self.nu_hat),
            self.flags,
        )
    }

    pub fn under_estimated(&self) -> Option<bool> {
        self.x0.map(|x0| self.y > x0)
    }
}

/// One replicate: draw, project, evaluate exactly and approximately.
pub fn simulate_one(
    n: usize,
    structure: Structure,
    rep: usize,
    seed: u64,
    cfg: &SinkhornConfig,
) -> Result<SimulationRecord> {
    let mut rng = RngStream::new(seed, stream_id(n, structure, rep));
    let nu = sample_gamma(NU_SHAPE, &mut rng)? / NU_SHAPE;
    let mut y_raw = gamma_matrix(n, nu, &mut rng)?;
    if structure == Structure::BlockPatterned {
        let eta = open_unit(&mut rng);
        let eta2 = open_unit(&mut rng);
        let partition = sample_crp(n, &mut rng)?;
        y_raw = apply_block_pattern(&y_raw, &partition, eta, eta2)?;
    }
    let a = project(&y_raw, cfg)?.a;
    let y = log_per_ratio(&a)?.log_value;
    let mut flags = Vec::new();
    let (x0, x1) = match det_estimates(&a, TSquaredMode::Modified) {
        Ok(d) => (Some(d.x0), Some(d.x1)),
        Err(Error::ApproximationUndefined(_)) => {
            flags.push("approx_undefined");
            (None, None)
        }
        Err(e) => return Err(e),
    };
    let nu_est = estimate_nu(&a)?;
    if nu_est.capped {
        flags.push("nu_capped");
    }
    Ok(SimulationRecord {
        n,
        structure,
        rep,
        nu,
        y,
        x0,
        x1,
        resid0: x0.and_then(|x| residual(n, y, x)),
        resid1: x1.and_then(|x| residual(n, y, x)),
        l2: l2_norm_sq(&a),
        gap: spectral_gap(&a)?,
        nu_hat: nu_est.nu_hat,
        flags: flags.join("|"),
    })
}

/// Uniform on the open interval `(0, 1)`.
fn open_unit(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// All replicates of `plan`, ordered by plan entry and then replicate.
pub fn run_simulation(
    plan: &[(usize, Structure)],
    reps: usize,
    seed: u64,
    cfg: &SinkhornConfig,
) -> Result<Vec<SimulationRecord>> {
    for &(n, _) in plan {
        if !(2..=MAX_RYSER_ORDER).contains(&n) {
            return Err(Error::OrderTooLarge {
                n,
                max: MAX_RYSER_ORDER,
            });
        }
    }
    let jobs: Vec<(usize, Structure, usize)> = plan
        .iter()
        .flat_map(|&(n, s)| (0..reps).map(move |r| (n, s, r)))
        .collect();
    let run = |&(n, s, r): &(usize, Structure, usize)| simulate_one(n, s, r, seed, cfg);
    #[cfg(feature = "parallel")]
    let out: Vec<Result<SimulationRecord>> = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out: Vec<Result<SimulationRecord>> = jobs.iter().map(run).collect();
    out.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderSummary {
    pub n: usize,
    pub structure: Structure,
    pub count: usize,
    pub undefined: usize,
    /// `sqrt(median(resid²))` over replicates where the estimate exists.
    pub rms_resid0: f64,
    pub rms_resid1: f64,
    /// Fraction of replicates with `y > x0`.
    pub under_rate0: f64,
}

fn root_median_square(xs: impl Iterator<Item = f64>) -> f64 {
    let mut sq: Vec<f64> = xs.map(|x| x * x).collect();
    if sq.is_empty() {
        return f64::NAN;
    }
    sq.sort_by(f64::total_cmp);
    let m = sq.len();
    let median = if m % 2 == 1 {
        sq[m / 2]
    } else {
        0.5 * (sq[m / 2 - 1] + sq[m / 2])
    };
    median.sqrt()
}

/// Per `(n, structure)` summaries in first-appearance order.
pub fn summarize(records: &[SimulationRecord]) -> Vec<OrderSummary> {
    let mut keys: Vec<(usize, Structure)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.n, r.structure)) {
            keys.push((r.n, r.structure));
        }
    }
    keys.into_iter()
        .map(|(n, s)| {
            let group: Vec<&SimulationRecord> =
                records.iter().filter(|r| r.n == n && r.structure == s).collect();
            let defined: Vec<bool> = group.iter().filter_map(|r| r.under_estimated()).collect();
            OrderSummary {
                n,
                structure: s,
                count: group.len(),
                undefined: group.len() - defined.len(),
                rms_resid0: root_median_square(group.iter().filter_map(|r| r.resid0)),
                rms_resid1: root_median_square(group.iter().filter_map(|r| r.resid1)),
                under_rate0: if defined.is_empty() {
                    f64::NAN
                } else {
                    defined.iter().filter(|&&u| u).count() as f64 / defined.len() as f64
                },
            }
        })
        .collect()
}

pub fn records_to_csv(records: &[SimulationRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

pub fn records_to_jsonl(records: &[SimulationRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub const SUMMARY_HEADER: &str = "n,structure,count,undefined,rms_resid0,rms_resid1,under_rate0";

pub fn summary_to_csv(summary: &[OrderSummary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.n,
            s.structure.as_str(),
            s.count,
            s.undefined,
            fmt17(s.rms_resid0),
            fmt17(s.rms_resid1),
            fmt17(s.under_rate0),
        );
    }
    out
}

pub const PLOT_HEADER: &str = "n,structure,rep,log_x0,log_y,x0,resid0,x1,resid1";

/// Columns for log-log, residual-versus-estimate and residual-versus-order
/// plots; replicates without an estimate are skipped.
pub fn plot_csv(records: &[SimulationRecord]) -> String {
    let mut out = String::from(PLOT_HEADER);
    out.push('\n');
    for r in records {
        let (Some(x0), Some(x1), Some(r0), Some(r1)) = (r.x0, r.x1, r.resid0, r.resid1) else {
            continue;
        };
        if r.y <= 0.0 || x0 <= 0.0 {
            continue;
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            r.structure.as_str(),
            r.rep,
            fmt17(x0.ln()),
            fmt17(r.y.ln()),
            fmt17(x0),
            fmt17(r0),
            fmt17(x1),
            fmt17(r1),
        );
    }
    out
}
