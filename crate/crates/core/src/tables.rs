//! The two reference tables: exponential kernels (exact Ryser against the
//! projected determinantal estimate) and two-block matrices (closed form
//! against the unit-t² estimate) at large order.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::approx::{det_approx_first, ApproxConfig, ApproxOrder, TSquaredMode};
use crate::ensembles::{table1_kernel, table2_block_ratio, two_block_matrix};
use crate::error::{Error, Result};
use crate::exact::{permanent_ryser, permanent_two_block, MAX_RYSER_ORDER};
use crate::matrix::{fmt17, DoublyStochasticMatrix};
use crate::sinkhorn::{approximate_log_permanent, SinkhornConfig};

pub const TABLE1_ORDERS: [usize; 9] = [8, 10, 12, 14, 16, 18, 20, 22, 24];
pub const TABLE1_RHOS: [f64; 2] = [1.0, 2.0];
pub const TABLE2_ORDERS: [usize; 8] = [20, 40, 60, 80, 100, 200, 300, 400];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1Row {
    pub n: usize,
    pub rho: f64,
    pub log_per: Option<f64>,
    pub approx: Option<f64>,
    /// `(log_per − approx) × 10³`.
    pub error_x1e3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

fn table1_row(n: usize, rho: f64, sinkhorn: &SinkhornConfig, order: ApproxOrder) -> Result<(f64, f64)> {
    if n > MAX_RYSER_ORDER {
        return Err(Error::OrderTooLarge {
            n,
            max: MAX_RYSER_ORDER,
        });
    }
    let k = table1_kernel(n, rho)?;
    let exact = permanent_ryser(&k)?.log_value;
    let cfg = ApproxConfig::new(TSquaredMode::Modified, order);
    let approx = approximate_log_permanent(&k, sinkhorn, &cfg)?.log_value;
    Ok((exact, approx))
}

/// One row per `(n, rho)`, `rho` varying fastest within each order.
pub fn table1(
    orders: &[usize],
    rhos: &[f64],
    sinkhorn: &SinkhornConfig,
    order: ApproxOrder,
) -> Vec<Table1Row> {
    let mut rows = Vec::new();
    for &rho in rhos {
        for &n in orders {
            rows.push(match table1_row(n, rho, sinkhorn, order) {
                Ok((exact, approx)) => Table1Row {
                    n,
                    rho,
                    log_per: Some(exact),
                    approx: Some(approx),
                    error_x1e3: Some((exact - approx) * 1e3),
                    failure: None,
                },
                Err(e) => Table1Row {
                    n,
                    rho,
                    log_per: None,
                    approx: None,
                    error_x1e3: None,
                    failure: Some(e.to_string()),
                },
            });
        }
    }
    rows
}

/// Between-block parameter: a fixed value, or `c/n` at each order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum RhoSpec {
    Fixed(f64),
    PerOrder(f64),
}

impl RhoSpec {
    pub fn at(self, n: usize) -> f64 {
        match self {
            RhoSpec::Fixed(r) => r,
            RhoSpec::PerOrder(c) => c / n as f64,
        }
    }

    /// Fixed values report `Err × n`, order-scaled ones the raw `Err`.
    pub fn scales_error(self) -> bool {
        matches!(self, RhoSpec::Fixed(_))
    }
}

impl fmt::Display for RhoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhoSpec::Fixed(r) => write!(f, "{r}"),
            RhoSpec::PerOrder(c) => write!(f, "{c}/n"),
        }
    }
}

impl FromStr for RhoSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("rho `{s}` is neither a number nor c/n"));
        let value = |t: &str| -> Result<f64> {
            let v: f64 = t.trim().parse().map_err(|_| bad())?;
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(bad())
            }
        };
        match s.strip_suffix("/n") {
            Some(c) => Ok(RhoSpec::PerOrder(value(c)?)),
            None => Ok(RhoSpec::Fixed(value(s)?)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table2Row {
    pub n: usize,
    pub rho_spec: String,
    pub rho: f64,
    /// Between/within ratio of the block matrix actually built.
    pub ratio: f64,
    pub exact: Option<f64>,
    pub approx: Option<f64>,
    /// `exact − approx`.
    pub err: Option<f64>,
    /// `err × n` for fixed rho, `err` otherwise.
    pub reported_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

fn table2_row(n: usize, rho: f64) -> Result<(f64, f64, f64)> {
    let ratio = table2_block_ratio(rho);
    let exact = permanent_two_block(n, ratio)?.log_value;
    let b = two_block_matrix(n, ratio)?;
    let a = DoublyStochasticMatrix::new(b.scale(2.0 / (n as f64 * (1.0 + ratio))))?;
    let cfg = ApproxConfig::new(TSquaredMode::Unit, ApproxOrder::First);
    let approx = det_approx_first(&a, &cfg)?.log_value;
    Ok((ratio, exact, approx))
}

/// One row per `(spec, n)`, `n` varying fastest.
pub fn table2(orders: &[usize], specs: &[RhoSpec]) -> Vec<Table2Row> {
    let mut rows = Vec::new();
    for &spec in specs {
        for &n in orders {
            let rho = spec.at(n);
            rows.push(match table2_row(n, rho) {
                Ok((ratio, exact, approx)) => {
                    let err = exact - approx;
                    Table2Row {
                        n,
                        rho_spec: spec.to_string(),
                        rho,
                        ratio,
                        exact: Some(exact),
                        approx: Some(approx),
                        err: Some(err),
                        reported_err: Some(if spec.scales_error() { err * n as f64 } else { err }),
                        failure: None,
                    }
                }
                Err(e) => Table2Row {
                    n,
                    rho_spec: spec.to_string(),
                    rho,
                    ratio: table2_block_ratio(rho),
                    exact: None,
                    approx: None,
                    err: None,
                    reported_err: None,
                    failure: Some(e.to_string()),
                },
            });
        }
    }
    rows
}

fn opt17(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

pub const TABLE1_HEADER: &str = "n,rho,log_per,approx,error_x1e3,failure";
pub const TABLE2_HEADER: &str = "n,rho_spec,rho,ratio,exact,approx,err,reported_err,failure";

pub fn table1_csv(rows: &[Table1Row]) -> String {
    let mut out = format!("{TABLE1_HEADER}\n");
    for r in rows {
        out += &format!(
            "{},{},{},{},{},{}\n",
            r.n,
            fmt17(r.rho),
            opt17(r.log_per),
            opt17(r.approx),
            opt17(r.error_x1e3),
            r.failure.as_deref().unwrap_or(""),
        );
    }
    out
}

pub fn table2_csv(rows: &[Table2Row]) -> String {
    let mut out = format!("{TABLE2_HEADER}\n");
    for r in rows {
        out += &format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.rho_spec,
            fmt17(r.rho),
            fmt17(r.ratio),
            opt17(r.exact),
            opt17(r.approx),
            opt17(r.err),
            opt17(r.reported_err),
            r.failure.as_deref().unwrap_or(""),
        );
    }
    out
}

fn d4(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
}

/// Four-decimal layout for reading next to the printed tables.
pub fn table1_pretty(rows: &[Table1Row]) -> String {
    let mut out = format!("{:>4} {:>6} {:>10} {:>10} {:>10}\n", "n", "rho", "log per", "Approx", "Err*1e3");
    for r in rows {
        out += &format!(
            "{:>4} {:>6} {:>10} {:>10} {:>10}{}\n",
            r.n,
            r.rho,
            d4(r.log_per),
            d4(r.approx),
            d4(r.error_x1e3),
            r.failure.as_ref().map(|f| format!("  ({f})")).unwrap_or_default(),
        );
    }
    out
}

pub fn table2_pretty(rows: &[Table2Row]) -> String {
    let mut out = format!("{:>4} {:>6} {:>10} {:>10}\n", "n", "rho", "Exact", "Err");
    for r in rows {
        out += &format!(
            "{:>4} {:>6} {:>10} {:>10}{}\n",
            r.n,
            r.rho_spec,
            d4(r.exact),
            d4(r.reported_err),
            r.failure.as_ref().map(|f| format!("  ({f})")).unwrap_or_default(),
        );
    }
    out
}
