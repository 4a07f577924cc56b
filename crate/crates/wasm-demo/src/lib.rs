//! Browser bindings for the permapprox demo page. Every export takes plain
//! numbers or text and returns a JSON string; errors come back as
//! `{"error": "..."}` so the page has one code path.

use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use permapprox::approx::{det_estimates, TSquaredMode};
use permapprox::ensembles::{estimate_nu, sample_dsd, RngStream};
use permapprox::exact::{log_per_ratio, MAX_RYSER_ORDER};
use permapprox::sinkhorn::{project, SinkhornConfig};
use permapprox::tables::{table2, RhoSpec};
use permapprox::{Error, SquareMatrix};

/// Largest order the page runs Ryser at; keeps a click under a second.
pub const DEMO_EXACT_MAX: usize = 20;
/// Largest order the page accepts for sampling.
pub const DEMO_SAMPLE_MAX: usize = 60;

fn to_json<T: Serialize>(r: Result<T, Error>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).expect("plain data serializes"),
        Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
    }
}

#[derive(Serialize)]
struct CurvePoint {
    n: usize,
    exact: f64,
    approx: f64,
    err: f64,
}

/// Two-block matrices at even orders `2..=n_max`: closed-form log permanent
/// ratio against the unit-t² determinantal estimate.
fn two_block_curve_impl(n_max: usize, rho: f64) -> Result<Vec<CurvePoint>, Error> {
    if !(2..=2000).contains(&n_max) {
        return Err(Error::InvalidParameter(format!("n_max must lie in 2..=2000, got {n_max}")));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let orders: Vec<usize> = (2..=n_max).step_by(2).collect();
    table2(&orders, &[RhoSpec::Fixed(rho)])
        .into_iter()
        .map(|r| match (r.exact, r.approx, r.err) {
            (Some(exact), Some(approx), Some(err)) => Ok(CurvePoint {
                n: r.n,
                exact,
                approx,
                err,
            }),
            _ => Err(Error::InvalidParameter(r.failure.unwrap_or_default())),
        })
        .collect()
}

#[wasm_bindgen]
pub fn two_block_curve(n_max: usize, rho: f64) -> String {
    to_json(two_block_curve_impl(n_max, rho))
}

#[derive(Serialize)]
struct Analysis {
    n: usize,
    /// Projected doubly stochastic matrix, for the heat map.
    a: Vec<Vec<f64>>,
    /// `Σβ + Σγ + log n!`, added to each ratio-basis value below to get `log per(Y)`.
    offset: f64,
    sweeps: usize,
    x0: Option<f64>,
    x1: Option<f64>,
    exact: Option<f64>,
    note: Option<String>,
}

/// Scales a pasted non-negative matrix, then reports both determinantal
/// estimates and, up to [`DEMO_EXACT_MAX`], the exact value, all as
/// `log(per(nA)/n!)`.
fn analyze_impl(text: &str) -> Result<Analysis, Error> {
    let y = SquareMatrix::parse(text)?;
    let n = y.n();
    let scaled = project(&y, &SinkhornConfig::default())?;
    let offset = scaled.beta.iter().chain(&scaled.gamma).sum::<f64>()
        + permapprox::ln_factorial(n);
    let (x0, x1, note) = match det_estimates(&scaled.a, TSquaredMode::Modified) {
        Ok(d) => (Some(d.x0), Some(d.x1), None),
        Err(Error::ApproximationUndefined(e)) => (None, None, Some(format!("estimate undefined: {e}"))),
        Err(e) => return Err(e),
    };
    let exact = if n <= DEMO_EXACT_MAX.min(MAX_RYSER_ORDER) {
        Some(log_per_ratio(&scaled.a)?.log_value)
    } else {
        None
    };
    Ok(Analysis {
        n,
        a: scaled.a.matrix().to_rows(),
        offset,
        sweeps: scaled.iterations,
        x0,
        x1,
        exact,
        note,
    })
}

#[wasm_bindgen]
pub fn analyze(text: &str) -> String {
    to_json(analyze_impl(text))
}

#[derive(Serialize)]
struct Sample {
    n: usize,
    nu: f64,
    seed: u64,
    a: Vec<Vec<f64>>,
    nu_hat: f64,
    x0: Option<f64>,
    x1: Option<f64>,
    exact: Option<f64>,
}

/// One doubly stochastic draw: gamma(`nu`) entries projected by Sinkhorn.
fn sample_impl(n: usize, nu: f64, seed: u64) -> Result<Sample, Error> {
    if !(2..=DEMO_SAMPLE_MAX).contains(&n) {
        return Err(Error::InvalidParameter(format!("n must lie in 2..={DEMO_SAMPLE_MAX}, got {n}")));
    }
    let a = sample_dsd(n, nu, &mut RngStream::new(seed, 0), &SinkhornConfig::default())?;
    let (x0, x1) = match det_estimates(&a, TSquaredMode::Modified) {
        Ok(d) => (Some(d.x0), Some(d.x1)),
        Err(Error::ApproximationUndefined(_)) => (None, None),
        Err(e) => return Err(e),
    };
    let exact = if n <= DEMO_EXACT_MAX {
        Some(log_per_ratio(&a)?.log_value)
    } else {
        None
    };
    Ok(Sample {
        n,
        nu,
        seed,
        a: a.matrix().to_rows(),
        nu_hat: estimate_nu(&a)?.nu_hat,
        x0,
        x1,
        exact,
    })
}

#[wasm_bindgen]
pub fn sample(n: usize, nu: f64, seed: u64) -> String {
    to_json(sample_impl(n, nu, seed))
}
