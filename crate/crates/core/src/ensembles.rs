//! Random and structured matrix families: gamma entries, the Sinkhorn image
//! of an i.i.d. gamma matrix, the CRP block pattern, the exponential kernel
//! and the two-block matrix.
//!
//! Randomness comes from ChaCha8 keyed by `(seed, stream_id)`: the seed is
//! expanded into the key and the stream id selects an independent stream, so
//! a replicate's draws never depend on how other replicates were scheduled.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{DoublyStochasticMatrix, SquareMatrix};
use crate::partition::SetPartition;
use crate::sinkhorn::{deviance, project, SinkhornConfig};
use crate::special::{log_minus_digamma, trigamma};

/// Reproducible random stream identified by `(seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn gamma_dist(shape: f64, scale: f64) -> Result<Gamma<f64>> {
    if !(shape > 0.0) || !shape.is_finite() || !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gamma shape {shape} and scale {scale} must be positive and finite"
        )));
    }
    Gamma::new(shape, scale).map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// One unit-scale gamma variate.
pub fn sample_gamma(shape: f64, rng: &mut impl Rng) -> Result<f64> {
    Ok(gamma_dist(shape, 1.0)?.sample(rng))
}

/// An `n × n` matrix of i.i.d. unit-scale gamma(`nu`) entries.
pub fn gamma_matrix(n: usize, nu: f64, rng: &mut impl Rng) -> Result<SquareMatrix> {
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    let dist = gamma_dist(nu, 1.0)?;
    let data = (0..n * n).map(|_| dist.sample(rng)).collect();
    SquareMatrix::from_vec(n, data)
}

/// A draw from the doubly stochastic Dirichlet ensemble: the Sinkhorn
/// projection of an i.i.d. gamma(`nu`) matrix.
pub fn sample_dsd(
    n: usize,
    nu: f64,
    rng: &mut impl Rng,
    cfg: &SinkhornConfig,
) -> Result<DoublyStochasticMatrix> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("DSD needs n ≥ 2, got {n}")));
    }
    Ok(project(&gamma_matrix(n, nu, rng)?, cfg)?.a)
}

/// Upper limit reported by [`estimate_nu`] when the deviance is zero or too
/// small to resolve.
pub const NU_MAX: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NuEstimate {
    pub nu_hat: f64,
    /// Set when the root lies beyond [`NU_MAX`] and the value was capped.
    pub capped: bool,
}

/// `g(ν) = 2 log ν − 2ψ(ν)`, strictly decreasing from `+∞` to `0`.
pub fn nu_equation(nu: f64) -> f64 {
    2.0 * log_minus_digamma(nu)
}

/// Moment estimate of the gamma index solving `g(ν̂) = Dev(A)/n²`.
pub fn estimate_nu(a: &DoublyStochasticMatrix) -> Result<NuEstimate> {
    let n = a.n() as f64;
    solve_nu(deviance(a)? / (n * n))
}

/// Root of `g(ν) = level` by safeguarded Newton steps in `log ν`.
pub fn solve_nu(level: f64) -> Result<NuEstimate> {
    if !level.is_finite() || level < 0.0 {
        return Err(Error::InvalidParameter(format!("deviance level {level}")));
    }
    if level <= nu_equation(NU_MAX) {
        return Ok(NuEstimate {
            nu_hat: NU_MAX,
            capped: true,
        });
    }
    // g(ν) lies between 1/ν and 2/ν, so the root is near 1/level.
    let mut lo = (1.0 / level).min(1.0);
    let mut hi = (2.0 / level).max(1.0);
    while nu_equation(lo) < level {
        lo *= 0.5;
    }
    while nu_equation(hi) > level {
        hi *= 2.0;
    }
    let mut x = (lo * hi).sqrt();
    for _ in 0..200 {
        let f = nu_equation(x) - level;
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // d g / d log ν = ν g′(ν) = 2 − 2ν ψ′(ν).
        let slope = 2.0 - 2.0 * x * trigamma(x);
        let mut next = x * (-f / slope).exp();
        if !(next > lo && next < hi) || !next.is_finite() {
            next = (lo * hi).sqrt();
        }
        if (next - x).abs() <= 1e-12 * x {
            x = next;
            break;
        }
        x = next;
        if (hi - lo) <= 1e-12 * lo {
            break;
        }
    }
    Ok(NuEstimate {
        nu_hat: x,
        capped: false,
    })
}

/// Chinese restaurant process with parameter 1: element `t + 1` sits next
/// to a uniformly chosen earlier element (joining its block with probability
/// proportional to block size) or opens a new block with probability
/// `1/(t + 1)`.
pub fn sample_crp(n: usize, rng: &mut impl Rng) -> Result<SetPartition> {
    if n == 0 {
        return Err(Error::InvalidParameter("CRP needs n ≥ 1".into()));
    }
    let mut labels = Vec::with_capacity(n);
    let mut blocks = 0;
    for t in 0..n {
        let u = rng.random_range(0..=t);
        if u == t {
            labels.push(blocks);
            blocks += 1;
        } else {
            labels.push(labels[u]);
        }
    }
    Ok(SetPartition::from_labels(&labels))
}

/// `Y_ij · (eta + eta2·[i, j in the same block])`.
pub fn apply_block_pattern(
    y: &SquareMatrix,
    partition: &SetPartition,
    eta: f64,
    eta2: f64,
) -> Result<SquareMatrix> {
    if partition.k() != y.n() {
        return Err(Error::PartitionMismatch(partition.k(), y.n()));
    }
    if !(eta > 0.0) || !(eta2 >= 0.0) || !eta.is_finite() || !eta2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "block pattern weights eta = {eta}, eta2 = {eta2}"
        )));
    }
    let labels = partition.labels();
    Ok(SquareMatrix::from_fn(y.n(), |i, j| {
        let same = if labels[i] == labels[j] { eta2 } else { 0.0 };
        y.get(i, j) * (eta + same)
    }))
}

/// `K_ij = exp(−rho |x_i − x_j|)` at `n` equally spaced points on `[0, 1]`.
pub fn table1_kernel(n: usize, rho: f64) -> Result<SquareMatrix> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("kernel needs n ≥ 2, got {n}")));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("kernel rate {rho} must be > 0")));
    }
    let step = 1.0 / (n - 1) as f64;
    Ok(SquareMatrix::from_fn(n, |i, j| {
        (-rho * (i as f64 - j as f64).abs() * step).exp()
    }))
}

/// Two diagonal blocks of ones of size `n/2`, `ratio` elsewhere.
pub fn two_block_matrix(n: usize, ratio: f64) -> Result<SquareMatrix> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::OddOrder(n));
    }
    if !(ratio >= 0.0) || !ratio.is_finite() {
        return Err(Error::InvalidParameter(format!("block ratio {ratio} must be >= 0")));
    }
    let m = n / 2;
    Ok(SquareMatrix::from_fn(n, |i, j| {
        if (i < m) == (j < m) {
            1.0
        } else {
            ratio
        }
    }))
}

/// Between/within ratio of the block matrix with weight `1 + rho` inside the
/// blocks and `rho` between them.
pub fn table2_block_ratio(rho: f64) -> f64 {
    rho / (1.0 + rho)
}

/// Standardized residual `n · log(y/x) / x`; `None` unless both are positive.
pub fn residual(n: usize, y: f64, x: f64) -> Option<f64> {
    (y > 0.0 && x > 0.0).then(|| n as f64 * (y / x).ln() / x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::l2_norm_sq;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |seed, id| {
            let mut r = RngStream::new(seed, id);
            (0..8).map(|_| r.next_u64()).collect::<Vec<_>>()
        };
        assert_eq!(draw(7, 3), draw(7, 3));
        assert_ne!(draw(7, 3), draw(7, 4));
        assert_ne!(draw(7, 3), draw(8, 3));
    }

    #[test]
    fn gamma_moments_small_shape() {
        let mut rng = RngStream::new(11, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_gamma(0.5, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
        assert!((var - 0.5).abs() < 0.03, "var {var}");
        assert!(sample_gamma(0.0, &mut rng).is_err());
    }

    #[test]
    fn gamma_one_is_exponential() {
        let mut rng = RngStream::new(12, 0);
        let mut xs: Vec<f64> = (0..100_000).map(|_| sample_gamma(1.0, &mut rng).unwrap()).collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = 1.0 - (-x).exp();
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        // Kolmogorov–Smirnov critical value at α = 0.01.
        assert!(d < 1.628 / n.sqrt(), "D = {d}");
    }

    #[test]
    fn dsd_concentrates_for_large_nu() {
        let cfg = SinkhornConfig::default();
        let mut rng = RngStream::new(13, 0);
        let mut over = 0;
        for _ in 0..100 {
            let a = sample_dsd(10, 1e4, &mut rng, &cfg).unwrap();
            over += usize::from(l2_norm_sq(&a) >= 0.01);
        }
        assert!(over <= 1, "{over} of 100 draws above 0.01");
        let a = sample_dsd(6, 1.0, &mut RngStream::new(1, 1), &cfg).unwrap();
        let b = sample_dsd(6, 1.0, &mut RngStream::new(1, 1), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nu_equation_root() {
        let euler = 0.577_215_664_901_532_9;
        let est = solve_nu(2.0 * euler).unwrap();
        assert!((est.nu_hat - 1.0).abs() < 1e-9);
        assert!(!est.capped);
        assert!(nu_equation(0.5) > nu_equation(1.0) && nu_equation(1.0) > nu_equation(2.0));
        for nu in [1e-3, 0.05, 0.7, 3.0, 250.0, 1e6] {
            let est = solve_nu(nu_equation(nu)).unwrap();
            assert!((est.nu_hat / nu - 1.0).abs() < 1e-9, "nu = {nu}: {}", est.nu_hat);
        }
        let capped = estimate_nu(&DoublyStochasticMatrix::uniform(5)).unwrap();
        assert!(capped.capped);
        assert_eq!(capped.nu_hat, NU_MAX);
    }

    #[test]
    fn nu_hat_tracks_generating_index() {
        let cfg = SinkhornConfig::default();
        for (s, nu) in [0.5, 1.0, 2.0].into_iter().enumerate() {
            let mut est: Vec<f64> = (0..200)
                .map(|r| {
                    let mut rng = RngStream::new(100 + s as u64, r);
                    estimate_nu(&sample_dsd(20, nu, &mut rng, &cfg).unwrap()).unwrap().nu_hat
                })
                .collect();
            est.sort_by(f64::total_cmp);
            let median = est[100];
            assert!((median / nu - 1.0).abs() < 0.15, "nu = {nu}: median {median}");
        }
    }

    #[test]
    fn crp_block_counts() {
        let mut rng = RngStream::new(14, 0);
        assert_eq!(sample_crp(1, &mut rng).unwrap().num_blocks(), 1);
        let draws = 10_000;
        let total: usize = (0..draws).map(|_| sample_crp(50, &mut rng).unwrap().num_blocks()).sum();
        let harmonic: f64 = (1..=50).map(|k| 1.0 / k as f64).sum();
        let mean = total as f64 / draws as f64;
        assert!((mean - harmonic).abs() < 0.05, "mean {mean} vs {harmonic}");
        let a = sample_crp(20, &mut RngStream::new(2, 2)).unwrap();
        let b = sample_crp(20, &mut RngStream::new(2, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn block_pattern_cases() {
        let cfg = SinkhornConfig::default();
        let y = gamma_matrix(6, 1.0, &mut RngStream::new(15, 0)).unwrap();
        let p = sample_crp(6, &mut RngStream::new(15, 1)).unwrap();
        let base = project(&y, &cfg).unwrap().a;
        for (part, eta2) in [(p.clone(), 0.0), (SetPartition::one_block(6), 0.4)] {
            let patterned = project(&apply_block_pattern(&y, &part, 0.3, eta2).unwrap(), &cfg).unwrap().a;
            let diff = patterned.matrix().sub(base.matrix()).unwrap().max_abs();
            assert!(diff < 1e-12, "{diff}");
        }
        // Even two-block split of ones reproduces the block matrix with
        // ratio eta/(eta + eta2).
        let split = SetPartition::from_labels(&[0, 0, 0, 1, 1, 1]);
        let (eta, eta2) = (0.3, 0.6);
        let patterned = apply_block_pattern(&SquareMatrix::constant(6, 1.0), &split, eta, eta2).unwrap();
        let a = project(&patterned, &cfg).unwrap().a;
        let b = project(&two_block_matrix(6, eta / (eta + eta2)).unwrap(), &cfg).unwrap().a;
        assert!(a.matrix().sub(b.matrix()).unwrap().max_abs() < 1e-14);
        assert!(apply_block_pattern(&y, &SetPartition::one_block(5), 0.3, 0.1).is_err());
    }

    #[test]
    fn kernel_shape() {
        let k = table1_kernel(8, 1.5).unwrap();
        assert!(k.is_symmetric(0.0));
        assert!((0..8).all(|i| k.get(i, i) == 1.0));
        assert!((k.get(0, 7) - (-1.5f64).exp()).abs() < 1e-15);
        assert!(k.as_slice().iter().all(|&x| x >= (-1.5f64).exp() - 1e-15 && x <= 1.0));
        assert!(table1_kernel(1, 1.0).is_err());
    }

    #[test]
    fn two_block_layout() {
        let b = two_block_matrix(4, 0.25).unwrap();
        assert_eq!(b.get(0, 1), 1.0);
        assert_eq!(b.get(0, 2), 0.25);
        assert_eq!(b.get(3, 2), 1.0);
        assert!(matches!(two_block_matrix(5, 0.1), Err(Error::OddOrder(5))));
        assert!((table2_block_ratio(1.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn residual_definition() {
        assert_eq!(residual(10, 0.5, 0.5), Some(0.0));
        assert!((residual(10, 1.0, 0.5).unwrap() - 20.0 * 2f64.ln()).abs() < 1e-14);
        assert_eq!(residual(10, -1.0, 0.5), None);
    }
}
