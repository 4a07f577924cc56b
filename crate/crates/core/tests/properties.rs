use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

use permapprox::approx::{det_estimates, TSquaredMode};
use permapprox::sinkhorn::{approximate_log_permanent, project, SinkhornConfig};
use permapprox::{
    log_det_spd, permanent_brute, permanent_ryser, ApproxConfig, ApproxOrder, SetPartition,
    SquareMatrix,
};

/// Positive `n × n` matrix with entries in `[0.1, 2)`.
fn positive(n: usize) -> impl Strategy<Value = SquareMatrix> {
    prop::collection::vec(0.1f64..2.0, n * n).prop_map(move |v| SquareMatrix::from_vec(n, v).unwrap())
}

fn sized_positive(lo: usize, hi: usize) -> impl Strategy<Value = SquareMatrix> {
    (lo..=hi).prop_flat_map(positive)
}

fn shuffle(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

fn labels(k: usize) -> impl Strategy<Value = SetPartition> {
    prop::collection::vec(0..k, k).prop_map(|l| SetPartition::from_labels(&l))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ryser_matches_brute_and_is_permutation_invariant(
        (m, rp, cp) in (2usize..=6).prop_flat_map(|n| (positive(n), shuffle(n), shuffle(n)))
    ) {
        let brute = permanent_brute(&m).unwrap().ln();
        let ryser = permanent_ryser(&m).unwrap().log_value;
        assert_relative_eq!(ryser, brute, max_relative = 1e-12, epsilon = 1e-12);
        let permuted = permanent_ryser(&m.permute(&rp, &cp)).unwrap().log_value;
        assert_relative_eq!(permuted, ryser, epsilon = 1e-12);
        let transposed = permanent_ryser(&m.transpose()).unwrap().log_value;
        assert_relative_eq!(transposed, ryser, epsilon = 1e-12);
    }

    #[test]
    fn permanent_scales_as_power(m in sized_positive(2, 10), c in 0.2f64..5.0) {
        let n = m.n() as f64;
        let base = permanent_ryser(&m).unwrap().log_value;
        let scaled = permanent_ryser(&m.scale(c)).unwrap().log_value;
        assert_relative_eq!(scaled, base + n * c.ln(), epsilon = 1e-11);
    }

    #[test]
    fn estimates_are_permutation_and_transpose_invariant(
        (m, rp, cp) in (3usize..=12).prop_flat_map(|n| (positive(n), shuffle(n), shuffle(n)))
    ) {
        let cfg = SinkhornConfig::default();
        let a = project(&m, &cfg).unwrap().a;
        let base = det_estimates(&a, TSquaredMode::Modified).unwrap();
        let moved = det_estimates(&a.permute(&rp, &cp), TSquaredMode::Modified).unwrap();
        let flipped = det_estimates(&a.transpose(), TSquaredMode::Modified).unwrap();
        for other in [&moved, &flipped] {
            assert_relative_eq!(other.x0, base.x0, epsilon = 1e-11);
            assert_relative_eq!(other.x1, base.x1, epsilon = 1e-11);
        }
    }

    #[test]
    fn sinkhorn_ignores_diagonal_rescaling(
        (m, d1, d2) in (2usize..=10).prop_flat_map(|n| (
            positive(n),
            prop::collection::vec(0.1f64..10.0, n),
            prop::collection::vec(0.1f64..10.0, n),
        ))
    ) {
        let cfg = SinkhornConfig::default();
        let scaled = SquareMatrix::from_fn(m.n(), |i, j| d1[i] * m.get(i, j) * d2[j]);
        let a = project(&m, &cfg).unwrap().a;
        let b = project(&scaled, &cfg).unwrap().a;
        for (x, y) in a.matrix().as_slice().iter().zip(b.matrix().as_slice()) {
            assert_relative_eq!(x, y, epsilon = 1e-10);
        }
        // log per picks up Σ log d exactly, and so does the estimate.
        let shift: f64 = d1.iter().chain(&d2).map(|d| d.ln()).sum();
        let acfg = ApproxConfig::new(TSquaredMode::Modified, ApproxOrder::Second);
        let e0 = approximate_log_permanent(&m, &cfg, &acfg).unwrap().log_value;
        let e1 = approximate_log_permanent(&scaled, &cfg, &acfg).unwrap().log_value;
        assert_relative_eq!(e1, e0 + shift, epsilon = 1e-9);
    }

    #[test]
    fn join_is_a_lattice_operation(a in labels(7), b in labels(7), c in labels(7)) {
        let ab = a.join(&b).unwrap();
        prop_assert_eq!(&ab, &b.join(&a).unwrap());
        prop_assert_eq!(ab.join(&c).unwrap(), a.join(&b.join(&c).unwrap()).unwrap());
        prop_assert_eq!(&a.join(&a).unwrap(), &a);
        prop_assert!(a.refines(&ab) && b.refines(&ab));
        prop_assert!(ab.num_blocks() <= a.num_blocks().min(b.num_blocks()));
    }

    #[test]
    fn log_det_matches_eigenvalues(v in (1usize..=12).prop_flat_map(|n| prop::collection::vec(-1.0f64..1.0, n * n))) {
        let n = (v.len() as f64).sqrt() as usize;
        let b = DMatrix::from_row_slice(n, n, &v);
        let spd = &b * b.transpose() + DMatrix::identity(n, n) * 0.1;
        let m = SquareMatrix::from_fn(n, |i, j| spd[(i, j)]);
        let expected: f64 = spd.symmetric_eigenvalues().iter().map(|l| l.ln()).sum();
        assert_relative_eq!(log_det_spd(&m).unwrap(), expected, epsilon = 1e-9, max_relative = 1e-10);
    }
}
