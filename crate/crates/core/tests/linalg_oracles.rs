use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cef_core::linalg::{dense_log_abs_det, expm, plu_logdet, HouseholderStack, PluMatrix, SkewOrthogonal, Tensor};

fn to_na(t: &Tensor) -> DMatrix<f64> {
    DMatrix::from_row_slice(t.rows(), t.cols(), t.data())
}

/// Plain power series, no scaling: fine for the moderate norms used here.
fn series_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..80 {
        term = &term * a / k as f64;
        sum += &term;
    }
    sum
}

#[test]
fn expm_matches_power_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in 2..=6 {
        for _ in 0..20 {
            let s = SkewOrthogonal::random(d, 1.0, &mut rng);
            let a = s.generator();
            let got = to_na(&expm(&a));
            let want = series_exp(&to_na(&a));
            assert!((got - &want).amax() < 1e-12 * want.amax().max(1.0));
        }
    }
}

#[test]
fn expm_of_general_matrix_matches_series() {
    // not skew: exercises the scaling-and-squaring path on its own
    let a = Tensor::from_rows(&[vec![0.4, -1.3, 0.2], vec![0.9, 0.1, -0.7], vec![-0.5, 1.1, -0.3]], 3).unwrap();
    let got = to_na(&expm(&a));
    let want = series_exp(&to_na(&a));
    assert!((got - want).amax() < 1e-12);
}

#[test]
fn plu_logdet_matches_dense_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for d in 1..=8 {
        for _ in 0..10 {
            let w = PluMatrix::random(d, 0.7, &mut rng);
            let det = to_na(&w.matrix()).determinant();
            assert_relative_eq!(plu_logdet(&w), det.abs().ln(), max_relative = 1e-10, epsilon = 1e-12);
            assert_relative_eq!(dense_log_abs_det(&w.matrix()), det.abs().ln(), max_relative = 1e-10, epsilon = 1e-12);
        }
    }
}

#[test]
fn householder_product_is_orthogonal_with_expected_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for d in 2..=6 {
        for k in 1..=d {
            let h = HouseholderStack::random(d, k, &mut rng);
            let q = h.matrix();
            assert!(q.orthogonality_defect() < 1e-12);
            // each reflection has determinant −1
            let det = to_na(&q).determinant();
            assert_relative_eq!(det, if k % 2 == 0 { 1.0 } else { -1.0 }, epsilon = 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn skew_exp_is_special_orthogonal(p in prop::collection::vec(-3.0f64..3.0, 6)) {
        let s = SkewOrthogonal::new(4, p).unwrap();
        prop_assert!(s.matrix().orthogonality_defect() < 1e-12);
        let det = to_na(s.matrix()).determinant();
        prop_assert!((det - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plu_solve_inverts(seed in any::<u64>(), y in prop::collection::vec(-5.0f64..5.0, 5)) {
        let w = PluMatrix::random(5, 0.5, &mut ChaCha8Rng::seed_from_u64(seed));
        let x = w.solve(&y);
        let back = w.matrix().matvec(&x);
        for (a, b) in back.iter().zip(&y) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let xt = w.solve_transpose(&y);
        let back = w.matrix().matvec_t(&xt);
        for (a, b) in back.iter().zip(&y) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
