mod common;

use common::*;
use narx_mss::estimation::{rrse, simulate, LsFit};
use narx_mss::stats::{student_t_cdf, t_critical};
use narx_mss::{Dataset, RegressorTerm};
use proptest::prelude::*;

#[test]
fn t_table() {
    for (alpha, dof, t) in T_TABLE {
        assert!((t_critical(alpha, dof) - t).abs() < 1e-3, "alpha {alpha} dof {dof}");
    }
}

#[test]
fn t_critical_inverts_the_cdf() {
    for dof in [1usize, 3, 7, 50, 400] {
        for alpha in [0.2, 0.05, 0.001] {
            let t = t_critical(alpha, dof);
            assert!((student_t_cdf(t, dof as f64) - (1.0 - alpha / 2.0)).abs() < 1e-9);
        }
    }
}

#[test]
fn simulation_feeds_back_predictions() {
    let terms: Vec<RegressorTerm> = ["y(k-1)", "x1(k-1)"].iter().map(|t| t.parse().unwrap()).collect();
    let data = Dataset::new(vec![vec![1.0; 6]], vec![0.0, 9.0, 9.0, 9.0, 9.0, 9.0]).unwrap();
    let y_hat = simulate(&terms, &[0.5, 1.0], &data, 1).unwrap();
    assert_eq!(y_hat, vec![0.0, 1.0, 1.5, 1.75, 1.875, 1.9375]);
}

#[test]
fn exploding_simulation_is_reported() {
    let terms: Vec<RegressorTerm> = vec!["y(k-1)".parse().unwrap()];
    let data = Dataset::new(vec![vec![0.0; 200]], vec![1.0; 200]).unwrap();
    assert!(simulate(&terms, &[2.0], &data, 1).is_err());
}

#[test]
fn rrse_of_perfect_and_mean_predictions() {
    let y = [1.0, 2.0, 3.0, 6.0];
    assert_eq!(rrse(&y, &y).unwrap(), 0.0);
    assert!((rrse(&y, &[3.0; 4]).unwrap() - 1.0).abs() < 1e-15);
    assert!(rrse(&[2.0; 4], &[1.0; 4]).is_err());
}

proptest! {
    #[test]
    fn residuals_are_orthogonal_to_regressors(seed in 0u64..1000, rows in 10usize..60, cols in 1usize..6) {
        let mut r = rng(seed);
        let psi = gaussian_matrix(&mut r, rows, cols);
        let y: Vec<f64> = gaussian_matrix(&mut r, rows, 1).iter().copied().collect();
        let fit = LsFit::new(&psi, &y).unwrap();
        for c in 0..cols {
            let ip: f64 = (0..rows).map(|k| psi[(k, c)] * fit.residuals[k]).sum();
            prop_assert!(ip.abs() < 1e-9);
        }
        prop_assert!(fit.gram_inv_diag.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn exact_data_is_recovered(seed in 0u64..1000, cols in 1usize..6) {
        let mut r = rng(seed);
        let psi = gaussian_matrix(&mut r, 40, cols);
        let theta: Vec<f64> = (0..cols).map(|j| j as f64 - 1.5).collect();
        let y: Vec<f64> = (0..40).map(|k| (0..cols).map(|j| psi[(k, j)] * theta[j]).sum()).collect();
        prop_assert!(relative_error(&LsFit::new(&psi, &y).unwrap().theta, &theta) < 1e-10);
    }

    #[test]
    fn critical_value_shrinks_with_dof(alpha in 0.001f64..0.5, dof in 1usize..200) {
        prop_assert!(t_critical(alpha, dof + 1) <= t_critical(alpha, dof));
    }
}
