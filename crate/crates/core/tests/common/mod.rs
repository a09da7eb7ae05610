#![allow(dead_code)]

use nalgebra::DMatrix;
use narx_mss::{DictionaryConfig, SystemId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Counts monomials of degree `0..=degree` in `n` variables by walking every
/// non-decreasing index tuple.
pub fn brute_force_terms(n: usize, degree: usize) -> usize {
    fn walk(start: usize, n: usize, left: usize) -> usize {
        let mut count = 1;
        if left == 0 {
            return count;
        }
        for v in start..n {
            count += walk(v, n, left - 1);
        }
        count
    }
    walk(0, n, degree)
}

pub fn variables(cfg: &DictionaryConfig) -> usize {
    let ny = if cfg.autoregressive { cfg.ny } else { 0 };
    ny + cfg.nx.iter().sum::<usize>()
}

pub fn random_dictionary_config(rng: &mut ChaCha8Rng) -> DictionaryConfig {
    let inputs = rng.random_range(1..=3);
    let nx = (0..inputs).map(|_| rng.random_range(1..=4)).collect();
    let degree = rng.random_range(1..=4);
    if rng.random_bool(0.8) {
        DictionaryConfig::new(rng.random_range(1..=5), nx, degree)
    } else {
        DictionaryConfig::exogenous(nx, degree)
    }
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(normal))
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = m.clone().svd(false, false).singular_values;
    s.max() / s.min()
}

/// Least squares through the SVD pseudo-inverse.
pub fn svd_least_squares(psi: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let pinv = psi.clone().pseudo_inverse(1e-14).unwrap();
    (pinv * nalgebra::DVector::from_column_slice(y)).iter().copied().collect()
}

/// Residual variance and standard errors through the explicit inverse of
/// the Gram matrix.
pub fn full_inverse_errors(psi: &DMatrix<f64>, y: &[f64], theta: &[f64]) -> (f64, Vec<f64>) {
    let (n, m) = psi.shape();
    let mut rss = 0.0;
    for r in 0..n {
        let fit: f64 = (0..m).map(|c| psi[(r, c)] * theta[c]).sum();
        rss += (y[r] - fit).powi(2);
    }
    let s2 = rss / (n - m) as f64;
    let inv = (psi.transpose() * psi).try_inverse().unwrap();
    (s2, (0..m).map(|i| (s2 * inv[(i, i)]).sqrt()).collect())
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Two-sided Student-t critical values as printed in standard tables:
/// `(alpha, dof, t)`.
pub const T_TABLE: [(f64, usize, f64); 8] = [
    (0.05, 5, 2.571),
    (0.05, 10, 2.228),
    (0.05, 30, 2.042),
    (0.05, 100, 1.984),
    (0.01, 5, 4.032),
    (0.01, 10, 3.169),
    (0.01, 30, 2.750),
    (0.01, 100, 2.626),
];

fn at(v: &[f64], k: usize, lag: usize) -> f64 {
    if k >= lag {
        v[k - lag]
    } else {
        0.0
    }
}

/// Right-hand side of each benchmark recursion at time `k`, including the
/// noise contribution `e`.
pub fn system_rhs(id: SystemId, y: &[f64], x: &[f64], e: &[f64], k: usize) -> f64 {
    let (y1, y2) = (at(y, k, 1), at(y, k, 2));
    let (x1, x2) = (at(x, k, 1), at(x, k, 2));
    let e0 = e[k];
    match id {
        SystemId::S1 => -1.7 * y1 - 0.8 * y2 + x1 + 0.81 * x2 + e0,
        SystemId::S2 => 0.8 * y1 + 0.4 * x1 + 0.4 * x1 * x1 + 0.4 * x1 * x1 * x1 + e0,
        SystemId::S3 => 0.2 * y1.powi(3) + 0.7 * y1 * x1 + 0.6 * x2 * x2 - 0.7 * y2 * x2 * x2 - 0.5 * y2 + e0,
        SystemId::S4 => 0.7 * y1 * x1 - 0.5 * y2 + 0.6 * x2 * x2 - 0.7 * y2 * x2 * x2 + e0,
        SystemId::S5 => {
            0.7 * y1 * x1 - 0.5 * y2 + 0.6 * x2 * x2 - 0.7 * y2 * x2 * x2 + e0 + 0.2 * at(e, k, 1)
                - 0.3 * at(e, k, 2) * x1
        }
        SystemId::S6 => 0.75 * y2 + 0.25 * x2 - 0.2 * y2 * x2 + e0,
    }
}

pub fn hand_recursion(id: SystemId, x: &[f64], e: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for k in 0..x.len() {
        y[k] = system_rhs(id, &y, x, e, k);
    }
    y
}

/// Input variance and equation-noise standard deviation of each system.
pub fn system_moments(id: SystemId) -> (f64, f64) {
    match id {
        SystemId::S1 => (4.0 / 3.0, 0.01),
        SystemId::S2 => (0.09, 0.01),
        SystemId::S3 => (1.0 / 3.0, 0.01),
        SystemId::S4 => (1.0 / 3.0, 0.04),
        SystemId::S5 => (1.0 / 3.0, 0.02),
        SystemId::S6 => (0.0625, 0.02),
    }
}

pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
}
