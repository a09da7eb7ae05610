//! Student-t tail probabilities and critical values.

use statrs::function::beta::beta_reg;

/// Two-sided tail probability `P(|T| >= t)` for `dof` degrees of freedom.
pub fn student_t_two_sided_tail(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = dof / (dof + t * t);
    beta_reg(dof / 2.0, 0.5, x)
}

/// Student-t cumulative distribution function.
pub fn student_t_cdf(t: f64, dof: f64) -> f64 {
    let half_tail = 0.5 * student_t_two_sided_tail(t, dof);
    if t >= 0.0 {
        1.0 - half_tail
    } else {
        half_tail
    }
}

/// Upper critical value `t_{alpha/2, dof}`: the `t > 0` with
/// `P(|T| >= t) = alpha`. Found by bracketing then bisection on the
/// incomplete-beta tail, to an absolute tolerance well below 1e-6.
pub fn t_critical(alpha: f64, dof: usize) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    assert!(dof >= 1, "degrees of freedom must be positive");
    let nu = dof as f64;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while student_t_two_sided_tail(hi, nu) > alpha {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_two_sided_tail(mid, nu) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}
