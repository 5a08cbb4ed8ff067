//! Log-space beta function, upper incomplete beta integral, and truncated
//! beta quantiles.

use crate::error::{CmmError, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln Γ(x) − [(x − ½) ln x − x + ½ ln 2π]` for `x ≥ 10`.
fn stirling_correction(x: f64) -> f64 {
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

/// `ln B(a, b)`.
///
/// Large arguments go through Stirling corrections so that the result keeps
/// full relative precision when `ln Γ` terms nearly cancel.
pub fn log_beta(a: f64, b: f64) -> f64 {
    let p = a.min(b);
    let q = a.max(b);
    if p >= 10.0 {
        let corr = stirling_correction(p) + stirling_correction(q) - stirling_correction(p + q);
        -0.5 * q.ln() + LN_SQRT_2PI + corr + (p - 0.5) * (p / (p + q)).ln()
            + q * (-p / (p + q)).ln_1p()
    } else if q >= 10.0 {
        let corr = stirling_correction(q) - stirling_correction(p + q);
        ln_gamma(p) + corr + p - p * (p + q).ln() + (q - 0.5) * (-p / (p + q)).ln_1p()
    } else {
        ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)
    }
}

/// Continued fraction of the regularized incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 200_000;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let guard = |v: f64| if v.abs() < TINY { TINY } else { v };
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= EPS {
            return Ok(h);
        }
    }
    Err(CmmError::Numeric(format!(
        "incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})"
    )))
}

fn check_shapes(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(CmmError::Domain(format!("beta shapes must be positive, got ({a}, {b})")));
    }
    Ok(())
}

/// `ln ∫ₓ¹ w^(a−1) (1−w)^(b−1) dw`.
pub fn log_inc_beta_upper(x: f64, a: f64, b: f64) -> Result<f64> {
    check_shapes(a, b)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(CmmError::Domain(format!("x = {x} outside [0, 1]")));
    }
    if x == 0.0 {
        return Ok(log_beta(a, b));
    }
    if x == 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let ln_x = x.ln();
    let ln_1mx = (-x).ln_1p();
    let log_front = a * ln_x + b * ln_1mx;
    if x < (a + 1.0) / (a + b + 2.0) {
        // lower tail by the fraction, upper tail as its complement
        let lbeta = log_beta(a, b);
        let log_lower_reg = log_front - lbeta + (beta_cf(a, b, x)? / a).ln();
        Ok(lbeta + (-log_lower_reg.exp()).ln_1p())
    } else {
        // upper tail directly via the symmetry I_x(a,b) = 1 − I_{1−x}(b,a)
        Ok(log_front + (beta_cf(b, a, 1.0 - x)? / b).ln())
    }
}

/// CDF at `x` of Beta(a, b) truncated to `[lower, 1]`.
pub fn trunc_beta_cdf(x: f64, a: f64, b: f64, lower: f64) -> Result<f64> {
    if x <= lower {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    let ratio = log_inc_beta_upper(x, a, b)? - log_inc_beta_upper(lower, a, b)?;
    Ok(-ratio.exp_m1())
}

/// Quantile of Beta(a, b) truncated to `[lower, 1]`.
///
/// Solves `ln U(x) = ln U(lower) + ln(1 − u)` where `U` is the upper
/// integral, by Newton steps safeguarded with bisection.
pub fn inv_trunc_beta_cdf(u: f64, a: f64, b: f64, lower: f64) -> Result<f64> {
    check_shapes(a, b)?;
    if !(0.0..=1.0).contains(&u) || !(0.0..1.0).contains(&lower) {
        return Err(CmmError::Domain(format!(
            "truncated beta quantile needs u in [0,1] and lower in [0,1), got u={u}, lower={lower}"
        )));
    }
    if u == 0.0 {
        return Ok(lower);
    }
    if u == 1.0 {
        return Ok(1.0);
    }
    let target = log_inc_beta_upper(lower, a, b)? + (-u).ln_1p();
    let objective = |x: f64| -> Result<f64> { Ok(log_inc_beta_upper(x, a, b)? - target) };

    let (mut lo, mut hi) = (lower, 1.0);
    let mut x = lower + 0.5 * (1.0 - lower);
    for _ in 0..400 {
        let f = objective(x)?;
        if f.abs() <= 1e-14 {
            return Ok(x);
        }
        // objective decreases in x
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(0.5 * (lo + hi));
        }
        let log_density = (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p();
        let slope = -(log_density - (f + target)).exp();
        let newton = x - f / slope;
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(CmmError::Numeric(format!(
        "truncated beta quantile did not converge (u={u}, a={a}, b={b}, lower={lower})"
    )))
}
