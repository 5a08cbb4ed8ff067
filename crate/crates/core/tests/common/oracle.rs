//! Quadrature values of the block evidence, independent of the closed form.

use super::quad::{integrate, log_beta_tail_quad};

/// One mode at the given crossing, integrated over ε ∈ [1/m, 1] with the
/// uniform prior on the box and a uniform prior on the mode location.
pub fn one_mode_oracle(counts: &[f64], top: usize) -> f64 {
    let m = counts.len() as f64;
    let n1 = counts[top];
    let rest: f64 = counts.iter().sum::<f64>() - n1;
    -m.ln() + (m / (m - 1.0)).ln() + log_beta_tail_quad(1.0 / m, n1, rest) - rest * (m - 1.0).ln()
}

/// Two modes at `(c1, c2)`, by nested quadrature over the box
/// `[1/m, 1] × [1/(m−1), 1]`.
pub fn two_mode_term(counts: &[f64], c1: usize, c2: usize) -> f64 {
    let m = counts.len() as f64;
    let total: f64 = counts.iter().sum();
    let (n1, n2) = (counts[c1], counts[c2]);
    let (r1, r2) = (total - n1, total - n1 - n2);
    let log_f = |e1: f64, e2: f64| n1 * e1.ln() + r1 * (1.0 - e1).ln() + n2 * e2.ln() + r2 * (1.0 - e2).ln();
    let p1 = if n1 + r1 > 0.0 { (n1 / (n1 + r1)).clamp(1.0 / m, 1.0 - 1e-12) } else { 0.5 };
    let p2 = if n2 + r2 > 0.0 { (n2 / (n2 + r2)).clamp(1.0 / (m - 1.0), 1.0 - 1e-12) } else { 0.5 };
    let shift = log_f(p1, p2);
    let inner = |e1: f64| {
        let f = |e2: f64| if e2 >= 1.0 && r2 > 0.0 { 0.0 } else { (log_f(e1, e2) - shift).exp() };
        let lo = 1.0 / (m - 1.0);
        integrate(&f, lo, p2.max(lo), 1e-13, 1e-300) + integrate(&f, p2.max(lo), 1.0, 1e-13, 1e-300)
    };
    let outer = |e1: f64| if e1 >= 1.0 && r1 > 0.0 { 0.0 } else { inner(e1) };
    let lo = 1.0 / m;
    let v = integrate(&outer, lo, p1.max(lo), 1e-12, 1e-300) + integrate(&outer, p1.max(lo), 1.0, 1e-12, 1e-300);
    // mode-location prior 1/(m(m−1)), box density m/(m−2)
    v.ln() + shift - (m * (m - 1.0)).ln() + (m / (m - 2.0)).ln() - r2 * (m - 2.0).ln()
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    mx + v.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

pub fn top_index(counts: &[f64]) -> usize {
    (0..counts.len()).fold(0, |b, c| if counts[c] > counts[b] { c } else { b })
}

pub fn unique_top(counts: &[f64]) -> bool {
    let t = top_index(counts);
    counts.iter().enumerate().all(|(c, &x)| c == t || x < counts[t])
}
