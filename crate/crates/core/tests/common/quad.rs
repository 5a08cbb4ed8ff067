//! Adaptive Gauss–Kronrod (7/15) quadrature, used as an independent check
//! of closed-form integrals.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// `∫_a^b f` to relative tolerance `rel` (absolute floor `abs`).
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel: f64, abs: f64) -> f64 {
    let mut intervals = vec![(a, b, kronrod(f, a, b))];
    for _ in 0..5000 {
        let total: f64 = intervals.iter().map(|i| i.2 .0).sum();
        let err: f64 = intervals.iter().map(|i| i.2 .1).sum();
        if err <= abs.max(rel * total.abs()) {
            return total;
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .unwrap();
        let (lo, hi, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, kronrod(f, lo, mid)));
        intervals.push((mid, hi, kronrod(f, mid, hi)));
    }
    panic!("quadrature did not converge on [{a}, {b}]");
}

/// `ln ∫_lo^1 ε^n (1−ε)^r dε`, rescaled around the integrand's peak.
pub fn log_beta_tail_quad(lo: f64, n: f64, r: f64) -> f64 {
    let log_f = |e: f64| n * e.ln() + r * (1.0 - e).ln();
    let peak = if n + r > 0.0 { (n / (n + r)).clamp(lo, 1.0) } else { lo };
    let shift = if peak < 1.0 || r == 0.0 { log_f(peak) } else { log_f(lo) };
    let shift = if shift.is_finite() { shift } else { 0.0 };
    let f = |e: f64| if e >= 1.0 && r > 0.0 { 0.0 } else { (log_f(e) - shift).exp() };
    // split at the peak so the bulk is resolved
    let mut total = 0.0;
    let mut prev = lo;
    for cut in [peak, 1.0] {
        if cut > prev {
            total += integrate(&f, prev, cut, 1e-13, 0.0);
            prev = cut;
        }
    }
    total.ln() + shift
}
