use cmm_core::bayes::{mode_number_by_bic, mode_number_by_evidence};
use cmm_core::sim::modes_multinomial_counts;
use cmm_core::Seed;
use rayon::prelude::*;

use super::csv_writer;
use crate::error::{CliError, CliResult};
use crate::{BenchArgs, Common};

/// Number of modes planted by the benchmark design.
const TRUE_MODES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub n: usize,
    pub il_correct: f64,
    pub il_over: f64,
    pub bic_correct: f64,
    pub bic_over: f64,
}

/// Selection frequencies of both criteria at one sample size.
pub fn curve_point(r: f64, s: usize, n: usize, reps: usize, seed: Seed) -> CliResult<CurvePoint> {
    let picks = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let counts = modes_multinomial_counts(n, s, r, seed.derive("bench", n as u64).derive("rep", rep as u64))?;
            Ok((mode_number_by_evidence(&counts)?, mode_number_by_bic(&counts)?))
        })
        .collect::<cmm_core::Result<Vec<_>>>()?;
    let share = |f: &dyn Fn(&(usize, usize)) -> bool| picks.iter().filter(|p| f(p)).count() as f64 / reps as f64;
    Ok(CurvePoint {
        n,
        il_correct: share(&|p| p.0 == TRUE_MODES),
        il_over: share(&|p| p.0 > TRUE_MODES),
        bic_correct: share(&|p| p.1 == TRUE_MODES),
        bic_over: share(&|p| p.1 > TRUE_MODES),
    })
}

pub fn run(common: &Common, args: &BenchArgs) -> CliResult<()> {
    if args.reps == 0 || args.n_grid.is_empty() || args.n_grid.contains(&0) {
        return Err(CliError::usage("--reps and every --n-grid entry must be positive"));
    }
    let path = common.out_dir.join("curve.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["n", "reps", "il_correct", "il_over", "bic_correct", "bic_over"])?;
    println!("{:>6}  {:>10}  {:>8}  {:>11}  {:>8}", "n", "il_correct", "il_over", "bic_correct", "bic_over");
    for &n in &args.n_grid {
        let p = curve_point(args.r, args.s, n, args.reps, Seed(common.seed))?;
        w.write_record([
            n.to_string(),
            args.reps.to_string(),
            p.il_correct.to_string(),
            p.il_over.to_string(),
            p.bic_correct.to_string(),
            p.bic_over.to_string(),
        ])?;
        println!("{:>6}  {:>10.3}  {:>8.3}  {:>11.3}  {:>8.3}", n, p.il_correct, p.il_over, p.bic_correct, p.bic_over);
    }
    w.flush().map_err(|e| CliError::io(&path, e))
}
