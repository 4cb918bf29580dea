//! Evaluation protocol: held-out test sets, average relative error,
//! aggregation over repetitions with t-distribution confidence intervals,
//! and the detail/summary report files.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::sim::Simulator;
use crate::space::{DesignPoint, ParameterSpace};

/// Held-out points with their true responses, drawn independently of any
/// pool labeling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestSet {
    pub points: Vec<DesignPoint>,
    pub true_values: Vec<f64>,
    pub seed: u64,
}

impl TestSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn unit_inputs(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.unit.clone()).collect()
    }
}

/// Draws `n_e` uniform points in unit coordinates and evaluates them once.
/// A simulator failure here aborts: test sets must be clean.
pub fn build_test_set(
    space: &ParameterSpace,
    sim: &Simulator,
    n_e: usize,
    seed: u64,
) -> Result<TestSet> {
    if n_e < 1 {
        return Err(Error::Bench("test set needs at least one point".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_e);
    let mut true_values = Vec::with_capacity(n_e);
    for _ in 0..n_e {
        let unit: Vec<f64> = (0..space.n_features()).map(|_| rng.gen()).collect();
        let p = space.point_from_unit(unit)?;
        true_values.push(sim.evaluate(&p.raw)?);
        points.push(p);
    }
    Ok(TestSet {
        points,
        true_values,
        seed,
    })
}

/// Mean of |true - predicted| / |true| over the test points, floor-free.
/// A true value of exactly zero is an error: callers must pick responses
/// (for example log-transformed ones) that avoid exact zeros.
pub fn average_relative_error<R: Real>(true_values: &[R], predicted: &[R]) -> Result<R> {
    if true_values.is_empty() || true_values.len() != predicted.len() {
        return Err(Error::Bench(format!(
            "error metric needs equal non-empty lengths, got {} vs {}",
            true_values.len(),
            predicted.len()
        )));
    }
    let mut sum = R::zero();
    for (&f, &g) in true_values.iter().zip(predicted) {
        if f == R::zero() {
            return Err(Error::Bench(
                "relative error undefined: a true value is exactly zero".into(),
            ));
        }
        sum = sum + (f - g).abs() / f.abs();
    }
    Ok(sum / R::lit(true_values.len() as f64))
}

/// Two-sided t critical value t_{(1+confidence)/2, df}.
pub fn t_critical(df: usize, confidence: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("valid t distribution");
    dist.inverse_cdf(0.5 * (1.0 + confidence))
}

/// Sample mean with a two-sided t confidence interval (s/sqrt(n) scale).
/// A single value yields a zero-width interval.
pub fn aggregate(rep_errors: &[f64], confidence: f64) -> Result<(f64, f64, f64)> {
    let n = rep_errors.len();
    if n == 0 {
        return Err(Error::Bench("aggregate needs at least one value".into()));
    }
    let mean = rep_errors.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok((mean, mean, mean));
    }
    let var = rep_errors.iter().map(|&e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1) as f64;
    let half = t_critical(n - 1, confidence) * var.sqrt() / (n as f64).sqrt();
    Ok((mean, mean - half, mean + half))
}

/// One repetition's error trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub case: String,
    pub model: String,
    pub strategy: String,
    pub rep: usize,
    /// (queries so far, error), strictly increasing in queries.
    pub errors_by_step: Vec<(usize, f64)>,
}

/// One row of the summary file. Repetitions of every model are pooled per
/// (case, queries, strategy) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub case: String,
    pub queries: usize,
    pub strategy: String,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_reps: usize,
    pub best: bool,
}

pub const DETAIL_HEADER: &str = "case,model,strategy,rep,queries,error";
pub const SUMMARY_HEADER: &str = "case,queries,strategy,mean,ci_low,ci_high,n_reps,best";

/// Renders the detail file: one uncapped row per curve step, sorted
/// lexicographically on identifiers then step.
pub fn detail_text(curves: &[ErrorCurve]) -> String {
    let mut rows: Vec<(String, String, String, usize, usize, f64)> = Vec::new();
    for c in curves {
        for &(q, e) in &c.errors_by_step {
            rows.push((c.case.clone(), c.model.clone(), c.strategy.clone(), c.rep, q, e));
        }
    }
    rows.sort_by(|a, b| {
        (&a.0, &a.1, &a.2, a.3, a.4)
            .partial_cmp(&(&b.0, &b.1, &b.2, b.3, b.4))
            .unwrap()
    });
    let mut out = String::from(DETAIL_HEADER);
    out.push('\n');
    for (case, model, strategy, rep, q, e) in rows {
        out.push_str(&format!("{case},{model},{strategy},{rep},{q},{e}\n"));
    }
    out
}

/// Computes summary rows from detail-file text, so regenerating the summary
/// from a written detail file is byte-for-byte stable. Means above `cap`
/// are reported as `cap` (the detail values stay uncapped); confidence
/// bounds are capped the same way to keep rows internally consistent.
pub fn summary_from_detail(detail: &str, query_marks: &[usize], cap: f64) -> Result<Vec<SummaryRow>> {
    let mut lines = detail.lines();
    match lines.next() {
        Some(h) if h == DETAIL_HEADER => {}
        other => {
            return Err(Error::Bench(format!(
                "bad detail header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    // (case, queries, strategy) -> pooled errors across models and reps.
    let mut cells: BTreeMap<(String, usize, String), Vec<f64>> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::Bench(format!("detail line {}: expected 6 fields", i + 2)));
        }
        let q: usize = f[4]
            .parse()
            .map_err(|_| Error::Bench(format!("detail line {}: bad queries `{}`", i + 2, f[4])))?;
        let e: f64 = f[5]
            .parse()
            .map_err(|_| Error::Bench(format!("detail line {}: bad error `{}`", i + 2, f[5])))?;
        if query_marks.contains(&q) {
            cells
                .entry((f[0].to_string(), q, f[2].to_string()))
                .or_default()
                .push(e);
        }
    }
    for &mark in query_marks {
        if !cells.keys().any(|(_, q, _)| *q == mark) {
            return Err(Error::Bench(format!("no detail rows at query mark {mark}")));
        }
    }

    let mut rows: Vec<SummaryRow> = Vec::new();
    for ((case, q, strategy), errs) in &cells {
        let (mean, lo, hi) = aggregate(errs, 0.95)?;
        rows.push(SummaryRow {
            case: case.clone(),
            queries: *q,
            strategy: strategy.clone(),
            mean: mean.min(cap),
            ci_low: lo.min(cap),
            ci_high: hi.min(cap),
            n_reps: errs.len(),
            best: false,
        });
    }
    // Flag the lowest reported mean within each (case, queries) group.
    let mut best: BTreeMap<(String, usize), f64> = BTreeMap::new();
    for r in &rows {
        let key = (r.case.clone(), r.queries);
        let cur = best.entry(key).or_insert(f64::INFINITY);
        if r.mean < *cur {
            *cur = r.mean;
        }
    }
    for r in &mut rows {
        r.best = r.mean == best[&(r.case.clone(), r.queries)];
    }
    rows.sort_by(|a, b| {
        (&a.case, a.queries, &a.strategy)
            .cmp(&(&b.case, b.queries, &b.strategy))
    });
    Ok(rows)
}

pub fn summary_text(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.case, r.queries, r.strategy, r.mean, r.ci_low, r.ci_high, r.n_reps, r.best
        ));
    }
    out
}

/// Writes `detail.csv` and `summary.csv` under `out_dir` and returns the
/// summary rows.
pub fn write_report(
    curves: &[ErrorCurve],
    query_marks: &[usize],
    cap: f64,
    out_dir: &Path,
) -> Result<Vec<SummaryRow>> {
    let detail = detail_text(curves);
    let rows = summary_from_detail(&detail, query_marks, cap)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let detail_path = out_dir.join("detail.csv");
    std::fs::write(&detail_path, &detail).map_err(|e| Error::io(&detail_path, e))?;
    let summary_path = out_dir.join("summary.csv");
    std::fs::write(&summary_path, summary_text(&rows)).map_err(|e| Error::io(&summary_path, e))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::builtin_analytic;

    #[test]
    fn relative_error_hand_examples() {
        assert_eq!(average_relative_error(&[2.0], &[2.0]).unwrap(), 0.0);
        assert_eq!(average_relative_error(&[2.0], &[1.0]).unwrap(), 0.5);
        assert_eq!(
            average_relative_error(&[1.0, -2.0], &[2.0, -1.0]).unwrap(),
            0.75
        );
        assert!(average_relative_error(&[0.0], &[1.0]).is_err());
        assert!(average_relative_error(&[1.0], &[1.0, 2.0]).is_err());
        assert!(average_relative_error::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn relative_error_matches_direct_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.gen_range(1..30);
            let t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..5.0) * if rng.gen() { 1.0 } else { -1.0 }).collect();
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let oracle = t
                .iter()
                .zip(&p)
                .map(|(&f, &g)| (f - g).abs() / f.abs())
                .sum::<f64>()
                / n as f64;
            assert!((average_relative_error(&t, &p).unwrap() - oracle).abs() <= 1e-12);
        }
    }

    /// High-precision two-sided 95% t criticals for df = 1..=9.
    const T975: [f64; 9] = [
        12.7062047364,
        4.3026527297,
        3.1824463053,
        2.7764451052,
        2.5705818366,
        2.4469118511,
        2.3646242510,
        2.3060041352,
        2.2621571628,
    ];

    #[test]
    fn t_criticals_match_reference_table() {
        for (df, want) in (1..=9).zip(T975) {
            assert!(
                (t_critical(df, 0.95) - want).abs() < 1e-6,
                "df {df}: {} vs {want}",
                t_critical(df, 0.95)
            );
        }
    }

    #[test]
    fn aggregate_examples() {
        let (m, lo, hi) = aggregate(&[0.5; 10], 0.95).unwrap();
        assert_eq!((m, lo, hi), (0.5, 0.5, 0.5));

        let (m, lo, hi) = aggregate(&[0.0, 1.0], 0.95).unwrap();
        assert!((m - 0.5).abs() < 1e-12);
        let half = T975[0] * (0.5f64).sqrt() / (2f64).sqrt();
        assert!((hi - m - half).abs() < 1e-6, "half-width {}", hi - m);
        assert!(((m - lo) - half).abs() < 1e-6);
        assert!((half - 6.3531).abs() < 1e-3);

        let (m, lo, hi) = aggregate(&[3.25], 0.95).unwrap();
        assert_eq!((m, lo, hi), (3.25, 3.25, 3.25));
    }

    #[test]
    fn aggregate_matches_independent_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=10 {
            let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let s = (vals.iter().map(|&v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            let half = T975[n - 2] * s / (n as f64).sqrt();
            let (m, lo, hi) = aggregate(&vals, 0.95).unwrap();
            assert!((m - mean).abs() < 1e-9);
            assert!((lo - (mean - half)).abs() < 1e-9);
            assert!((hi - (mean + half)).abs() < 1e-9);
        }
    }

    #[test]
    fn test_set_is_seed_deterministic_and_in_bounds() {
        let sim = builtin_analytic("multimodal_2d").unwrap();
        let a = build_test_set(sim.space(), &sim, 100, 42).unwrap();
        let b = build_test_set(sim.space(), &sim, 100, 42).unwrap();
        assert_eq!(a.points.len(), 100);
        for p in &a.points {
            assert!(p.unit.iter().all(|&u| (0.0..=1.0).contains(&u)));
        }
        assert_eq!(a.true_values, b.true_values);
        let c = build_test_set(sim.space(), &sim, 100, 43).unwrap();
        assert_ne!(a.true_values, c.true_values);
    }

    fn demo_curves() -> Vec<ErrorCurve> {
        let mut curves = Vec::new();
        for (model, base) in [("gp", 0.1), ("linear", 0.4)] {
            for (strategy, shift) in [("R", 0.05), ("V", 0.0)] {
                for rep in 0..3usize {
                    curves.push(ErrorCurve {
                        case: "demo".into(),
                        model: model.into(),
                        strategy: strategy.into(),
                        rep,
                        errors_by_step: (1..=10)
                            .map(|q| (q, base + shift + 0.01 * rep as f64 + 0.3 / q as f64))
                            .collect(),
                    });
                }
            }
        }
        curves
    }

    #[test]
    fn report_round_trip_is_byte_stable() {
        let curves = demo_curves();
        let dir = tempfile::tempdir().unwrap();
        let rows = write_report(&curves, &[5, 10], 100.0, dir.path()).unwrap();
        let detail = std::fs::read_to_string(dir.path().join("detail.csv")).unwrap();
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        let regenerated = summary_from_detail(&detail, &[5, 10], 100.0).unwrap();
        assert_eq!(summary_text(&regenerated), summary);
        assert_eq!(regenerated, rows);
        // Pooled across 2 models x 3 reps.
        assert!(rows.iter().all(|r| r.n_reps == 6));
        // V beats R at both marks in the synthetic data.
        for r in &rows {
            assert_eq!(r.best, r.strategy == "V");
            assert!(r.ci_low <= r.mean && r.mean <= r.ci_high);
        }
    }

    #[test]
    fn capping_affects_summary_not_detail() {
        let mut curves = demo_curves();
        for c in &mut curves {
            if c.strategy == "R" {
                for e in &mut c.errors_by_step {
                    e.1 = 3e6;
                }
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let rows = write_report(&curves, &[5], 100.0, dir.path()).unwrap();
        let capped = rows.iter().find(|r| r.strategy == "R").unwrap();
        assert_eq!(capped.mean, 100.0);
        let detail = std::fs::read_to_string(dir.path().join("detail.csv")).unwrap();
        assert!(detail.contains("3000000"));
    }

    #[test]
    fn missing_query_mark_is_an_error() {
        let curves = demo_curves();
        assert!(matches!(
            summary_from_detail(&detail_text(&curves), &[20], 100.0),
            Err(Error::Bench(_))
        ));
    }
}
