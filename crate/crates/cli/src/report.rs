//! Per-seed rows and per-method aggregates for method comparisons.
//!
//! Aggregates are computed only from the `summary.csv` each run leaves
//! behind, so a comparison can be recomputed offline from those files.

use mrexplore::config::Method;
use mrexplore::simulator::SUMMARY_COLUMNS;
use std::fmt::Write;

/// Column order of `comparison.csv`.
pub const COMPARISON_COLUMNS: [&str; 10] = [
    "row",
    "method",
    "seed",
    "runs",
    "final_coverage",
    "coverage_stddev",
    "mean_reduction",
    "ssim",
    "rmse",
    "alignment_error",
];

#[derive(Clone, Debug, PartialEq)]
pub struct SeedRow {
    pub method: Method,
    pub seed: u64,
    pub final_coverage: f64,
    /// NaN when no served turn had a non-empty raw list.
    pub mean_reduction: f64,
    pub ssim: f64,
    pub rmse: f64,
    pub alignment_error: f64,
}

impl SeedRow {
    /// Reads the data row of a run's `summary.csv`.
    pub fn from_summary_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty summary")?;
        if header != SUMMARY_COLUMNS.join(",") {
            return Err(format!("unexpected summary header {header:?}"));
        }
        let row = lines.next().ok_or("summary has no data row")?;
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != SUMMARY_COLUMNS.len() {
            return Err(format!("summary row has {} fields, expected {}", fields.len(), SUMMARY_COLUMNS.len()));
        }
        let col = |name: &str| fields[SUMMARY_COLUMNS.iter().position(|c| *c == name).unwrap()];
        let num = |name: &str| col(name).parse::<f64>().map_err(|e| format!("{name}: {e}"));
        Ok(Self {
            method: col("method").parse().map_err(|e| format!("method: {e}"))?,
            seed: col("seed").parse().map_err(|e| format!("seed: {e}"))?,
            final_coverage: num("final_coverage")?,
            mean_reduction: num("mean_reduction")?,
            ssim: num("ssim")?,
            rmse: num("rmse")?,
            alignment_error: num("alignment_error")?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub runs: usize,
    pub coverage_mean: f64,
    /// Population standard deviation.
    pub coverage_stddev: f64,
    /// Mean over runs with a defined reduction; NaN if there are none.
    pub mean_reduction: f64,
    pub ssim: f64,
    pub rmse: f64,
    pub alignment_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<SeedRow>,
    pub summaries: Vec<MethodSummary>,
}

/// Six decimals, `nan` for undefined values as in `summary.csv`.
fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

impl ComparisonReport {
    /// Groups rows by method in order of first appearance.
    pub fn from_rows(rows: Vec<SeedRow>) -> Self {
        let mut methods: Vec<Method> = Vec::new();
        for r in &rows {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
        let summaries = methods
            .into_iter()
            .map(|method| {
                let group: Vec<&SeedRow> = rows.iter().filter(|r| r.method == method).collect();
                let pick = |f: fn(&SeedRow) -> f64| group.iter().map(|r| f(r)).collect::<Vec<f64>>();
                let coverage = pick(|r| r.final_coverage);
                let coverage_mean = mean(&coverage);
                let variance = mean(&coverage.iter().map(|c| (c - coverage_mean).powi(2)).collect::<Vec<_>>());
                let reductions: Vec<f64> = pick(|r| r.mean_reduction).into_iter().filter(|v| v.is_finite()).collect();
                MethodSummary {
                    method,
                    runs: group.len(),
                    coverage_mean,
                    coverage_stddev: variance.sqrt(),
                    mean_reduction: mean(&reductions),
                    ssim: mean(&pick(|r| r.ssim)),
                    rmse: mean(&pick(|r| r.rmse)),
                    alignment_error: mean(&pick(|r| r.alignment_error)),
                }
            })
            .collect();
        Self { rows, summaries }
    }

    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// Per-seed rows first, then one summary row per method.
    pub fn to_csv(&self) -> String {
        let mut out = COMPARISON_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "seed,{},{},1,{},{},{},{},{},{}",
                r.method,
                r.seed,
                num(r.final_coverage),
                num(0.0),
                num(r.mean_reduction),
                num(r.ssim),
                num(r.rmse),
                num(r.alignment_error)
            );
        }
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "summary,{},all,{},{},{},{},{},{},{}",
                s.method,
                s.runs,
                num(s.coverage_mean),
                num(s.coverage_stddev),
                num(s.mean_reduction),
                num(s.ssim),
                num(s.rmse),
                num(s.alignment_error)
            );
        }
        out
    }

    /// Fixed-width table of the per-method summaries.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<16} {:>4} {:>10} {:>8} {:>10} {:>7} {:>7} {:>7}\n",
            "method", "runs", "coverage%", "stddev", "reduction%", "ssim", "rmse", "ae"
        );
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{:<16} {:>4} {:>10.2} {:>8.2} {:>10.2} {:>7.3} {:>7.3} {:>7.3}",
                s.method.as_str(),
                s.runs,
                s.coverage_mean,
                s.coverage_stddev,
                s.mean_reduction,
                s.ssim,
                s.rmse,
                s.alignment_error
            );
        }
        out
    }
}
