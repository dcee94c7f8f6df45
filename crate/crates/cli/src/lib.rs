//! Scenario runner behind the `explorer` binary.

pub mod report;

use mrexplore::config::{Method, ScenarioConfig};
use mrexplore::grid_map::save_occupancy;
use mrexplore::simulator::{RunMetrics, Simulation};
use rayon::prelude::*;
use report::{ComparisonReport, SeedRow};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, missing or malformed map, invalid start poses.
    #[error("config error: {0}")]
    Config(String),
    /// Anything that fails once the scenario is running, including output.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    ScenarioConfig::load(path).map_err(|e| CliError::Config(e.to_string()))
}

/// Runs one scenario and writes its artifacts into `dir`: `metrics.csv`,
/// `summary.csv`, `map_r<i>.pgm` per robot and `merged.pgm`, each map
/// with its `.meta` sidecar.
pub fn execute(config: ScenarioConfig, dir: &Path) -> Result<RunMetrics, CliError> {
    let mut sim = Simulation::from_config(config).map_err(|e| CliError::Config(e.to_string()))?;
    let runtime = |e: mrexplore::simulator::SimError| CliError::Runtime(e.to_string());
    while !sim.is_done() {
        sim.step().map_err(runtime)?;
    }
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    for r in sim.robots() {
        save_occupancy(&r.map, &dir.join(format!("map_r{}.pgm", r.id.0)))
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    save_occupancy(sim.merged(), &dir.join("merged.pgm")).map_err(|e| CliError::Runtime(e.to_string()))?;
    let metrics = sim.finish().map_err(runtime)?;
    for (name, text) in [("metrics.csv", metrics.to_csv()), ("summary.csv", metrics.summary_csv())] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    }
    Ok(metrics)
}

/// `explorer run`.
pub fn cmd_run(config_path: &Path, out: &Path) -> Result<RunMetrics, CliError> {
    let config = load_config(config_path)?;
    let metrics = execute(config, out)?;
    log::info!("run finished: {:.2}% coverage after {} ticks", metrics.final_coverage(), metrics.ticks.len());
    Ok(metrics)
}

/// Output directory of one `(method, seed)` pair inside a comparison.
pub fn pair_dir(out: &Path, method: Method, seed: u64) -> PathBuf {
    out.join(format!("{method}_seed{seed}"))
}

/// Runs a pair into a scratch directory and renames it into place, so a
/// pair directory is either complete or absent.
fn run_pair(config: &ScenarioConfig, method: Method, seed: u64, out: &Path) -> Result<SeedRow, CliError> {
    let mut config = config.clone();
    config.method = method;
    config.seed = seed;
    let target = pair_dir(out, method, seed);
    let scratch = out.join(format!(".{method}_seed{seed}.partial"));
    if scratch.exists() {
        fs::remove_dir_all(&scratch).map_err(|e| io_error(&scratch, e))?;
    }
    log::info!("running {method} seed {seed}");
    execute(config, &scratch)?;
    if target.exists() {
        fs::remove_dir_all(&target).map_err(|e| io_error(&target, e))?;
    }
    fs::rename(&scratch, &target).map_err(|e| io_error(&target, e))?;
    read_seed_row(&target)
}

/// Parses the `summary.csv` of a finished pair directory.
pub fn read_seed_row(dir: &Path) -> Result<SeedRow, CliError> {
    let path = dir.join("summary.csv");
    let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    SeedRow::from_summary_csv(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// `explorer compare`: every method under every seed, pairs in parallel.
/// Writes `comparison.csv` into `out` and returns the report.
pub fn cmd_compare(
    config_path: &Path,
    methods: &[Method],
    seeds: &[u64],
    out: &Path,
) -> Result<ComparisonReport, CliError> {
    if methods.is_empty() || seeds.is_empty() {
        return Err(CliError::Config("compare needs at least one method and one seed".into()));
    }
    let config = load_config(config_path)?;
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let pairs: Vec<(Method, u64)> = methods.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    let results: Vec<Result<SeedRow, CliError>> =
        pairs.par_iter().map(|&(m, s)| run_pair(&config, m, s, out)).collect();
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let report = ComparisonReport::from_rows(rows);
    let path = out.join("comparison.csv");
    fs::write(&path, report.to_csv()).map_err(|e| io_error(&path, e))?;
    Ok(report)
}

/// CSV layouts, shown by `--help`.
pub const CSV_SCHEMAS: &str = "\
Output files (all floats printed with 6 decimals):

  metrics.csv     one row per tick:
                  time, coverage_r0 .. coverage_r<n-1>, merged_coverage,
                  raw_frontiers, filtered_frontiers, map_entropy, loop_closures
                  (coverage in percent of free truth cells, entropy in bits;
                  frontier counts are those of the latest served turn)
  summary.csv     one row per run:
                  method, seed, robots, sim_time, iterations, final_coverage,
                  mean_reduction, ssim, rmse, alignment_error, total_distance,
                  loop_closures, goals
  comparison.csv  per-seed rows, then one summary row per method:
                  row (seed|summary), method, seed (number|all), runs,
                  final_coverage, coverage_stddev (population), mean_reduction,
                  ssim, rmse, alignment_error
  map_r<i>.pgm, merged.pgm
                  final occupancy maps (unknown 128, free 255, occupied 0)
                  with a .meta sidecar holding resolution and origin

mean_reduction is 100 * (1 - filtered / raw) averaged over served turns
with raw > 0; it is nan when no such turn exists.";
