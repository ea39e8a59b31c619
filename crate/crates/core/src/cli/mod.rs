//! Command-line harness: single runs and mesh sweeps with on-disk outputs.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

pub use config::{parse_config, CliArgs, ConfigError, IntegrandKind, RunConfig};
pub use output::RunSummary;

use crate::descent::{run, RunHistory};
use crate::error::{Error, Result};
use crate::fem::{interpolate_target, Problem};
use crate::linalg::SolverParams;
use crate::mesh::Mesh;

/// Discretizes the configured problem on an `n × n` mesh.
pub fn build_problem(config: &RunConfig, n: usize) -> Result<Problem> {
    let mesh = Mesh::unit_square(n)?;
    let target_kind = config.target;
    let target = interpolate_target(&mesh, |x| target_kind.eval(x))?;
    let solver = SolverParams {
        rel_tol: config.solver_tol,
        max_iter: None,
    };
    Problem::new(mesh, target, config.build_integrand()?, config.mass, solver)
}

pub fn solve(config: &RunConfig, n: usize) -> Result<RunHistory> {
    let problem = build_problem(config, n)?;
    run(&problem, &config.algorithm, None)
}

/// Runs mesh `n` and writes `history.csv`, `summary.json` and the requested
/// dumps into `dir`.
pub fn run_into(config: &RunConfig, n: usize, dir: &Path) -> Result<(RunSummary, RunHistory)> {
    let history = solve(config, n)?;
    let summary = output::summarize(n, &history, config.algorithm.mode.name());
    output::write(&dir.join("history.csv"), &output::history_csv(&history))?;
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    output::write(&dir.join("summary.json"), &(json + "\n"))?;
    if config.dump_control {
        output::write(
            &dir.join("control.txt"),
            &output::control_dump(&history.control),
        )?;
    }
    if config.dump_fields {
        output::write(
            &dir.join("fields.txt"),
            &output::fields_dump(&history.state, &history.adjoint),
        )?;
    }
    Ok((summary, history))
}

/// Single run on the first configured mesh, written to `out_dir`.
pub fn run_single(config: &RunConfig) -> Result<RunSummary> {
    let n = config.meshes[0];
    run_into(config, n, &config.out_dir).map(|(summary, _)| summary)
}

/// Outcome of one mesh in a sweep.
#[derive(Debug)]
pub struct SweepRow {
    pub n: usize,
    pub dir: PathBuf,
    pub result: std::result::Result<RunSummary, Error>,
}

#[derive(Debug)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub table: String,
    pub rho_histories: String,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_err()).count()
    }
}

/// Runs every configured mesh into `out_dir/n<n>/` and writes `table.csv`
/// and `rho_history.csv`. A failing mesh is recorded and the sweep goes on.
pub fn run_sweep(config: &RunConfig) -> Result<SweepReport> {
    let mut rows = Vec::new();
    let mut histories = Vec::new();
    let mut table = format!("{}\n", output::TABLE_HEADER);
    for &n in &config.meshes {
        let dir = config.out_dir.join(format!("n{n}"));
        log::info!("sweep: n = {n}");
        let result = run_into(config, n, &dir);
        match &result {
            Ok((summary, history)) => {
                table.push_str(&output::table_row(summary));
                histories.push((n, history.records.iter().map(|r| r.rho_l1()).collect()));
            }
            Err(e) => {
                log::warn!("sweep: n = {n} failed: {e}");
                table.push_str(&format!(
                    "{},failed,failed,failed",
                    output::sci(std::f64::consts::SQRT_2 / n as f64, 2)
                ));
            }
        }
        table.push('\n');
        rows.push(SweepRow {
            n,
            dir,
            result: result.map(|(s, _)| s),
        });
    }
    let rho_histories = output::rho_histories_csv(&histories);
    output::write(&config.out_dir.join("table.csv"), &table)?;
    output::write(&config.out_dir.join("rho_history.csv"), &rho_histories)?;
    Ok(SweepReport {
        rows,
        table,
        rho_histories,
    })
}
