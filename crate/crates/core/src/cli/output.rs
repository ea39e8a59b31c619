//! Iteration logs, summaries, field dumps and sweep tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::descent::{IterationRecord, RunHistory};
use crate::error::{Error, Result};
use crate::fem::{ControlField, NodalField};

pub const HISTORY_HEADER: &str = "k,J,rho_l1,t_k,set_measure,changed_cells,inner_trials";
pub const TABLE_HEADER: &str = "h,J,rho_l1,iterations";

/// 17 significant digits.
pub fn full(x: f64) -> String {
    format!("{x:.16e}")
}

/// Scientific notation with a signed two-digit exponent, e.g. `4.42e-02`.
pub fn sci(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$e}");
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let exp: i32 = exp.parse().expect("exponent from format!");
            let sign = if exp < 0 { '-' } else { '+' };
            format!("{mantissa}e{sign}{:02}", exp.abs())
        }
        None => s,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n: usize,
    pub h: f64,
    pub cells: usize,
    #[serde(rename = "J")]
    pub objective: f64,
    pub rho_l1: f64,
    pub iterations: usize,
    pub termination: String,
    pub mode: String,
}

/// One parsed line of the iteration log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub k: usize,
    pub objective: f64,
    pub rho_l1: f64,
    pub t: Option<f64>,
    pub set_measure: f64,
    pub changed_cells: usize,
    pub inner_trials: usize,
}

impl From<&IterationRecord> for LogRow {
    fn from(r: &IterationRecord) -> Self {
        Self {
            k: r.k,
            objective: r.objective,
            rho_l1: r.rho_l1(),
            t: r.t,
            set_measure: r.set_measure,
            changed_cells: r.changed_cells,
            inner_trials: r.inner_trials,
        }
    }
}

pub fn history_csv(history: &RunHistory) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in &history.records {
        let t = r.t.map(full).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            full(r.objective),
            full(r.rho_l1()),
            t,
            full(r.set_measure),
            r.changed_cells,
            r.inner_trials
        )
        .unwrap();
    }
    out
}

pub fn parse_history_csv(text: &str) -> Result<Vec<LogRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(HISTORY_HEADER) {
        return Err(bad_log("missing or unexpected header"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(bad_log(&format!("expected 7 fields in `{line}`")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad_log(&format!("bad number `{s}`")))
            };
            let int = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| bad_log(&format!("bad integer `{s}`")))
            };
            Ok(LogRow {
                k: int(fields[0])?,
                objective: num(fields[1])?,
                rho_l1: num(fields[2])?,
                t: if fields[3].is_empty() {
                    None
                } else {
                    Some(num(fields[3])?)
                },
                set_measure: num(fields[4])?,
                changed_cells: int(fields[5])?,
                inner_trials: int(fields[6])?,
            })
        })
        .collect()
}

fn bad_log(message: &str) -> Error {
    Error::InvalidConfig {
        key: "history.csv".into(),
        message: message.into(),
    }
}

/// `n=<n> cells=<2n²>` followed by `cell,value` lines.
pub fn control_dump(u: &ControlField) -> String {
    let mut out = format!("n={} cells={}\n", u.n(), u.values().len());
    for (c, v) in u.values().iter().enumerate() {
        writeln!(out, "{c},{v}").unwrap();
    }
    out
}

pub fn parse_control_dump(text: &str) -> Result<(usize, Vec<f64>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad_dump("empty dump"))?;
    let n = header
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("n="))
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(|| bad_dump("missing n= in header"))?;
    let mut values = Vec::new();
    for (expected, line) in lines.enumerate() {
        let (idx, value) = line.split_once(',').ok_or_else(|| bad_dump(line))?;
        if idx.parse::<usize>().ok() != Some(expected) {
            return Err(bad_dump(line));
        }
        values.push(value.parse::<f64>().map_err(|_| bad_dump(line))?);
    }
    Ok((n, values))
}

fn bad_dump(message: &str) -> Error {
    Error::InvalidConfig {
        key: "control dump".into(),
        message: message.into(),
    }
}

/// `n=<n> vertices=<(n+1)²>` followed by `vertex,y,p` lines.
pub fn fields_dump(y: &NodalField, p: &NodalField) -> String {
    let mut out = format!("n={} vertices={}\n", y.n(), y.values().len());
    for (v, (a, b)) in y.values().iter().zip(p.values()).enumerate() {
        writeln!(out, "{v},{},{}", full(*a), full(*b)).unwrap();
    }
    out
}

pub fn summarize(n: usize, history: &RunHistory, mode: &str) -> RunSummary {
    RunSummary {
        n,
        h: std::f64::consts::SQRT_2 / n as f64,
        cells: 2 * n * n,
        objective: history.final_objective(),
        rho_l1: history.final_rho_l1(),
        iterations: history.iterations(),
        termination: history.termination.name().to_string(),
        mode: mode.to_string(),
    }
}

/// Table row in the reported precision: `h` and `‖ρ‖` to three significant
/// digits, `J` to three decimals.
pub fn table_row(summary: &RunSummary) -> String {
    format!(
        "{},{:.3},{},{}",
        sci(summary.h, 2),
        summary.objective,
        sci(summary.rho_l1, 2),
        summary.iterations
    )
}

/// Per-iteration `‖ρ_k‖` of several runs, one column per mesh.
pub fn rho_histories_csv(runs: &[(usize, Vec<f64>)]) -> String {
    let mut out = String::from("k");
    for (n, _) in runs {
        write!(out, ",n{n}").unwrap();
    }
    out.push('\n');
    let rows = runs.iter().map(|(_, h)| h.len()).max().unwrap_or(0);
    for k in 0..rows {
        write!(out, "{k}").unwrap();
        for (_, h) in runs {
            out.push(',');
            if let Some(v) = h.get(k) {
                out.push_str(&full(*v));
            }
        }
        out.push('\n');
    }
    out
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}
