//! Run configuration: built-in defaults, then a flat `key = value` file,
//! then command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::descent::{AlgorithmConfig, Mode};
use crate::error::{Error, Result};
use crate::fem::{MassKind, Target};
use crate::integrand::{CostIntegrand, IntegerQuadratic, PureQuadratic};

/// Mesh sizes run by `--sweep default`.
pub const DEFAULT_SWEEP: [usize; 4] = [32, 64, 128, 256];
/// Mesh sizes run by `--sweep full`, down to `h ≈ 1.41e-3`.
pub const FULL_SWEEP: [usize; 6] = [32, 64, 128, 256, 512, 1024];
/// Mesh sizes run by `--sweep table`: `h = √2/n` gives 4.42e-2, 2.21e-2,
/// 1.13e-2, 5.66e-3, 2.83e-3 and 1.41e-3.
pub const TABLE_SWEEP: [usize; 6] = [32, 64, 125, 250, 500, 1000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntegrandKind {
    #[default]
    IntegerQuadratic,
    Quadratic,
}

impl IntegrandKind {
    pub fn name(self) -> &'static str {
        match self {
            IntegrandKind::IntegerQuadratic => "integer-quadratic",
            IntegrandKind::Quadratic => "quadratic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Mesh sizes to run; more than one (or an explicit `--sweep`) makes a sweep.
    pub meshes: Vec<usize>,
    pub sweep: bool,
    pub integrand: IntegrandKind,
    pub alpha: f64,
    pub b: f64,
    pub target: Target,
    pub mass: MassKind,
    pub algorithm: AlgorithmConfig,
    pub solver_tol: f64,
    pub out_dir: PathBuf,
    pub dump_control: bool,
    pub dump_fields: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            meshes: vec![32],
            sweep: false,
            integrand: IntegrandKind::IntegerQuadratic,
            alpha: 0.01,
            b: 10.0,
            target: Target::Oscillating,
            mass: MassKind::LumpedInterior,
            algorithm: AlgorithmConfig::default(),
            solver_tol: 1e-12,
            out_dir: PathBuf::from("out"),
            dump_control: false,
            dump_fields: false,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn build_integrand(&self) -> Result<Box<dyn CostIntegrand>> {
        Ok(match self.integrand {
            IntegrandKind::IntegerQuadratic => {
                Box::new(IntegerQuadratic::new(self.alpha, self.b as i64)?)
            }
            IntegrandKind::Quadratic => Box::new(PureQuadratic::new(self.alpha, self.b)?),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.algorithm.validate()?;
        if self.meshes.is_empty() || self.meshes.contains(&0) {
            return Err(invalid("n", "mesh sizes must be positive integers"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(
                "alpha",
                format!("must be positive, got {}", self.alpha),
            ));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(invalid("b", format!("must be positive, got {}", self.b)));
        }
        if self.integrand == IntegrandKind::IntegerQuadratic && self.b.fract() != 0.0 {
            return Err(invalid(
                "b",
                format!("must be an integer for integer-quadratic, got {}", self.b),
            ));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return Err(invalid(
                "solver_tol",
                format!("must lie in (0, 1), got {}", self.solver_tol),
            ));
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "n" => self.meshes = vec![parse(&key, value)?],
            "sweep" => {
                self.meshes = parse_sweep(value)?;
                self.sweep = true;
            }
            "alpha" => self.alpha = parse(&key, value)?,
            "b" => self.b = parse(&key, value)?,
            "beta" => self.algorithm.beta = parse(&key, value)?,
            "sigma" => self.algorithm.sigma = parse(&key, value)?,
            "delta_tol" => self.algorithm.delta_tol = parse(&key, value)?,
            "max_outer" => self.algorithm.max_outer = parse(&key, value)?,
            "solver_tol" => self.solver_tol = parse(&key, value)?,
            "mode" => self.algorithm.mode = value.parse::<Mode>().map_err(|m| invalid(&key, m))?,
            "integrand" => {
                self.integrand = match value {
                    "integer-quadratic" => IntegrandKind::IntegerQuadratic,
                    "quadratic" => IntegrandKind::Quadratic,
                    other => {
                        return Err(invalid(
                            &key,
                            format!(
                            "unknown integrand `{other}` (expected integer-quadratic or quadratic)"
                        ),
                        ))
                    }
                }
            }
            "target" => self.target = value.parse::<Target>().map_err(|m| invalid(&key, m))?,
            "mass" => {
                self.mass = match value {
                    "lumped-interior" => MassKind::LumpedInterior,
                    "consistent" => MassKind::Consistent,
                    other => {
                        return Err(invalid(
                            &key,
                            format!(
                                "unknown mass `{other}` (expected lumped-interior or consistent)"
                            ),
                        ))
                    }
                }
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            "dump_control" => self.dump_control = parse_bool(&key, value)?,
            "dump_fields" => self.dump_fields = parse_bool(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            _ => return Err(invalid(&key, "unknown key")),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (key, value) in parse_key_values(&text)? {
            self.set(&key, &value)?;
        }
        Ok(())
    }
}

fn invalid(key: &str, message: impl Into<String>) -> Error {
    Error::InvalidConfig {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| invalid(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" | "" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(invalid(key, format!("expected a boolean, got `{other}`"))),
    }
}

/// `32,64,128`, or one of the presets `default`, `full`, `table`.
pub fn parse_sweep(value: &str) -> Result<Vec<usize>> {
    match value {
        "default" => return Ok(DEFAULT_SWEEP.to_vec()),
        "full" => return Ok(FULL_SWEEP.to_vec()),
        "table" => return Ok(TABLE_SWEEP.to_vec()),
        _ => {}
    }
    let meshes: Vec<usize> = value
        .split(',')
        .map(|s| parse::<usize>("sweep", s.trim()))
        .collect::<Result<_>>()?;
    if meshes.is_empty() || meshes.contains(&0) {
        return Err(invalid("sweep", "mesh sizes must be positive integers"));
    }
    Ok(meshes)
}

/// Flat `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            invalid(
                &format!("line {}", lineno + 1),
                format!("expected key = value, got `{line}`"),
            )
        })?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

/// Command-line flags. Every value is validated by [`RunConfig::set`].
#[derive(Debug, Parser)]
#[command(
    name = "pmp-descent",
    version,
    about = "Maximum-principle descent for integer optimal control of the Poisson equation"
)]
pub struct CliArgs {
    /// Subdivisions per side of the unit square.
    #[arg(long)]
    pub n: Option<String>,
    /// Comma-separated mesh sizes, or a preset: `default` (32..256), `full` (32..1024), `table` (32, 64, 125, 250, 500, 1000).
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    /// Box bound on the control.
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long)]
    pub delta_tol: Option<String>,
    #[arg(long)]
    pub max_outer: Option<String>,
    #[arg(long)]
    pub solver_tol: Option<String>,
    /// pmp-armijo | full-step
    #[arg(long)]
    pub mode: Option<String>,
    /// integer-quadratic | quadratic
    #[arg(long)]
    pub integrand: Option<String>,
    /// oscillating | bump | zero
    #[arg(long)]
    pub target: Option<String>,
    /// lumped-interior | consistent
    #[arg(long)]
    pub mass: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Write the final control, one `cell,value` pair per line.
    #[arg(long)]
    pub dump_control: bool,
    /// Write the final state and adjoint per vertex.
    #[arg(long)]
    pub dump_fields: bool,
    #[arg(long)]
    pub seed: Option<String>,
    /// Flat key=value file applied before the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl CliArgs {
    fn settings(&self) -> Vec<(&'static str, &str)> {
        let values = [
            ("n", &self.n),
            ("sweep", &self.sweep),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("sigma", &self.sigma),
            ("b", &self.b),
            ("delta_tol", &self.delta_tol),
            ("max_outer", &self.max_outer),
            ("solver_tol", &self.solver_tol),
            ("mode", &self.mode),
            ("integrand", &self.integrand),
            ("target", &self.target),
            ("mass", &self.mass),
            ("out_dir", &self.out_dir),
            ("seed", &self.seed),
        ];
        let mut out: Vec<(&'static str, &str)> = values
            .into_iter()
            .filter_map(|(key, v)| v.as_deref().map(|v| (key, v)))
            .collect();
        if self.dump_control {
            out.push(("dump_control", "true"));
        }
        if self.dump_fields {
            out.push(("dump_fields", "true"));
        }
        out
    }
}

/// Builds a validated configuration from parsed flags (and the file they name).
pub fn config_from_args(args: &CliArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    for (key, value) in args.settings() {
        cfg.set(key, value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses an argument vector (program name first) into a validated configuration.
pub fn parse_config<I, T>(args: I) -> std::result::Result<RunConfig, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = CliArgs::try_parse_from(args).map_err(ConfigError::Usage)?;
    config_from_args(&args).map_err(ConfigError::Invalid)
}

#[derive(Debug)]
pub enum ConfigError {
    Usage(clap::Error),
    Invalid(Error),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Usage(e) => write!(f, "{e}"),
            ConfigError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ConfigError {}
