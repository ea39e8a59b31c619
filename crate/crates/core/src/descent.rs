//! The maximum-principle descent method.
//!
//! Each outer iteration solves for the state `y_k` and adjoint `p_k`, forms
//! the candidate control `ũ_k` minimizing `v·p̄_T + g(v)` on every cell, and
//! measures the per-cell Hamiltonian gaps
//!
//! ```text
//! φ_T = |T| · [(ũ_T − u_T)·p̄_T + g(ũ_T) − g(u_T)] ≤ 0,    ρ_k = Σ_T φ_T.
//! ```
//!
//! The control is switched to `ũ_k` on a greedily chosen set `B_t` with
//! `|B_t| ≤ t·|Ω|` and `Σ_{B_t} φ ≤ t·ρ_k`, where `t ∈ {1, β, β², …}` is the
//! largest step whose trial satisfies `J(u_t) − J(u_k) ≤ σ·Σ_{B_t} φ`.

use std::cmp::Ordering;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, cell_average, ControlField, NodalField, Problem};
use crate::integrand::CostIntegrand;
use crate::mesh::Mesh;

/// Relative slack absorbing rounding in `t·|Ω| / |T|` for `t = β^l`.
const MEASURE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Armijo backtracking over greedy sets.
    #[default]
    PmpArmijo,
    /// Switch every improvable cell each iteration (no globalization).
    FullStep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::PmpArmijo => "pmp-armijo",
            Mode::FullStep => "full-step",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pmp-armijo" => Ok(Mode::PmpArmijo),
            "full-step" => Ok(Mode::FullStep),
            other => Err(format!(
                "unknown mode `{other}` (expected pmp-armijo or full-step)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmConfig {
    /// Backtracking ratio in `(0, 1)`.
    pub beta: f64,
    /// Sufficient-decrease parameter in `(0, 1)`.
    pub sigma: f64,
    /// Stop once `|ρ_k| ≤ delta_tol`.
    pub delta_tol: f64,
    pub max_outer: usize,
    pub mode: Mode,
    /// Keep every iterate `u_0, u_1, …` in the history.
    pub keep_iterates: bool,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            beta: 0.01,
            sigma: 0.1,
            delta_tol: 1e-12,
            max_outer: 100,
            mode: Mode::PmpArmijo,
            keep_iterates: false,
        }
    }
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |key: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig {
                    key: key.into(),
                    message: format!("must lie strictly inside (0, 1), got {v}"),
                })
            }
        };
        open_unit("beta", self.beta)?;
        open_unit("sigma", self.sigma)?;
        if !(self.delta_tol >= 0.0) {
            return Err(Error::InvalidConfig {
                key: "delta_tol".into(),
                message: format!("must be nonnegative, got {}", self.delta_tol),
            });
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidConfig {
                key: "max_outer".into(),
                message: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Sorted set of distinct cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSet {
    cells: Vec<usize>,
    total_area: f64,
}

impl CellSet {
    pub fn new(mesh: &Mesh, mut cells: Vec<usize>) -> Result<Self> {
        cells.sort_unstable();
        if let Some(&last) = cells.last() {
            if last >= mesh.num_cells() {
                return Err(Error::CellOutOfRange {
                    index: last,
                    count: mesh.num_cells(),
                });
            }
        }
        if cells.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Precondition("cell set contains duplicates".into()));
        }
        let total_area = cells.len() as f64 * mesh.cell_area();
        Ok(Self { cells, total_area })
    }

    pub fn empty() -> Self {
        Self {
            cells: Vec::new(),
            total_area: 0.0,
        }
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }

    /// `Σ_{T ∈ B} φ_T`, summed in descent order.
    pub fn descent(&self, phi: &[f64]) -> f64 {
        let mut cells = self.cells.clone();
        cells.sort_by(|&a, &b| by_descent(phi, a, b));
        cells.iter().map(|&c| phi[c]).sum()
    }
}

/// One line of the iteration log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `J(y_k, u_k)`.
    pub objective: f64,
    /// `ρ_k ≤ 0`.
    pub rho: f64,
    /// Accepted step `t_k`; `None` on the final record, where no step is taken.
    pub t: Option<f64>,
    /// `|B_k|`.
    pub set_measure: f64,
    /// `Σ_{B_k} φ`.
    pub set_descent: f64,
    pub changed_cells: usize,
    pub inner_trials: usize,
}

impl IterationRecord {
    /// `‖ρ_k‖_{L¹}`, equal to `|ρ_k|` since every `φ_T ≤ 0`.
    pub fn rho_l1(&self) -> f64 {
        self.rho.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ResidualTol,
    MeshResolution,
    MaxOuter,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::ResidualTol => "residual_tol",
            Termination::MeshResolution => "mesh_resolution",
            Termination::MaxOuter => "max_outer",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunHistory {
    pub records: Vec<IterationRecord>,
    pub control: ControlField,
    pub state: NodalField,
    pub adjoint: NodalField,
    pub termination: Termination,
    /// `u_0, …, u_K` when [`AlgorithmConfig::keep_iterates`] is set.
    pub iterates: Vec<ControlField>,
}

impl RunHistory {
    /// Accepted updates.
    pub fn iterations(&self) -> usize {
        self.records.iter().filter(|r| r.t.is_some()).count()
    }

    pub fn final_record(&self) -> &IterationRecord {
        self.records
            .last()
            .expect("a run always logs its final iterate")
    }

    pub fn final_objective(&self) -> f64 {
        self.final_record().objective
    }

    pub fn final_rho_l1(&self) -> f64 {
        self.final_record().rho_l1()
    }
}

/// A control together with its state and objective.
#[derive(Debug, Clone)]
pub struct Iterate {
    pub control: ControlField,
    pub state: NodalField,
    pub objective: f64,
}

impl Iterate {
    pub fn new(problem: &Problem, control: ControlField) -> Result<Self> {
        control.check_mesh(problem.mesh())?;
        control.check_feasible(problem.integrand())?;
        let state = problem.state(&control)?;
        let objective = problem.objective(&state, &control)?;
        Ok(Self {
            control,
            state,
            objective,
        })
    }
}

/// Cellwise Hamiltonian minimizer `ũ_T = argmin_v v·p̄_T + g(v)`.
pub fn candidate_control(
    mesh: &Mesh,
    p: &NodalField,
    g: &dyn CostIntegrand,
) -> Result<ControlField> {
    let values = cell_average(mesh, p)?
        .into_iter()
        .map(|pbar| g.hamiltonian_argmin(pbar).v)
        .collect();
    ControlField::from_values(mesh, values)
}

/// Per-cell gaps `φ_T = |T|·[(ũ_T − u_T)·p̄_T + g(ũ_T) − g(u_T)]`.
pub fn phi_cells(
    mesh: &Mesh,
    u: &ControlField,
    utilde: &ControlField,
    p: &NodalField,
    g: &dyn CostIntegrand,
) -> Result<Vec<f64>> {
    u.check_mesh(mesh)?;
    utilde.check_mesh(mesh)?;
    u.check_feasible(g)?;
    utilde.check_feasible(g)?;
    let area = mesh.cell_area();
    // written as a difference of Hamiltonians so that φ_T ≤ 0 holds
    // bitwise whenever ũ_T is the exact minimizer
    Ok(cell_average(mesh, p)?
        .iter()
        .zip(u.values().iter().zip(utilde.values()))
        .map(|(&pbar, (&cur, &cand))| area * (g.hamiltonian(cand, pbar) - g.hamiltonian(cur, pbar)))
        .collect())
}

fn by_descent(phi: &[f64], a: usize, b: usize) -> Ordering {
    phi[a].total_cmp(&phi[b]).then(a.cmp(&b))
}

/// Cells ordered by `φ_T` ascending, ties by index.
pub fn descent_order(phi: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..phi.len()).collect();
    order.sort_unstable_by(|&a, &b| by_descent(phi, a, b));
    order
}

/// `ρ = Σ_T φ_T`, accumulated in [`descent_order`] so that greedy prefix
/// sums compare against it consistently.
pub fn rho(phi: &[f64]) -> f64 {
    descent_order(phi).into_iter().map(|c| phi[c]).sum()
}

/// Largest number of cells whose total area stays within `t·|Ω|`.
fn cell_budget(t: f64, mesh: &Mesh) -> usize {
    (t * mesh.area() / mesh.cell_area() * (1.0 + MEASURE_SLACK)).floor() as usize
}

/// Greedy set for step `t`: the most negative cells while `|B| ≤ t·|Ω|`.
///
/// Returns `None` if no nonempty set fits or if `Σ_B φ ≤ t·Σφ` fails.
pub fn select_set(phi: &[f64], t: f64, mesh: &Mesh) -> Option<CellSet> {
    if phi.len() != mesh.num_cells() {
        return None;
    }
    let budget = cell_budget(t, mesh);
    let order = descent_order(phi);
    let total: f64 = order.iter().map(|&c| phi[c]).sum();
    let mut chosen = Vec::new();
    let mut partial = 0.0;
    for &c in order.iter().take(budget) {
        if phi[c] >= 0.0 {
            break;
        }
        partial += phi[c];
        chosen.push(c);
    }
    if chosen.is_empty() || partial > t * total {
        return None;
    }
    chosen.sort_unstable();
    Some(CellSet {
        total_area: chosen.len() as f64 * mesh.cell_area(),
        cells: chosen,
    })
}

/// `u + χ_B (ũ − u)`.
pub fn apply_set(u: &ControlField, utilde: &ControlField, set: &CellSet) -> ControlField {
    let mut next = u.clone();
    for &c in set.cells() {
        next.values_mut()[c] = utilde.values()[c];
    }
    next
}

#[derive(Debug, Clone)]
pub struct AcceptedStep {
    pub t: f64,
    pub set: CellSet,
    /// `Σ_{B} φ`.
    pub set_descent: f64,
    pub next: Iterate,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub enum LineSearch {
    Accepted(AcceptedStep),
    /// `t·|Ω|` dropped below one cell before any trial was accepted.
    MeshResolutionReached {
        trials: usize,
    },
}

/// Backtracks `t = 1, β, β², …` until the Armijo test holds.
pub fn armijo_search(
    problem: &Problem,
    current: &Iterate,
    utilde: &ControlField,
    phi: &[f64],
    config: &AlgorithmConfig,
) -> Result<LineSearch> {
    let total = rho(phi);
    if !(total < 0.0) {
        return Err(Error::Precondition(format!(
            "line search needs ρ < 0, got {total:e}"
        )));
    }
    let mesh = problem.mesh();
    let mut t = 1.0;
    let mut trials = 0;
    while cell_budget(t, mesh) >= 1 {
        trials += 1;
        if let Some(set) = select_set(phi, t, mesh) {
            let set_descent = set.descent(phi);
            let control = apply_set(&current.control, utilde, &set);
            let state = problem.state_from(&control, &current.state)?;
            let objective = problem.objective(&state, &control)?;
            log::debug!(
                "  trial t={t:.3e}: |B|={:.3e}, ΔJ={:.6e}, σΣφ={:.6e}",
                set.total_area(),
                objective - current.objective,
                config.sigma * set_descent
            );
            if objective - current.objective <= config.sigma * set_descent {
                return Ok(LineSearch::Accepted(AcceptedStep {
                    t,
                    set,
                    set_descent,
                    next: Iterate {
                        control,
                        state,
                        objective,
                    },
                    trials,
                }));
            }
        }
        t *= config.beta;
    }
    Ok(LineSearch::MeshResolutionReached { trials })
}

/// Adjoint, candidate and gaps at the current iterate.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub adjoint: NodalField,
    pub candidate: ControlField,
    pub phi: Vec<f64>,
    pub rho: f64,
}

pub fn linearize(problem: &Problem, current: &Iterate) -> Result<Linearization> {
    let mesh = problem.mesh();
    let g = problem.integrand();
    let adjoint = problem.adjoint(&current.state)?;
    let candidate = candidate_control(mesh, &adjoint, g)?;
    let phi = phi_cells(mesh, &current.control, &candidate, &adjoint, g)?;
    let rho = rho(&phi);
    Ok(Linearization {
        adjoint,
        candidate,
        phi,
        rho,
    })
}

#[derive(Debug, Clone)]
pub enum StepOutcome {
    Advanced {
        next: Iterate,
        record: IterationRecord,
    },
    Terminated {
        reason: Termination,
        record: IterationRecord,
        adjoint: NodalField,
    },
}

fn terminal_record(k: usize, current: &Iterate, rho: f64, trials: usize) -> IterationRecord {
    IterationRecord {
        k,
        objective: current.objective,
        rho,
        t: None,
        set_measure: 0.0,
        set_descent: 0.0,
        changed_cells: 0,
        inner_trials: trials,
    }
}

/// One outer iteration from `current` (the `k`-th iterate).
pub fn step(
    problem: &Problem,
    current: &Iterate,
    k: usize,
    config: &AlgorithmConfig,
) -> Result<StepOutcome> {
    let lin = linearize(problem, current)?;
    if lin.rho.abs() <= config.delta_tol {
        return Ok(StepOutcome::Terminated {
            reason: Termination::ResidualTol,
            record: terminal_record(k, current, lin.rho, 0),
            adjoint: lin.adjoint,
        });
    }

    let accepted = match config.mode {
        Mode::PmpArmijo => match armijo_search(problem, current, &lin.candidate, &lin.phi, config)?
        {
            LineSearch::Accepted(step) => step,
            LineSearch::MeshResolutionReached { trials } => {
                return Ok(StepOutcome::Terminated {
                    reason: Termination::MeshResolution,
                    record: terminal_record(k, current, lin.rho, trials),
                    adjoint: lin.adjoint,
                });
            }
        },
        Mode::FullStep => {
            let set = select_set(&lin.phi, 1.0, problem.mesh())
                .expect("every improvable cell fits when t = 1");
            let control = apply_set(&current.control, &lin.candidate, &set);
            let state = problem.state_from(&control, &current.state)?;
            let objective = problem.objective(&state, &control)?;
            AcceptedStep {
                t: 1.0,
                set_descent: set.descent(&lin.phi),
                set,
                next: Iterate {
                    control,
                    state,
                    objective,
                },
                trials: 1,
            }
        }
    };

    let changed_cells = current
        .control
        .values()
        .iter()
        .zip(accepted.next.control.values())
        .filter(|(a, b)| a != b)
        .count();
    let record = IterationRecord {
        k,
        objective: current.objective,
        rho: lin.rho,
        t: Some(accepted.t),
        set_measure: accepted.set.total_area(),
        set_descent: accepted.set_descent,
        changed_cells,
        inner_trials: accepted.trials,
    };
    Ok(StepOutcome::Advanced {
        next: accepted.next,
        record,
    })
}

/// Runs the descent loop from `u0` (the zero control when `None`).
pub fn run(
    problem: &Problem,
    config: &AlgorithmConfig,
    u0: Option<ControlField>,
) -> Result<RunHistory> {
    config.validate()?;
    let u0 = u0.unwrap_or_else(|| ControlField::zeros(problem.mesh()));
    let mut current = Iterate::new(problem, u0)?;
    let mut records = Vec::new();
    let mut iterates = Vec::new();
    if config.keep_iterates {
        iterates.push(current.control.clone());
    }

    for k in 0.. {
        if k == config.max_outer {
            let lin = linearize(problem, &current)?;
            let reason = if lin.rho.abs() <= config.delta_tol {
                Termination::ResidualTol
            } else {
                Termination::MaxOuter
            };
            records.push(terminal_record(k, &current, lin.rho, 0));
            return Ok(finish(records, current, lin.adjoint, reason, iterates));
        }
        match step(problem, &current, k, config)? {
            StepOutcome::Advanced { next, record } => {
                log::info!(
                    "k={k:3} J={:.10} |rho|={:.3e} t={:.0e} |B|={:.3e} trials={}",
                    record.objective,
                    record.rho_l1(),
                    record.t.unwrap_or(0.0),
                    record.set_measure,
                    record.inner_trials
                );
                records.push(record);
                current = next;
                if config.keep_iterates {
                    iterates.push(current.control.clone());
                }
            }
            StepOutcome::Terminated {
                reason,
                record,
                adjoint,
            } => {
                log::info!(
                    "k={k:3} J={:.10} |rho|={:.3e} -> {}",
                    record.objective,
                    record.rho_l1(),
                    reason.name()
                );
                records.push(record);
                return Ok(finish(records, current, adjoint, reason, iterates));
            }
        }
    }
    unreachable!("the loop returns at k = max_outer")
}

fn finish(
    records: Vec<IterationRecord>,
    current: Iterate,
    adjoint: NodalField,
    termination: Termination,
    iterates: Vec<ControlField>,
) -> RunHistory {
    RunHistory {
        records,
        control: current.control,
        state: current.state,
        adjoint,
        termination,
        iterates,
    }
}

/// Deviation from the exact expansion
/// `J(u_B) − J(u) = Σ_{T∈B} φ_T + ½ (y_B − y)ᵀ M (y_B − y)`.
pub fn descent_identity_residual(
    problem: &Problem,
    u: &ControlField,
    utilde: &ControlField,
    set: &CellSet,
) -> Result<f64> {
    let mesh = problem.mesh();
    let g = problem.integrand();
    let y = problem.state(u)?;
    let p = problem.adjoint(&y)?;
    let u_b = apply_set(u, utilde, set);
    let y_b = problem.state(&u_b)?;
    let change = problem.objective(&y_b, &u_b)? - problem.objective(&y, u)?;
    let phi = phi_cells(mesh, u, utilde, &p, g)?;
    let first_order: f64 = set.cells().iter().map(|&c| phi[c]).sum();
    let remainder = 0.5 * problem.mass().quadratic_form(y_b.sub(&y).values())?;
    Ok((change - (first_order + remainder)).abs())
}

/// `‖y_B − y‖_{L²}` (consistent mass) for the switch `u → u + χ_B (ũ − u)`.
pub fn state_perturbation_norm(
    problem: &Problem,
    u: &ControlField,
    utilde: &ControlField,
    set: &CellSet,
) -> Result<f64> {
    let y = problem.state(u)?;
    let y_b = problem.state(&apply_set(u, utilde, set))?;
    let m = assemble_mass(problem.mesh());
    Ok(m.quadratic_form(y_b.sub(&y).values())?.max(0.0).sqrt())
}

/// Largest cellwise gap `u_T·p̄_T + g(u_T) − min_v (v·p̄_T + g(v))`; zero iff
/// `u` satisfies the discrete maximum principle.
pub fn verify_pmp(
    mesh: &Mesh,
    u: &ControlField,
    p: &NodalField,
    g: &dyn CostIntegrand,
) -> Result<f64> {
    u.check_mesh(mesh)?;
    Ok(cell_average(mesh, p)?
        .iter()
        .zip(u.values())
        .map(|(&pbar, &v)| g.hamiltonian(v, pbar) - g.hamiltonian_argmin(pbar).m)
        .fold(0.0, f64::max))
}
