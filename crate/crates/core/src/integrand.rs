//! Cost integrands `g` and their pointwise Hamiltonian minimization
//! `min_v v·p̄ + g(v)`.

use std::cmp::Ordering;
use std::fmt::Debug;

use crate::error::{Error, Result};

/// Minimizer of the pointwise Hamiltonian and its value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianMin {
    pub v: f64,
    pub m: f64,
}

/// A proper, lower semicontinuous integrand with compact effective domain.
pub trait CostIntegrand: Debug + Send + Sync {
    /// `g(v)`, or `+∞` outside the effective domain.
    fn eval(&self, v: f64) -> f64;

    fn is_feasible(&self, v: f64) -> bool {
        self.eval(v).is_finite()
    }

    /// Minimizer of `v ↦ v·pbar + g(v)` under the shared tie rule.
    fn hamiltonian_argmin(&self, pbar: f64) -> HamiltonianMin;

    /// `dom g ⊂ [−M, M]`.
    fn domain_bound(&self) -> f64;

    /// Every point of the effective domain, for finite domains.
    fn domain_points(&self) -> Option<Vec<f64>>;

    /// `v·pbar + g(v)`.
    fn hamiltonian(&self, v: f64, pbar: f64) -> f64 {
        v * pbar + self.eval(v)
    }
}

/// Orders candidates by Hamiltonian value, then by `|v|`, then by `v`.
///
/// When two integers attain the same minimum the one closer to zero wins,
/// and `-v` beats `v` if both remain.
pub fn tie_order(a: &HamiltonianMin, b: &HamiltonianMin) -> Ordering {
    a.m.total_cmp(&b.m)
        .then(a.v.abs().total_cmp(&b.v.abs()))
        .then(a.v.total_cmp(&b.v))
}

/// `g(v) = α/2·v²` on `ℤ ∩ [−b, b]`, `+∞` elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegerQuadratic {
    pub alpha: f64,
    pub bound: i64,
}

impl IntegerQuadratic {
    pub fn new(alpha: f64, bound: i64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidConfig {
                key: "alpha".into(),
                message: format!("must be positive, got {alpha}"),
            });
        }
        if bound < 1 {
            return Err(Error::InvalidConfig {
                key: "b".into(),
                message: format!("must be a positive integer, got {bound}"),
            });
        }
        Ok(Self { alpha, bound })
    }
}

impl CostIntegrand for IntegerQuadratic {
    fn eval(&self, v: f64) -> f64 {
        if v.fract() == 0.0 && v.abs() <= self.bound as f64 {
            self.alpha / 2.0 * v * v
        } else {
            f64::INFINITY
        }
    }

    fn hamiltonian_argmin(&self, pbar: f64) -> HamiltonianMin {
        let b = self.bound as f64;
        let unconstrained = -pbar / self.alpha;
        // the two lattice neighbours of the unconstrained minimizer, clamped
        let lo = unconstrained.floor().clamp(-b, b);
        let hi = unconstrained.ceil().clamp(-b, b);
        let at = |v: f64| HamiltonianMin {
            v,
            m: self.hamiltonian(v, pbar),
        };
        let (a, c) = (at(lo), at(hi));
        if tie_order(&a, &c) == Ordering::Greater {
            c
        } else {
            a
        }
    }

    fn domain_bound(&self) -> f64 {
        self.bound as f64
    }

    fn domain_points(&self) -> Option<Vec<f64>> {
        Some((-self.bound..=self.bound).map(|v| v as f64).collect())
    }
}

/// Convex box-constrained quadratic `g(v) = α/2·v²` on `[−b, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureQuadratic {
    pub alpha: f64,
    pub bound: f64,
}

impl PureQuadratic {
    pub fn new(alpha: f64, bound: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidConfig {
                key: "alpha".into(),
                message: format!("must be positive, got {alpha}"),
            });
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidConfig {
                key: "b".into(),
                message: format!("must be positive, got {bound}"),
            });
        }
        Ok(Self { alpha, bound })
    }
}

impl CostIntegrand for PureQuadratic {
    fn eval(&self, v: f64) -> f64 {
        if v.abs() <= self.bound {
            self.alpha / 2.0 * v * v
        } else {
            f64::INFINITY
        }
    }

    fn hamiltonian_argmin(&self, pbar: f64) -> HamiltonianMin {
        let v = (-pbar / self.alpha).clamp(-self.bound, self.bound);
        HamiltonianMin {
            v,
            m: self.hamiltonian(v, pbar),
        }
    }

    fn domain_bound(&self) -> f64 {
        self.bound
    }

    fn domain_points(&self) -> Option<Vec<f64>> {
        None
    }
}

pub fn eval_g(g: &dyn CostIntegrand, v: f64) -> f64 {
    g.eval(v)
}

pub fn hamiltonian_argmin(g: &dyn CostIntegrand, pbar: f64) -> HamiltonianMin {
    g.hamiltonian_argmin(pbar)
}

/// Exhaustive Hamiltonian minimization over the enumerated domain, or over
/// `grid` (restricted to feasible points) when one is supplied.
pub fn argmin_bruteforce(
    g: &dyn CostIntegrand,
    pbar: f64,
    grid: Option<&[f64]>,
) -> Result<HamiltonianMin> {
    let points = match grid {
        Some(grid) => grid.iter().copied().filter(|&v| g.is_feasible(v)).collect(),
        None => g.domain_points().ok_or(Error::NonEnumerableDomain)?,
    };
    points
        .into_iter()
        .map(|v| HamiltonianMin {
            v,
            m: g.hamiltonian(v, pbar),
        })
        .min_by(tie_order)
        .ok_or(Error::NonEnumerableDomain)
}
