//! The fully atomistic second-neighbour chain and a Newton oracle for its
//! equilibria.
//!
//! Atoms are indexed `-M..=M+1`; atom `M+1` is held at the imposed boundary
//! position and the remaining `2M+1` atoms are free. Vectors are stored from
//! atom `-M` upwards, so storage slot `k` holds atom `k - M`.

use thiserror::Error;

use crate::banded::SymBandMatrix;
use crate::newton::{self, BandedObjective, NewtonFailure, NewtonSettings};
use crate::potential::PairPotential;

#[derive(Debug, Clone, Error)]
pub enum ChainError {
    #[error("chain is not ordered: y[{index}] = {left} >= y[{next}] = {right}", next = index + 1)]
    Unordered { index: i64, left: f64, right: f64 },
    #[error("expected {expected} entries for {what}, got {got}")]
    Length { what: &'static str, expected: usize, got: usize },
    #[error("atomistic solve failed after {iterations} iterations ({reason}); residual {residual:e}")]
    NoConvergence {
        reason: &'static str,
        iterations: usize,
        residual: f64,
        last: Box<AtomChain>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomChain {
    m: usize,
    y: Vec<f64>,
    dead_loads: Vec<f64>,
}

impl AtomChain {
    /// `y` lists atoms `-M..=M+1`, `dead_loads` atoms `-M..=M`.
    pub fn new(m: usize, y: Vec<f64>, dead_loads: Vec<f64>) -> Result<Self, ChainError> {
        if y.len() != 2 * m + 2 {
            return Err(ChainError::Length { what: "positions", expected: 2 * m + 2, got: y.len() });
        }
        if dead_loads.len() != 2 * m + 1 {
            return Err(ChainError::Length { what: "dead loads", expected: 2 * m + 1, got: dead_loads.len() });
        }
        check_ordered(m, &y)?;
        Ok(Self { m, y, dead_loads })
    }

    /// Uniformly spaced chain `y_i = i·spacing` with no external load.
    pub fn uniform(m: usize, spacing: f64) -> Self {
        let y = (0..2 * m + 2).map(|k| (k as f64 - m as f64) * spacing).collect();
        Self { m, y, dead_loads: vec![0.0; 2 * m + 1] }
    }

    pub fn with_dead_loads(mut self, loads: Vec<f64>) -> Result<Self, ChainError> {
        if loads.len() != 2 * self.m + 1 {
            return Err(ChainError::Length { what: "dead loads", expected: 2 * self.m + 1, got: loads.len() });
        }
        self.dead_loads = loads;
        Ok(self)
    }

    pub fn half_count(&self) -> usize {
        self.m
    }

    pub fn positions(&self) -> &[f64] {
        &self.y
    }

    pub fn dead_loads(&self) -> &[f64] {
        &self.dead_loads
    }

    /// Position of atom `i` (`-M <= i <= M+1`).
    pub fn position(&self, i: i64) -> f64 {
        self.y[(i + self.m as i64) as usize]
    }

    /// The constrained right-end position.
    pub fn right_end(&self) -> f64 {
        *self.y.last().expect("chain has at least two atoms")
    }

    /// Spacings `y_{i+1} - y_i` for `i = -M..=M`.
    pub fn spacings(&self) -> Vec<f64> {
        self.y.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Shifts every atom, including the constrained end.
    pub fn translated(&self, by: f64) -> Self {
        Self { m: self.m, y: self.y.iter().map(|v| v + by).collect(), dead_loads: self.dead_loads.clone() }
    }
}

fn check_ordered(m: usize, y: &[f64]) -> Result<(), ChainError> {
    for (k, w) in y.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(ChainError::Unordered { index: k as i64 - m as i64, left: w[0], right: w[1] });
        }
    }
    Ok(())
}

/// `Σ φ(y_{i+1} - y_i) + Σ φ(y_{i+2} - y_i)` over a raw position vector.
pub(crate) fn energy_of_positions(p: &dyn PairPotential, y: &[f64]) -> f64 {
    let first: f64 = y.windows(2).map(|w| p.phi(w[1] - w[0])).sum();
    let second: f64 = y.windows(3).map(|w| p.phi(w[2] - w[0])).sum();
    first + second
}

/// Force `-∂E/∂y_k` on every entry of a raw position vector, bonds reaching
/// past either end omitted.
pub(crate) fn forces_of_positions(p: &dyn PairPotential, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut f = vec![0.0; n];
    for k in 0..n {
        for reach in 1..=2 {
            if k + reach < n {
                f[k] += p.d1(y[k + reach] - y[k]);
            }
            if k >= reach {
                f[k] -= p.d1(y[k] - y[k - reach]);
            }
        }
    }
    f
}

pub fn atomistic_energy(p: &dyn PairPotential, c: &AtomChain) -> Result<f64, ChainError> {
    check_ordered(c.m, &c.y)?;
    Ok(energy_of_positions(p, &c.y))
}

/// Forces on the free atoms `-M..=M`.
pub fn atomistic_forces(p: &dyn PairPotential, c: &AtomChain) -> Result<Vec<f64>, ChainError> {
    check_ordered(c.m, &c.y)?;
    let mut f = forces_of_positions(p, &c.y);
    f.pop();
    Ok(f)
}

/// Dead loads for uniform tension `Φ`: `-Φ` on atom `-M`, zero elsewhere.
pub fn tension_load(m: usize, phi: f64) -> Vec<f64> {
    let mut f = vec![0.0; 2 * m + 1];
    f[0] = -phi;
    f
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomisticSolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// A spacing beyond this is treated as a broken chain.
    pub max_spacing: f64,
}

impl Default for AtomisticSolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 500, max_spacing: 3.0 }
    }
}

/// Total energy `E^a(y) - Σ f̃_i y_i` over the free atoms.
struct ChainObjective<'a> {
    p: &'a dyn PairPotential,
    loads: &'a [f64],
    right_end: f64,
}

impl ChainObjective<'_> {
    fn full(&self, free: &[f64]) -> Vec<f64> {
        let mut y = free.to_vec();
        y.push(self.right_end);
        y
    }
}

impl BandedObjective for ChainObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let y = self.full(x);
        energy_of_positions(self.p, &y) - x.iter().zip(self.loads).map(|(yi, fi)| yi * fi).sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let y = self.full(x);
        let f = forces_of_positions(self.p, &y);
        x.iter().enumerate().map(|(k, _)| -f[k] - self.loads[k]).collect()
    }

    fn hessian(&self, x: &[f64]) -> SymBandMatrix {
        let y = self.full(x);
        let n = x.len();
        let mut h = SymBandMatrix::zeros(n, 2);
        for reach in 1..=2 {
            for a in 0..y.len().saturating_sub(reach) {
                let b = a + reach;
                let k = self.p.d2(y[b] - y[a]);
                if a < n {
                    h.add(a, a, k);
                }
                if b < n {
                    h.add(b, b, k);
                    h.add(b, a, -k);
                }
            }
        }
        h
    }

    fn admissible(&self, x: &[f64]) -> bool {
        x.windows(2).all(|w| w[1] > w[0]) && x.last().is_none_or(|&v| v < self.right_end)
    }
}

/// Damped Newton solve of `F_i + f̃_i = 0` for the free atoms, starting from
/// the chain's current positions and keeping the right end fixed.
pub fn atomistic_solve(
    p: &dyn PairPotential,
    c: &AtomChain,
    opts: &AtomisticSolveOptions,
) -> Result<AtomChain, ChainError> {
    check_ordered(c.m, &c.y)?;
    let obj = ChainObjective { p, loads: &c.dead_loads, right_end: c.right_end() };
    let free = &c.y[..c.y.len() - 1];
    let max_spacing = opts.max_spacing;
    let right_end = c.right_end();
    let settings = NewtonSettings { tol: opts.tol, max_iters: opts.max_iters };
    let monitor = |x: &[f64]| {
        let last_gap = right_end - x[x.len() - 1];
        let widest = x.windows(2).map(|w| w[1] - w[0]).fold(last_gap, f64::max);
        if widest > max_spacing {
            Err("chain separated")
        } else {
            Ok(())
        }
    };
    let rebuild = |x: Vec<f64>| {
        let mut y = x;
        y.push(right_end);
        Box::new(AtomChain { m: c.m, y, dead_loads: c.dead_loads.clone() })
    };
    match newton::minimize(&obj, free, settings, monitor) {
        Ok(out) => Ok(*rebuild(out.x)),
        Err(NewtonFailure::MaxIterations { x, iterations, residual }) => Err(ChainError::NoConvergence {
            reason: "iteration limit",
            iterations,
            residual,
            last: rebuild(x),
        }),
        Err(NewtonFailure::LineSearch { x, iterations, residual }) => Err(ChainError::NoConvergence {
            reason: "line search failed",
            iterations,
            residual,
            last: rebuild(x),
        }),
        Err(NewtonFailure::Aborted { x, iterations, reason }) => {
            let residual = newton::max_norm(&obj.gradient(&x));
            Err(ChainError::NoConvergence { reason, iterations, residual, last: rebuild(x) })
        }
    }
}
