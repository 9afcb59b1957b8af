//! Line-search Newton minimization for objectives with banded Hessians.
//!
//! When the Hessian is not positive definite the diagonal is shifted until it
//! is, so every direction is a descent direction and the iteration cannot
//! settle on a saddle or a maximum.

use crate::banded::SymBandMatrix;

pub(crate) trait BandedObjective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> SymBandMatrix;
    /// Hard constraint on iterates (ordering, positive spacings).
    fn admissible(&self, x: &[f64]) -> bool;
    /// Convergence measure; the gradient max norm unless overridden.
    fn residual(&self, _x: &[f64], grad: &[f64]) -> f64 {
        max_norm(grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum NewtonFailure<A> {
    MaxIterations { x: Vec<f64>, iterations: usize, residual: f64 },
    LineSearch { x: Vec<f64>, iterations: usize, residual: f64 },
    Aborted { x: Vec<f64>, iterations: usize, reason: A },
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Returns the (possibly shifted) Newton direction and whether the Hessian
/// was used unmodified.
fn descent_direction(hess: &SymBandMatrix, grad: &[f64]) -> (Vec<f64>, bool) {
    let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
    if let Ok(chol) = hess.cholesky() {
        return (chol.solve(&neg), true);
    }
    let mut shift = 1e-3 * hess.max_abs_diagonal().max(1.0);
    for _ in 0..80 {
        let mut shifted = hess.clone();
        shifted.add_diagonal(shift);
        if let Ok(chol) = shifted.cholesky() {
            return (chol.solve(&neg), false);
        }
        shift *= 4.0;
    }
    (neg, false)
}

/// Minimizes `obj` from `x0`. `monitor` sees every accepted iterate and may
/// abort the run.
pub(crate) fn minimize<O, A, M>(
    obj: &O,
    x0: &[f64],
    settings: NewtonSettings,
    mut monitor: M,
) -> Result<NewtonOutcome, NewtonFailure<A>>
where
    O: BandedObjective,
    M: FnMut(&[f64]) -> Result<(), A>,
{
    let mut x = x0.to_vec();
    let mut grad = obj.gradient(&x);
    let mut res = obj.residual(&x, &grad);
    for it in 0..settings.max_iters {
        if res <= settings.tol {
            return Ok(NewtonOutcome { x, iterations: it, residual: res });
        }
        let (mut dir, pure) = descent_direction(&obj.hessian(&x), &grad);
        let mut slope = dot(&grad, &dir);
        if !(slope < 0.0) {
            dir = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
        }

        let f0 = obj.value(&x);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..64 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
            if obj.admissible(&trial) {
                let f1 = obj.value(&trial);
                if f1 <= f0 + 1e-4 * t * slope {
                    let g1 = obj.gradient(&trial);
                    accepted = Some((trial, g1));
                    break;
                }
                // Close to the minimizer the energy change drops below
                // rounding; accept the full Newton step if it reduces the residual.
                if pure && t == 1.0 {
                    let g1 = obj.gradient(&trial);
                    if obj.residual(&trial, &g1) < res {
                        accepted = Some((trial, g1));
                        break;
                    }
                }
            }
            t *= 0.5;
        }

        let Some((next, next_grad)) = accepted else {
            return Err(NewtonFailure::LineSearch { x, iterations: it, residual: res });
        };
        x = next;
        grad = next_grad;
        res = obj.residual(&x, &grad);
        if let Err(reason) = monitor(&x) {
            return Err(NewtonFailure::Aborted { x, iterations: it + 1, reason });
        }
    }
    if res <= settings.tol {
        return Ok(NewtonOutcome { x, iterations: settings.max_iters, residual: res });
    }
    Err(NewtonFailure::MaxIterations { x, iterations: settings.max_iters, residual: res })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Separable double well: sum (x_i^2 - 1)^2, minima at ±1.
    struct DoubleWell;

    impl BandedObjective for DoubleWell {
        fn value(&self, x: &[f64]) -> f64 {
            x.iter().map(|v| (v * v - 1.0).powi(2)).sum()
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            x.iter().map(|v| 4.0 * v * (v * v - 1.0)).collect()
        }
        fn hessian(&self, x: &[f64]) -> SymBandMatrix {
            let mut h = SymBandMatrix::zeros(x.len(), 1);
            for (i, v) in x.iter().enumerate() {
                h.add(i, i, 12.0 * v * v - 4.0);
            }
            h
        }
        fn admissible(&self, _x: &[f64]) -> bool {
            true
        }
    }

    #[test]
    fn escapes_the_local_maximum() {
        // Plain Newton from 0.1 converges to the maximum at 0; the shifted
        // direction must find a minimum instead.
        let settings = NewtonSettings { tol: 1e-12, max_iters: 100 };
        let out = minimize(&DoubleWell, &[0.1, -0.2], settings, |_| Ok::<(), ()>(())).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-10);
        assert!((out.x[1] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn converged_start_takes_no_steps() {
        let settings = NewtonSettings { tol: 1e-12, max_iters: 100 };
        let out = minimize(&DoubleWell, &[1.0, -1.0], settings, |_| Ok::<(), ()>(())).unwrap();
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn monitor_can_abort() {
        let settings = NewtonSettings { tol: 1e-12, max_iters: 100 };
        let err = minimize(&DoubleWell, &[3.0], settings, |x| if x[0] < 2.5 { Err("stop") } else { Ok(()) })
            .unwrap_err();
        assert!(matches!(err, NewtonFailure::Aborted { reason: "stop", .. }));
    }
}
