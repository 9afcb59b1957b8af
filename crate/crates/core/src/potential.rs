//! Pair potentials, the second-neighbour strain-energy density, and the
//! landmark spacings the convergence theory is built on.
//!
//! All quantities are nondimensional: for Lennard-Jones the well depth and
//! the minimum of `φ` are both scaled to one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::roots::{bisect_newton, RootError, RESIDUAL_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("pair distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("strain must be positive, got {0}")]
    NonPositiveStrain(f64),
    #[error("derivative order {0} not available (0..=3 for φ, 0..=2 for W)")]
    UnsupportedOrder(u8),
    #[error("could not locate {landmark}: {source}")]
    Landmark {
        landmark: &'static str,
        #[source]
        source: RootError,
    },
}

/// A C³ pair interaction supplying its value and first three derivatives.
pub trait PairPotential: Send + Sync {
    fn phi(&self, r: f64) -> f64;
    fn d1(&self, r: f64) -> f64;
    fn d2(&self, r: f64) -> f64;
    fn d3(&self, r: f64) -> f64;

    fn name(&self) -> &str {
        "custom"
    }

    /// Unchecked derivative lookup; orders above 3 return NaN.
    fn derivative(&self, r: f64, order: u8) -> f64 {
        match order {
            0 => self.phi(r),
            1 => self.d1(r),
            2 => self.d2(r),
            3 => self.d3(r),
            _ => f64::NAN,
        }
    }

    /// Uniform-chain stress `φ'(r) + 2φ'(2r)`, the tension carried by a chain
    /// with every spacing equal to `r`.
    fn chain_stress(&self, r: f64) -> f64 {
        self.d1(r) + 2.0 * self.d1(2.0 * r)
    }

    /// `d/dr` of [`chain_stress`](Self::chain_stress).
    fn chain_stiffness(&self, r: f64) -> f64 {
        self.d2(r) + 4.0 * self.d2(2.0 * r)
    }
}

/// `φ(r) = r⁻¹² − 2 r⁻⁶`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LennardJones;

impl PairPotential for LennardJones {
    fn phi(&self, r: f64) -> f64 {
        let r6 = r.powi(-6);
        r6 * r6 - 2.0 * r6
    }
    fn d1(&self, r: f64) -> f64 {
        let r6 = r.powi(-6);
        12.0 * (r6 - r6 * r6) / r
    }
    fn d2(&self, r: f64) -> f64 {
        let r6 = r.powi(-6);
        (156.0 * r6 * r6 - 84.0 * r6) / (r * r)
    }
    fn d3(&self, r: f64) -> f64 {
        let r6 = r.powi(-6);
        (672.0 * r6 - 2184.0 * r6 * r6) / (r * r * r)
    }
    fn name(&self) -> &str {
        "lennard-jones"
    }
}

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A pair law assembled from user-supplied closures.
pub struct FnPotential {
    name: String,
    funcs: [ScalarFn; 4],
}

impl FnPotential {
    pub fn new(
        name: impl Into<String>,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d3: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            funcs: [Box::new(phi), Box::new(d1), Box::new(d2), Box::new(d3)],
        }
    }
}

impl std::fmt::Debug for FnPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnPotential").field("name", &self.name).finish()
    }
}

impl PairPotential for FnPotential {
    fn phi(&self, r: f64) -> f64 {
        (self.funcs[0])(r)
    }
    fn d1(&self, r: f64) -> f64 {
        (self.funcs[1])(r)
    }
    fn d2(&self, r: f64) -> f64 {
        (self.funcs[2])(r)
    }
    fn d3(&self, r: f64) -> f64 {
        (self.funcs[3])(r)
    }
    fn name(&self) -> &str {
        &self.name
    }
}

/// Checked `φ⁽ᵒʳᵈᵉʳ⁾(r)`.
pub fn phi_derivs(p: &dyn PairPotential, r: f64, order: u8) -> Result<f64, PotentialError> {
    if !(r > 0.0) {
        return Err(PotentialError::NonPositiveDistance(r));
    }
    if order > 3 {
        return Err(PotentialError::UnsupportedOrder(order));
    }
    Ok(p.derivative(r, order))
}

/// Strain-energy density `W(D) = (φ(D a₀) + φ(2 D a₀)) / a₀` of an infinite
/// uniform chain, and its first two derivatives in `D`.
pub fn strain_energy(p: &dyn PairPotential, a0: f64, d: f64, order: u8) -> Result<f64, PotentialError> {
    if !(d > 0.0) {
        return Err(PotentialError::NonPositiveStrain(d));
    }
    let r = d * a0;
    match order {
        0 => Ok((p.phi(r) + p.phi(2.0 * r)) / a0),
        1 => Ok(p.chain_stress(r)),
        2 => Ok(a0 * p.chain_stiffness(r)),
        _ => Err(PotentialError::UnsupportedOrder(order)),
    }
}

/// Landmark spacings of a pair potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialProfile {
    /// Ground-state spacing, the minimizer of `φ(r) + φ(2r)`.
    pub a0: f64,
    /// Inflection point of `φ` (root of `φ''`).
    pub r_tilde_1: f64,
    /// Root of `φ'''`.
    pub r_tilde_2: f64,
    /// Strain at which `W''` changes sign.
    pub d_tilde: f64,
    /// Largest tension a uniform chain can carry.
    pub phi_max: f64,
    /// Spacing at which that tension is reached.
    pub r_star: f64,
}

fn landmark<F, D>(name: &'static str, f: F, df: D, lo: f64, hi: f64) -> Result<f64, PotentialError>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    bisect_newton(f, df, lo, hi, RESIDUAL_TOL).map_err(|source| PotentialError::Landmark { landmark: name, source })
}

/// Locates every landmark by bracketed root solves. The brackets follow the
/// ordering `a₀ < r̃₁ < r̃₂ < 2a₀`, so a potential that violates the shape
/// assumptions fails with the name of the first landmark that cannot be found.
pub fn compute_profile(p: &dyn PairPotential) -> Result<PotentialProfile, PotentialError> {
    let a0 = landmark("a0", |r| p.chain_stress(r), |r| p.chain_stiffness(r), 0.5, 2.0)?;
    let r_tilde_1 = landmark("r_tilde_1", |r| p.d2(r), |r| p.d3(r), a0, 2.0 * a0)?;
    let r_tilde_2 = landmark(
        "r_tilde_2",
        |r| p.d3(r),
        |r| {
            let h = 1e-6 * r;
            (p.d3(r + h) - p.d3(r - h)) / (2.0 * h)
        },
        r_tilde_1,
        2.0 * a0,
    )?;
    let r_star = landmark(
        "r_star",
        |r| p.chain_stiffness(r),
        |r| p.d3(r) + 8.0 * p.d3(2.0 * r),
        a0,
        2.0 * a0,
    )?;
    let d_tilde = landmark(
        "d_tilde",
        |d| a0 * p.chain_stiffness(d * a0),
        |d| a0 * a0 * (p.d3(d * a0) + 8.0 * p.d3(2.0 * d * a0)),
        1.0,
        2.0,
    )?;
    let phi_max = p.chain_stress(r_star);
    Ok(PotentialProfile { a0, r_tilde_1, r_tilde_2, d_tilde, phi_max, r_star })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Assumption {
    /// `φ'' > 0` below `r̃₁`, `< 0` above.
    CurvatureSign,
    /// `φ''' < 0` below `r̃₂`, `> 0` above.
    ThirdDerivativeSign,
    /// `W' < 0` below `D = 1`, `> 0` above.
    StressSign,
    /// `W'' > 0` below `D̃`, `< 0` above.
    StiffnessSign,
    /// `0 < a₀ < r̃₁ < r̃₂ < 2a₀`.
    LandmarkOrdering,
    /// `1 < D̃`.
    LoadLimitStrain,
}

impl Assumption {
    pub const ALL: [Assumption; 6] = [
        Assumption::CurvatureSign,
        Assumption::ThirdDerivativeSign,
        Assumption::StressSign,
        Assumption::StiffnessSign,
        Assumption::LandmarkOrdering,
        Assumption::LoadLimitStrain,
    ];

    pub fn describe(self) -> &'static str {
        match self {
            Assumption::CurvatureSign => "phi'' > 0 below r~1 and < 0 above",
            Assumption::ThirdDerivativeSign => "phi''' < 0 below r~2 and > 0 above",
            Assumption::StressSign => "W' < 0 below D = 1 and > 0 above",
            Assumption::StiffnessSign => "W'' > 0 below D~ and < 0 above",
            Assumption::LandmarkOrdering => "0 < a0 < r~1 < r~2 < 2 a0",
            Assumption::LoadLimitStrain => "1 < D~",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub passed: bool,
    /// First offending sample, if any.
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<Assumption> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.assumption).collect()
    }

    pub fn get(&self, a: Assumption) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.assumption == a)
    }
}

/// Sample points for the sign checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SignGrid {
    pub spacings: Vec<f64>,
    pub strains: Vec<f64>,
}

impl Default for SignGrid {
    /// 7001 points on `[0.5, 4.0]` for both spacing and strain.
    fn default() -> Self {
        let pts: Vec<f64> = (0..=7000).map(|i| 0.5 + 3.5 * i as f64 / 7000.0).collect();
        Self { spacings: pts.clone(), strains: pts }
    }
}

/// Values this small count as sitting on the sign boundary.
pub const SIGN_TOL: f64 = 1e-10;

fn sign_change_check(
    samples: &[f64],
    pivot: f64,
    f: impl Fn(f64) -> f64,
    below_positive: bool,
) -> Option<String> {
    for &x in samples {
        let v = f(x);
        if v.abs() <= SIGN_TOL {
            continue;
        }
        let want_positive = (x < pivot) == below_positive;
        if (v > 0.0) != want_positive {
            return Some(format!("x = {x}: value {v:e} has the wrong sign (boundary {pivot})"));
        }
    }
    None
}

pub fn verify_assumptions(p: &dyn PairPotential, prof: &PotentialProfile) -> AssumptionReport {
    verify_assumptions_on(p, prof, &SignGrid::default())
}

/// Checks every shape assumption on the supplied sample grid.
pub fn verify_assumptions_on(p: &dyn PairPotential, prof: &PotentialProfile, grid: &SignGrid) -> AssumptionReport {
    let a0 = prof.a0;
    let mut checks = Vec::with_capacity(6);
    let mut push = |assumption, detail: Option<String>| {
        checks.push(AssumptionCheck { assumption, passed: detail.is_none(), detail });
    };

    push(
        Assumption::CurvatureSign,
        sign_change_check(&grid.spacings, prof.r_tilde_1, |r| p.d2(r), true),
    );
    push(
        Assumption::ThirdDerivativeSign,
        sign_change_check(&grid.spacings, prof.r_tilde_2, |r| p.d3(r), false),
    );
    push(
        Assumption::StressSign,
        sign_change_check(&grid.strains, 1.0, |d| p.chain_stress(d * a0), false),
    );
    push(
        Assumption::StiffnessSign,
        sign_change_check(&grid.strains, prof.d_tilde, |d| a0 * p.chain_stiffness(d * a0), true),
    );
    let ordered = 0.0 < a0 && a0 < prof.r_tilde_1 && prof.r_tilde_1 < prof.r_tilde_2 && prof.r_tilde_2 < 2.0 * a0;
    push(
        Assumption::LandmarkOrdering,
        (!ordered).then(|| {
            format!(
                "a0 = {}, r~1 = {}, r~2 = {}, 2 a0 = {}",
                a0,
                prof.r_tilde_1,
                prof.r_tilde_2,
                2.0 * a0
            )
        }),
    );
    push(
        Assumption::LoadLimitStrain,
        (prof.d_tilde <= 1.0).then(|| format!("D~ = {}", prof.d_tilde)),
    );
    AssumptionReport { checks }
}
