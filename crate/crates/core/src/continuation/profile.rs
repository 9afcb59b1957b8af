//! Uniform response along the load path, contraction radii and growth bounds.

use serde::{Deserialize, Serialize};

use super::ContinuationError;
use crate::potential::{PairPotential, PotentialProfile};
use crate::roots::{bisect_newton, RootError, RESIDUAL_TOL};

/// Panels of the cumulative Simpson table for `κ`.
pub const KAPPA_PANELS: usize = 2048;
/// Grid points of the second-difference estimate of `k₂`.
pub const K2_POINTS: usize = 4096;
pub const K2_SAFETY: f64 = 1.1;

/// Uniform tension `Φ(s) = scale · s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadPath {
    pub scale: f64,
}

impl Default for LoadPath {
    fn default() -> Self {
        Self { scale: 2.76 }
    }
}

impl LoadPath {
    pub fn new(scale: f64, prof: &PotentialProfile) -> Result<Self, ContinuationError> {
        if !(scale > 0.0) || scale >= prof.phi_max {
            return Err(ContinuationError::LoadLimit { load: scale, phi_max: prof.phi_max });
        }
        Ok(Self { scale })
    }

    pub fn load(&self, s: f64) -> f64 {
        self.scale * s
    }
}

/// Spacing `r` of the uniform chain carrying tension `load`: the root of
/// `φ'(r) + 2φ'(2r) = load` in `[a₀, r_*)`.
pub fn uniform_response(pot: &dyn PairPotential, prof: &PotentialProfile, load: f64) -> Result<f64, ContinuationError> {
    if load == 0.0 {
        return Ok(prof.a0);
    }
    if !(load > 0.0) {
        return Err(ContinuationError::NegativeLoad(load));
    }
    if load >= prof.phi_max {
        return Err(ContinuationError::LoadLimit { load, phi_max: prof.phi_max });
    }
    bisect_newton(|r| pot.chain_stress(r) - load, |r| pot.chain_stiffness(r), prof.a0, prof.r_star, RESIDUAL_TOL * 1e-2)
        .map_err(ContinuationError::Root)
}

/// Half-width `δ` of the window `(r - δ, r + δ)` whose contraction constant
/// is exactly `alpha`: the root of
/// `φ''(r + δ) + (5 + 16/α) φ''(2(r - δ)) = 0` below `r - r̃₂/2`.
pub fn contraction_radius(
    pot: &dyn PairPotential,
    prof: &PotentialProfile,
    r: f64,
    alpha: f64,
) -> Result<f64, ContinuationError> {
    check_alpha(alpha)?;
    let c = 5.0 + 16.0 / alpha;
    let g = |d: f64| pot.d2(r + d) + c * pot.d2(2.0 * (r - d));
    let dg = |d: f64| pot.d3(r + d) - 2.0 * c * pot.d3(2.0 * (r - d));
    let hi = r - 0.5 * prof.r_tilde_2;
    if !(g(0.0) > 0.0) || !(hi > 0.0) {
        return Err(ContinuationError::WindowExhausted { r, alpha });
    }
    match bisect_newton(g, dg, 0.0, hi, RESIDUAL_TOL) {
        Ok(d) => Ok(d),
        Err(RootError::NotBracketed { .. }) => Err(ContinuationError::WindowExhausted { r, alpha }),
        Err(e) => Err(ContinuationError::Root(e)),
    }
}

/// Load parameter at which the window for `alpha` shrinks to nothing, from
/// `φ''(r) + (5 + 16/α) φ''(2r) = 0`.
pub fn window_terminus(
    pot: &dyn PairPotential,
    prof: &PotentialProfile,
    path: &LoadPath,
    alpha: f64,
) -> Result<f64, ContinuationError> {
    check_alpha(alpha)?;
    let c = 5.0 + 16.0 / alpha;
    let g = |r: f64| pot.d2(r) + c * pot.d2(2.0 * r);
    let dg = |r: f64| pot.d3(r) + 2.0 * c * pot.d3(2.0 * r);
    let r = bisect_newton(g, dg, prof.a0, prof.r_tilde_1, RESIDUAL_TOL).map_err(|e| match e {
        RootError::NotBracketed { .. } => ContinuationError::WindowExhausted { r: prof.a0, alpha },
        e => ContinuationError::Root(e),
    })?;
    Ok(pot.chain_stress(r) / path.scale)
}

fn check_alpha(alpha: f64) -> Result<(), ContinuationError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(ContinuationError::BadAlpha(alpha))
    }
}

/// What the planners need to know about a problem: cumulative growth `κ`,
/// contraction radius `δ` and rate `α`.
pub trait ContinuationProfile {
    /// Nondecreasing with `κ(0) = 0`.
    fn kappa(&self, s: f64) -> f64;
    /// Nonincreasing; zero once the window is exhausted.
    fn delta(&self, s: f64) -> f64;
    fn alpha(&self) -> f64;
}

/// `κ(s) = k s`, `δ(s) = δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantProfile {
    pub k: f64,
    pub delta: f64,
    pub alpha: f64,
}

impl ContinuationProfile for ConstantProfile {
    fn kappa(&self, s: f64) -> f64 {
        self.k * s
    }

    fn delta(&self, _s: f64) -> f64 {
        self.delta
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Worst-case constants over `[0, 1]` for the uniform planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformConstants {
    pub k: f64,
    pub k2: f64,
    pub delta: f64,
    pub alpha: f64,
}

/// The uniform second-neighbour chain along a [`LoadPath`], with a fixed
/// contraction constant.
pub struct ChainProfile<'a> {
    pot: &'a dyn PairPotential,
    prof: PotentialProfile,
    path: LoadPath,
    alpha: f64,
    /// `r(i / KAPPA_PANELS)`.
    r_grid: Vec<f64>,
    /// Cumulative Simpson integral of `k` at the even grid points.
    kappa_even: Vec<f64>,
    k2: f64,
}

impl<'a> ChainProfile<'a> {
    /// Requires the path to stay below the load limit on `[0, 1]`.
    pub fn new(
        pot: &'a dyn PairPotential,
        prof: &PotentialProfile,
        path: LoadPath,
        alpha: f64,
    ) -> Result<Self, ContinuationError> {
        check_alpha(alpha)?;
        let path = LoadPath::new(path.scale, prof)?;
        let n = KAPPA_PANELS;
        let r_grid = (0..=n)
            .map(|i| uniform_response(pot, prof, path.load(i as f64 / n as f64)))
            .collect::<Result<Vec<_>, _>>()?;
        let h = 1.0 / n as f64;
        let rate = |r: f64| path.scale / pot.chain_stiffness(r);
        let mut kappa_even = Vec::with_capacity(n / 2 + 1);
        kappa_even.push(0.0);
        for i in (0..n).step_by(2) {
            let panel = h / 3.0 * (rate(r_grid[i]) + 4.0 * rate(r_grid[i + 1]) + rate(r_grid[i + 2]));
            let last = *kappa_even.last().expect("seeded");
            kappa_even.push(last + panel);
        }
        let m = K2_POINTS;
        let hm = 1.0 / (m - 1) as f64;
        let rs = (0..m)
            .map(|i| uniform_response(pot, prof, path.load(i as f64 * hm)))
            .collect::<Result<Vec<_>, _>>()?;
        let max_curv = rs.windows(3).map(|w| ((w[2] - 2.0 * w[1] + w[0]) / (hm * hm)).abs()).fold(0.0, f64::max);
        let k2 = K2_SAFETY * max_curv / 2.0;
        Ok(Self { pot, prof: *prof, path, alpha, r_grid, kappa_even, k2 })
    }

    pub fn potential(&self) -> &'a dyn PairPotential {
        self.pot
    }

    pub fn potential_profile(&self) -> &PotentialProfile {
        &self.prof
    }

    pub fn path(&self) -> &LoadPath {
        &self.path
    }

    /// Uniform response `r(s)`.
    pub fn r(&self, s: f64) -> Result<f64, ContinuationError> {
        uniform_response(self.pot, &self.prof, self.path.load(s))
    }

    /// `k(s) = |r'(s)| = scale / (φ''(r) + 4φ''(2r))`.
    pub fn k(&self, s: f64) -> Result<f64, ContinuationError> {
        let r = self.r(s)?;
        let stiffness = self.pot.chain_stiffness(r);
        if !(stiffness > 0.0) {
            return Err(ContinuationError::LoadLimit { load: self.path.load(s), phi_max: self.prof.phi_max });
        }
        Ok(self.path.scale / stiffness)
    }

    /// Interpolation constant: `1.1 · max|r''| / 2` on a 4096-point grid.
    pub fn k2(&self) -> f64 {
        self.k2
    }

    /// `δ(s)` for this profile's `α`, with the window-exhausted error kept.
    pub fn radius(&self, s: f64) -> Result<f64, ContinuationError> {
        contraction_radius(self.pot, &self.prof, self.r(s)?, self.alpha)
    }

    pub fn terminus(&self) -> Result<f64, ContinuationError> {
        window_terminus(self.pot, &self.prof, &self.path, self.alpha)
    }

    /// Worst-case `k`, `δ` over `[0, 1]`: `k` grows and `δ` shrinks with `s`,
    /// so both are taken at `s = 1`.
    pub fn uniform_constants(&self) -> Result<UniformConstants, ContinuationError> {
        Ok(UniformConstants { k: self.k(1.0)?, k2: self.k2, delta: self.radius(1.0)?, alpha: self.alpha })
    }

    fn rate_at(&self, s: f64) -> f64 {
        self.k(s).unwrap_or(f64::INFINITY)
    }
}

impl ContinuationProfile for ChainProfile<'_> {
    /// Table lookup plus one Simpson panel pair for the remainder.
    fn kappa(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let n = KAPPA_PANELS;
        let h = 1.0 / n as f64;
        let i = (((s.min(1.0) * n as f64).floor() as usize) / 2 * 2).min(n);
        let base = self.kappa_even[i / 2];
        let s0 = i as f64 * h;
        if s == s0 {
            return base;
        }
        let sm = 0.5 * (s0 + s);
        let rate0 = self.path.scale / self.pot.chain_stiffness(self.r_grid[i]);
        base + (s - s0) / 6.0 * (rate0 + 4.0 * self.rate_at(sm) + self.rate_at(s))
    }

    fn delta(&self, s: f64) -> f64 {
        self.radius(s).unwrap_or(0.0)
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{compute_profile, LennardJones};

    const LJ: LennardJones = LennardJones;

    fn lj() -> PotentialProfile {
        compute_profile(&LJ).unwrap()
    }

    /// Plain bisection for the uniform response, independent of the
    /// safeguarded Newton solve.
    fn bisect_response(load: f64, prof: &PotentialProfile) -> f64 {
        let (mut lo, mut hi) = (prof.a0, prof.r_star);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if LJ.chain_stress(mid) < load {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn uniform_response_landmarks() {
        let prof = lj();
        assert_eq!(uniform_response(&LJ, &prof, 0.0).unwrap(), prof.a0);
        let r1 = uniform_response(&LJ, &prof, 2.76).unwrap();
        assert!((r1 - bisect_response(2.76, &prof)).abs() < 1e-12);
        assert!(r1 < prof.r_star);
        let beyond = 2.76 * (prof.phi_max / 2.76 + 1e-4);
        assert!(matches!(uniform_response(&LJ, &prof, beyond), Err(ContinuationError::LoadLimit { .. })));
    }

    #[test]
    fn terminus_for_eight_ninths() {
        let prof = lj();
        let s = window_terminus(&LJ, &prof, &LoadPath::default(), 8.0 / 9.0).unwrap();
        assert!((s - 1.001).abs() <= 2e-3, "{s}");
        let r = uniform_response(&LJ, &prof, 2.76 * (s - 1e-6)).unwrap();
        assert!(contraction_radius(&LJ, &prof, r, 8.0 / 9.0).unwrap() < 1e-4);
        let r = uniform_response(&LJ, &prof, 2.76 * (s + 1e-6)).unwrap();
        assert!(matches!(contraction_radius(&LJ, &prof, r, 8.0 / 9.0), Err(ContinuationError::WindowExhausted { .. })));
    }

    #[test]
    fn radius_reproduces_alpha_and_decreases() {
        let prof = lj();
        for alpha in [0.125, 0.25, 0.5, 8.0 / 9.0] {
            let mut prev = f64::INFINITY;
            for i in 0..40 {
                let s = 0.02 * i as f64;
                let r = uniform_response(&LJ, &prof, 2.76 * s).unwrap();
                let Ok(d) = contraction_radius(&LJ, &prof, r, alpha) else { break };
                assert!(d <= prev);
                prev = d;
                let a = crate::solver::contraction_constant(&LJ, r - d, r + d).unwrap();
                assert!((a - alpha).abs() < 1e-10, "{alpha} at s = {s}: {a}");
            }
        }
    }

    #[test]
    fn radii_are_nested_in_alpha() {
        let prof = lj();
        let r = uniform_response(&LJ, &prof, 1.0).unwrap();
        let ds: Vec<f64> =
            [0.125, 0.25, 0.5, 8.0 / 9.0].iter().map(|&a| contraction_radius(&LJ, &prof, r, a).unwrap()).collect();
        assert!(ds.windows(2).all(|w| w[0] < w[1]), "{ds:?}");
    }

    #[test]
    fn kappa_is_the_response_increment() {
        let prof = lj();
        let cp = ChainProfile::new(&LJ, &prof, LoadPath::default(), 8.0 / 9.0).unwrap();
        assert_eq!(cp.kappa(0.0), 0.0);
        let exact = cp.r(1.0).unwrap() - prof.a0;
        assert!((cp.kappa(1.0) - exact).abs() <= 1e-8, "{} vs {exact}", cp.kappa(1.0));
        for s in [0.1234567, 0.5, 0.77777, 0.999] {
            let exact = cp.r(s).unwrap() - prof.a0;
            assert!((cp.kappa(s) - exact).abs() <= 1e-8);
        }
        let mut prev = 0.0;
        for i in 1..=200 {
            let s = i as f64 / 200.0;
            let k = cp.k(s).unwrap();
            assert!(k > prev);
            prev = k;
        }
        // k2 bounds half the curvature of r(s), checked against the exact
        // second derivative -scale² σ''(r) / σ'(r)³ at s = 1
        let r = cp.r(1.0).unwrap();
        let sigma2 = LJ.d3(r) + 8.0 * LJ.d3(2.0 * r);
        let r_ss = -(2.76f64.powi(2)) * sigma2 / LJ.chain_stiffness(r).powi(3);
        assert!(cp.k2() >= r_ss.abs() / 2.0);
    }

    #[test]
    fn profile_rejects_paths_past_the_load_limit() {
        let prof = lj();
        assert!(matches!(
            ChainProfile::new(&LJ, &prof, LoadPath { scale: 2.79 }, 0.5),
            Err(ContinuationError::LoadLimit { .. })
        ));
        assert!(matches!(
            ChainProfile::new(&LJ, &prof, LoadPath::default(), 1.0),
            Err(ContinuationError::BadAlpha(_))
        ));
    }

    #[test]
    fn delta_is_zero_past_the_terminus() {
        let prof = lj();
        let cp = ChainProfile::new(&LJ, &prof, LoadPath::default(), 0.5).unwrap();
        let t = cp.terminus().unwrap();
        assert!((t - 0.98756).abs() < 1e-4, "{t}");
        assert_eq!(cp.delta(0.995), 0.0);
        assert!(cp.delta(0.5) > 0.04);
    }
}
