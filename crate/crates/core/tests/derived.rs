//! Landmarks and window termini against plain bisection on hand-written
//! Lennard-Jones derivatives.

use qclab::continuation::{window_terminus, ChainProfile, ContinuationProfile, LoadPath};
use qclab::potential::{compute_profile, LennardJones};

fn d1(r: f64) -> f64 {
    -12.0 * r.powi(-13) + 12.0 * r.powi(-7)
}

fn d2(r: f64) -> f64 {
    156.0 * r.powi(-14) - 84.0 * r.powi(-8)
}

fn d3(r: f64) -> f64 {
    -2184.0 * r.powi(-15) + 672.0 * r.powi(-9)
}

/// Root of an increasing-then-crossing `f` on `[lo, hi]` by 200 halvings.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let up = f(hi) > f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == up {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn landmarks() {
    let p = compute_profile(&LennardJones).unwrap();
    let a0 = bisect(|r| d1(r) + 2.0 * d1(2.0 * r), 0.9, 1.05);
    let r1 = bisect(d2, 1.0, 1.2);
    let r2 = bisect(d3, 1.1, 1.3);
    let rs = bisect(|r| d2(r) + 4.0 * d2(2.0 * r), 1.0, 1.2);
    assert!((p.a0 - a0).abs() < 1e-12);
    assert!((p.r_tilde_1 - r1).abs() < 1e-12);
    assert!((p.r_tilde_2 - r2).abs() < 1e-12);
    assert!((p.r_star - rs).abs() < 1e-12);
    let phi_max = d1(rs) + 2.0 * d1(2.0 * rs);
    assert!((p.phi_max - phi_max).abs() < 1e-12);
    assert!((0.5 * d1(2.0 * a0) - 0.04696).abs() < 1e-5);
}

#[test]
fn window_termini() {
    let p = compute_profile(&LennardJones).unwrap();
    let path = LoadPath::default();
    for (alpha, expect) in [(0.125, 0.6946), (0.25, 0.9292), (0.5, 0.98756), (8.0 / 9.0, 1.000987)] {
        let c = 5.0 + 16.0 / alpha;
        let r = bisect(|r| d2(r) + c * d2(2.0 * r), p.a0, p.r_tilde_1);
        let oracle = (d1(r) + 2.0 * d1(2.0 * r)) / path.scale;
        let s = window_terminus(&LennardJones, &p, &path, alpha).unwrap();
        assert!((s - oracle).abs() < 1e-10, "alpha {alpha}");
        assert!((s - expect).abs() < 1e-4, "alpha {alpha}: {s}");
    }
}

#[test]
fn radius_along_the_path() {
    let p = compute_profile(&LennardJones).unwrap();
    let cp = ChainProfile::new(&LennardJones, &p, LoadPath::default(), 8.0 / 9.0).unwrap();
    let c = 5.0 + 16.0 / (8.0 / 9.0);
    for (s, expect) in [(0.0, 0.0692), (0.5, 0.0541), (0.9, 0.026), (1.0, 7.18e-4)] {
        let r = cp.r(s).unwrap();
        let oracle = bisect(|d| d2(r + d) + c * d2(2.0 * (r - d)), 0.0, r - 0.5 * p.r_tilde_2);
        assert!((cp.delta(s) - oracle).abs() < 1e-10, "s {s}");
        assert!((cp.delta(s) - expect).abs() < 0.02 * expect, "s {s}: {}", cp.delta(s));
    }
}
