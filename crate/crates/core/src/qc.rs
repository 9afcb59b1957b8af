//! Quasicontinuum formulations over a [`QcMesh`]: constrained (CQC), local,
//! force-based (QCF) and energy-based (QCE), plus the conjugate stresses `ψ`
//! and the ghost-force correction.
//!
//! Everything except the CQC quantities is a function of the element spacings
//! `r` alone, passed as a slice in storage order (element `-N` first). Forces
//! are returned for the free repatoms `-N..=N`.
//!
//! Sign convention: `-ψ_j` is the tension carried across element `j`, so an
//! equilibrium under conjugate loads `Φ_j` satisfies `ψ_j + Φ_j = 0`.

use crate::banded::SymBandMatrix;
use crate::chain::{energy_of_positions, forces_of_positions};
use crate::mesh::{QcMesh, RepState};
use crate::potential::PairPotential;

/// The three groups of the CQC energy: bulk strain energy, the two free
/// surfaces and the element interfaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDecomposition {
    pub bulk: f64,
    pub surface: f64,
    pub interface: f64,
}

impl EnergyDecomposition {
    pub fn total(&self) -> f64 {
        self.bulk + self.surface + self.interface
    }
}

/// One pair-interaction contribution to the QCE energy.
#[derive(Debug, Clone, Copy, PartialEq)]
enum BondTerm {
    /// `coef · φ(k r_e)`
    Single { e: usize, k: f64, coef: f64 },
    /// `coef · φ(r_a + r_b)`, `b = a + 1`
    Pair { a: usize, coef: f64 },
}

/// A potential paired with a mesh.
pub struct QcModel<'a> {
    pot: &'a dyn PairPotential,
    mesh: &'a QcMesh,
    qce_terms: Vec<BondTerm>,
}

impl<'a> QcModel<'a> {
    pub fn new(pot: &'a dyn PairPotential, mesh: &'a QcMesh) -> Self {
        let qce_terms = qce_bond_terms(mesh);
        Self { pot, mesh, qce_terms }
    }

    pub fn mesh(&self) -> &'a QcMesh {
        self.mesh
    }

    pub fn potential(&self) -> &'a dyn PairPotential {
        self.pot
    }

    fn check_len(&self, r: &[f64]) {
        assert_eq!(r.len(), self.mesh.num_elements(), "spacing vector length");
    }

    /// Element spacing at index `j`, or `None` outside `-N..=N`.
    fn r_at(&self, r: &[f64], j: i64) -> Option<f64> {
        self.mesh.has_element(j).then(|| r[self.mesh.slot(j)])
    }

    /// Positions of every atom `-M..=M+1` from the piecewise-linear
    /// interpolant of the repatoms.
    pub fn interpolate(&self, st: &RepState) -> Vec<f64> {
        let z = st.positions();
        let r = st.spacings(self.mesh);
        let mut y = Vec::with_capacity(2 * self.mesh.m() + 2);
        for s in 0..self.mesh.num_elements() {
            let j = self.mesh.index(s);
            for i in 0..self.mesh.nu(j) {
                y.push(z[s] + i as f64 * r[s]);
            }
        }
        y.push(st.right_end());
        y
    }

    /// Atomistic energy of the interpolated configuration.
    pub fn cqc_energy(&self, st: &RepState) -> f64 {
        energy_of_positions(self.pot, &self.interpolate(st))
    }

    /// Forces conjugate to every repatom `-N..=N+1`, including the reaction on
    /// the constrained end.
    pub fn cqc_forces(&self, st: &RepState) -> Vec<f64> {
        let fa = forces_of_positions(self.pot, &self.interpolate(st));
        self.weighted_sums(&fa, self.mesh.num_repatoms())
    }

    /// `F_j = Σ_i S_j(x_i) g_i` for the first `count` repatoms. `g` lists atoms
    /// from `-M`; atoms past its end contribute nothing.
    fn weighted_sums(&self, g: &[f64], count: usize) -> Vec<f64> {
        let mesh = self.mesh;
        let m = mesh.m() as i64;
        let atom = |i: i64| g.get((i + m) as usize).copied().unwrap_or(0.0);
        (0..count)
            .map(|s| {
                let j = mesh.index(s);
                let lj = mesh.ell(j);
                let mut f = atom(lj);
                if mesh.has_element(j - 1) {
                    let (l0, nu) = (mesh.ell(j - 1), mesh.nu(j - 1));
                    for i in (l0 + 1)..lj {
                        f += (i - l0) as f64 / nu as f64 * atom(i);
                    }
                }
                if mesh.has_element(j) {
                    let (l1, nu) = (mesh.ell(j + 1), mesh.nu(j));
                    for i in (lj + 1)..l1 {
                        f += (l1 - i) as f64 / nu as f64 * atom(i);
                    }
                }
                f
            })
            .collect()
    }

    /// Conjugate external forces on the free repatoms `-N..=N` from dead
    /// loads on atoms `-M..=M`.
    pub fn conjugate_external(&self, dead_loads: &[f64]) -> Vec<f64> {
        assert_eq!(dead_loads.len(), 2 * self.mesh.m() + 1, "dead load vector length");
        self.weighted_sums(dead_loads, self.mesh.num_elements())
    }

    pub fn energy_decomposition(&self, r: &[f64]) -> EnergyDecomposition {
        self.check_len(r);
        let p = self.pot;
        let bulk = self.local_energy(r);
        let n = r.len();
        let surface = -0.5 * p.phi(2.0 * r[0]) - 0.5 * p.phi(2.0 * r[n - 1]);
        let interface = r
            .windows(2)
            .map(|w| -0.5 * p.phi(2.0 * w[0]) + p.phi(w[0] + w[1]) - 0.5 * p.phi(2.0 * w[1]))
            .sum();
        EnergyDecomposition { bulk, surface, interface }
    }

    /// `Σ_j L_j W(D_j) = Σ_j ν_j (φ(r_j) + φ(2 r_j))`.
    pub fn local_energy(&self, r: &[f64]) -> f64 {
        self.check_len(r);
        r.iter()
            .enumerate()
            .map(|(s, &rj)| self.mesh.nu(self.mesh.index(s)) as f64 * (self.pot.phi(rj) + self.pot.phi(2.0 * rj)))
            .sum()
    }

    /// `F^L_j = W'(D_j) - W'(D_{j-1})`.
    pub fn local_forces(&self, r: &[f64]) -> Vec<f64> {
        self.check_len(r);
        let sigma: Vec<f64> = r.iter().map(|&x| self.pot.chain_stress(x)).collect();
        forces_from_psi(&sigma.iter().map(|s| -s).collect::<Vec<_>>())
    }

    /// Atomistic force on repatom `j` written through spacings, missing bonds
    /// omitted.
    fn atomistic_force_at(&self, r: &[f64], j: i64) -> f64 {
        let d1 = |x: f64| self.pot.d1(x);
        let mut f = 0.0;
        if let Some(rj) = self.r_at(r, j) {
            f += d1(rj);
            if let Some(rn) = self.r_at(r, j + 1) {
                f += d1(rj + rn);
            }
        }
        if let Some(rp) = self.r_at(r, j - 1) {
            f -= d1(rp);
            if let Some(rpp) = self.r_at(r, j - 2) {
                f -= d1(rp + rpp);
            }
        }
        f
    }

    /// Forces on the free repatoms: atomistic forces at `-K+1..=K`, local
    /// forces elsewhere.
    pub fn qcf_forces(&self, r: &[f64]) -> Vec<f64> {
        self.check_len(r);
        let local = self.local_forces(r);
        self.mesh
            .elements()
            .zip(local)
            .map(|(j, fl)| if self.mesh.is_atomistic(j) { self.atomistic_force_at(r, j) } else { fl })
            .collect()
    }

    pub fn qce_energy(&self, r: &[f64]) -> f64 {
        self.check_len(r);
        let p = self.pot;
        self.qce_terms
            .iter()
            .map(|t| match *t {
                BondTerm::Single { e, k, coef } => coef * p.phi(k * r[e]),
                BondTerm::Pair { a, coef } => coef * p.phi(r[a] + r[a + 1]),
            })
            .sum()
    }

    /// `∂E^QCE/∂r`.
    pub(crate) fn qce_gradient(&self, r: &[f64]) -> Vec<f64> {
        self.check_len(r);
        let p = self.pot;
        let mut g = vec![0.0; r.len()];
        for t in &self.qce_terms {
            match *t {
                BondTerm::Single { e, k, coef } => g[e] += coef * k * p.d1(k * r[e]),
                BondTerm::Pair { a, coef } => {
                    let d = coef * p.d1(r[a] + r[a + 1]);
                    g[a] += d;
                    g[a + 1] += d;
                }
            }
        }
        g
    }

    /// `∂²E^QCE/∂r²`, tridiagonal.
    pub(crate) fn qce_hessian(&self, r: &[f64]) -> SymBandMatrix {
        self.check_len(r);
        let p = self.pot;
        let mut h = SymBandMatrix::zeros(r.len(), 1);
        for t in &self.qce_terms {
            match *t {
                BondTerm::Single { e, k, coef } => h.add(e, e, coef * k * k * p.d2(k * r[e])),
                BondTerm::Pair { a, coef } => {
                    let d = coef * p.d2(r[a] + r[a + 1]);
                    h.add(a, a, d);
                    h.add(a + 1, a + 1, d);
                    h.add(a + 1, a, d);
                }
            }
        }
        h
    }

    /// `ψ^QCE_j = -ν_j⁻¹ ∂E^QCE/∂r_j`.
    pub fn psi_qce(&self, r: &[f64]) -> Vec<f64> {
        self.qce_gradient(r)
            .into_iter()
            .enumerate()
            .map(|(s, g)| -g / self.mesh.nu(self.mesh.index(s)) as f64)
            .collect()
    }

    /// `F^QCE_j = -ψ_j + ψ_{j-1}`.
    pub fn qce_forces(&self, r: &[f64]) -> Vec<f64> {
        forces_from_psi(&self.psi_qce(r))
    }

    /// `ψ^QCF_j = -Σ_{i<=j} F^QCF_i`.
    pub fn psi_qcf(&self, r: &[f64]) -> Vec<f64> {
        psi_from_forces(&self.qcf_forces(r))
    }

    /// Closed form of [`psi_qcf`](Self::psi_qcf) through the interface
    /// corrections `I_j = σ(r_j) - s_j`, where `s_j` is the atomistic tension
    /// across element `j`.
    pub fn psi_qcf_explicit(&self, r: &[f64]) -> Vec<f64> {
        self.check_len(r);
        let k = self.mesh.k() as i64;
        let s_atom = |j: i64| -> f64 {
            let rj = r[self.mesh.slot(j)];
            let mut s = self.pot.d1(rj);
            if let Some(rp) = self.r_at(r, j - 1) {
                s += self.pot.d1(rp + rj);
            }
            if let Some(rn) = self.r_at(r, j + 1) {
                s += self.pot.d1(rj + rn);
            }
            s
        };
        let interface = |j: i64| -> f64 {
            if self.mesh.has_element(j) {
                self.pot.chain_stress(r[self.mesh.slot(j)]) - s_atom(j)
            } else {
                0.0
            }
        };
        let (i_left, i_right) = (interface(-k), interface(k));
        self.mesh
            .elements()
            .map(|j| {
                let tension = if j <= -k {
                    self.pot.chain_stress(r[self.mesh.slot(j)])
                } else if j <= k {
                    s_atom(j) + i_left
                } else {
                    self.pot.chain_stress(r[self.mesh.slot(j)]) + i_left - i_right
                };
                -tension
            })
            .collect()
    }

    /// `ψ^G = ψ^QCF - ψ^QCE`.
    pub fn ghost_correction(&self, r: &[f64]) -> Vec<f64> {
        self.psi_qcf(r).iter().zip(self.psi_qce(r)).map(|(a, b)| a - b).collect()
    }

    /// `‖ψ^QCF(r) + Φ‖_∞`.
    pub fn equilibrium_residual(&self, r: &[f64], loads: &[f64]) -> f64 {
        self.psi_qcf(r).iter().zip(loads).fold(0.0, |m, (p, l)| m.max((p + l).abs()))
    }
}

/// `Φ_j = -Σ_{i<=j} f_i`.
pub fn conjugate_load(f: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    f.iter()
        .map(|fi| {
            acc -= fi;
            acc
        })
        .collect()
}

/// The conjugate loads of uniform tension `Φ`: `Φ_j = Φ` on every element.
pub fn uniform_load(mesh: &QcMesh, phi: f64) -> Vec<f64> {
    vec![phi; mesh.num_elements()]
}

/// `-Σ_{i<=j} F_i`.
pub fn psi_from_forces(f: &[f64]) -> Vec<f64> {
    conjugate_load(f)
}

/// `F_j = -ψ_j + ψ_{j-1}` with `ψ_{-N-1} = 0`.
pub fn forces_from_psi(psi: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    psi.iter()
        .map(|&p| {
            let f = prev - p;
            prev = p;
            f
        })
        .collect()
}

/// Expands the partitioned QCE energy into pair terms. Continuum repatom `j`
/// takes half of the Cauchy-Born energy of each adjacent element; atomistic
/// repatom `j` takes half of each bond it participates in.
fn qce_bond_terms(mesh: &QcMesh) -> Vec<BondTerm> {
    let mut terms = Vec::new();
    let n = mesh.n() as i64;
    let has = |j: i64| mesh.has_element(j);
    let slot = |j: i64| mesh.slot(j);
    for j in -n..=n + 1 {
        if mesh.is_atomistic(j) {
            if has(j) {
                terms.push(BondTerm::Single { e: slot(j), k: 1.0, coef: 0.5 });
                if has(j + 1) {
                    terms.push(BondTerm::Pair { a: slot(j), coef: 0.5 });
                }
            }
            if has(j - 1) {
                terms.push(BondTerm::Single { e: slot(j - 1), k: 1.0, coef: 0.5 });
                if has(j - 2) {
                    terms.push(BondTerm::Pair { a: slot(j - 2), coef: 0.5 });
                }
            }
        } else {
            for e in [j - 1, j] {
                if has(e) {
                    let half = 0.5 * mesh.nu(e) as f64;
                    terms.push(BondTerm::Single { e: slot(e), k: 1.0, coef: half });
                    terms.push(BondTerm::Single { e: slot(e), k: 2.0, coef: half });
                }
            }
        }
    }
    terms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{atomistic_forces, tension_load, AtomChain};
    use crate::potential::{compute_profile, LennardJones};
    use proptest::prelude::*;

    const LJ: LennardJones = LennardJones;

    fn a0() -> f64 {
        compute_profile(&LJ).unwrap().a0
    }

    fn wavy(n: usize, amp: f64, base: f64, phase: f64) -> Vec<f64> {
        (0..n).map(|s| base + amp * ((s as f64) * 1.7 + phase).sin()).collect()
    }

    /// Central differences of `energy` with respect to each repatom position.
    fn fd_forces_z(mesh: &QcMesh, st: &RepState, count: usize, energy: impl Fn(&RepState) -> f64) -> Vec<f64> {
        let h = 1e-6;
        (0..count)
            .map(|s| {
                let mut zp = st.positions().to_vec();
                let mut zm = zp.clone();
                zp[s] += h;
                zm[s] -= h;
                let ep = energy(&RepState::from_positions(mesh, zp).unwrap());
                let em = energy(&RepState::from_positions(mesh, zm).unwrap());
                -(ep - em) / (2.0 * h)
            })
            .collect()
    }

    fn assert_rel(a: &[f64], b: &[f64], tol: f64) {
        let scale = b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            assert!((x - y).abs() <= tol * scale, "entry {i}: {x} vs {y}");
        }
    }

    #[test]
    fn interpolation_reproduces_linear_fields() {
        let a0 = a0();
        let mesh = QcMesh::symmetric(20, 6, 2, a0).unwrap();
        let st = RepState::from_spacings(&mesh, &mesh.uniform_spacings(1.05), 21.0 * 1.05).unwrap();
        let y = QcModel::new(&LJ, &mesh).interpolate(&st);
        for (k, yi) in y.iter().enumerate() {
            let i = k as f64 - 20.0;
            assert!((yi - i * 1.05).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_identity_and_midpoint() {
        let mesh = QcMesh::uncoarsened(3, 1, 1.0).unwrap();
        let st = RepState::from_positions(&mesh, vec![-3.0, -1.9, -1.1, 0.2, 1.0, 2.3, 3.1, 4.0]).unwrap();
        assert_eq!(QcModel::new(&LJ, &mesh).interpolate(&st), st.positions());

        let mesh = QcMesh::new(vec![-3, -1, 0, 1, 2, 4], 0, 1.0).unwrap();
        let st = RepState::from_positions(&mesh, vec![-3.0, -0.8, 0.1, 1.0, 2.1, 3.9]).unwrap();
        let y = QcModel::new(&LJ, &mesh).interpolate(&st);
        assert_eq!(y.len(), 8);
        assert!((y[1] - (-3.0 - 0.8) / 2.0).abs() < 1e-15);
        assert!((y[6] - (2.1 + 3.9) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn cqc_forces_collapse_to_atomistic_forces() {
        let a0 = a0();
        let mesh = QcMesh::uncoarsened(6, 2, a0).unwrap();
        let r = wavy(13, 0.04, a0, 0.3);
        let st = RepState::from_spacings(&mesh, &r, 7.0).unwrap();
        let model = QcModel::new(&LJ, &mesh);
        let chain = AtomChain::new(6, st.positions().to_vec(), vec![0.0; 13]).unwrap();
        let fa = atomistic_forces(&LJ, &chain).unwrap();
        let fc = model.cqc_forces(&st);
        for (x, y) in fa.iter().zip(&fc) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn cqc_forces_match_finite_differences_on_coarse_mesh() {
        let a0 = a0();
        let mesh = QcMesh::symmetric(30, 7, 2, a0).unwrap();
        let model = QcModel::new(&LJ, &mesh);
        let r = wavy(15, 0.05, 1.02, 1.1);
        let st = RepState::from_spacings(&mesh, &r, 30.0).unwrap();
        let fd = fd_forces_z(&mesh, &st, 16, |s| model.cqc_energy(s));
        assert_rel(&model.cqc_forces(&st), &fd, 1e-6);
    }

    #[test]
    fn cqc_interior_forces_vanish_under_uniform_strain() {
        let mesh = QcMesh::symmetric(25, 6, 1, 1.0).unwrap();
        let st = RepState::from_spacings(&mesh, &mesh.uniform_spacings(1.07), 0.0).unwrap();
        let f = QcModel::new(&LJ, &mesh).cqc_forces(&st);
        // repatoms -N+1 and N carry surface atoms in their support
        for &fj in &f[2..f.len() - 2] {
            assert!(fj.abs() < 1e-12, "{fj}");
        }
    }

    #[test]
    fn conjugate_external_of_tension_and_uniform_loads() {
        let mesh = QcMesh::symmetric(20, 6, 2, 1.0).unwrap();
        let model = QcModel::new(&LJ, &mesh);
        let f = model.conjugate_external(&tension_load(20, 2.5));
        assert_eq!(f[0], -2.5);
        assert!(f[1..].iter().all(|&x| x == 0.0));
        assert!(model.conjugate_external(&vec![0.0; 41]).iter().all(|&x| x == 0.0));

        let flat = QcMesh::uncoarsened(4, 2, 1.0).unwrap();
        let f = QcModel::new(&LJ, &flat).conjugate_external(&[0.3; 9]);
        assert!(f.iter().all(|&x| x == 0.3));
        // On a coarse mesh the weights still partition each atom's load.
        let total: f64 = model.conjugate_external(&vec![0.3; 41]).iter().sum();
        // minus the share of the last element's atoms that goes to the fixed end
        let expect = 0.3 * 41.0 - 0.3 * (mesh.nu(6) - 1) as f64 / 2.0;
        assert!((total - expect).abs() < 1e-12, "{total} vs {expect}");
    }

    #[test]
    fn decomposition_identity_and_interface_terms() {
        let a0 = a0();
        let mesh = QcMesh::symmetric(18, 6, 1, a0).unwrap();
        let model = QcModel::new(&LJ, &mesh);
        let r = wavy(13, 0.06, 1.01, 0.0);
        let st = RepState::from_spacings(&mesh, &r, 0.0).unwrap();
        let d = model.energy_decomposition(&r);
        assert!((d.total() - model.cqc_energy(&st)).abs() < 1e-12);

        let uni = mesh.uniform_spacings(1.1);
        assert!(model.energy_decomposition(&uni).interface.abs() < 1e-15);

        let small = QcMesh::new(vec![-1, 0, 1, 2], 0, 1.0).unwrap();
        let d = QcModel::new(&LJ, &small).energy_decomposition(&[1.0, 1.2, 1.2]);
        let expect = -0.5 * LJ.phi(2.0) + LJ.phi(2.2) - 0.5 * LJ.phi(2.4);
        assert!((d.interface - expect).abs() < 1e-15);
    }

    #[test]
    fn local_forces_telescoping_and_gradient() {
        let mesh = QcMesh::uncoarsened(4, 1, 1.0).unwrap();
        let model = QcModel::new(&LJ, &mesh);
        let f = model.local_forces(&mesh.uniform_spacings(1.03));
        assert!((f[0] - LJ.chain_stress(1.03)).abs() < 1e-14);
        assert!(f[1..].iter().all(|&x| x.abs() < 1e-14));
        let mut r = mesh.uniform_spacings(1.0);
        r[4] = 1.05;
        let f = model.local_forces(&r);
        let nz: Vec<usize> = (1..f.len()).filter(|&s| f[s].abs() > 1e-14).collect();
        assert_eq!(nz, vec![4, 5]);
        assert!((f[4] + f[5]).abs() < 1e-14);

        let coarse = QcMesh::symmetric(16, 5, 1, 1.0).unwrap();
        let model = QcModel::new(&LJ, &coarse);
        let r = wavy(11, 0.05, 1.03, 0.4);
        let st = RepState::from_spacings(&coarse, &r, 3.0).unwrap();
        let fd = fd_forces_z(&coarse, &st, 11, |s| model.local_energy(&s.spacings(&coarse)));
        assert_rel(&model.local_forces(&r), &fd, 1e-6);
    }

    #[test]
    fn qcf_is_consistent_under_uniform_strain() {
        let mesh = QcMesh::uncoarsened(7, 3, 1.0).unwrap();
        let model = QcModel::new(&LJ, &mesh);
        for r0 in [0.95, 1.0, 1.05, 1.1] {
            let f = model.qcf_forces(&mesh.uniform_spacings(r0));
            assert!((f[0] - LJ.chain_stress(r0)).abs() < 1e-14);
            assert!(f[1..].iter().all(|x| x.abs() <= 1e-12));
            let psi = model.psi_qcf(&mesh.uniform_spacings(r0));
            assert!(psi.iter().all(|p| (p + LJ.chain_stress(r0)).abs() <= 1e-12));
        }
    }

    #[test]
    fn qcf_equilibrium_under_tension() {
        let mesh = QcMesh::uncoarsened(7, 3, a0()).unwrap();
        let model = QcModel::new(&LJ, &mesh);
        let phi = 1.7;
        let r = crate::roots::bisect_newton(
            |x| LJ.chain_stress(x) - phi,
            |x| LJ.chain_stiffness(x),
            1.0,
            1.1,
            1e-14,
        )
        .unwrap();
        let loads = conjugate_load(&model.conjugate_external(&tension_load(7, phi)));
        assert!(model.equilibrium_residual(&mesh.uniform_spacings(r), &loads) < 1e-12);
    }

    #[test]
    fn qcf_matches_atomistic_and_local_forces() {
        let a0 = a0();
        let mesh = QcMesh::uncoarsened(6, 3, a0).unwrap();
        let model = QcModel::new(&LJ, &mesh);
        let r = wavy(13, 0.05, a0, 2.0);
        let st = RepState::from_spacings(&mesh, &r, 0.0).unwrap();
        let chain = AtomChain::new(6, st.positions().to_vec(), vec![0.0; 13]).unwrap();
        let fa = atomistic_forces(&LJ, &chain).unwrap();
        let fl = model.local_forces(&r);
        let fq = model.qcf_forces(&r);
        for j in mesh.elements() {
            let s = mesh.slot(j);
            let reference = if mesh.is_atomistic(j) { fa[s] } else { fl[s] };
            assert!((fq[s] - reference).abs() <= 1e-13, "repatom {j}: {} vs {reference}", fq[s]);
        }
    }

    #[test]
    fn fully_atomistic_qcf_is_the_atomistic_chain() {
        let mesh = QcMesh::uncoarsened(5, 6, 1.0).unwrap();
        let model = QcModel::new(&LJ, &mesh);
        let r = wavy(11, 0.07, 1.02, 0.9);
        let st = RepState::from_spacings(&mesh, &r, 0.0).unwrap();
        let chain = AtomChain::new(5, st.positions().to_vec(), vec![0.0; 11]).unwrap();
        let fa = atomistic_forces(&LJ, &chain).unwrap();
        for (x, y) in model.qcf_forces(&r).iter().zip(&fa) {
            // second-neighbour lengths are r_j + r_{j+1} here and y_{i+2} - y_i there
            assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
        }
        assert!((model.qce_energy(&r) - model.cqc_energy(&st)).abs() < 1e-12);
    }

    #[test]
    fn all_continuum_qce_is_local_energy() {
        let mesh = QcMesh::symmetric(12, 5, 0, 1.0).unwrap();
        let model = QcModel::new(&LJ, &mesh);
        let r = wavy(11, 0.05, 1.02, 0.1);
        assert!((model.qce_energy(&r) - model.local_energy(&r)).abs() < 1e-12);
    }

    #[test]
    fn qce_energy_bond_count_at_a0() {
        // N = 7, K = 3. Continuum repatoms -7..=-3 and 4..=8 hold elements
        // -7..=-4 and 4..=7 fully plus half of -3 and 3: nine Cauchy-Born
        // elements. Atomistic repatoms -2..=3 each hold half of two nearest
        // and two second bonds.
        let a0 = a0();
        let mesh = QcMesh::uncoarsened(7, 3, a0).unwrap();
        let model = QcModel::new(&LJ, &mesh);
        let (p1, p2) = (LJ.phi(a0), LJ.phi(2.0 * a0));
        let expect = 9.0 * (p1 + p2) + 6.0 * (p1 + p2);
        assert!((model.qce_energy(&mesh.uniform_spacings(a0)) - expect).abs() < 1e-12);
    }

    #[test]
    fn qce_forces_match_finite_differences() {
        let a0 = a0();
        for (m, n, k) in [(7, 7, 3), (30, 8, 2), (9, 9, 0), (5, 5, 6)] {
            let mesh = QcMesh::symmetric(m, n, k, a0).unwrap();
            let model = QcModel::new(&LJ, &mesh);
            let r = wavy(2 * n + 1, 0.05, 1.03, 0.7);
            let st = RepState::from_spacings(&mesh, &r, 2.0).unwrap();
            let fd = fd_forces_z(&mesh, &st, 2 * n + 1, |s| model.qce_energy(&s.spacings(&mesh)));
            assert_rel(&model.qce_forces(&r), &fd, 1e-6);
        }
    }

    #[test]
    fn qce_hessian_matches_gradient_differences() {
        let mesh = QcMesh::uncoarsened(5, 2, 1.0).unwrap();
        let model = QcModel::new(&LJ, &mesh);
        let r = wavy(11, 0.05, 1.03, 0.2);
        let h = model.qce_hessian(&r);
        let step = 1e-6;
        for c in 0..11 {
            let mut rp = r.clone();
            let mut rm = r.clone();
            rp[c] += step;
            rm[c] -= step;
            let gp = model.qce_gradient(&rp);
            let gm = model.qce_gradient(&rm);
            for row in 0..11 {
                let fd = (gp[row] - gm[row]) / (2.0 * step);
                assert!((fd - h.get(row, c)).abs() < 1e-5 * (1.0 + fd.abs()), "({row},{c})");
            }
        }
    }

    #[test]
    fn psi_qce_case_rows() {
        let mesh = QcMesh::uncoarsened(7, 3, 1.0).unwrap();
        let model = QcModel::new(&LJ, &mesh);
        let r = wavy(15, 0.04, 1.02, 0.5);
        let psi = model.psi_qce(&r);
        let at = |j: i64| r[mesh.slot(j)];
        for j in -7..=-5 {
            assert!((-psi[mesh.slot(j)] - LJ.chain_stress(at(j))).abs() < 1e-13);
        }
        let j = -4;
        let expect = LJ.chain_stress(at(j)) + 0.5 * LJ.d1(at(j) + at(j + 1));
        assert!((-psi[mesh.slot(j)] - expect).abs() < 1e-13);
        // chain-rule relation
        let back = psi_from_forces(&model.qce_forces(&r));
        for (a, b) in back.iter().zip(&psi) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn qce_ghost_forces_at_reference() {
        let a0 = a0();
        let mesh = QcMesh::uncoarsened(7, 3, a0).unwrap();
        let model = QcModel::new(&LJ, &mesh);
        let r = mesh.uniform_spacings(a0);
        let f = model.qce_forces(&r);
        let ghost = 0.5 * LJ.d1(2.0 * a0);
        let biggest = f[1..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((biggest - ghost.abs()).abs() < 1e-10);
        assert!((f[mesh.slot(-4)] - ghost).abs() < 1e-12);

        let g = model.ghost_correction(&r);
        assert!((g[mesh.slot(-4)] - ghost).abs() < 1e-12);
        for j in mesh.elements().filter(|j| j.abs() <= 1 || *j <= -5 || *j >= 5) {
            assert!(g[mesh.slot(j)].abs() < 1e-14, "ghost at {j}");
        }
    }

    #[test]
    fn conjugate_load_of_tension() {
        let phi = conjugate_load(&[-2.0, 0.0, 0.0, 0.0]);
        assert_eq!(phi, vec![2.0; 4]);
        assert_eq!(conjugate_load(&[0.0; 3]), vec![0.0; 3]);
        let f = [0.3, -1.2, 0.5];
        let back = forces_from_psi(&conjugate_load(&f));
        for (a, b) in back.iter().zip(&f) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn psi_qcf_closed_form_matches_partial_sums(
            n in 1usize..9,
            k_frac in 0.0f64..1.0,
            noise in proptest::collection::vec(-0.08f64..0.08, 19),
        ) {
            let k = ((n + 2) as f64 * k_frac) as usize;
            let mesh = QcMesh::uncoarsened(n, k.min(n + 1), 1.0).unwrap();
            let model = QcModel::new(&LJ, &mesh);
            let r: Vec<f64> = noise[..2 * n + 1].iter().map(|d| 1.02 + d).collect();
            let a = model.psi_qcf(&r);
            let b = model.psi_qcf_explicit(&r);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12, "{} vs {}", x, y);
            }
        }

        #[test]
        fn decomposition_identity_random(
            noise in proptest::collection::vec(-0.1f64..0.1, 11),
            right in -3.0f64..3.0,
        ) {
            let mesh = QcMesh::symmetric(15, 5, 1, 1.0).unwrap();
            let model = QcModel::new(&LJ, &mesh);
            let r: Vec<f64> = noise.iter().map(|d| 1.05 + d).collect();
            let st = RepState::from_spacings(&mesh, &r, right).unwrap();
            prop_assert!((model.energy_decomposition(&r).total() - model.cqc_energy(&st)).abs() <= 1e-12);
        }

        #[test]
        fn interface_placement_only_changes_nearby_forces(
            noise in proptest::collection::vec(-0.08f64..0.08, 21),
            k in 3usize..8,
        ) {
            let n = 10;
            let r: Vec<f64> = noise.iter().map(|d| 1.03 + d).collect();
            let m1 = QcMesh::uncoarsened(n, k, 1.0).unwrap();
            let m2 = QcMesh::uncoarsened(n, k + 1, 1.0).unwrap();
            let f1 = QcModel::new(&LJ, &m1).qcf_forces(&r);
            let f2 = QcModel::new(&LJ, &m2).qcf_forces(&r);
            let ki = k as i64;
            for j in m1.elements().filter(|j| j.abs() <= ki - 2 || j.abs() >= ki + 3) {
                let s = m1.slot(j);
                prop_assert!((f1[s] - f2[s]).abs() <= 1e-15);
            }
        }

        #[test]
        fn qcf_consistent_for_any_uniform_strain(r0 in 0.9f64..1.2, k in 0usize..6) {
            let mesh = QcMesh::uncoarsened(6, k, 1.0).unwrap();
            let model = QcModel::new(&LJ, &mesh);
            let psi = model.psi_qcf(&mesh.uniform_spacings(r0));
            let f = model.qcf_forces(&mesh.uniform_spacings(r0));
            prop_assert!(f[1..].iter().all(|x| x.abs() <= 1e-12));
            prop_assert!(psi.iter().all(|p| (p - psi[0]).abs() <= 1e-12));
        }
    }
}
