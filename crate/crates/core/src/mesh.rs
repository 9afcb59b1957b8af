//! Representative-atom meshes and states.
//!
//! Repatoms are indexed `j = -N..=N+1` and elements (the gaps between
//! consecutive repatoms) `j = -N..=N`. Vectors store index `-N` first, so
//! element `j` lives in slot `j + N`.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("repatom index list needs an even length of at least 2, got {0}")]
    BadLength(usize),
    #[error("repatom indices must satisfy l[-N] = -M and l[N+1] = M+1 (got {first}..{last})")]
    NotSymmetric { first: i64, last: i64 },
    #[error("repatom indices must increase strictly (element {0})")]
    NotIncreasing(i64),
    #[error("atomistic half-width K = {k} exceeds N + 1 = {}", n + 1)]
    AtomisticTooWide { k: usize, n: usize },
    #[error("element {element} next to the atomistic region spans {nu} atoms; it must span one")]
    CoarseInterface { element: i64, nu: i64 },
    #[error("cannot lay out M = {m} atoms on N = {n} repatoms with K = {k}")]
    Layout { m: usize, n: usize, k: usize },
    #[error("lattice constant must be positive, got {0}")]
    BadLatticeConstant(f64),
    #[error("expected {expected} {what}, got {got}")]
    Length { what: &'static str, expected: usize, got: usize },
    #[error("spacing of element {element} is not positive ({value})")]
    NonPositiveSpacing { element: i64, value: f64 },
    #[error("malformed mesh file, line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Reference layout of the representative atoms around a single, centred
/// atomistic region.
#[derive(Debug, Clone, PartialEq)]
pub struct QcMesh {
    n: usize,
    k: usize,
    a0: f64,
    ell: Vec<i64>,
}

impl QcMesh {
    /// Builds a mesh from the atom indices `ℓ_{-N}..=ℓ_{N+1}` of the repatoms.
    ///
    /// Repatoms `-K+1..=K` are atomistic. Every element within reach of an
    /// atomistic repatom (`-K-1..=K+1`) must span exactly one atom. `K = N + 1`
    /// gives a fully atomistic mesh and `K = 0` a fully continuum one.
    pub fn new(ell: Vec<i64>, k: usize, a0: f64) -> Result<Self, MeshError> {
        if ell.len() < 2 || !ell.len().is_multiple_of(2) {
            return Err(MeshError::BadLength(ell.len()));
        }
        if !(a0 > 0.0) {
            return Err(MeshError::BadLatticeConstant(a0));
        }
        let n = (ell.len() - 2) / 2;
        let (first, last) = (ell[0], ell[ell.len() - 1]);
        if last < 1 || first != -(last - 1) {
            return Err(MeshError::NotSymmetric { first, last });
        }
        for (e, w) in ell.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(MeshError::NotIncreasing(e as i64 - n as i64));
            }
        }
        if k > n + 1 {
            return Err(MeshError::AtomisticTooWide { k, n });
        }
        let mesh = Self { n, k, a0, ell };
        if k > 0 {
            let ni = n as i64;
            let ki = k as i64;
            for j in (-ki - 1).max(-ni)..=(ki + 1).min(ni) {
                let nu = mesh.nu(j);
                if nu != 1 {
                    return Err(MeshError::CoarseInterface { element: j, nu });
                }
            }
        }
        Ok(mesh)
    }

    /// Every atom is a repatom (`M = N`).
    pub fn uncoarsened(n: usize, k: usize, a0: f64) -> Result<Self, MeshError> {
        let ell = (-(n as i64)..=(n as i64 + 1)).collect();
        Self::new(ell, k, a0)
    }

    /// Symmetric mesh over `2M+2` atoms: single-atom elements for
    /// `j = -K-1..=K+1`, the rest of the atoms shared as evenly as possible
    /// among the remaining continuum elements, wider elements outermost.
    pub fn symmetric(m: usize, n: usize, k: usize, a0: f64) -> Result<Self, MeshError> {
        let layout_err = MeshError::Layout { m, n, k };
        if m < n || k > n + 1 {
            return Err(layout_err);
        }
        if m == n {
            return Self::uncoarsened(n, k, a0);
        }
        // Fine core -c..=c; each side spreads its remaining atoms over the
        // remaining elements.
        let c = if k == 0 { 0 } else { (k + 1).min(n) };
        let coarse = n - c;
        let atoms = m - c;
        if coarse == 0 || atoms < coarse {
            return Err(layout_err);
        }
        let base = atoms / coarse;
        let extra = atoms % coarse;
        // Right side widths from inside out; the outermost `extra` get one more.
        let right: Vec<i64> = (0..coarse).map(|e| (base + usize::from(e >= coarse - extra)) as i64).collect();
        let mut widths: Vec<i64> = right.iter().rev().copied().collect();
        widths.extend(std::iter::repeat_n(1, 2 * c + 1));
        widths.extend(right.iter().copied());
        let mut ell = Vec::with_capacity(2 * n + 2);
        let mut at = -(m as i64);
        ell.push(at);
        for w in widths {
            at += w;
            ell.push(at);
        }
        Self::new(ell, k, a0)
    }

    /// Repatom half-count `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Atomistic half-width `K`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Atom half-count `M`.
    pub fn m(&self) -> usize {
        (self.ell[self.ell.len() - 1] - 1) as usize
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn num_elements(&self) -> usize {
        2 * self.n + 1
    }

    pub fn num_repatoms(&self) -> usize {
        2 * self.n + 2
    }

    /// All repatom atom indices, `ℓ_{-N}` first.
    pub fn ell_all(&self) -> &[i64] {
        &self.ell
    }

    pub fn ell(&self, j: i64) -> i64 {
        self.ell[self.slot(j)]
    }

    /// Atoms spanned by element `j`.
    pub fn nu(&self, j: i64) -> i64 {
        let s = self.slot(j);
        self.ell[s + 1] - self.ell[s]
    }

    /// Reference length `L_j = ν_j a₀`.
    pub fn length(&self, j: i64) -> f64 {
        self.nu(j) as f64 * self.a0
    }

    /// Reference position `x_i = i a₀` of atom `i`.
    pub fn reference_position(&self, i: i64) -> f64 {
        i as f64 * self.a0
    }

    pub fn is_atomistic(&self, j: i64) -> bool {
        let k = self.k as i64;
        -k < j && j <= k
    }

    pub fn has_element(&self, j: i64) -> bool {
        let n = self.n as i64;
        -n <= j && j <= n
    }

    /// Storage slot of repatom or element `j`.
    pub fn slot(&self, j: i64) -> usize {
        (j + self.n as i64) as usize
    }

    /// Index of the repatom or element stored in slot `s`.
    pub fn index(&self, s: usize) -> i64 {
        s as i64 - self.n as i64
    }

    pub fn elements(&self) -> std::ops::RangeInclusive<i64> {
        -(self.n as i64)..=(self.n as i64)
    }

    /// Element widths `ν_j` in storage order.
    pub fn nus(&self) -> Vec<f64> {
        self.elements().map(|j| self.nu(j) as f64).collect()
    }

    /// The reference configuration as a state.
    pub fn reference_state(&self) -> RepState {
        RepState { z: self.ell.iter().map(|&i| self.reference_position(i)).collect() }
    }

    /// Uniform spacing vector `r·e`.
    pub fn uniform_spacings(&self, r: f64) -> Vec<f64> {
        vec![r; self.num_elements()]
    }
}

/// Representative-atom positions `z_{-N}..=z_{N+1}`; the last entry is the
/// constrained end.
#[derive(Debug, Clone, PartialEq)]
pub struct RepState {
    z: Vec<f64>,
}

impl RepState {
    pub fn from_positions(mesh: &QcMesh, z: Vec<f64>) -> Result<Self, MeshError> {
        if z.len() != mesh.num_repatoms() {
            return Err(MeshError::Length { what: "repatom positions", expected: mesh.num_repatoms(), got: z.len() });
        }
        let st = Self { z };
        st.check_positive(mesh)?;
        Ok(st)
    }

    /// Rebuilds positions from spacings `r_j` and the fixed right end,
    /// `z_j = z_{j+1} - ν_j r_j`.
    pub fn from_spacings(mesh: &QcMesh, r: &[f64], z_right: f64) -> Result<Self, MeshError> {
        if r.len() != mesh.num_elements() {
            return Err(MeshError::Length { what: "element spacings", expected: mesh.num_elements(), got: r.len() });
        }
        let mut z = vec![0.0; mesh.num_repatoms()];
        z[mesh.num_repatoms() - 1] = z_right;
        for s in (0..mesh.num_elements()).rev() {
            z[s] = z[s + 1] - mesh.nu(mesh.index(s)) as f64 * r[s];
        }
        let st = Self { z };
        st.check_positive(mesh)?;
        Ok(st)
    }

    fn check_positive(&self, mesh: &QcMesh) -> Result<(), MeshError> {
        for (s, v) in self.spacings(mesh).into_iter().enumerate() {
            if !(v > 0.0) {
                return Err(MeshError::NonPositiveSpacing { element: mesh.index(s), value: v });
            }
        }
        Ok(())
    }

    pub fn positions(&self) -> &[f64] {
        &self.z
    }

    pub fn right_end(&self) -> f64 {
        self.z[self.z.len() - 1]
    }

    /// `r_j = (z_{j+1} - z_j) / ν_j`.
    pub fn spacings(&self, mesh: &QcMesh) -> Vec<f64> {
        self.z
            .windows(2)
            .enumerate()
            .map(|(s, w)| (w[1] - w[0]) / mesh.nu(mesh.index(s)) as f64)
            .collect()
    }

    /// `D_j = r_j / a₀`.
    pub fn deformation_gradients(&self, mesh: &QcMesh) -> Vec<f64> {
        self.spacings(mesh).into_iter().map(|r| r / mesh.a0()).collect()
    }
}

/// Line-oriented text form of a mesh and state:
///
/// ```text
/// qcmesh 1
/// M <M> N <N> K <K>
/// a0 <a0>
/// ell <l_-N> ... <l_N+1>
/// z <z_-N> ... <z_N+1>
/// ```
///
/// Floats use the shortest representation that parses back to the same bits.
pub fn write_mesh_state(mesh: &QcMesh, state: &RepState) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "qcmesh 1");
    let _ = writeln!(out, "M {} N {} K {}", mesh.m(), mesh.n(), mesh.k());
    let _ = writeln!(out, "a0 {:?}", mesh.a0());
    let ell: Vec<String> = mesh.ell_all().iter().map(|v| v.to_string()).collect();
    let _ = writeln!(out, "ell {}", ell.join(" "));
    let z: Vec<String> = state.positions().iter().map(|v| format!("{v:?}")).collect();
    let _ = writeln!(out, "z {}", z.join(" "));
    out
}

pub fn read_mesh_state(text: &str) -> Result<(QcMesh, RepState), MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut next = |tag: &str| -> Result<(usize, Vec<String>), MeshError> {
        let (no, line) = lines.next().ok_or(MeshError::Parse { line: 0, msg: format!("missing `{tag}` line") })?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(tag) {
            return Err(MeshError::Parse { line: no, msg: format!("expected `{tag}`") });
        }
        Ok((no, parts.map(str::to_owned).collect()))
    };
    fn num<T: std::str::FromStr>(no: usize, s: &str) -> Result<T, MeshError> {
        s.parse().map_err(|_| MeshError::Parse { line: no, msg: format!("bad number `{s}`") })
    }

    let (no, version) = next("qcmesh")?;
    if version.first().map(String::as_str) != Some("1") {
        return Err(MeshError::Parse { line: no, msg: "unsupported version".into() });
    }
    let (no, sizes) = next("M")?;
    if sizes.len() != 5 || sizes[1] != "N" || sizes[3] != "K" {
        return Err(MeshError::Parse { line: no, msg: "expected `M <m> N <n> K <k>`".into() });
    }
    let (m, n, k): (usize, usize, usize) = (num(no, &sizes[0])?, num(no, &sizes[2])?, num(no, &sizes[4])?);
    let (no, a0) = next("a0")?;
    let a0: f64 = num(no, a0.first().map(String::as_str).unwrap_or(""))?;
    let (no, ell) = next("ell")?;
    let ell: Vec<i64> = ell.iter().map(|s| num(no, s)).collect::<Result<_, _>>()?;
    let (no, z) = next("z")?;
    let z: Vec<f64> = z.iter().map(|s| num(no, s)).collect::<Result<_, _>>()?;

    let mesh = QcMesh::new(ell, k, a0)?;
    if mesh.m() != m || mesh.n() != n {
        return Err(MeshError::Parse { line: 2, msg: format!("header sizes M={m}, N={n} disagree with ell") });
    }
    let state = RepState::from_positions(&mesh, z)?;
    Ok((mesh, state))
}
