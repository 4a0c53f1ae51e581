//! Operators on the QB1 ⊗ CPLR ⊗ QB2 Hilbert space.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, to_complex, CMat, Eigh, RMat, C64};

pub const TWO_PI: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubsystemId {
    Qb1,
    Cplr,
    Qb2,
}

impl SubsystemId {
    pub const ALL: [SubsystemId; 3] = [SubsystemId::Qb1, SubsystemId::Cplr, SubsystemId::Qb2];

    pub fn position(self) -> usize {
        match self {
            SubsystemId::Qb1 => 0,
            SubsystemId::Cplr => 1,
            SubsystemId::Qb2 => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisLabel {
    pub n1: usize,
    pub nc: usize,
    pub n2: usize,
}

impl BasisLabel {
    pub const fn new(n1: usize, nc: usize, n2: usize) -> Self {
        BasisLabel { n1, nc, n2 }
    }

    pub fn excitations(&self) -> usize {
        self.n1 + self.nc + self.n2
    }

    /// Two-qubit computational index 2·n1 + n2, if the label is computational.
    pub fn computational_index(&self) -> Option<usize> {
        (self.nc == 0 && self.n1 < 2 && self.n2 < 2).then_some(2 * self.n1 + self.n2)
    }

    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('|').trim_end_matches('>').trim_end_matches('⟩');
        let digits: Vec<usize> = t
            .chars()
            .map(|ch| ch.to_digit(10).map(|d| d as usize))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Argument(format!("bad basis label `{s}`")))?;
        if digits.len() != 3 {
            return Err(Error::Argument(format!("bad basis label `{s}`")));
        }
        Ok(BasisLabel::new(digits[0], digits[1], digits[2]))
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}{}{}>", self.n1, self.nc, self.n2)
    }
}

/// Computational states in the order |00>, |01>, |10>, |11> (QB1 first).
pub const COMPUTATIONAL: [BasisLabel; 4] = [
    BasisLabel::new(0, 0, 0),
    BasisLabel::new(0, 0, 1),
    BasisLabel::new(1, 0, 0),
    BasisLabel::new(1, 0, 1),
];

/// Truncation of each element; QB1 and QB2 share a level count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Space {
    pub levels: [usize; 3],
}

impl Space {
    pub fn new(qubit_levels: usize, coupler_levels: usize) -> Result<Self> {
        if qubit_levels < 2 || coupler_levels < 2 {
            return Err(Error::Argument("levels must be at least 2".into()));
        }
        Ok(Space {
            levels: [qubit_levels, coupler_levels, qubit_levels],
        })
    }

    pub fn uniform(levels: usize) -> Result<Self> {
        Self::new(levels, levels)
    }

    pub fn qutrits() -> Self {
        Space { levels: [3, 3, 3] }
    }

    pub fn dim(&self) -> usize {
        self.levels.iter().product()
    }

    pub fn contains(&self, l: BasisLabel) -> bool {
        l.n1 < self.levels[0] && l.nc < self.levels[1] && l.n2 < self.levels[2]
    }

    pub fn index(&self, l: BasisLabel) -> Result<usize> {
        if !self.contains(l) {
            return Err(Error::Argument(format!("{l} outside truncation {:?}", self.levels)));
        }
        Ok((l.n1 * self.levels[1] + l.nc) * self.levels[2] + l.n2)
    }

    pub fn label(&self, idx: usize) -> BasisLabel {
        let n2 = idx % self.levels[2];
        let rest = idx / self.levels[2];
        BasisLabel::new(rest / self.levels[1], rest % self.levels[1], n2)
    }

    pub fn labels(&self) -> impl Iterator<Item = BasisLabel> + '_ {
        (0..self.dim()).map(|i| self.label(i))
    }

    pub fn occupation(&self, idx: usize, sub: SubsystemId) -> usize {
        let l = self.label(idx);
        match sub {
            SubsystemId::Qb1 => l.n1,
            SubsystemId::Cplr => l.nc,
            SubsystemId::Qb2 => l.n2,
        }
    }

    /// Real lowering operator of one element embedded in the full space.
    pub fn lowering(&self, sub: SubsystemId) -> RMat {
        let d = self.dim();
        let mut b = RMat::zeros(d, d);
        for col in 0..d {
            let n = self.occupation(col, sub);
            if n == 0 {
                continue;
            }
            let mut l = self.label(col);
            match sub {
                SubsystemId::Qb1 => l.n1 -= 1,
                SubsystemId::Cplr => l.nc -= 1,
                SubsystemId::Qb2 => l.n2 -= 1,
            }
            let row = self.index(l).expect("lowered label stays in range");
            b[(row, col)] = (n as f64).sqrt();
        }
        b
    }
}

/// Lowering operator b_sub on a uniform `levels`-per-element space.
pub fn build_ladder(sub: SubsystemId, levels: usize) -> Result<CMat> {
    let space = Space::uniform(levels)?;
    Ok(to_complex(&space.lowering(sub)))
}

/// Linear frequencies and couplings in GHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemFrequencies {
    pub f1: f64,
    pub fc: f64,
    pub f2: f64,
    pub eta1: f64,
    pub etac: f64,
    pub eta2: f64,
    pub g1c: f64,
    pub g2c: f64,
    pub g12: f64,
}

/// Precomputed operator pieces; `build` assembles H in rad/ns.
///
/// Each pair couples through −g·(b_i − b_i†)(b_j − b_j†), which makes every
/// exchange matrix element +g.
#[derive(Clone, Debug)]
pub struct HamiltonianBuilder {
    pub space: Space,
    number: [Vec<f64>; 3],
    kerr: [Vec<f64>; 3],
    x1c: RMat,
    x2c: RMat,
    x12: RMat,
    pub rotating_wave: bool,
}

impl HamiltonianBuilder {
    pub fn new(space: Space) -> Self {
        Self::with_options(space, false)
    }

    /// With `rotating_wave` the counter-rotating b_i b_j and b_i† b_j† terms are dropped
    /// (diagnostic mode that conserves excitation number).
    pub fn with_options(space: Space, rotating_wave: bool) -> Self {
        let d = space.dim();
        let mut number: [Vec<f64>; 3] = Default::default();
        let mut kerr: [Vec<f64>; 3] = Default::default();
        for sub in SubsystemId::ALL {
            let p = sub.position();
            number[p] = (0..d).map(|i| space.occupation(i, sub) as f64).collect();
            kerr[p] = number[p].iter().map(|n| n * (n - 1.0)).collect();
        }
        let b: Vec<RMat> = SubsystemId::ALL.iter().map(|&s| space.lowering(s)).collect();
        let pair = |i: usize, j: usize| -> RMat {
            let (bi, bj) = (&b[i], &b[j]);
            if rotating_wave {
                -(bi * bj.transpose() + bi.transpose() * bj)
            } else {
                (bi - bi.transpose()) * (bj - bj.transpose())
            }
        };
        HamiltonianBuilder {
            space,
            number,
            kerr,
            x1c: pair(0, 1),
            x2c: pair(2, 1),
            x12: pair(0, 2),
            rotating_wave,
        }
    }

    /// Real-symmetric Hamiltonian in rad/ns.
    pub fn build_real(&self, f: &SystemFrequencies) -> RMat {
        let d = self.space.dim();
        let mut h: RMat = (&self.x1c * (-f.g1c)) + (&self.x2c * (-f.g2c)) + (&self.x12 * (-f.g12));
        let freqs = [f.f1, f.fc, f.f2];
        let etas = [f.eta1, f.etac, f.eta2];
        for i in 0..d {
            let mut e = 0.0;
            for p in 0..3 {
                e += freqs[p] * self.number[p][i] + 0.5 * etas[p] * self.kerr[p][i];
            }
            h[(i, i)] += e;
        }
        h * TWO_PI
    }

    pub fn build(&self, f: &SystemFrequencies) -> CMat {
        to_complex(&self.build_real(f))
    }

    /// Diagonal part only, in rad/ns (bare energies).
    pub fn bare_energy(&self, f: &SystemFrequencies, idx: usize) -> f64 {
        let freqs = [f.f1, f.fc, f.f2];
        let etas = [f.eta1, f.etac, f.eta2];
        (0..3)
            .map(|p| freqs[p] * self.number[p][idx] + 0.5 * etas[p] * self.kerr[p][idx])
            .sum::<f64>()
            * TWO_PI
    }
}

pub fn build_hamiltonian(freqs: &SystemFrequencies, levels: usize) -> Result<CMat> {
    Ok(HamiltonianBuilder::new(Space::uniform(levels)?).build(freqs))
}

pub fn eigen_solve(h: &CMat) -> Result<Eigh> {
    eigh(h)
}

/// Greedy injective assignment bare label → eigenvector by descending overlap.
#[derive(Clone, Debug)]
pub struct Labeling {
    pub space: Space,
    pub eig: Eigh,
    /// eigen index per flat bare index
    pub assignment: Vec<usize>,
    /// |⟨bare|eig⟩|² of the assigned pair
    pub overlap: Vec<f64>,
}

impl Labeling {
    /// Eigen index of a label; overlap below 0.5 is an ambiguity error.
    pub fn index_of(&self, l: BasisLabel) -> Result<usize> {
        let i = self.space.index(l)?;
        if self.overlap[i] < 0.5 {
            return Err(Error::Ambiguous {
                label: l.to_string(),
                overlap: self.overlap[i],
            });
        }
        Ok(self.assignment[i])
    }

    pub fn energy(&self, l: BasisLabel) -> Result<f64> {
        Ok(self.eig.values[self.index_of(l)?])
    }
}

pub fn label_eigenstates(h: &CMat, space: Space) -> Result<Labeling> {
    let eig = eigh(h)?;
    let d = space.dim();
    if h.nrows() != d {
        return Err(Error::Argument("Hamiltonian dimension does not match space".into()));
    }
    let mut pairs = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            pairs.push((eig.vectors[(i, j)].norm_sqr(), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assignment = vec![usize::MAX; d];
    let mut overlap = vec![0.0; d];
    let mut taken = vec![false; d];
    for (w, i, j) in pairs {
        if assignment[i] == usize::MAX && !taken[j] {
            assignment[i] = j;
            overlap[i] = w;
            taken[j] = true;
        }
    }
    Ok(Labeling {
        space,
        eig,
        assignment,
        overlap,
    })
}

/// Dressed basis with one vector per bare label.
///
/// Eigenvalues closer than `cluster_tol` are treated as one block and the bare
/// states assigned to that block are symmetrically (Löwdin) orthonormalized
/// after projection onto it. Isolated states reduce to max-overlap eigenvectors.
#[derive(Clone, Debug)]
pub struct DressedBasis {
    pub space: Space,
    /// column k is the dressed state of flat label k
    pub vectors: CMat,
    /// ⟨k|H|k⟩ in rad/ns
    pub energies: Vec<f64>,
    /// |⟨bare k|dressed k⟩|²
    pub overlap: Vec<f64>,
}

/// 5 MHz in rad/ns.
pub const DEFAULT_CLUSTER_TOL: f64 = TWO_PI * 0.005;

impl DressedBasis {
    pub fn new(h: &CMat, space: Space) -> Result<Self> {
        Self::with_tolerance(h, space, DEFAULT_CLUSTER_TOL)
    }

    pub fn with_tolerance(h: &CMat, space: Space, cluster_tol: f64) -> Result<Self> {
        let eig = eigh(h)?;
        let d = space.dim();
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for j in 0..d {
            match clusters.last_mut() {
                Some(c) if eig.values[j] - eig.values[*c.last().unwrap()] < cluster_tol => c.push(j),
                _ => clusters.push(vec![j]),
            }
        }
        let weight = |i: usize, c: &[usize]| c.iter().map(|&j| eig.vectors[(i, j)].norm_sqr()).sum::<f64>();
        let mut triples = Vec::new();
        for (ci, c) in clusters.iter().enumerate() {
            for i in 0..d {
                triples.push((weight(i, c), i, ci));
            }
        }
        triples.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut owner = vec![usize::MAX; d];
        let mut room: Vec<usize> = clusters.iter().map(|c| c.len()).collect();
        for (_, i, ci) in triples {
            if owner[i] == usize::MAX && room[ci] > 0 {
                owner[i] = ci;
                room[ci] -= 1;
            }
        }
        let mut vectors = CMat::zeros(d, d);
        for (ci, c) in clusters.iter().enumerate() {
            let labels: Vec<usize> = (0..d).filter(|&i| owner[i] == ci).collect();
            let m = c.len();
            let mut vc = CMat::zeros(d, m);
            for (k, &j) in c.iter().enumerate() {
                vc.set_column(k, &eig.vectors.column(j));
            }
            // projections of bare vectors onto the block: column k = V V† e_label
            let mut p = CMat::zeros(d, m);
            for (k, &i) in labels.iter().enumerate() {
                let coeffs = vc.row(i).adjoint();
                p.set_column(k, &(&vc * coeffs));
            }
            let s = p.adjoint() * &p;
            let se = eigh(&((&s + s.adjoint()) * C64::new(0.5, 0.0)))?;
            if se.values[0] < 1e-12 {
                return Err(Error::numerical("qutrit-algebra", "degenerate dressed block"));
            }
            let mut inv_sqrt = CMat::zeros(m, m);
            for k in 0..m {
                let w = 1.0 / se.values[k].sqrt();
                let col = se.vectors.column(k);
                inv_sqrt += (col * col.adjoint()) * C64::new(w, 0.0);
            }
            let q = p * inv_sqrt;
            for (k, &i) in labels.iter().enumerate() {
                vectors.set_column(i, &q.column(k));
            }
        }
        let energies = (0..d)
            .map(|k| {
                let v = vectors.column(k);
                (v.adjoint() * h * v)[(0, 0)].re
            })
            .collect();
        let overlap = (0..d).map(|k| vectors[(k, k)].norm_sqr()).collect();
        Ok(DressedBasis {
            space,
            vectors,
            energies,
            overlap,
        })
    }

    pub fn state(&self, l: BasisLabel) -> Result<crate::linalg::CVec> {
        Ok(self.vectors.column(self.space.index(l)?).into_owned())
    }

    pub fn energy(&self, l: BasisLabel) -> Result<f64> {
        Ok(self.energies[self.space.index(l)?])
    }

    /// d×4 isometry onto the dressed computational states.
    pub fn computational(&self) -> CMat {
        let d = self.space.dim();
        let mut p = CMat::zeros(d, 4);
        for (k, l) in COMPUTATIONAL.iter().enumerate() {
            p.set_column(k, &self.vectors.column(self.space.index(*l).unwrap()));
        }
        p
    }

    /// Dressed transition frequencies (rad/ns) of QB1, CPLR, QB2 relative to |000>.
    pub fn element_frequencies(&self) -> [f64; 3] {
        let e0 = self.energies[0];
        let e = |l| self.energy(l).unwrap() - e0;
        [e(BasisLabel::new(1, 0, 0)), e(BasisLabel::new(0, 1, 0)), e(BasisLabel::new(0, 0, 1))]
    }

    /// Harmonic rotating-frame energy of a label built from the dressed element frequencies.
    pub fn frame_energy(&self, l: BasisLabel) -> f64 {
        let w = self.element_frequencies();
        self.energies[0] + l.n1 as f64 * w[0] + l.nc as f64 * w[1] + l.n2 as f64 * w[2]
    }
}

/// Real matrix of the dressed basis in bare coordinates (for tests and diagnostics).
pub fn overlap_matrix(db: &DressedBasis) -> DMatrix<f64> {
    db.vectors.map(|z| z.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, hermiticity_error};

    fn idle_frequencies() -> SystemFrequencies {
        SystemFrequencies {
            f1: 4.16,
            fc: 5.45,
            f2: 4.00,
            eta1: -0.220,
            etac: -0.090,
            eta2: -0.210,
            g1c: 0.0725,
            g2c: 0.0715,
            g12: 0.005,
        }
    }

    #[test]
    fn flat_index_round_trip() {
        let s = Space::new(3, 2).unwrap();
        for i in 0..s.dim() {
            assert_eq!(s.index(s.label(i)).unwrap(), i);
        }
        assert_eq!(Space::qutrits().index(BasisLabel::new(1, 0, 1)).unwrap(), 10);
    }

    #[test]
    fn ladder_entries() {
        let b = build_ladder(SubsystemId::Qb1, 2).unwrap();
        assert_eq!(b.nrows(), 8);
        let nz: Vec<_> = b.iter().filter(|z| z.norm() > 0.0).collect();
        assert_eq!(nz.len(), 4);
        assert!(nz.iter().all(|z| (z.re - 1.0).abs() < 1e-15));
        let bc = build_ladder(SubsystemId::Cplr, 3).unwrap();
        let s = Space::qutrits();
        let i1 = s.index(BasisLabel::new(0, 1, 0)).unwrap();
        let i2 = s.index(BasisLabel::new(0, 2, 0)).unwrap();
        let i0 = s.index(BasisLabel::new(0, 0, 0)).unwrap();
        assert!((bc[(i0, i1)].re - 1.0).abs() < 1e-15);
        assert!((bc[(i1, i2)].re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn number_operator_is_diagonal() {
        for sub in SubsystemId::ALL {
            let s = Space::qutrits();
            let b = s.lowering(sub);
            let n = b.transpose() * &b;
            for i in 0..s.dim() {
                for j in 0..s.dim() {
                    let want = if i == j { s.occupation(i, sub) as f64 } else { 0.0 };
                    assert!((n[(i, j)] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn truncated_commutator_on_low_block() {
        let s = Space::qutrits();
        let b = s.lowering(SubsystemId::Cplr);
        let comm = &b * b.transpose() - b.transpose() * &b;
        for i in 0..s.dim() {
            if s.occupation(i, SubsystemId::Cplr) < 2 {
                assert!((comm[(i, i)] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_and_decoupled_ladder() {
        let mut f = idle_frequencies();
        let h = build_hamiltonian(&f, 3).unwrap();
        assert!(hermiticity_error(&h) < 1e-12);
        f.g1c = 0.0;
        f.g2c = 0.0;
        f.g12 = 0.0;
        let h0 = build_hamiltonian(&f, 3).unwrap();
        let e = eigen_solve(&h0).unwrap();
        let s = Space::qutrits();
        let mut want: Vec<f64> = s
            .labels()
            .map(|l| {
                let (a, b, c) = (l.n1 as f64, l.nc as f64, l.n2 as f64);
                TWO_PI
                    * (f.f1 * a + f.eta1 * a * (a - 1.0) / 2.0 + f.fc * b + f.etac * b * (b - 1.0) / 2.0
                        + f.f2 * c + f.eta2 * c * (c - 1.0) / 2.0)
            })
            .collect();
        want.sort_by(f64::total_cmp);
        for (x, y) in e.values.iter().zip(&want) {
            assert!((x - y).abs() < 1e-10);
        }
        let idx200 = s.index(BasisLabel::new(2, 0, 0)).unwrap();
        assert!((h0[(idx200, idx200)].re - TWO_PI * (2.0 * f.f1 + f.eta1)).abs() < 1e-12);
    }

    #[test]
    fn exchange_elements_are_positive() {
        let mut f = idle_frequencies();
        f.g1c = 0.0;
        f.g2c = 0.0;
        let h = build_hamiltonian(&f, 3).unwrap();
        let s = Space::qutrits();
        let a = s.index(BasisLabel::new(1, 0, 0)).unwrap();
        let b = s.index(BasisLabel::new(0, 0, 1)).unwrap();
        assert!((h[(a, b)].re - TWO_PI * f.g12).abs() < 1e-14);
    }

    #[test]
    fn idle_labeling_is_clean() {
        let h = build_hamiltonian(&idle_frequencies(), 3).unwrap();
        let lab = label_eigenstates(&h, Space::qutrits()).unwrap();
        let i = Space::qutrits().index(BasisLabel::new(1, 0, 1)).unwrap();
        assert!(lab.overlap[i] > 0.99);
    }

    #[test]
    fn degenerate_crossing_is_ambiguous() {
        let mut f = idle_frequencies();
        f.f2 = f.f1;
        f.g1c = 0.0;
        f.g2c = 0.0;
        f.g12 = 0.01;
        let h = build_hamiltonian(&f, 3).unwrap();
        let lab = label_eigenstates(&h, Space::qutrits()).unwrap();
        assert!(matches!(lab.index_of(BasisLabel::new(1, 0, 0)), Err(Error::Ambiguous { .. })));
    }

    #[test]
    fn dressed_basis_is_orthonormal_at_resonance() {
        let mut f = idle_frequencies();
        f.f2 = f.f1;
        f.fc = 5.8;
        let h = build_hamiltonian(&f, 3).unwrap();
        let db = DressedBasis::new(&h, Space::qutrits()).unwrap();
        let g = db.vectors.adjoint() * &db.vectors;
        assert!(frobenius(&(g - CMat::identity(27, 27))) < 1e-10);
        assert!(db.overlap[Space::qutrits().index(BasisLabel::new(1, 0, 0)).unwrap()] > 0.95);
    }

    #[test]
    fn rotating_wave_conserves_excitations() {
        let b = HamiltonianBuilder::with_options(Space::qutrits(), true);
        let h = b.build_real(&idle_frequencies());
        let s = Space::qutrits();
        for i in 0..27 {
            for j in 0..27 {
                if s.label(i).excitations() != s.label(j).excitations() {
                    assert_eq!(h[(i, j)], 0.0);
                }
            }
        }
    }
}
