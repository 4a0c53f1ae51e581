//! Dense complex matrix helpers shared by every module.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ‖H − H†‖_F / ‖H‖_F (0 for the zero matrix).
pub fn hermiticity_error(m: &CMat) -> f64 {
    let n = frobenius(m);
    if n == 0.0 {
        return 0.0;
    }
    frobenius(&(m - m.adjoint())) / n
}

/// Largest |U†U − I| entry.
pub fn unitarity_error(u: &CMat) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - identity(n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct Eigh {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, largest component real-positive.
    pub vectors: CMat,
}

fn fix_phase(v: &mut CMat) {
    for j in 0..v.ncols() {
        let mut best = 0;
        let mut mag = -1.0;
        for i in 0..v.nrows() {
            let m = v[(i, j)].norm();
            if m > mag + 1e-12 {
                mag = m;
                best = i;
            }
        }
        let ph = v[(best, j)] / v[(best, j)].norm();
        let inv = ph.conj();
        for i in 0..v.nrows() {
            v[(i, j)] *= inv;
        }
    }
}

fn sorted(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

/// Hermitian eigendecomposition. Real-symmetric input takes the real solver.
pub fn eigh(h: &CMat) -> Result<Eigh> {
    if h.nrows() != h.ncols() {
        return Err(Error::Validation("eigen_solve needs a square matrix".into()));
    }
    let herr = hermiticity_error(h);
    if herr > 1e-12 {
        return Err(Error::Validation(format!(
            "matrix is not Hermitian (relative error {herr:e})"
        )));
    }
    let n = h.nrows();
    let is_real = h.iter().all(|z| z.im == 0.0);
    let (vals, vecs) = if is_real {
        let e = SymmetricEigen::new(h.map(|z| z.re));
        (e.eigenvalues.iter().copied().collect::<Vec<_>>(), to_complex(&e.eigenvectors))
    } else {
        let e = SymmetricEigen::new(h.clone());
        (e.eigenvalues.iter().copied().collect::<Vec<_>>(), e.eigenvectors)
    };
    let order = sorted(&vals);
    let mut vectors = CMat::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        values.push(vals[j]);
        vectors.set_column(k, &vecs.column(j));
    }
    fix_phase(&mut vectors);
    Ok(Eigh { values, vectors })
}

/// exp(−i·H·t) for real-symmetric H, via its eigendecomposition (exactly unitary up to rounding).
pub fn expm_real_symmetric(h: &RMat, t: f64) -> CMat {
    let e = SymmetricEigen::new(h.clone());
    let n = h.nrows();
    let v = &e.eigenvectors;
    let mut scaled = CMat::zeros(n, n);
    for j in 0..n {
        let ph = C64::from_polar(1.0, -e.eigenvalues[j] * t);
        for i in 0..n {
            scaled[(i, j)] = ph * v[(i, j)];
        }
    }
    let vc = to_complex(v);
    scaled * vc.transpose()
}

/// exp(−i·H·t) for complex Hermitian H.
pub fn expm_hermitian(h: &CMat, t: f64) -> Result<CMat> {
    let e = eigh(h)?;
    let n = h.nrows();
    let mut scaled = e.vectors.clone();
    for j in 0..n {
        let ph = C64::from_polar(1.0, -e.values[j] * t);
        for i in 0..n {
            scaled[(i, j)] *= ph;
        }
    }
    Ok(scaled * e.vectors.adjoint())
}

/// Principal angle wrapped to (−180°, 180°].
pub fn wrap_deg(x: f64) -> f64 {
    let mut y = x % 360.0;
    if y <= -180.0 {
        y += 360.0;
    } else if y > 180.0 {
        y -= 360.0;
    }
    y
}

pub fn arg_deg(z: C64) -> f64 {
    z.arg().to_degrees()
}

/// ρ → U ρ U†
pub fn conjugate(u: &CMat, rho: &CMat) -> CMat {
    u * rho * u.adjoint()
}

/// Canonical global-phase-free key for small unitaries (Clifford hashing).
pub fn phase_key(u: &CMat, grid: f64) -> Vec<i64> {
    let mut ph = ONE;
    for z in u.iter() {
        if z.norm() > 1e-6 {
            ph = z.conj() / z.norm();
            break;
        }
    }
    // column-major iteration is fine as long as it is consistent
    let mut key = Vec::with_capacity(2 * u.len());
    for z in u.iter() {
        let w = z * ph;
        key.push((w.re / grid).round() as i64);
        key.push((w.im / grid).round() as i64);
    }
    key
}

/// |⟨a|b⟩|² / (‖a‖²‖b‖²) style check that two unitaries agree up to a global phase.
pub fn equal_up_to_phase(a: &CMat, b: &CMat, tol: f64) -> bool {
    if a.shape() != b.shape() {
        return false;
    }
    let n = a.nrows() as f64;
    let overlap = (a.adjoint() * b).trace();
    let ph = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        return false;
    };
    let diff = a * ph - b;
    frobenius(&diff) / n.sqrt() < tol
}

/// Solve the dense linear system A x = b.
pub fn solve(a: &RMat, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::numerical("linalg", "singular linear system"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_input_is_sorted() {
        let h = CMat::from_diagonal(&CVec::from_vec(vec![c(3.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0)]));
        let e = eigh(&h).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_level_gap() {
        let (g, d) = (0.07, 0.3);
        let h = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(g, 0.0), c(g, 0.0), c(d, 0.0)]);
        let e = eigh(&h).unwrap();
        let gap = e.values[1] - e.values[0];
        assert!((gap - (d * d + 4.0 * g * g).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn complex_hermitian_path() {
        let h = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(-1.0, 0.0)]);
        let e = eigh(&h).unwrap();
        let recon = &e.vectors * CMat::from_diagonal(&CVec::from_iterator(2, e.values.iter().map(|&x| c(x, 0.0)))) * e.vectors.adjoint();
        assert!(frobenius(&(recon - &h)) < 1e-12);
        assert!(unitarity_error(&e.vectors) < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let h = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(eigh(&h), Err(Error::Validation(_))));
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_deg(180.0), 180.0);
        assert_eq!(wrap_deg(-180.0), 180.0);
        assert!((wrap_deg(576.0) - (-144.0)).abs() < 1e-12);
        assert!((wrap_deg(-576.0) - 144.0).abs() < 1e-12);
    }

    #[test]
    fn expm_matches_hermitian_path() {
        let h = RMat::from_row_slice(2, 2, &[0.3, 0.1, 0.1, -0.2]);
        let a = expm_real_symmetric(&h, 1.7);
        let b = expm_hermitian(&to_complex(&h), 1.7).unwrap();
        assert!(frobenius(&(a - b)) < 1e-13);
    }
}
