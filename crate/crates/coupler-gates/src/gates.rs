//! Ideal one- and two-qubit unitaries (two-qubit order |00>, |01>, |10>, |11>, QB1 first).

use std::f64::consts::FRAC_1_SQRT_2;

use crate::linalg::{c, CMat, C64, I, ONE, ZERO};

/// exp(−iθσ_x/2)
pub fn rx(theta: f64) -> CMat {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    CMat::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -si), c(0.0, -si), c(co, 0.0)])
}

/// exp(−iθσ_y/2)
pub fn ry(theta: f64) -> CMat {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    CMat::from_row_slice(2, 2, &[c(co, 0.0), c(-si, 0.0), c(si, 0.0), c(co, 0.0)])
}

/// exp(−iθσ_z/2)
pub fn rz(theta: f64) -> CMat {
    CMat::from_row_slice(
        2,
        2,
        &[C64::from_polar(1.0, -theta / 2.0), ZERO, ZERO, C64::from_polar(1.0, theta / 2.0)],
    )
}

/// diag(1, e^{iθ}): phase θ on the excited state.
pub fn zphase(theta: f64) -> CMat {
    CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, C64::from_polar(1.0, theta)])
}

pub fn pauli(k: usize) -> CMat {
    match k {
        0 => CMat::identity(2, 2),
        1 => CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("pauli index {k} out of range"),
    }
}

/// Two-qubit Pauli P_{k/4} ⊗ P_{k%4} (II, IX, IY, IZ, XI, ...).
pub fn pauli2(k: usize) -> CMat {
    pauli(k / 4).kronecker(&pauli(k % 4))
}

pub fn cz() -> CMat {
    CMat::from_diagonal(&crate::linalg::CVec::from_vec(vec![ONE, ONE, ONE, -ONE]))
}

pub fn iswap() -> CMat {
    let mut u = CMat::zeros(4, 4);
    u[(0, 0)] = ONE;
    u[(1, 2)] = I;
    u[(2, 1)] = I;
    u[(3, 3)] = ONE;
    u
}

pub fn swap() -> CMat {
    let mut u = CMat::zeros(4, 4);
    u[(0, 0)] = ONE;
    u[(1, 2)] = ONE;
    u[(2, 1)] = ONE;
    u[(3, 3)] = ONE;
    u
}

/// Control QB1, target QB2.
pub fn cnot() -> CMat {
    let mut u = CMat::zeros(4, 4);
    u[(0, 0)] = ONE;
    u[(1, 1)] = ONE;
    u[(2, 3)] = ONE;
    u[(3, 2)] = ONE;
    u
}

pub fn local(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// CZ dressed with local phases: diag(1, e^{iθ2}, e^{iθ1}, e^{i(θ1+θ2+φ)}).
pub fn cphase_with_z(phi: f64, theta1: f64, theta2: f64) -> CMat {
    CMat::from_diagonal(&crate::linalg::CVec::from_vec(vec![
        ONE,
        C64::from_polar(1.0, theta2),
        C64::from_polar(1.0, theta1),
        C64::from_polar(1.0, theta1 + theta2 + phi),
    ]))
}

/// iSWAP dressed with local phases: ⟨01|U|10⟩ = i e^{ib}, ⟨10|U|01⟩ = i e^{ia},
/// ⟨11|U|11⟩ = e^{i(a + b + φ)}.
pub fn iswap_with_z(a: f64, b: f64, phi: f64) -> CMat {
    let mut u = CMat::zeros(4, 4);
    u[(0, 0)] = ONE;
    u[(1, 2)] = I * C64::from_polar(1.0, b);
    u[(2, 1)] = I * C64::from_polar(1.0, a);
    u[(3, 3)] = C64::from_polar(1.0, a + b + phi);
    u
}

/// Amplitudes of |+>.
pub fn plus() -> [C64; 2] {
    [c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::equal_up_to_phase;
    use std::f64::consts::PI;

    #[test]
    fn euler_triple_is_z_rotation() {
        for deg in [30.0f64, 90.0, 137.0] {
            let th = deg.to_radians();
            // time order Rx(−π/2), Ry(θ), Rx(π/2)
            let u = rx(PI / 2.0) * ry(th) * rx(-PI / 2.0);
            assert!(equal_up_to_phase(&u, &zphase(th), 1e-12), "{deg}");
        }
    }

    #[test]
    fn iswap_squared() {
        let u = iswap() * iswap();
        let want = CMat::from_diagonal(&crate::linalg::CVec::from_vec(vec![ONE, -ONE, -ONE, ONE]));
        assert!((u - want).iter().all(|z| z.norm() < 1e-15));
    }
}
