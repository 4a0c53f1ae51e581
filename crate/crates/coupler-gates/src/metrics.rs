//! Gate-level observables: conditional phase, swap angle, sinusoid fits, process
//! tomography, fidelities, repeated-gate ZZ accumulation and frame bookkeeping.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::Serialize;

use crate::dynamics::QuantumChannel;
use crate::error::{Error, Result};
use crate::gates::pauli2;
use crate::linalg::{c, wrap_deg, CMat, CVec, C64, ONE};
use crate::qutrit::{BasisLabel, DressedBasis};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct GatePhases {
    /// Conditional phase (deg).
    pub phi_cz: f64,
    /// Local Z phases of QB1 and QB2 (deg).
    pub theta_z1: f64,
    pub theta_z2: f64,
}

fn arg(z: C64) -> f64 {
    z.arg()
}

/// Conditional phase and local phases from the four diagonal elements of a 4×4 block.
pub fn conditional_phase(u: &CMat) -> Result<GatePhases> {
    let mags: [f64; 4] = std::array::from_fn(|k| u[(k, k)].norm());
    if mags.iter().any(|&m| m <= 0.9) {
        return Err(Error::NotCzLike { magnitudes: mags });
    }
    let a: [f64; 4] = std::array::from_fn(|k| arg(u[(k, k)]));
    Ok(GatePhases {
        phi_cz: wrap_deg((a[3] + a[0] - a[1] - a[2]).to_degrees()),
        theta_z1: wrap_deg((a[2] - a[0]).to_degrees()),
        theta_z2: wrap_deg((a[1] - a[0]).to_degrees()),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct IswapPhases {
    /// ⟨10|U|01⟩ = i·e^{ia} (deg)
    pub a: f64,
    /// ⟨01|U|10⟩ = i·e^{ib} (deg)
    pub b: f64,
    /// Residual conditional phase arg⟨11|U|11⟩ − a − b (deg).
    pub phi_zz: f64,
}

/// Local and conditional phases of an iSWAP-like block, relative to ⟨00|U|00⟩.
pub fn iswap_phases(u: &CMat) -> IswapPhases {
    let a0 = arg(u[(0, 0)]);
    let b = arg(u[(1, 2)]) - a0 - PI / 2.0;
    let a = arg(u[(2, 1)]) - a0 - PI / 2.0;
    let phi = arg(u[(3, 3)]) + a0 - arg(u[(1, 2)]) - arg(u[(2, 1)]) - PI;
    IswapPhases {
        a: wrap_deg(a.to_degrees()),
        b: wrap_deg(b.to_degrees()),
        phi_zz: wrap_deg(phi.to_degrees()),
    }
}

/// θ = atan(p001/p100) in degrees.
pub fn swap_angle(p001: f64, p100: f64) -> Result<f64> {
    if !(p001 + p100 > 0.9) {
        return Err(Error::numerical(
            "metrics-tomography",
            format!("excitation lost: p001 + p100 = {:.4} ≤ 0.9", p001 + p100),
        ));
    }
    Ok(p001.atan2(p100).to_degrees())
}

/// p(t) = offset + amplitude·cos(2π·frequency·t + phase)
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SinusoidFit {
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    pub rms: f64,
}

fn linear_part(t: &[f64], p: &[f64], f: f64) -> (f64, f64, f64, f64) {
    let n = t.len();
    let a = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => (2.0 * PI * f * t[i]).cos(),
        _ => (2.0 * PI * f * t[i]).sin(),
    });
    let y = DVector::from_column_slice(p);
    let ata = a.transpose() * &a;
    let aty = a.transpose() * &y;
    let x = ata.lu().solve(&aty).unwrap_or_else(|| DVector::zeros(3));
    let r = &a * &x - y;
    (x[0], x[1], x[2], r.norm_squared())
}

/// Least-squares sinusoid: periodogram scan, golden-section refinement on the
/// frequency with the linear parameters projected out, then Gauss–Newton polish.
pub fn fit_sinusoid(t: &[f64], p: &[f64]) -> Result<SinusoidFit> {
    if t.len() != p.len() || t.len() < 8 {
        return Err(Error::Fit("need at least 8 (t, p) points".into()));
    }
    let (t0, t1) = t
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let span = t1 - t0;
    if !(span > 0.0) {
        return Err(Error::Fit("time points do not span an interval".into()));
    }
    let mut dts: Vec<f64> = t.windows(2).map(|w| (w[1] - w[0]).abs()).filter(|&d| d > 0.0).collect();
    dts.sort_by(f64::total_cmp);
    let nyquist = 0.5 / dts[0];
    let fmin = 0.5 / span;
    let grid = 4000;
    let mut best = (f64::INFINITY, fmin);
    for k in 0..=grid {
        let f = fmin + (nyquist - fmin) * k as f64 / grid as f64;
        let r = linear_part(t, p, f).3;
        if r < best.0 {
            best = (r, f);
        }
    }
    let step = (nyquist - fmin) / grid as f64;
    let (mut lo, mut hi) = ((best.1 - step).max(fmin * 0.5), best.1 + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let obj = |f: f64| linear_part(t, p, f).3;
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut y1, mut y2) = (obj(x1), obj(x2));
    for _ in 0..200 {
        if hi - lo < 1e-15 * hi.abs().max(1.0) {
            break;
        }
        if y1 < y2 {
            hi = x2;
            x2 = x1;
            y2 = y1;
            x1 = hi - g * (hi - lo);
            y1 = obj(x1);
        } else {
            lo = x1;
            x1 = x2;
            y1 = y2;
            x2 = lo + g * (hi - lo);
            y2 = obj(x2);
        }
    }
    let f0 = 0.5 * (lo + hi);
    let (c0, ca, cb, _) = linear_part(t, p, f0);
    // params: offset, a (cos), b (sin), frequency
    let mut x = Vector4::new(c0, ca, cb, f0);
    let resid = |x: &Vector4<f64>| -> f64 {
        t.iter()
            .zip(p)
            .map(|(&ti, &pi)| {
                let w = 2.0 * PI * x[3] * ti;
                (x[0] + x[1] * w.cos() + x[2] * w.sin() - pi).powi(2)
            })
            .sum()
    };
    for _ in 0..30 {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&ti, &pi) in t.iter().zip(p) {
            let w = 2.0 * PI * x[3] * ti;
            let (co, si) = (w.cos(), w.sin());
            let r = x[0] + x[1] * co + x[2] * si - pi;
            let j = Vector4::new(1.0, co, si, 2.0 * PI * ti * (-x[1] * si + x[2] * co));
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let Some(dx) = jtj.lu().solve(&jtr) else { break };
        let trial = x - dx;
        if resid(&trial) <= resid(&x) {
            x = trial;
        } else {
            break;
        }
        if dx.norm() < 1e-15 {
            break;
        }
    }
    let amplitude = x[1].hypot(x[2]);
    let phase = (-x[2]).atan2(x[1]);
    let rms = (resid(&x) / t.len() as f64).sqrt();
    let frequency = x[3];
    if !(frequency > 0.0) || frequency * span < 1.0 {
        return Err(Error::Fit(format!(
            "fitted frequency {frequency} GHz does not give a full period over {span} ns (initial guess {f0})"
        )));
    }
    Ok(SinusoidFit {
        frequency,
        amplitude,
        phase,
        offset: x[0],
        rms,
    })
}

/// 16×16 process matrix in the Pauli basis II, IX, IY, IZ, XI, …, ZZ (QB1 first).
#[derive(Clone, Debug)]
pub struct ChiMatrix(pub CMat);

/// Tomography input states: |0>, |1>, |+>, and (|0> − i|1>)/√2 on each qubit.
pub fn tomography_inputs() -> Vec<CMat> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let singles = [
        [ONE, c(0.0, 0.0)],
        [c(0.0, 0.0), ONE],
        [c(s, 0.0), c(s, 0.0)],
        [c(s, 0.0), c(0.0, -s)],
    ];
    let mut out = Vec::new();
    for a in &singles {
        for b in &singles {
            let v = CVec::from_vec(vec![a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]);
            out.push(&v * v.adjoint());
        }
    }
    out
}

fn vec_col(m: &CMat) -> CVec {
    CVec::from_iterator(16, (0..16).map(|k| m[(k % 4, k / 4)]))
}

/// Linear-inversion tomography from the channel's action on the 16 product inputs.
pub fn process_tomography(ch: &QuantumChannel) -> Result<ChiMatrix> {
    let inputs = tomography_inputs();
    let outputs: Vec<CMat> = inputs.iter().map(|r| ch.apply(r)).collect();
    let a = CMat::from_columns(&inputs.iter().map(vec_col).collect::<Vec<_>>());
    let b = CMat::from_columns(&outputs.iter().map(vec_col).collect::<Vec<_>>());
    let a_inv = a
        .try_inverse()
        .ok_or_else(|| Error::numerical("metrics-tomography", "tomography inputs are not complete"))?;
    let s = b * a_inv;
    Ok(chi_from_superop(&s))
}

/// χ_mn = ⟨⟨P_m|J|P_n⟩⟩/d² with |P⟩⟩_(4i + a) = P[a, i].
pub fn chi_from_superop(s: &CMat) -> ChiMatrix {
    let ch = QuantumChannel {
        superop: s.clone(),
        leakage: [0.0; 4],
        duration: 0.0,
    };
    let j = ch.choi();
    let vecs: Vec<CVec> = (0..16)
        .map(|m| {
            let p = pauli2(m);
            CVec::from_iterator(16, (0..16).map(|k| p[(k % 4, k / 4)]))
        })
        .collect();
    let mut chi = CMat::zeros(16, 16);
    for m in 0..16 {
        let jm = vecs[m].adjoint() * &j;
        for n in 0..16 {
            chi[(m, n)] = (&jm * &vecs[n])[(0, 0)] / 16.0;
        }
    }
    ChiMatrix((&chi + chi.adjoint()) * C64::new(0.5, 0.0))
}

pub fn chi_of_unitary(u: &CMat) -> ChiMatrix {
    chi_from_superop(&QuantumChannel::from_block(u, 0.0).superop)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fidelities {
    pub process: f64,
    pub average: f64,
}

/// F_p = Re tr(χ_ideal χ), F_g = (4F_p + 1)/5.
pub fn fidelities(chi: &ChiMatrix, ideal: &ChiMatrix) -> Fidelities {
    let fp = (&ideal.0 * &chi.0).trace().re;
    Fidelities {
        process: fp,
        average: (4.0 * fp + 1.0) / 5.0,
    }
}

/// Average gate fidelity of a channel against a 4×4 target unitary.
pub fn gate_fidelity(ch: &QuantumChannel, target: &CMat) -> Result<Fidelities> {
    Ok(fidelities(&process_tomography(ch)?, &chi_of_unitary(target)))
}

#[derive(Clone, Debug, Serialize)]
pub struct LeakageReport {
    pub per_input: [f64; 4],
    pub worst: f64,
    /// (input label, leakage label, probability)
    pub by_label: Vec<(String, String, f64)>,
}

pub fn leakage_of_channel(ch: &QuantumChannel) -> LeakageReport {
    LeakageReport {
        per_input: ch.leakage,
        worst: ch.leakage.iter().copied().fold(0.0, f64::max),
        by_label: Vec::new(),
    }
}

/// Leakage of a full-space propagator, resolved by dressed leakage label.
pub fn leakage_of_unitary(u: &CMat, frame: &DressedBasis) -> LeakageReport {
    let comp = crate::qutrit::COMPUTATIONAL;
    let mut per_input = [0.0; 4];
    let mut by_label = Vec::new();
    for (k, l) in comp.iter().enumerate() {
        let psi = u * frame.state(*l).unwrap();
        for idx in 0..frame.space.dim() {
            let lab = frame.space.label(idx);
            if lab.computational_index().is_some() {
                continue;
            }
            let p = frame.vectors.column(idx).dotc(&psi).norm_sqr();
            per_input[k] += p;
            if p > 0.0 {
                by_label.push((l.to_string(), lab.to_string(), p));
            }
        }
    }
    by_label.sort_by(|a, b| b.2.total_cmp(&a.2));
    LeakageReport {
        per_input,
        worst: per_input.iter().copied().fold(0.0, f64::max),
        by_label,
    }
}

/// Population of dressed `to` after applying `u` to dressed `from`.
pub fn transition(u: &CMat, frame: &DressedBasis, from: BasisLabel, to: BasisLabel) -> Result<f64> {
    Ok(frame.state(to)?.dotc(&(u * frame.state(from)?)).norm_sqr())
}

/// Phases (deg, wrapped) picked up by |01> and |10> between frames at f1 and f2 after τ ns.
pub fn frame_phase(f1: f64, f2: f64, tau: f64) -> (f64, f64) {
    (wrap_deg(360.0 * (f1 - f2) * tau), wrap_deg(360.0 * (f2 - f1) * tau))
}

fn ensemble_phase(u: &CMat, swapped: bool) -> f64 {
    if swapped {
        arg(u[(3, 3)]) + arg(u[(0, 0)]) - arg(u[(1, 2)]) - arg(u[(2, 1)])
    } else {
        arg(u[(3, 3)]) + arg(u[(0, 0)]) - arg(u[(1, 1)]) - arg(u[(2, 2)])
    }
}

/// Slope (deg per gate) of the conditional phase of U^N relative to U_ideal^N.
pub fn zz_accumulation(u: &CMat, ideal: &CMat, ns: &[usize]) -> Result<f64> {
    if ns.len() < 3 {
        return Err(Error::Config("zz_accumulation needs at least three repetition counts".into()));
    }
    let phase_at = |n: usize| -> f64 {
        let un = u.pow(n as u32);
        let vn = ideal.pow(n as u32);
        let swapped = vn[(0, 0)].norm() > 0.5 && vn[(1, 1)].norm() < 0.5;
        wrap_deg((ensemble_phase(&un, swapped) - ensemble_phase(&vn, swapped)).to_degrees())
    };
    let per_gate = phase_at(1);
    if per_gate.abs() > 90.0 {
        return Err(Error::Config(format!(
            "per-gate phase {per_gate:.2}° is too large to unwrap unambiguously"
        )));
    }
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| {
            let guess = per_gate * n as f64;
            let raw = phase_at(n);
            (n as f64, raw + 360.0 * ((guess - raw) / 360.0).round())
        })
        .collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("repetition counts must differ".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{cphase_with_z, cz, iswap};
    use crate::linalg::identity;

    #[test]
    fn cz_and_identity_phases() {
        assert!((conditional_phase(&cz()).unwrap().phi_cz - 180.0).abs() < 1e-12);
        assert_eq!(conditional_phase(&identity(4)).unwrap().phi_cz, 0.0);
        let u = cphase_with_z(0.3, 0.7, -1.1);
        let g = conditional_phase(&u).unwrap();
        assert!((g.phi_cz - 0.3f64.to_degrees()).abs() < 1e-12);
        assert!((g.theta_z1 - 0.7f64.to_degrees()).abs() < 1e-12);
        assert!((g.theta_z2 + 1.1f64.to_degrees()).abs() < 1e-12);
        assert!(matches!(conditional_phase(&iswap()), Err(Error::NotCzLike { .. })));
    }

    #[test]
    fn swap_angle_limits() {
        assert!((swap_angle(1.0, 0.0).unwrap() - 90.0).abs() < 1e-12);
        assert_eq!(swap_angle(0.0, 1.0).unwrap(), 0.0);
        assert!(swap_angle(0.3, 0.3).is_err());
    }

    #[test]
    fn frame_phase_example() {
        let (a, b) = frame_phase(4.16, 4.00, 10.0);
        assert!((a + 144.0).abs() < 1e-9);
        assert!((b - 144.0).abs() < 1e-9);
    }

    #[test]
    fn sinusoid_exact_recovery() {
        let t: Vec<f64> = (0..60).map(|k| k as f64 * 2.0).collect();
        let p: Vec<f64> = t.iter().map(|&x| 0.4 + 0.35 * (2.0 * PI * 0.0123 * x + 0.4).cos()).collect();
        let f = fit_sinusoid(&t, &p).unwrap();
        assert!((f.frequency - 0.0123).abs() < 1e-9);
        assert!((f.amplitude - 0.35).abs() < 1e-9);
        assert!((f.phase - 0.4).abs() < 1e-9);
        assert!((f.offset - 0.4).abs() < 1e-9);
    }

    #[test]
    fn identity_channel_chi() {
        let chi = process_tomography(&QuantumChannel::identity()).unwrap();
        assert!((chi.0[(0, 0)].re - 1.0).abs() < 1e-12);
        let rest: f64 = chi.0.iter().map(|z| z.norm()).sum::<f64>() - chi.0[(0, 0)].norm();
        assert!(rest < 1e-12);
    }
}
