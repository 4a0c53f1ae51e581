//! Numerical hygiene on the calibrated gate pulses.

use coupler_gates::device::{DeviceParams, GateKind};
use coupler_gates::dynamics::{ControlSchedule, Engine, GateSimulator, NoiseParams};
use coupler_gates::effective::{cz_effective, dark_state_coupling, iswap_effective};
use coupler_gates::linalg::{c as cplx, eigh, frobenius, hermiticity_error, unitarity_error, CMat, CVec, ONE};
use coupler_gates::pulse::{PulseShape, PulseSpec};
use coupler_gates::qutrit::BasisLabel;
use coupler_gates::system::System;

fn c64(x: f64) -> coupler_gates::linalg::C64 {
    cplx(x, 0.0)
}

fn cz_spec() -> PulseSpec {
    PulseSpec::new(GateKind::Cz, 60.0, 4.350974082562018, 3.9515059576159905, PulseShape::slepian())
}

fn iswap_spec() -> PulseSpec {
    PulseSpec::new(GateKind::Iswap, 30.0, 4.440293918396522, 4.159414828602512, PulseShape::slepian())
}

#[test]
fn propagators_are_unitary() {
    for spec in [cz_spec(), iswap_spec()] {
        let sim = GateSimulator::new(DeviceParams::default(), spec.gate).unwrap();
        let (u, _) = sim.propagate(&spec).unwrap();
        assert!(unitarity_error(&u) < 1e-9, "{:?}: {:e}", spec.gate, unitarity_error(&u));
    }
}

/// Populations reported by the toolkit start from computational states; halving the
/// substep must move every one of them by < 1e-8, and the block must converge at
/// order ≥ 2.
#[test]
fn step_halving_converges() {
    let dev = DeviceParams::default();
    for spec in [cz_spec(), iswap_spec()] {
        let run = |n: usize| {
            let sim = GateSimulator::with_engine(Engine::with_substeps(System::qutrits(dev.clone()), n), spec.gate).unwrap();
            let (u, block) = sim.propagate(&spec).unwrap();
            let pops = (sim.frame.vectors.adjoint() * u * &sim.frame.vectors).map(|z| z.norm_sqr());
            (pops, block)
        };
        let (coarse, mid, fine) = (run(5), run(10), run(20));
        let space = GateSimulator::new(dev.clone(), spec.gate).unwrap().frame.space;
        let inputs = ["000", "001", "100", "101"].map(|l| space.index(BasisLabel::parse(l).unwrap()).unwrap());
        let dp = inputs
            .iter()
            .map(|&j| (mid.0.column(j) - fine.0.column(j)).abs().max())
            .fold(0.0, f64::max);
        assert!(dp < 1e-8, "{:?}: population change {dp:e}", spec.gate);
        let (e1, e2) = (frobenius(&(&coarse.1 - &mid.1)), frobenius(&(&mid.1 - &fine.1)));
        assert!(e1 / e2 > 4.0, "{:?}: observed order {:.2}", spec.gate, (e1 / e2).log2());
    }
}

#[test]
fn lindblad_preserves_trace_and_hermiticity() {
    let dev = DeviceParams::default();
    let sim = GateSimulator::new(dev.clone(), GateKind::Cz).unwrap();
    let sched = sim.schedule(&cz_spec()).unwrap();
    let d = sim.frame.space.dim();
    // mixture of |101>-like and a coherence with |000>
    let v = sim.frame.vectors.column(sim.frame.space.index(BasisLabel::new(1, 0, 1)).unwrap()).into_owned();
    let g = sim.frame.vectors.column(0).into_owned();
    let psi = (&v + &g) * ONE.scale(std::f64::consts::FRAC_1_SQRT_2);
    let rho0: CMat = &psi * psi.adjoint();
    assert_eq!(rho0.nrows(), d);
    let rho = sim.engine.evolve_lindblad(&rho0, &sched, &NoiseParams::from_device(&dev)).unwrap();
    assert!((rho.trace().re - 1.0).abs() < 1e-7);
    assert!(hermiticity_error(&rho) < 1e-9);
}

#[test]
fn noisy_channels_are_completely_positive() {
    let dev = DeviceParams::default();
    for spec in [cz_spec(), iswap_spec()] {
        let sim = GateSimulator::new(dev.clone(), spec.gate).unwrap();
        let ch = sim.channel(&spec, &NoiseParams::from_device(&dev)).unwrap();
        let j = ch.choi();
        let sym = (&j + j.adjoint()) * ONE.scale(0.5);
        let min = eigh(&sym).unwrap().values.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min > -1e-8, "{:?}: min Choi eigenvalue {min:e}", spec.gate);
    }
}

#[test]
fn dark_states_are_orthogonal_and_decoupled() {
    let dev = DeviceParams::default();
    let sys = System::qutrits(dev.clone());
    for fc in [4.3, 4.6, 5.0, 5.8, 6.5] {
        for (iswap, (f1, f2)) in [(false, (4.16, 4.16 + dev.eta1_ghz)), (true, (4.16, 4.16))] {
            let op = dev.operating_point(f1, fc, f2);
            let bd = if iswap { iswap_effective(&op).2 } else { cz_effective(&op).2 };
            let (c, s) = (bd.angle.cos(), bd.angle.sin());
            let space = sys.space();
            let idx = |n1, nc, n2| space.index(BasisLabel::new(n1, nc, n2)).unwrap();
            let (a, b, partner) = if iswap { (idx(1, 0, 0), idx(0, 0, 1), idx(0, 1, 0)) } else { (idx(2, 0, 0), idx(0, 1, 1), idx(1, 0, 1)) };
            let mut dark = CVec::zeros(space.dim());
            let mut bright = CVec::zeros(space.dim());
            (dark[a], dark[b]) = (c64(c), c64(-s));
            (bright[a], bright[b]) = (c64(s), c64(c));
            assert!(bright.dotc(&dark).norm() < 1e-12);
            let h = sys.hamiltonian(f1, fc, f2);
            let to_bright = (bright.adjoint() * h.column(partner))[(0, 0)].norm();
            let want = 2.0 * std::f64::consts::PI * bd.g_bright.abs();
            assert!((to_bright - want).abs() < 1e-9 * want, "fc {fc}: {to_bright} vs {want}");
            let k = dark_state_coupling(&h, sys.space(), iswap, bd.angle).unwrap();
            assert!(k.norm() < 1e-12, "fc {fc} iswap {iswap}: {:e}", k.norm());
        }
    }
}

#[test]
fn constant_schedule_unitary_matches_exponential() {
    let dev = DeviceParams::default();
    let eng = Engine::qutrits(dev.clone());
    let sched = ControlSchedule::constant(4.16, 4.6, 4.0, 13.0, 1.0).unwrap();
    let u = eng.propagate_unitary(&sched).unwrap();
    let want = coupler_gates::linalg::expm_hermitian(&eng.system.hamiltonian(4.16, 4.6, 4.0), 13.0).unwrap();
    assert!(frobenius(&(u - want)) < 1e-9);
}
