use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use coupler_gates::calibration::{calibrate_z_corrections, ZMechanism};
use coupler_gates::device::{DeviceParams, GateKind};
use coupler_gates::dynamics::{GateSimulator, NoiseParams, QuantumChannel};
use coupler_gates::linalg::{c, identity, CMat, ONE};
use coupler_gates::pulse::{PulseShape, PulseSpec};
use coupler_gates::rb::*;

fn depolarized(u: &CMat, p: f64) -> QuantumChannel {
    let mut ch = QuantumChannel::from_block(u, 0.0);
    let vec_i = CMat::from_fn(16, 1, |k, _| if k % 5 == 0 { ONE } else { c(0.0, 0.0) });
    ch.superop = &ch.superop * c(1.0 - p, 0.0) + &vec_i * vec_i.transpose() * c(p / 4.0, 0.0);
    ch
}

#[test]
fn inversion_scan_covers_every_element() {
    let g = CliffordGroup::build(NativeGate::Cz).unwrap();
    for k in 0..g.len() {
        let inv = g.inverse(k);
        let prod = &g.elements[inv].unitary * &g.elements[k].unitary;
        assert!(coupler_gates::linalg::equal_up_to_phase(&prod, &identity(4), 1e-9), "element {k}");
    }
}

#[test]
fn depolarizing_cliffords_give_three_quarters_p() {
    let g = CliffordGroup::build(NativeGate::Iswap).unwrap();
    for p in [1e-3, 5e-3, 2e-2] {
        let model = DepolarizingCliffords { p, p_interleaved: 0.0 };
        let cfg = RbConfig {
            lengths: vec![1, 5, 10, 20, 50, 100, 200],
            n_seq: 5,
            seed: 3,
            interleave: false,
        };
        let r = simulate_rb(&g, &model, &cfg).unwrap();
        assert!((r.fit.r_clifford - 0.75 * p).abs() < 1e-4, "p {p}: r {}", r.fit.r_clifford);
    }
}

#[test]
fn depolarizing_native_channel_is_recovered_by_interleaving() {
    let g = CliffordGroup::build(NativeGate::Iswap).unwrap();
    let p = 4e-3;
    let model = GateChannels {
        native: depolarized(&NativeGate::Iswap.unitary(), p),
        z: [0.0; 2],
        xy_error: 0.0,
    };
    let mut cfg = RbConfig {
        lengths: vec![1, 5, 10, 20, 40, 70, 100],
        n_seq: 60,
        seed: 11,
        interleave: false,
    };
    let reference = simulate_rb(&g, &model, &cfg).unwrap();
    cfg.interleave = true;
    let inter = simulate_rb(&g, &model, &cfg).unwrap();
    let r = interleaved_error(reference.fit.alpha, inter.fit.alpha);
    assert!((r - 0.75 * p).abs() < 0.15 * 0.75 * p, "r_int {r:e} vs {:e}", 0.75 * p);
}

#[test]
fn ideal_gates_survive_with_z_compensation() {
    for native in [NativeGate::Iswap, NativeGate::Cz] {
        let g = CliffordGroup::build(native).unwrap();
        let z = [0.37, -1.2];
        let zu = coupler_gates::gates::local(&coupler_gates::gates::zphase(z[0]), &coupler_gates::gates::zphase(z[1]));
        let model = GateChannels {
            native: QuantumChannel::from_block(&(zu * native.unitary()), 0.0),
            z,
            xy_error: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in [1, 4, 17] {
            let seq = sample_rb_sequence(&g, m, true, &mut rng);
            assert!((model.survival(&g, &seq).unwrap() - 1.0).abs() < 1e-10);
        }
    }
}

/// Largest |matrix − full| survival gap over short interleaved sequences, with the
/// per-gate leakage bound it should respect.
fn matrix_vs_full(spec: PulseSpec, native: NativeGate) -> (f64, f64) {
    let dev = DeviceParams::default();
    let sim = GateSimulator::new(dev.clone(), spec.gate).unwrap();
    let (_, block) = sim.propagate(&spec).unwrap();
    let zc = calibrate_z_corrections(&block, spec.gate, ZMechanism::Virtual).unwrap();
    let z = [zc.theta_z1.to_radians(), zc.theta_z2.to_radians()];
    let noise = NoiseParams::from_device(&dev);
    let matrix = GateChannels {
        native: sim.channel(&spec, &noise).unwrap(),
        z,
        xy_error: 0.0,
    };
    let leak = matrix.native.leakage.iter().copied().fold(0.0, f64::max);
    let full = FullDynamics { sim: &sim, spec, noise, z };
    let g = CliffordGroup::build(native).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut gap, mut bound) = (0.0f64, f64::INFINITY);
    for m in [1, 2, 3] {
        let seq = sample_rb_sequence(&g, m, true, &mut rng);
        let natives = compile_sequence(&g, &seq, z).iter().filter(|s| matches!(s, GateSymbol::Native(_))).count();
        let (a, b) = (matrix.survival(&g, &seq).unwrap(), full.survival(&g, &seq).unwrap());
        assert!(a < 1.0);
        gap = gap.max((a - b).abs());
        // leaked population may come back coherently in a later gate; the matrix mode drops it
        bound = bound.min(1e-5 + 2.0 * natives as f64 * leak);
    }
    (gap, bound)
}

#[test]
fn matrix_mode_matches_full_dynamics_on_short_sequences() {
    let cz = PulseSpec::new(GateKind::Cz, 60.0, 4.350974082562018, 3.9515059576159905, PulseShape::slepian());
    let (gap, _) = matrix_vs_full(cz, NativeGate::Cz);
    assert!(gap < 1e-5, "CZ: {gap:e}");
    let iswap = PulseSpec::new(GateKind::Iswap, 30.0, 4.440293918396522, 4.159414828602512, PulseShape::slepian());
    let (gap, bound) = matrix_vs_full(iswap, NativeGate::Iswap);
    assert!(gap < bound, "iSWAP: {gap:e} > {bound:e}");
}

#[test]
fn rb_runs_are_reproducible() {
    let g = CliffordGroup::build(NativeGate::Cz).unwrap();
    let model = GateChannels {
        native: depolarized(&NativeGate::Cz.unitary(), 1e-2),
        z: [0.0; 2],
        xy_error: 1e-3,
    };
    let cfg = RbConfig {
        lengths: vec![1, 10, 30],
        n_seq: 8,
        seed: 42,
        interleave: true,
    };
    let (a, b) = (simulate_rb(&g, &model, &cfg).unwrap(), simulate_rb(&g, &model, &cfg).unwrap());
    assert_eq!(a.mean, b.mean);
    assert_eq!(a.variance, b.variance);
}
