//! Interleaved RB of the T1-limited iSWAP with virtual-Z compensation of its local phases.

use coupler_gates::calibration::{calibrate_z_corrections, ZMechanism};
use coupler_gates::device::{DeviceParams, GateKind};
use coupler_gates::dynamics::{GateSimulator, NoiseParams};
use coupler_gates::pulse::{PulseShape, PulseSpec};
use coupler_gates::rb::{interleaved_error, interleaving_xy_overhead, simulate_rb, CliffordGroup, GateChannels, NativeGate, RbConfig};

fn main() -> coupler_gates::Result<()> {
    let dev = DeviceParams::default();
    let spec = PulseSpec::new(GateKind::Iswap, 30.0, 4.440293918396522, 4.159414828602512, PulseShape::slepian());
    let sim = GateSimulator::new(dev.clone(), GateKind::Iswap)?.with_padding(5.0);
    let z = calibrate_z_corrections(&sim.propagate(&spec)?.1, GateKind::Iswap, ZMechanism::Virtual)?;
    let model = GateChannels {
        native: sim.channel(&spec, &NoiseParams::from_device(&dev))?,
        z: [z.theta_z1.to_radians(), z.theta_z2.to_radians()],
        xy_error: 0.0,
    };
    let group = CliffordGroup::build(NativeGate::Iswap)?;
    let mut cfg = RbConfig {
        lengths: vec![1, 10, 25, 50, 100, 200],
        n_seq: 20,
        seed: 1,
        interleave: false,
    };
    let reference = simulate_rb(&group, &model, &cfg)?;
    cfg.interleave = true;
    let inter = simulate_rb(&group, &model, &cfg)?;
    println!("reference   alpha {:.5}  r_Clifford {:.2e} ± {:.1e}", reference.fit.alpha, reference.fit.r_clifford, reference.fit.sigma_r);
    println!("interleaved alpha {:.5}", inter.fit.alpha);
    println!("r_iSWAP {:.2e}", interleaved_error(reference.fit.alpha, inter.fit.alpha));
    println!("XY pulses added per interleaved gate {:.4}", interleaving_xy_overhead(&group));
    Ok(())
}
