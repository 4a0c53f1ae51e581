//! T1-limited error of the calibrated CZ and iSWAP, split by element.

use coupler_gates::calibration::{calibrate_z_corrections, target_with_z, ZMechanism};
use coupler_gates::device::{DeviceParams, GateKind};
use coupler_gates::dynamics::{GateSimulator, NoiseParams};
use coupler_gates::metrics::gate_fidelity;
use coupler_gates::pulse::{PulseShape, PulseSpec};
use coupler_gates::qutrit::SubsystemId;

fn main() -> coupler_gates::Result<()> {
    let dev = DeviceParams::default();
    let specs = [
        PulseSpec::new(GateKind::Cz, 60.0, 4.350974082562018, 3.9515059576159905, PulseShape::slepian()),
        PulseSpec::new(GateKind::Iswap, 30.0, 4.440293918396522, 4.159414828602512, PulseShape::slepian()),
    ];
    for spec in specs {
        let sim = GateSimulator::new(dev.clone(), spec.gate)?.with_padding(5.0);
        let z = calibrate_z_corrections(&sim.propagate(&spec)?.1, spec.gate, ZMechanism::Virtual)?;
        let target = target_with_z(spec.gate, z.theta_z1, z.theta_z2);
        let all = NoiseParams::from_device(&dev);
        let f = |n: NoiseParams| -> coupler_gates::Result<f64> { Ok(gate_fidelity(&sim.channel(&spec, &n)?, &target)?.average) };
        let closed = f(NoiseParams::closed())?;
        let total = f(all)?;
        println!("{:?}: F_g {:.4}%  T1 error {:.3e}", spec.gate, total * 100.0, closed - total);
        for (name, sub) in [("QB1", SubsystemId::Qb1), ("QB2", SubsystemId::Qb2), ("CPLR", SubsystemId::Cplr)] {
            println!("  {name:5} {:.3e}", closed - f(all.only(sub))?);
        }
    }
    Ok(())
}
