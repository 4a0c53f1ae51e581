//! Control-line transients: round trip through the inverse filter and the CZ phase they shift.

use coupler_gates::device::{DeviceParams, GateKind};
use coupler_gates::dynamics::{flux_excursion, GateSimulator, LineResponse};
use coupler_gates::metrics::conditional_phase;
use coupler_gates::pulse::{inverse_poles, round_trip_error, PulseShape, PulseSpec};

fn main() -> coupler_gates::Result<()> {
    let dev = DeviceParams::default();
    let spec = PulseSpec::new(GateKind::Cz, 60.0, 4.350974082562018, 3.9515059576159905, PulseShape::slepian());
    let w = spec.waveforms(&dev)?;
    let flux = flux_excursion(&w.fc, &dev.cplr_squid, dev.idle_bias(GateKind::Cz).fc)?;
    for (name, m) in [("cplr", &dev.transients.cplr), ("qb2", &dev.transients.qb2)] {
        let largest = inverse_poles(m, 1.0).iter().map(|p| p.norm()).fold(0.0, f64::max);
        println!("{name}: largest inverse pole |z| = {largest:.9}, round trip {:.1e}", round_trip_error(&flux, m)?);
    }
    for line in [LineResponse::Ideal, LineResponse::Distorted, LineResponse::Predistorted] {
        let sim = GateSimulator::new(dev.clone(), GateKind::Cz)?.with_line(line);
        println!("{line:?}: phi_cz = {:.4} deg", conditional_phase(&sim.propagate(&spec)?.1)?.phi_cz);
    }
    Ok(())
}
