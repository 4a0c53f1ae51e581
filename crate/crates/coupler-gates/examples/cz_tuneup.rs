//! Calibrate a 60 ns Slepian CZ: coarse grid, then refinement on repeated gates.

use coupler_gates::calibration::{tune_cz, GridSpec, TuneOptions};
use coupler_gates::device::{DeviceParams, GateKind};
use coupler_gates::dynamics::GateSimulator;
use coupler_gates::pulse::PulseShape;

fn main() -> coupler_gates::Result<()> {
    let sim = GateSimulator::new(DeviceParams::default(), GateKind::Cz)?;
    let cal = tune_cz(&sim, 60.0, PulseShape::slepian(), &GridSpec::default_cz(), &TuneOptions::cz())?;
    println!("fc_min  {:.9} GHz", cal.spec.fc_min);
    println!("f2_peak {:.9} GHz", cal.spec.f2_peak);
    println!("phi_cz  {:.6} deg", cal.diagnostics.phi_cz);
    println!("leakage {:.2e}", cal.diagnostics.leakage);
    println!("Z undo  {:.3} / {:.3} deg", cal.z.theta_z1, cal.z.theta_z2);
    println!("score per round {:?}", cal.diagnostics.history);
    Ok(())
}
