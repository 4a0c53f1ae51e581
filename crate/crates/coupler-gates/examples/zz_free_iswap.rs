//! iSWAP length at which the ZZ angle accumulated per gate vanishes.

use coupler_gates::calibration::find_zz_free_length;
use coupler_gates::device::{DeviceParams, GateKind};
use coupler_gates::dynamics::GateSimulator;
use coupler_gates::pulse::PulseShape;

fn main() -> coupler_gates::Result<()> {
    let sim = GateSimulator::new(DeviceParams::default(), GateKind::Iswap)?;
    let s = find_zz_free_length(&sim, (20.0, 35.0), (4.2, 4.9), PulseShape::slepian(), 0.01)?;
    println!("t_ns     fc_min_ghz  swap_deg  zz_deg_per_gate");
    for p in &s.points {
        println!("{:7.3}  {:.6}  {:8.3}  {:+.4}", p.t_g, p.fc_min, p.swap_angle, p.slope_deg_per_gate);
    }
    println!("ZZ-free length {:.3} ns (slope {:+.1e} deg/gate)", s.root_ns, s.at_root.slope_deg_per_gate);
    Ok(())
}
