//! Swap rates fitted from square-pulse chevrons against the dressed gap.

use coupler_gates::chevron::swap_rate;
use coupler_gates::device::{DeviceParams, GateKind};
use coupler_gates::system::System;

fn main() -> coupler_gates::Result<()> {
    let dev = DeviceParams::default();
    let sys = System::qutrits(dev.clone());
    let taus: Vec<f64> = (0..=300).map(|k| 2.0 * k as f64).collect();
    for gate in [GateKind::Cz, GateKind::Iswap] {
        let idle = sys.idle_frame(gate)?;
        let f1 = dev.idle_bias(gate).f1;
        println!("{gate:?}\n fc_ghz  f2_ghz   fitted_mhz  gap_mhz  rel_err");
        for k in 0..=8 {
            let fc = 4.5 + 0.1 * k as f64;
            let r = swap_rate(&sys, &idle, gate, f1, fc, &taus)?;
            println!(" {fc:.2}  {:.5}  {:9.4}  {:9.4}  {:.1e}", r.f2, r.fitted * 1e3, r.gap * 1e3, r.relative_error());
        }
    }
    Ok(())
}
