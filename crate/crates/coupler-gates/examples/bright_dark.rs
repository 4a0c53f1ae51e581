//! Bright and dark leakage states of the CZ and iSWAP manifolds versus coupler frequency.

use coupler_gates::device::DeviceParams;
use coupler_gates::effective::{cz_effective, dark_state_coupling, iswap_effective};
use coupler_gates::system::System;

fn main() -> coupler_gates::Result<()> {
    let dev = DeviceParams::default();
    let sys = System::qutrits(dev.clone());
    let f1 = dev.f1_ghz;
    println!("fc_ghz  theta_deg  gB_cz_mhz  <D|H|101>  xi_deg  gB_iswap_mhz  <D|H|010>");
    for k in 0..=10 {
        let fc = 4.4 + 0.2 * k as f64;
        let f2_cz = f1 + dev.eta1_ghz;
        let (_, _, cz) = cz_effective(&dev.operating_point(f1, fc, f2_cz));
        let (_, _, is) = iswap_effective(&dev.operating_point(f1, fc, f1));
        let dc = dark_state_coupling(&sys.hamiltonian(f1, fc, f2_cz), sys.space(), false, cz.angle)?;
        let di = dark_state_coupling(&sys.hamiltonian(f1, fc, f1), sys.space(), true, is.angle)?;
        println!(
            "{fc:.2}  {:9.3}  {:9.3}  {:9.1e}  {:6.2}  {:12.3}  {:9.1e}",
            cz.angle.to_degrees(),
            cz.g_bright * 1e3,
            dc.norm(),
            is.angle.to_degrees(),
            is.g_bright * 1e3,
            di.norm()
        );
    }
    Ok(())
}
