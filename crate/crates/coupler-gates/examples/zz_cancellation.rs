//! Static ZZ of resonant qubits versus coupler frequency: exact (3- and 2-level coupler)
//! against the perturbative series.

use coupler_gates::device::DeviceParams;
use coupler_gates::effective::{zz_exact, zz_perturbative};
use coupler_gates::scenario::zero_crossings;

fn main() -> coupler_gates::Result<()> {
    let dev = DeviceParams::default();
    let f1 = dev.f1_ghz;
    let eta = [dev.eta1_ghz, dev.etac_ghz, dev.eta2_ghz];
    let fcs: Vec<f64> = (0..=40).map(|k| 4.5 + 0.05 * k as f64).collect();
    let mut z3 = Vec::new();
    println!("fc_ghz  zz3_mhz  zz2_mhz  pert_mhz (f2 = f1 - 160 MHz)");
    for &fc in &fcs {
        let op = dev.operating_point(f1, fc, f1);
        let (a, b) = (zz_exact(&op, &dev, 3)?, zz_exact(&op, &dev, 2)?);
        // resonant qubits make the series singular; print it off resonance
        let p = zz_perturbative(&dev.operating_point(f1, fc, f1 - 0.16), eta, true).map(|z| z.total * 1e3);
        println!("{fc:.2}  {:8.4}  {:8.4}  {}", a * 1e3, b * 1e3, p.map_or("-".into(), |v| format!("{v:8.4}")));
        z3.push(a);
    }
    println!("3-level zero crossings: {:?} GHz", zero_crossings(&fcs, &z3));
    Ok(())
}
