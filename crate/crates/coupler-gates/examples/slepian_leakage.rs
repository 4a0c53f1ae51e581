//! Leakage after a 60 ns CZ versus pulse length: Slepian against a Hanning-filtered square.

use coupler_gates::device::{DeviceParams, GateKind};
use coupler_gates::dynamics::GateSimulator;
use coupler_gates::metrics::transition;
use coupler_gates::pulse::{PulseShape, PulseSpec};
use coupler_gates::qutrit::BasisLabel;

fn main() -> coupler_gates::Result<()> {
    let sim = GateSimulator::new(DeviceParams::default(), GateKind::Cz)?;
    let slepian = PulseSpec::new(GateKind::Cz, 60.0, 4.350974082562018, 3.9515059576159905, PulseShape::slepian());
    let square = PulseSpec::new(GateKind::Cz, 60.0, 4.301444962458801, 3.93488953742705, PulseShape::square());
    let (l101, l011, l100, l010) = (
        BasisLabel::parse("101")?,
        BasisLabel::parse("011")?,
        BasisLabel::parse("100")?,
        BasisLabel::parse("010")?,
    );
    println!("t_ns  slepian_p011  slepian_p010  square_p011  square_p010");
    for t in (60..=200).step_by(10) {
        let mut row = format!("{t:4}");
        for spec in [slepian, square] {
            let mut s = spec;
            s.t_g = t as f64;
            let u = sim.engine.propagate_unitary(&sim.schedule(&s)?)?;
            row += &format!(
                "  {:12.3e}  {:12.3e}",
                transition(&u, &sim.frame, l101, l011)?,
                transition(&u, &sim.frame, l100, l010)?
            );
        }
        println!("{row}");
    }
    Ok(())
}
