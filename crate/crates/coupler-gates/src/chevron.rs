//! Swap chevrons under sudden square pulses: population of the prepared idle state
//! versus pulse length and QB2 detuning, and the swap rate fitted on the resonant line.

use serde::Serialize;

use crate::device::GateKind;
use crate::effective::dressed_gap;
use crate::error::Result;
use crate::linalg::{eigh, CVec, C64};
use crate::metrics::fit_sinusoid;
use crate::optimize::golden_section;
use crate::qutrit::{BasisLabel, DressedBasis};
use crate::system::System;

/// Exchange pair probed by a chevron: CZ drives |101>↔|200>, iSWAP drives |100>↔|001>.
pub fn exchange_pair(gate: GateKind) -> (BasisLabel, BasisLabel) {
    match gate {
        GateKind::Cz => (BasisLabel::new(1, 0, 1), BasisLabel::new(2, 0, 0)),
        GateKind::Iswap => (BasisLabel::new(1, 0, 0), BasisLabel::new(0, 0, 1)),
    }
}

/// Bare resonance of the exchange pair: f2 = f1 + η1 (CZ) or f2 = f1 (iSWAP).
pub fn bare_resonance(sys: &System, gate: GateKind, f1: f64) -> f64 {
    match gate {
        GateKind::Cz => f1 + sys.device.eta1_ghz,
        GateKind::Iswap => f1,
    }
}

/// Population of the idle dressed state `to` after preparing the idle dressed state `from`
/// and holding the pulse point (f1, fc, f2) for each τ in `taus` (ns), switched on and
/// off suddenly.
pub fn square_pulse_transfer(
    sys: &System,
    idle: &DressedBasis,
    from: BasisLabel,
    to: BasisLabel,
    bias: (f64, f64, f64),
    taus: &[f64],
) -> Result<Vec<f64>> {
    let h = sys.hamiltonian(bias.0, bias.1, bias.2);
    let e = eigh(&h)?;
    let (a, b): (CVec, CVec) = (idle.state(from)?, idle.state(to)?);
    let weights: Vec<C64> = (0..e.values.len())
        .map(|j| {
            let v = e.vectors.column(j);
            b.dotc(&v) * v.dotc(&a)
        })
        .collect();
    Ok(taus
        .iter()
        .map(|&t| {
            weights
                .iter()
                .zip(&e.values)
                .map(|(w, &en)| w * C64::from_polar(1.0, -en * t))
                .sum::<C64>()
                .norm_sqr()
        })
        .collect())
}

/// QB2 frequency minimizing the dressed gap of the exchange pair at coupler bias `fc`,
/// searched within ±`half_width` GHz of the bare resonance.
pub fn dressed_resonance(sys: &System, gate: GateKind, f1: f64, fc: f64, half_width: f64) -> Result<f64> {
    let (a, b) = exchange_pair(gate);
    let f0 = bare_resonance(sys, gate, f1);
    let space = sys.space();
    let (f2, _) = golden_section(
        |f2| dressed_gap(&sys.hamiltonian(f1, fc, f2), space, a, b),
        f0 - half_width,
        f0 + half_width,
        1e-9,
        200,
    )?;
    Ok(f2)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SwapRate {
    pub fc: f64,
    /// QB2 frequency of the resonant line (GHz).
    pub f2: f64,
    /// Fitted population oscillation frequency (GHz).
    pub fitted: f64,
    /// Dressed gap of the exchange pair at the same bias (GHz).
    pub gap: f64,
    pub fit_rms: f64,
}

impl SwapRate {
    pub fn relative_error(&self) -> f64 {
        (self.fitted - self.gap).abs() / self.gap
    }
}

/// Fit the swap rate on the resonant line at coupler bias `fc`; the τ window must cover
/// at least one period.
pub fn swap_rate(sys: &System, idle: &DressedBasis, gate: GateKind, f1: f64, fc: f64, taus: &[f64]) -> Result<SwapRate> {
    let f2 = dressed_resonance(sys, gate, f1, fc, 0.05)?;
    let (a, b) = exchange_pair(gate);
    let p = square_pulse_transfer(sys, idle, a, b, (f1, fc, f2), taus)?;
    let fit = fit_sinusoid(taus, &p)?;
    Ok(SwapRate {
        fc,
        f2,
        fitted: fit.frequency,
        gap: dressed_gap(&sys.hamiltonian(f1, fc, f2), sys.space(), a, b)?,
        fit_rms: fit.rms,
    })
}
