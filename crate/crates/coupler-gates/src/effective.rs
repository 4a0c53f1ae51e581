//! Effective two-level models, bright/dark hybridization and the ZZ interaction
//! (perturbative series and exact diagonalization).

use serde::Serialize;

use crate::device::{DeviceParams, OperatingPoint};
use crate::error::{Error, Result};
use crate::linalg::{eigh, CMat, C64};
use crate::qutrit::{BasisLabel, DressedBasis, Space, TWO_PI};
use crate::system::System;

/// Denominators closer to zero than this (GHz) are treated as resonances.
pub const SINGULAR_GHZ: f64 = 1e-9;

/// H = [[0, g], [g, Δ(t)]] (GHz) plus an offset, with Δ = fc − f_ref.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EffectiveTwoLevel {
    pub g_eff: f64,
    pub f_ref: f64,
    pub offset: f64,
}

impl EffectiveTwoLevel {
    pub fn detuning(&self, fc: f64) -> f64 {
        fc - self.f_ref
    }

    /// Matrix in GHz (not multiplied by 2π).
    pub fn matrix(&self, fc: f64) -> [[f64; 2]; 2] {
        [[self.offset, self.g_eff], [self.g_eff, self.offset + self.detuning(fc)]]
    }

    /// Splitting √(Δ² + 4g²) in GHz.
    pub fn gap(&self, fc: f64) -> f64 {
        let d = self.detuning(fc);
        (d * d + 4.0 * self.g_eff * self.g_eff).sqrt()
    }

    /// Adiabatic mixing angle arctan(2g/Δ) in radians.
    pub fn theta(&self, fc: f64) -> f64 {
        (2.0 * self.g_eff).atan2(self.detuning(fc))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BrightDark {
    /// Θ for CZ, ξ for iSWAP (radians).
    pub angle: f64,
    /// Coupling of the computational state to the bright state (GHz).
    pub g_bright: f64,
    /// Residual bright–dark coupling (GHz).
    pub g_r: f64,
    pub bright_energy: f64,
    pub dark_energy: f64,
}

/// CZ effective models: the single-excitation block (|100>, |010>) with g1c and the
/// double-excitation block (|101>, |B>) with g_B.
pub fn cz_effective(op: &OperatingPoint) -> (EffectiveTwoLevel, EffectiveTwoLevel, BrightDark) {
    let s2 = std::f64::consts::SQRT_2;
    let theta = (s2 * op.g12).atan2(op.g1c);
    let (c, s) = (theta.cos(), theta.sin());
    let g_b = op.g1c * c + s2 * op.g12 * s;
    let bd = BrightDark {
        angle: theta,
        g_bright: g_b,
        g_r: c * s * (op.f1 - op.fc),
        bright_energy: c * c * (op.fc + op.f2) + s * s * (op.f1 + op.f2),
        dark_energy: c * c * (op.f1 + op.f2) + s * s * (op.fc + op.f2),
    };
    let h1 = EffectiveTwoLevel {
        g_eff: op.g1c,
        f_ref: op.f1,
        offset: 0.0,
    };
    let h2 = EffectiveTwoLevel {
        g_eff: g_b,
        f_ref: op.f1,
        offset: op.f2,
    };
    (h1, h2, bd)
}

/// iSWAP effective models with ξ = arctan(g1c/g2c); both blocks share g_B.
pub fn iswap_effective(op: &OperatingPoint) -> (EffectiveTwoLevel, EffectiveTwoLevel, BrightDark) {
    let xi = op.g1c.atan2(op.g2c);
    let (c, s) = (xi.cos(), xi.sin());
    let g_b = op.g1c * s + op.g2c * c;
    let split = 2.0 * op.g12 * s * c;
    let bd = BrightDark {
        angle: xi,
        g_bright: g_b,
        g_r: op.g12 * (c * c - s * s),
        bright_energy: op.f1 + split,
        dark_energy: op.f1 - split,
    };
    let h1 = EffectiveTwoLevel {
        g_eff: g_b,
        f_ref: op.f1,
        offset: 0.0,
    };
    let h2 = EffectiveTwoLevel {
        g_eff: g_b,
        f_ref: op.f1,
        offset: op.f1,
    };
    (h1, h2, bd)
}

/// Matrix element ⟨D|H|partner⟩ of the full Hamiltonian for the CZ or iSWAP dark state.
pub fn dark_state_coupling(h: &CMat, space: Space, iswap: bool, angle: f64) -> Result<C64> {
    let (c, s) = (C64::new(angle.cos(), 0.0), C64::new(angle.sin(), 0.0));
    let idx = |n1, nc, n2| space.index(BasisLabel::new(n1, nc, n2));
    Ok(if iswap {
        // D1 = cos ξ |100> − sin ξ |001>, partner |010>
        let p = idx(0, 1, 0)?;
        c * h[(idx(1, 0, 0)?, p)] - s * h[(idx(0, 0, 1)?, p)]
    } else {
        // D = cos Θ |200> − sin Θ |011>, partner |101>
        let p = idx(1, 0, 1)?;
        c * h[(idx(2, 0, 0)?, p)] - s * h[(idx(0, 1, 1)?, p)]
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ZzBreakdown {
    pub zeta2_rw: f64,
    pub zeta3_rw: f64,
    pub zeta4_rw: f64,
    pub zeta2_crw: f64,
    pub zeta3_crw: f64,
    pub zeta4_crw: f64,
    pub total: f64,
    /// max(g1c/|Δ1c|, g2c/|Δ2c|) < 0.2
    pub dispersive: bool,
}

impl ZzBreakdown {
    pub fn sum_of_terms(&self) -> f64 {
        self.zeta2_rw + self.zeta3_rw + self.zeta4_rw + self.zeta2_crw + self.zeta3_crw + self.zeta4_crw
    }
}

/// Couplings, anharmonicities and every denominator of the series, checked against resonance.
#[derive(Clone, Copy, Debug)]
pub struct PertParams {
    pub g1c: f64,
    pub g2c: f64,
    pub g12: f64,
    pub e1: f64,
    pub ec: f64,
    pub e2: f64,
    pub d12: f64,
    pub d21: f64,
    pub d1c: f64,
    pub d2c: f64,
    pub s12: f64,
    pub s1c: f64,
    pub s2c: f64,
    /// 2ωc + ηc
    pub w: f64,
}

fn den(name: &'static str, value: f64) -> Result<f64> {
    if value.abs() < SINGULAR_GHZ {
        Err(Error::Singularity { name, value })
    } else {
        Ok(value)
    }
}

impl PertParams {
    pub fn new(op: &OperatingPoint, eta1: f64, etac: f64, eta2: f64, include_crw: bool) -> Result<Self> {
        let p = PertParams {
            g1c: op.g1c,
            g2c: op.g2c,
            g12: op.g12,
            e1: eta1,
            ec: etac,
            e2: eta2,
            d12: op.f1 - op.f2,
            d21: op.f2 - op.f1,
            d1c: op.f1 - op.fc,
            d2c: op.f2 - op.fc,
            s12: op.f1 + op.f2,
            s1c: op.f1 + op.fc,
            s2c: op.f2 + op.fc,
            w: 2.0 * op.fc + etac,
        };
        den("Δ12", p.d12)?;
        den("Δ1c", p.d1c)?;
        den("Δ2c", p.d2c)?;
        den("Δ12 − η2", p.d12 - p.e2)?;
        den("Δ21 − η1", p.d21 - p.e1)?;
        den("Δ1c + Δ2c − ηc", p.d1c + p.d2c - p.ec)?;
        if include_crw {
            den("Σ12", p.s12)?;
            den("Σ1c", p.s1c)?;
            den("Σ2c", p.s2c)?;
            den("Σ12 + η1", p.s12 + p.e1)?;
            den("Σ12 + η2", p.s12 + p.e2)?;
            den("Σ12 + η1 + η2", p.s12 + p.e1 + p.e2)?;
            den("Σ1c + η1", p.s1c + p.e1)?;
            den("Σ2c + η2", p.s2c + p.e2)?;
            den("2ωc + ηc", p.w)?;
            den("Δ12 + η1 + 2ωc + ηc", p.d12 + p.e1 + p.w)?;
            den("Δ21 + η2 + 2ωc + ηc", p.d21 + p.e2 + p.w)?;
            den("Δ12 + 2ωc + ηc", p.d12 + p.w)?;
            den("Δ21 + 2ωc + ηc", p.d21 + p.w)?;
        }
        Ok(p)
    }
}

/// Second-order rotating-wave term (direct coupling only).
pub fn zeta2_rw(p: &PertParams) -> f64 {
    p.g12 * p.g12 * (2.0 / (p.d12 - p.e2) + 2.0 / (p.d21 - p.e1))
}

/// Third-order rotating-wave term (interference of the direct and coupler paths).
pub fn zeta3_rw(p: &PertParams) -> f64 {
    let (d12, d21, d1c, d2c) = (p.d12, p.d21, p.d1c, p.d2c);
    p.g1c * p.g2c * p.g12
        * (4.0 / ((d12 - p.e2) * d1c) + 4.0 / ((d21 - p.e1) * d2c) + 2.0 / (d1c * d2c)
            - 2.0 / (d12 * d1c)
            - 2.0 / (d21 * d2c))
}

/// Fourth-order rotating-wave term through the coupler (O(g12) pieces omitted).
pub fn zeta4_rw(p: &PertParams) -> f64 {
    let (d12, d21, d1c, d2c) = (p.d12, p.d21, p.d1c, p.d2c);
    let inv = 1.0 / d1c + 1.0 / d2c;
    p.g1c.powi(2)
        * p.g2c.powi(2)
        * (2.0 * inv * inv / (d1c + d2c - p.ec) + 2.0 / (d2c * d2c * (d21 - p.e1))
            + 2.0 / (d1c * d1c * (d12 - p.e2))
            - (1.0 / d2c + 1.0 / d12) / (d1c * d1c)
            - (1.0 / d1c + 1.0 / d21) / (d2c * d2c))
}

/// Second-order counter-rotating term.
pub fn zeta2_crw(p: &PertParams) -> f64 {
    p.g12 * p.g12 * (-4.0 / (p.s12 + p.e1 + p.e2) + 2.0 / (p.s12 + p.e1) + 2.0 / (p.s12 + p.e2))
}

/// Third-order counter-rotating energy corrections of |101>, |100>, |001>, |000>.
pub fn e3_crw(p: &PertParams) -> [f64; 4] {
    let g = p.g1c * p.g2c * p.g12;
    let (d12, d21, d1c, d2c, s12, s1c, s2c, e1, e2) =
        (p.d12, p.d21, p.d1c, p.d2c, p.s12, p.s1c, p.s2c, p.e1, p.e2);
    let e101 = g
        * (8.0 / ((s1c + e1) * (s12 + e1 + e2)) + 8.0 / ((s1c + e1) * (s2c + e2))
            + 8.0 / ((s2c + e2) * (s12 + e1 + e2))
            - 4.0 / (d2c * (s1c + e1))
            - 4.0 / ((d12 - e2) * (s2c + e2))
            - 4.0 / ((d21 - e1) * (s1c + e1))
            - 4.0 / (d1c * (s2c + e2))
            + 2.0 / (d1c * s12)
            + 2.0 / (d2c * s12));
    let e100 = g
        * (4.0 / ((s1c + e1) * (s12 + e1)) + 4.0 / ((s12 + e1) * s2c) + 4.0 / ((s1c + e1) * s2c)
            - 2.0 / (d1c * s2c)
            - 2.0 / (d12 * s2c));
    let e001 = g
        * (4.0 / ((s2c + e2) * (s12 + e2)) + 4.0 / ((s12 + e2) * s1c) + 4.0 / ((s2c + e2) * s1c)
            - 2.0 / (d2c * s1c)
            - 2.0 / (d21 * s1c));
    let e000 = g * (2.0 / (s1c * s12) + 2.0 / (s1c * s2c) + 2.0 / (s2c * s12));
    [e101, e100, e001, e000]
}

pub fn zeta3_crw(p: &PertParams) -> f64 {
    let [e101, e100, e001, e000] = e3_crw(p);
    (e101 - e001) - (e100 - e000)
}

/// Fourth-order counter-rotating corrections of order g⁴/(Δ²Σ) for |101>, |100>, |001>.
pub fn e4_crw_delta_sq(p: &PertParams) -> [f64; 3] {
    let (d12, d21, d1c, d2c, s12, s1c, s2c, e1, e2, w) =
        (p.d12, p.d21, p.d1c, p.d2c, p.s12, p.s1c, p.s2c, p.e1, p.e2, p.w);
    let q = p.g1c.powi(2) * p.g2c.powi(2);
    let (g1, g2) = (p.g1c.powi(4), p.g2c.powi(4));
    let a101 = q
        * (-4.0 / (d2c * d2c * (d12 + e1 + w)) - 4.0 / (d1c * d1c * (d21 + e2 + w))
            + 1.0 / (d1c * d1c * s12)
            + 1.0 / (d2c * d2c * s12)
            - 4.0 / (d2c * (d21 - e1) * (s1c + e1))
            - 4.0 / (d1c * (d12 - e2) * (s2c + e2))
            - 4.0 / (d2c * w * d1c)
            + 2.0 / (d1c * d2c * s12)
            + 2.0 / (d2c * d2c * (s1c + e1))
            + 2.0 / (d1c * d1c * (s2c + e2)))
        - 2.0 * g2 / (d2c * d2c * w)
        - 2.0 * g1 / (d1c * d1c * w)
        + 2.0 * g1 / (d1c * d1c * (s1c + e1))
        + 2.0 * g2 / (d2c * d2c * (s2c + e2));
    let a100 = q * (-2.0 / (d1c * d1c * (d21 + w)) - 2.0 / (d1c * d12 * s2c) + 1.0 / (d1c * d1c * s2c))
        + 2.0 * g1 / (d1c * d1c) * (-1.0 / w + 1.0 / (s1c + e1));
    let a001 = q * (-2.0 / (d2c * d2c * (d12 + w)) - 2.0 / (d2c * d21 * s1c) + 1.0 / (d2c * d2c * s1c))
        + 2.0 * g2 / (d2c * d2c) * (-1.0 / w + 1.0 / (s2c + e2));
    [a101, a100, a001]
}

/// Fourth-order counter-rotating corrections of order g⁴/(ΔΣ²) for |101>, |100>, |001>.
pub fn e4_crw_sigma_sq(p: &PertParams) -> [f64; 3] {
    let (d12, d21, d1c, d2c, s1c, s2c, e1, e2, w) =
        (p.d12, p.d21, p.d1c, p.d2c, p.s1c, p.s2c, p.e1, p.e2, p.w);
    let q = p.g1c.powi(2) * p.g2c.powi(2);
    let (g1, g2) = (p.g1c.powi(4), p.g2c.powi(4));
    let b101 = q
        * (8.0 / (d2c * (d12 + e1 + w) * (s1c + e1)) + 8.0 / (d1c * (d21 + e2 + w) * (s2c + e2))
            + 8.0 / (d2c * w * (s1c + e1))
            + 8.0 / (d1c * w * (s2c + e2))
            + 2.0 / ((d12 - e2) * (s2c + e2).powi(2))
            + 2.0 / ((d21 - e1) * (s1c + e1).powi(2))
            - 2.0 / (d2c * (s1c + e1).powi(2))
            - 2.0 / (d1c * (s2c + e2).powi(2)))
        + 8.0 * g2 / (d2c * w * (s2c + e2))
        + 8.0 * g1 / (d1c * w * (s1c + e1))
        - 2.0 * g1 / (d1c * (s1c + e1).powi(2))
        - 2.0 * g2 / (d2c * (s2c + e2).powi(2));
    let b100 = q
        * (4.0 / (d1c * s2c * (d21 + w)) + 4.0 / (d1c * s2c * w) + 1.0 / (d12 * s2c * s2c)
            - 1.0 / (d1c * s2c * s2c))
        + g1 * (8.0 / (d1c * w * (s1c + e1)) - 2.0 / (d1c * (s1c + e1).powi(2)));
    let b001 = q
        * (4.0 / (d2c * s1c * (d12 + w)) + 4.0 / (d2c * s1c * w) + 1.0 / (d21 * s1c * s1c)
            - 1.0 / (d2c * s1c * s1c))
        + g2 * (8.0 / (d2c * w * (s2c + e2)) - 2.0 / (d2c * (s2c + e2).powi(2)));
    [b101, b100, b001]
}

pub fn zeta4_crw(p: &PertParams) -> f64 {
    let [a101, a100, a001] = e4_crw_delta_sq(p);
    let [b101, b100, b001] = e4_crw_sigma_sq(p);
    (a101 + b101 - a001 - b001) - (a100 + b100)
}

/// Static ZZ up to fourth order in the couplings (GHz).
pub fn zz_perturbative(op: &OperatingPoint, eta: [f64; 3], include_crw: bool) -> Result<ZzBreakdown> {
    let p = PertParams::new(op, eta[0], eta[1], eta[2], include_crw)?;
    let mut b = ZzBreakdown {
        zeta2_rw: zeta2_rw(&p),
        zeta3_rw: zeta3_rw(&p),
        zeta4_rw: zeta4_rw(&p),
        dispersive: (op.g1c / p.d1c.abs()).max(op.g2c / p.d2c.abs()) < 0.2,
        ..Default::default()
    };
    if include_crw {
        b.zeta2_crw = zeta2_crw(&p);
        b.zeta3_crw = zeta3_crw(&p);
        b.zeta4_crw = zeta4_crw(&p);
    }
    b.total = b.sum_of_terms();
    Ok(b)
}

/// ζ = (E101 − E001) − (E100 − E000) in GHz from dressed energies.
pub fn zeta_from_dressed(db: &DressedBasis) -> Result<f64> {
    let mut e = [0.0; 4];
    for (k, l) in [(1, 0, 1), (0, 0, 1), (1, 0, 0), (0, 0, 0)].into_iter().enumerate() {
        let label = BasisLabel::new(l.0, l.1, l.2);
        let i = db.space.index(label)?;
        if db.overlap[i] < 0.5 {
            return Err(Error::Ambiguous {
                label: label.to_string(),
                overlap: db.overlap[i],
            });
        }
        e[k] = db.energies[i];
    }
    Ok(((e[0] - e[1]) - (e[2] - e[3])) / TWO_PI)
}

/// Static ZZ from the spectrum of the full Hamiltonian (GHz).
///
/// |000> and |101> take the eigenvalue of largest bare weight. |100> and |001> enter
/// only through their sum, which is taken over the two eigenvalues carrying the most
/// weight in span{|100>, |001>}, so hybridized (resonant) qubits need no labeling.
pub fn zz_exact(op: &OperatingPoint, dev: &DeviceParams, coupler_levels: usize) -> Result<f64> {
    let sys = System::new(dev.clone(), coupler_levels)?;
    let space = sys.space();
    let e = eigh(&sys.hamiltonian_op(op))?;
    let weight = |labels: &[BasisLabel]| -> Result<Vec<f64>> {
        let idx = labels.iter().map(|&l| space.index(l)).collect::<Result<Vec<_>>>()?;
        Ok((0..e.values.len())
            .map(|j| idx.iter().map(|&i| e.vectors[(i, j)].norm_sqr()).sum())
            .collect())
    };
    let ranked = |w: Vec<f64>| {
        let mut order: Vec<usize> = (0..w.len()).collect();
        order.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
        order
    };
    let single = |l: BasisLabel| -> Result<f64> {
        let w = weight(&[l])?;
        let j = ranked(w.clone())[0];
        if w[j] < 0.5 {
            return Err(Error::Ambiguous {
                label: l.to_string(),
                overlap: w[j],
            });
        }
        Ok(e.values[j])
    };
    let pair = ranked(weight(&[BasisLabel::new(1, 0, 0), BasisLabel::new(0, 0, 1)])?);
    let e_pair = e.values[pair[0]] + e.values[pair[1]];
    let zeta = single(BasisLabel::new(1, 0, 1))? + single(BasisLabel::new(0, 0, 0))? - e_pair;
    Ok(zeta / TWO_PI)
}

/// Dressed |101>–|200>-type splitting: min gap of the two eigenvalues closest to E(bare a)
/// and E(bare b), in GHz. Used as the swap-rate oracle for chevrons.
pub fn dressed_gap(h: &CMat, space: Space, a: BasisLabel, b: BasisLabel) -> Result<f64> {
    let e = eigh(h)?;
    let (ia, ib) = (space.index(a)?, space.index(b)?);
    let w: Vec<f64> = (0..e.values.len())
        .map(|j| e.vectors[(ia, j)].norm_sqr() + e.vectors[(ib, j)].norm_sqr())
        .collect();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&x, &y| w[y].total_cmp(&w[x]));
    Ok((e.values[order[0]] - e.values[order[1]]).abs() / TWO_PI)
}
