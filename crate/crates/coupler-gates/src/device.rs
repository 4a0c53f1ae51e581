//! Device constants, SQUID tuning curves and frequency-dependent couplings.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qutrit::SystemFrequencies;

const DEFAULT_DEVICE: &str = include_str!("../devices/default.json");

/// Environment variable naming a device file used when none is given explicitly.
pub const DEVICE_ENV: &str = "COUPLER_GATES_DEVICE";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Squid {
    pub ej1_ghz: f64,
    pub ej2_ghz: f64,
    pub ec_ghz: f64,
}

impl Squid {
    pub fn frequency(&self, flux: f64) -> f64 {
        transmon_frequency(self.ej1_ghz, self.ej2_ghz, self.ec_ghz, flux)
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequency(0.0)
    }

    pub fn min_frequency(&self) -> f64 {
        self.frequency(0.5)
    }

    /// Flux in [0, 0.5] giving frequency `f`; the tuning curve is monotone there.
    pub fn flux_for_frequency(&self, f: f64) -> Result<f64> {
        let (hi, lo) = (self.max_frequency(), self.min_frequency());
        if !(lo - 1e-12..=hi + 1e-12).contains(&f) {
            return Err(Error::Domain(format!(
                "frequency {f} GHz outside tuning range [{lo:.4}, {hi:.4}]"
            )));
        }
        let (mut a, mut b) = (0.0, 0.5);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.frequency(m) > f {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-16 {
                break;
            }
        }
        Ok(0.5 * (a + b))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Capacitances {
    pub c1: f64,
    pub cc: f64,
    pub c2: f64,
    pub c1c: f64,
    pub c2c: f64,
    pub c12: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingModel {
    /// g from the capacitance network, scaling as √(f_i f_j).
    Capacitance,
    /// g_ref·√(f_i f_j)/f_ref with the quoted reference couplings.
    ReferenceScaled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exponential {
    pub amplitude: f64,
    pub tau_ns: f64,
}

/// Step response 1 + Σ a_k e^{−t/τ_k}.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransientModel {
    pub terms: Vec<Exponential>,
}

impl TransientModel {
    pub fn new(terms: &[(f64, f64)]) -> Self {
        TransientModel {
            terms: terms
                .iter()
                .map(|&(amplitude, tau_ns)| Exponential { amplitude, tau_ns })
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn step_response(&self, t: f64) -> f64 {
        1.0 + self
            .terms
            .iter()
            .map(|e| e.amplitude * (-t / e.tau_ns).exp())
            .sum::<f64>()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transients {
    #[serde(default)]
    pub qb2: TransientModel,
    #[serde(default)]
    pub cplr: TransientModel,
    #[serde(default)]
    pub crosstalk_cplr_to_qb2: TransientModel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bias {
    pub f1: f64,
    pub fc: f64,
    pub f2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    pub f1_ghz: f64,
    pub eta1_ghz: f64,
    pub etac_ghz: f64,
    pub eta2_ghz: f64,
    pub qb2_squid: Squid,
    pub cplr_squid: Squid,
    pub coupling_model: CouplingModel,
    pub g1c_ref_ghz: f64,
    pub g2c_ref_ghz: f64,
    pub g12_ref_ghz: f64,
    pub g_ref_frequency_ghz: f64,
    pub capacitances_ff: Capacitances,
    pub t1_qb1_ns: f64,
    pub t1_cplr_ns: f64,
    pub t1_qb2_ns: f64,
    pub idle_cz_ghz: Bias,
    pub idle_iswap_ghz: Bias,
    #[serde(default)]
    pub transients: Transients,
}

impl Default for DeviceParams {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_DEVICE).expect("bundled device file parses")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Cz,
    Iswap,
}

/// Frequencies with the couplings evaluated there (all GHz).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub f1: f64,
    pub fc: f64,
    pub f2: f64,
    pub g1c: f64,
    pub g2c: f64,
    pub g12: f64,
}

impl DeviceParams {
    pub fn from_json(text: &str) -> Result<Self> {
        let d: DeviceParams = serde_json::from_str(text)?;
        d.validate()?;
        Ok(d)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::Validation(format!("{}: {j}", path.display())),
            other => other,
        })
    }

    /// Explicit path, else `COUPLER_GATES_DEVICE`, else the bundled device.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        if let Some(p) = path {
            return Self::load(p);
        }
        match std::env::var_os(DEVICE_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        for (name, t) in [("t1_qb1_ns", self.t1_qb1_ns), ("t1_cplr_ns", self.t1_cplr_ns), ("t1_qb2_ns", self.t1_qb2_ns)] {
            if !(t > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        for (name, s) in [("qb2_squid", &self.qb2_squid), ("cplr_squid", &self.cplr_squid)] {
            if !(s.ej2_ghz > 0.0 && s.ej1_ghz >= s.ej2_ghz && s.ec_ghz > 0.0) {
                return bad(format!("{name} needs EJ1 >= EJ2 > 0 and Ec > 0"));
            }
        }
        let c = &self.capacitances_ff;
        if [c.c1, c.cc, c.c2, c.c1c, c.c2c, c.c12].iter().any(|&x| !(x > 0.0)) {
            return bad("capacitances must be positive".into());
        }
        for (name, e) in [("eta1_ghz", self.eta1_ghz), ("etac_ghz", self.etac_ghz), ("eta2_ghz", self.eta2_ghz)] {
            if !(e < 0.0) {
                return bad(format!("{name} must be negative"));
            }
        }
        if !(self.f1_ghz > 0.0 && self.g_ref_frequency_ghz > 0.0) {
            return bad("frequencies must be positive".into());
        }
        for m in [&self.transients.qb2, &self.transients.cplr, &self.transients.crosstalk_cplr_to_qb2] {
            if m.terms.iter().any(|e| !(e.tau_ns > 0.0)) {
                return bad("transient time constants must be positive".into());
            }
        }
        Ok(())
    }

    pub fn couplings(&self, f1: f64, fc: f64, f2: f64) -> (f64, f64, f64) {
        match self.coupling_model {
            CouplingModel::Capacitance => capacitive_couplings(&self.capacitances_ff, f1, fc, f2),
            CouplingModel::ReferenceScaled => {
                let r = self.g_ref_frequency_ghz;
                (
                    coupling_at(f1, fc, self.g1c_ref_ghz, r, r),
                    coupling_at(f2, fc, self.g2c_ref_ghz, r, r),
                    coupling_at(f1, f2, self.g12_ref_ghz, r, r),
                )
            }
        }
    }

    pub fn operating_point(&self, f1: f64, fc: f64, f2: f64) -> OperatingPoint {
        let (g1c, g2c, g12) = self.couplings(f1, fc, f2);
        OperatingPoint { f1, fc, f2, g1c, g2c, g12 }
    }

    pub fn frequencies(&self, op: &OperatingPoint) -> SystemFrequencies {
        SystemFrequencies {
            f1: op.f1,
            fc: op.fc,
            f2: op.f2,
            eta1: self.eta1_ghz,
            etac: self.etac_ghz,
            eta2: self.eta2_ghz,
            g1c: op.g1c,
            g2c: op.g2c,
            g12: op.g12,
        }
    }

    pub fn system_at(&self, f1: f64, fc: f64, f2: f64) -> SystemFrequencies {
        self.frequencies(&self.operating_point(f1, fc, f2))
    }

    pub fn idle_bias(&self, gate: GateKind) -> Bias {
        match gate {
            GateKind::Cz => self.idle_cz_ghz,
            GateKind::Iswap => self.idle_iswap_ghz,
        }
    }

    /// Γ1 per element (1/ns) in QB1, CPLR, QB2 order.
    pub fn decay_rates(&self) -> [f64; 3] {
        [1.0 / self.t1_qb1_ns, 1.0 / self.t1_cplr_ns, 1.0 / self.t1_qb2_ns]
    }
}

pub fn idle_config(params: &DeviceParams, gate: GateKind) -> OperatingPoint {
    let b = params.idle_bias(gate);
    params.operating_point(b.f1, b.fc, b.f2)
}

/// f = √(8·Ec·EJ(Φ)) − Ec for an asymmetric SQUID transmon.
pub fn transmon_frequency(ej1: f64, ej2: f64, ec: f64, flux: f64) -> f64 {
    let (c, s) = ((PI * flux).cos(), (PI * flux).sin());
    let ej = ((ej1 + ej2).powi(2) * c * c + (ej1 - ej2).powi(2) * s * s).sqrt();
    (8.0 * ec * ej).sqrt() - ec
}

pub fn coupling_at(f_i: f64, f_j: f64, g_ref: f64, f_i_ref: f64, f_j_ref: f64) -> f64 {
    g_ref * (f_i * f_j).sqrt() / (f_i_ref * f_j_ref).sqrt()
}

/// Couplings (g1c, g2c, g12) from the capacitance network; g12 includes the coupler-mediated
/// capacitive path C1c·C2c/Cc.
pub fn capacitive_couplings(c: &Capacitances, f1: f64, fc: f64, f2: f64) -> (f64, f64, f64) {
    let g1c = 0.5 * c.c1c / (c.c1 * c.cc).sqrt() * (f1 * fc).sqrt();
    let g2c = 0.5 * c.c2c / (c.c2 * c.cc).sqrt() * (f2 * fc).sqrt();
    let g12 = 0.5 * (c.c12 + c.c1c * c.c2c / c.cc) / (c.c1 * c.c2).sqrt() * (f1 * f2).sqrt();
    (g1c, g2c, g12)
}
