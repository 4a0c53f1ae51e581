//! Declarative experiments: a versioned JSON schema, validation, execution and
//! artifact writing (CSV tables with a provenance comment line, JSON summaries and a
//! run manifest written last).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{
    calibrate_z_corrections, find_zz_free_length, target_with_z, synced_iswap, tune_cz, tune_iswap, tuneup_grid, Axis, GridSpec,
    TuneOptions, ZMechanism,
};
use crate::chevron::{bare_resonance, dressed_resonance, exchange_pair, square_pulse_transfer, swap_rate, SwapRate};
use crate::device::{DeviceParams, GateKind};
use crate::dynamics::{flux_excursion, GateSimulator, LineResponse, NoiseParams};
use crate::effective::{zz_exact, zz_perturbative};
use crate::error::{Error, Result};
use crate::linalg::CVec;
use crate::metrics::{chi_from_superop, conditional_phase, fidelities, chi_of_unitary, Fidelities};
use crate::pulse::{round_trip_error, PulseShape, PulseSpec};
use crate::qutrit::{BasisLabel, SubsystemId};
use crate::rb::{
    interleaved_error, interleaving_xy_overhead, simulate_rb, CliffordGroup, DepolarizingCliffords, GateChannels,
    NativeGate, RbConfig, RbResult, SequenceModel,
};
use crate::system::System;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    /// Device file, relative to the scenario file. The command line takes precedence.
    #[serde(default)]
    pub device: Option<PathBuf>,
    pub experiment: Experiment,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Chevron(ChevronScenario),
    ZzScan(ZzScanScenario),
    LeakageScan(LeakageScanScenario),
    Tuneup(TuneupScenario),
    Qpt(QptScenario),
    Rb(RbScenario),
    ZzFreeSearch(ZzFreeScenario),
    PredistortionCheck(PredistortionScenario),
}

pub const KINDS: [(&str, &str); 8] = [
    ("chevron", "swap chevrons under square pulses and fitted swap rates vs the dressed gap"),
    ("zz-scan", "static ZZ vs coupler frequency: exact 3-level, exact 2-level and perturbative"),
    ("leakage-scan", "populations after N repeated gates vs coupler excursion and gate length"),
    ("tuneup", "coarse amplitude grid and refined calibration of a CZ or iSWAP pulse"),
    ("qpt", "process tomography, fidelities and the per-element T1 error budget"),
    ("rb", "standard and interleaved randomized benchmarking"),
    ("zz-free-search", "iSWAP length at which the ZZ angle per gate vanishes"),
    ("predistortion-check", "transient round trips and the CZ phase shift with and without predistortion"),
];

impl Experiment {
    pub fn kind(&self) -> &'static str {
        let k = match self {
            Experiment::Chevron(_) => 0,
            Experiment::ZzScan(_) => 1,
            Experiment::LeakageScan(_) => 2,
            Experiment::Tuneup(_) => 3,
            Experiment::Qpt(_) => 4,
            Experiment::Rb(_) => 5,
            Experiment::ZzFreeSearch(_) => 6,
            Experiment::PredistortionCheck(_) => 7,
        };
        KINDS[k].0
    }
}

fn default_true() -> bool {
    true
}
fn default_levels() -> usize {
    3
}
fn default_tau_max() -> f64 {
    600.0
}
fn default_tau_step() -> f64 {
    2.0
}
fn default_one() -> usize {
    1
}
fn default_pad() -> f64 {
    5.0
}
fn default_tol_ns() -> f64 {
    0.01
}
fn default_slepian() -> PulseShape {
    PulseShape::slepian()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChevronScenario {
    pub gate: GateKind,
    /// Coupler frequencies of the swap-rate lines (GHz).
    pub fc: Axis,
    /// Optional QB2 detuning axis (MHz, from the dressed resonance) for a full chevron map.
    #[serde(default)]
    pub detuning_mhz: Option<Axis>,
    #[serde(default = "default_tau_max")]
    pub tau_max_ns: f64,
    #[serde(default = "default_tau_step")]
    pub tau_step_ns: f64,
    #[serde(default = "default_levels")]
    pub coupler_levels: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZzScanScenario {
    pub fc: Axis,
    /// Defaults to the device f1.
    #[serde(default)]
    pub f1: Option<f64>,
    /// Defaults to f1 (resonant qubits).
    #[serde(default)]
    pub f2: Option<f64>,
    #[serde(default = "default_true")]
    pub counter_rotating: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakageScanScenario {
    pub gate: GateKind,
    pub shape: PulseShape,
    /// Gate lengths (ns).
    pub t_g: Vec<f64>,
    pub fc_min: Axis,
    /// QB2 excursion; defaults to the bare exchange resonance.
    #[serde(default)]
    pub f2_peak: Option<f64>,
    /// Largest number of back-to-back gates.
    #[serde(default = "default_one")]
    pub repetitions: usize,
    /// Prepared idle state; defaults to |101> (CZ) or |100> (iSWAP).
    #[serde(default)]
    pub initial: Option<String>,
    /// Recorded idle states; defaults to the initial state and its main leakage targets.
    #[serde(default)]
    pub record: Option<Vec<String>>,
    #[serde(default)]
    pub padding_ns: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneupScenario {
    pub gate: GateKind,
    pub t_g: f64,
    #[serde(default = "default_slepian")]
    pub shape: PulseShape,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub options: Option<TuneOptions>,
    #[serde(default)]
    pub padding_ns: f64,
    #[serde(default)]
    pub line: LineResponse,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QptScenario {
    pub pulse: PulseSpec,
    #[serde(default = "default_pad")]
    pub padding_ns: f64,
    #[serde(default)]
    pub line: LineResponse,
    /// Also run each element's relaxation alone.
    #[serde(default = "default_true")]
    pub budget: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RbModel {
    /// Ideal Cliffords with two-qubit depolarizing noise.
    Depolarizing { p: f64, p_interleaved: f64 },
    /// Simulated native gate channel, ideal or depolarized XY pulses.
    GateChannels {
        pulse: PulseSpec,
        #[serde(default = "default_true")]
        t1: bool,
        #[serde(default = "default_pad")]
        padding_ns: f64,
        #[serde(default)]
        xy_error: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbScenario {
    pub native: NativeGate,
    pub lengths: Vec<usize>,
    pub n_seq: usize,
    #[serde(default = "default_true")]
    pub interleave: bool,
    pub model: RbModel,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZzFreeScenario {
    pub range_ns: [f64; 2],
    /// Coupler excursion bracket scanned for the first full swap (GHz).
    pub fc_bracket: [f64; 2],
    #[serde(default = "default_slepian")]
    pub shape: PulseShape,
    #[serde(default = "default_tol_ns")]
    pub tol_ns: f64,
    /// Extra lengths evaluated for the slope curve.
    #[serde(default)]
    pub scan_ns: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredistortionScenario {
    /// Pulses whose flux excursions are round-tripped through every line model.
    pub pulses: Vec<PulseSpec>,
    /// CZ pulse used for the conditional-phase comparison.
    pub phase_pulse: PulseSpec,
    #[serde(default)]
    pub padding_ns: f64,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Validation(format!("{field}: {msg}"))
}

fn check_axis(field: &str, a: &Axis) -> Result<()> {
    a.validate(field).map_err(|e| invalid(field, e))
}

fn check_pulse(field: &str, p: &PulseSpec) -> Result<()> {
    if !(p.t_g > 0.0 && p.dt > 0.0 && p.dt <= p.t_g) {
        return Err(invalid(field, "need 0 < dt <= t_g"));
    }
    if !(p.fc_min > 0.0 && p.f2_peak > 0.0) {
        return Err(invalid(field, "frequencies must be positive"));
    }
    Ok(())
}

fn parse_label(field: &str, s: &str) -> Result<BasisLabel> {
    BasisLabel::parse(s).map_err(|e| invalid(field, e))
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Validation(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Field-level checks that need no device.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        match &self.experiment {
            Experiment::Chevron(c) => {
                check_axis("experiment.fc", &c.fc)?;
                if let Some(d) = &c.detuning_mhz {
                    check_axis("experiment.detuning_mhz", d)?;
                }
                if !(c.tau_step_ns > 0.0 && c.tau_max_ns >= 8.0 * c.tau_step_ns) {
                    return Err(invalid("experiment.tau_max_ns", "need at least 8 delay points"));
                }
                if !(2..=4).contains(&c.coupler_levels) {
                    return Err(invalid("experiment.coupler_levels", "must be 2, 3 or 4"));
                }
            }
            Experiment::ZzScan(z) => check_axis("experiment.fc", &z.fc)?,
            Experiment::LeakageScan(l) => {
                check_axis("experiment.fc_min", &l.fc_min)?;
                if l.t_g.is_empty() || l.t_g.iter().any(|t| !(*t > 0.0)) {
                    return Err(invalid("experiment.t_g", "need one or more positive lengths"));
                }
                if l.repetitions == 0 {
                    return Err(invalid("experiment.repetitions", "must be at least 1"));
                }
                if let Some(s) = &l.initial {
                    parse_label("experiment.initial", s)?;
                }
                for s in l.record.iter().flatten() {
                    parse_label("experiment.record", s)?;
                }
                if !(l.padding_ns >= 0.0) {
                    return Err(invalid("experiment.padding_ns", "must be non-negative"));
                }
            }
            Experiment::Tuneup(t) => {
                if !(t.t_g > 0.0) {
                    return Err(invalid("experiment.t_g", "must be positive"));
                }
                if let Some(g) = &t.grid {
                    check_axis("experiment.grid.fc_min", &g.fc_min)?;
                    check_axis("experiment.grid.f2_peak", &g.f2_peak)?;
                }
                if let Some(o) = &t.options {
                    if o.repetitions.is_empty() || o.repetitions.contains(&0) || !(o.tol_ghz > 0.0) {
                        return Err(invalid("experiment.options", "need positive repetitions and tolerance"));
                    }
                }
            }
            Experiment::Qpt(q) => {
                check_pulse("experiment.pulse", &q.pulse)?;
                if !(q.padding_ns >= 0.0) {
                    return Err(invalid("experiment.padding_ns", "must be non-negative"));
                }
            }
            Experiment::Rb(r) => {
                if r.lengths.len() < 3 {
                    return Err(invalid("experiment.lengths", "need at least 3 sequence lengths"));
                }
                if r.n_seq < 2 {
                    return Err(invalid("experiment.n_seq", "need at least 2 sequences per length"));
                }
                match &r.model {
                    RbModel::Depolarizing { p, p_interleaved } => {
                        if !((0.0..=1.0).contains(p) && (0.0..=1.0).contains(p_interleaved)) {
                            return Err(invalid("experiment.model", "depolarizing parameters must lie in [0, 1]"));
                        }
                    }
                    RbModel::GateChannels {
                        pulse, xy_error, padding_ns, ..
                    } => {
                        check_pulse("experiment.model.pulse", pulse)?;
                        let native = match pulse.gate {
                            GateKind::Cz => NativeGate::Cz,
                            GateKind::Iswap => NativeGate::Iswap,
                        };
                        if native != r.native {
                            return Err(invalid("experiment.model.pulse.gate", "must match experiment.native"));
                        }
                        if !(0.0..=1.0).contains(xy_error) || !(*padding_ns >= 0.0) {
                            return Err(invalid("experiment.model", "xy_error in [0, 1] and padding_ns >= 0"));
                        }
                    }
                }
            }
            Experiment::ZzFreeSearch(z) => {
                if !(z.range_ns[0] > 0.0 && z.range_ns[1] > z.range_ns[0]) {
                    return Err(invalid("experiment.range_ns", "need 0 < lo < hi"));
                }
                if !(z.fc_bracket[1] > z.fc_bracket[0]) {
                    return Err(invalid("experiment.fc_bracket", "need lo < hi"));
                }
                if !(z.tol_ns > 0.0) {
                    return Err(invalid("experiment.tol_ns", "must be positive"));
                }
            }
            Experiment::PredistortionCheck(p) => {
                for (k, s) in p.pulses.iter().enumerate() {
                    check_pulse(&format!("experiment.pulses[{k}]"), s)?;
                }
                check_pulse("experiment.phase_pulse", &p.phase_pulse)?;
                if p.phase_pulse.gate != GateKind::Cz {
                    return Err(invalid("experiment.phase_pulse.gate", "must be cz"));
                }
            }
        }
        Ok(())
    }
}

/// Scenario file bytes, parsed scenario and its SHA-256.
pub struct LoadedScenario {
    pub path: PathBuf,
    pub scenario: Scenario,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Validation(format!("{}: not UTF-8", path.display())))?;
    let scenario = Scenario::from_json(&text).map_err(|e| match e {
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok(LoadedScenario {
        path: path.to_path_buf(),
        scenario,
        sha256: sha256_hex(&bytes),
    })
}

/// Device path: explicit, else the scenario's (relative to its file), else the
/// environment variable or bundled device.
pub fn resolve_device(explicit: Option<&Path>, loaded: &LoadedScenario) -> Result<(DeviceParams, Option<PathBuf>)> {
    let path = explicit.map(Path::to_path_buf).or_else(|| {
        loaded.scenario.device.as_ref().map(|p| {
            if p.is_absolute() {
                p.clone()
            } else {
                loaded.path.parent().unwrap_or(Path::new(".")).join(p)
            }
        })
    });
    let dev = DeviceParams::resolve(path.as_deref())?;
    Ok((dev, path))
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub scenario: Scenario,
    pub scenario_sha256: String,
    pub device_sha256: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_clock_s: f64,
    pub outputs: Vec<OutputFile>,
}

/// Collects artifacts for one run. CSV files get a comment line naming the toolkit
/// version and scenario hash before the header row.
pub struct Outputs {
    dir: PathBuf,
    stamp: String,
    files: Vec<OutputFile>,
}

impl Outputs {
    pub fn new(dir: &Path, scenario_sha: &str) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            stamp: format!("# coupler-gates {} scenario={scenario_sha}\n", env!("CARGO_PKG_VERSION")),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.files.push(OutputFile {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = self.stamp.clone().into_bytes();
        body(&mut buf).map_err(|e| Error::io(name, e))?;
        self.write(name, &buf)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut buf = serde_json::to_vec_pretty(value)?;
        buf.push(b'\n');
        self.write(name, &buf)
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }
}

/// Write to a sibling temporary file, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let io = |e| Error::io(path.display().to_string(), e);
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}

/// Execute a validated scenario, writing artifacts and finally `manifest.json`.
pub fn run(loaded: &LoadedScenario, device: &DeviceParams, out_dir: &Path, seed: Option<u64>) -> Result<RunManifest> {
    let start = Instant::now();
    let seed = seed.unwrap_or(loaded.scenario.seed);
    let mut out = Outputs::new(out_dir, &loaded.sha256)?;
    match &loaded.scenario.experiment {
        Experiment::Chevron(c) => run_chevron(c, device, &mut out)?,
        Experiment::ZzScan(z) => run_zz_scan(z, device, &mut out)?,
        Experiment::LeakageScan(l) => run_leakage_scan(l, device, &mut out)?,
        Experiment::Tuneup(t) => run_tuneup(t, device, &mut out)?,
        Experiment::Qpt(q) => run_qpt(q, device, &mut out)?,
        Experiment::Rb(r) => run_rb(r, device, seed, &mut out)?,
        Experiment::ZzFreeSearch(z) => run_zz_free(z, device, &mut out)?,
        Experiment::PredistortionCheck(p) => run_predistortion(p, device, &mut out)?,
    }
    let manifest = RunManifest {
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: loaded.scenario.clone(),
        scenario_sha256: loaded.sha256.clone(),
        device_sha256: sha256_hex(&serde_json::to_vec(device)?),
        seed,
        workers: rayon::current_num_threads(),
        wall_clock_s: start.elapsed().as_secs_f64(),
        outputs: out.files().to_vec(),
    };
    let mut buf = serde_json::to_vec_pretty(&manifest)?;
    buf.push(b'\n');
    write_atomic(&out_dir.join("manifest.json"), &buf)?;
    Ok(manifest)
}

fn fmt_opt(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

fn run_chevron(c: &ChevronScenario, dev: &DeviceParams, out: &mut Outputs) -> Result<()> {
    let sys = System::new(dev.clone(), c.coupler_levels)?;
    let idle = sys.idle_frame(c.gate)?;
    let f1 = dev.idle_bias(c.gate).f1;
    let n = (c.tau_max_ns / c.tau_step_ns).floor() as usize;
    let taus: Vec<f64> = (0..=n).map(|k| k as f64 * c.tau_step_ns).collect();
    let rates = c
        .fc
        .values()
        .into_par_iter()
        .map(|fc| swap_rate(&sys, &idle, c.gate, f1, fc, &taus))
        .collect::<Result<Vec<SwapRate>>>()?;
    out.csv("swap_rates.csv", |w| {
        writeln!(w, "fc_ghz,f2_ghz,fitted_rate_mhz,dressed_gap_mhz,relative_error,g1c_over_detuning")?;
        for r in &rates {
            let (g1c, _, _) = dev.couplings(f1, r.fc, r.f2);
            writeln!(
                w,
                "{},{},{},{},{:e},{}",
                r.fc,
                r.f2,
                r.fitted * 1e3,
                r.gap * 1e3,
                r.relative_error(),
                g1c / (r.fc - f1)
            )?;
        }
        Ok(())
    })?;
    if let Some(det) = &c.detuning_mhz {
        let (a, b) = exchange_pair(c.gate);
        let rows = c
            .fc
            .values()
            .into_par_iter()
            .map(|fc| {
                let f0 = dressed_resonance(&sys, c.gate, f1, fc, 0.05)?;
                det.values()
                    .into_iter()
                    .map(|d| {
                        let f2 = f0 + d * 1e-3;
                        Ok((fc, f2, square_pulse_transfer(&sys, &idle, a, b, (f1, fc, f2), &taus)?))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        out.csv("chevron.csv", |w| {
            writeln!(w, "fc_ghz,f2_ghz,tau_ns,p_{}", b.to_string().trim_matches(|c| c == '|' || c == '>'))?;
            for (fc, f2, p) in rows.iter().flatten() {
                for (t, v) in taus.iter().zip(p) {
                    writeln!(w, "{fc},{f2},{t},{v:e}")?;
                }
            }
            Ok(())
        })?;
    }
    let monotonic = rates.windows(2).all(|w| (w[1].fitted - w[0].fitted) * (w[1].fc - w[0].fc) < 0.0);
    let worst = rates.iter().map(SwapRate::relative_error).fold(0.0, f64::max);
    out.json(
        "chevron.json",
        &serde_json::json!({
            "gate": c.gate,
            "bare_resonance_ghz": bare_resonance(&sys, c.gate, f1),
            "rates": rates,
            "max_relative_error": worst,
            "rate_increases_toward_qubits": monotonic,
        }),
    )
}

/// Linear-interpolated zero crossings of y(x).
pub fn zero_crossings(x: &[f64], y: &[f64]) -> Vec<f64> {
    (1..x.len())
        .filter(|&i| y[i - 1].is_finite() && y[i].is_finite() && y[i - 1] * y[i] < 0.0)
        .map(|i| x[i - 1] - y[i - 1] * (x[i] - x[i - 1]) / (y[i] - y[i - 1]))
        .collect()
}

fn run_zz_scan(z: &ZzScanScenario, dev: &DeviceParams, out: &mut Outputs) -> Result<()> {
    let f1 = z.f1.unwrap_or(dev.f1_ghz);
    let f2 = z.f2.unwrap_or(f1);
    let eta = [dev.eta1_ghz, dev.etac_ghz, dev.eta2_ghz];
    let fcs = z.fc.values();
    let rows = fcs
        .par_iter()
        .map(|&fc| {
            let op = dev.operating_point(f1, fc, f2);
            let pert = match zz_perturbative(&op, eta, z.counter_rotating) {
                Ok(b) => b.sum_of_terms(),
                Err(Error::Singularity { .. }) => f64::NAN,
                Err(e) => return Err(e),
            };
            Ok((zz_exact(&op, dev, 3)?, zz_exact(&op, dev, 2)?, pert, op.g1c / (fc - f1)))
        })
        .collect::<Result<Vec<_>>>()?;
    out.csv("zz_scan.csv", |w| {
        writeln!(w, "fc_ghz,zz_exact_3level_mhz,zz_exact_2level_mhz,zz_perturbative_mhz,g1c_over_detuning")?;
        for (fc, r) in fcs.iter().zip(&rows) {
            writeln!(w, "{fc},{},{},{},{}", r.0 * 1e3, r.1 * 1e3, fmt_opt(r.2 * 1e3), r.3)?;
        }
        Ok(())
    })?;
    let col = |k: usize| -> Vec<f64> { rows.iter().map(|r| [r.0, r.1, r.2][k]).collect() };
    out.json(
        "zz_scan.json",
        &serde_json::json!({
            "f1_ghz": f1,
            "f2_ghz": f2,
            "zero_crossings_ghz": {
                "exact_3level": zero_crossings(&fcs, &col(0)),
                "exact_2level": zero_crossings(&fcs, &col(1)),
                "perturbative": zero_crossings(&fcs, &col(2)),
            },
            "perturbative_singular": col(2).iter().all(|x| x.is_nan()),
        }),
    )
}

fn run_leakage_scan(l: &LeakageScanScenario, dev: &DeviceParams, out: &mut Outputs) -> Result<()> {
    let sim = GateSimulator::new(dev.clone(), l.gate)?.with_padding(l.padding_ns);
    let idle = dev.idle_bias(l.gate);
    let f2_peak = l.f2_peak.unwrap_or(match l.gate {
        GateKind::Cz => idle.f1 + dev.eta1_ghz,
        GateKind::Iswap => idle.f2,
    });
    let initial = match &l.initial {
        Some(s) => BasisLabel::parse(s)?,
        None => exchange_pair(l.gate).0,
    };
    let record: Vec<BasisLabel> = match &l.record {
        Some(v) => v.iter().map(|s| BasisLabel::parse(s)).collect::<Result<_>>()?,
        None => ["101", "011", "010", "110", "200", "100", "001"]
            .iter()
            .map(|s| BasisLabel::parse(s))
            .collect::<Result<_>>()?,
    };
    let psi0: CVec = sim.frame.state(initial)?;
    let targets: Vec<CVec> = record.iter().map(|&r| sim.frame.state(r)).collect::<Result<_>>()?;
    let cells: Vec<(f64, f64)> = l
        .t_g
        .iter()
        .flat_map(|&t| l.fc_min.values().into_iter().map(move |fc| (t, fc)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(t_g, fc_min)| {
            let spec = PulseSpec::new(l.gate, t_g, fc_min, f2_peak, l.shape);
            let (u, _) = sim.propagate(&spec)?;
            let mut psi = psi0.clone();
            let mut pops = Vec::with_capacity(l.repetitions);
            for _ in 0..l.repetitions {
                psi = &u * psi;
                pops.push(targets.iter().map(|t| t.dotc(&psi).norm_sqr()).collect::<Vec<f64>>());
            }
            Ok(pops)
        })
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = record
        .iter()
        .map(|r| format!("p_{}", r.to_string().trim_matches(|c| c == '|' || c == '>')))
        .collect();
    out.csv("leakage_scan.csv", |w| {
        writeln!(w, "t_g_ns,fc_min_ghz,n,{}", names.join(","))?;
        for (&(t, fc), pops) in cells.iter().zip(&rows) {
            for (n, p) in pops.iter().enumerate() {
                let vals: Vec<String> = p.iter().map(|x| format!("{x:e}")).collect();
                writeln!(w, "{t},{fc},{},{}", n + 1, vals.join(","))?;
            }
        }
        Ok(())
    })?;
    let max_single: Vec<(String, f64)> = names
        .iter()
        .enumerate()
        .map(|(k, name)| (name.clone(), rows.iter().map(|p| p[0][k]).fold(0.0, f64::max)))
        .collect();
    out.json(
        "leakage_scan.json",
        &serde_json::json!({
            "initial": initial.to_string(),
            "f2_peak_ghz": f2_peak,
            "max_after_one_gate": max_single,
        }),
    )
}

fn run_tuneup(t: &TuneupScenario, dev: &DeviceParams, out: &mut Outputs) -> Result<()> {
    let sim = GateSimulator::new(dev.clone(), t.gate)?.with_padding(t.padding_ns).with_line(t.line);
    let grid = t.grid.unwrap_or(match t.gate {
        GateKind::Cz => GridSpec::default_cz(),
        GateKind::Iswap => GridSpec::default_iswap(),
    });
    let coarse = tuneup_grid(&sim, t.t_g, t.shape, &grid)?;
    out.csv("tuneup_grid.csv", |w| coarse.write_csv(w))?;
    let cal = match t.gate {
        GateKind::Cz => tune_cz(&sim, t.t_g, t.shape, &grid, t.options.as_ref().unwrap_or(&TuneOptions::cz()))?,
        GateKind::Iswap => tune_iswap(&sim, t.t_g, t.shape, &grid, t.options.as_ref().unwrap_or(&TuneOptions::iswap()))?,
    };
    out.json("calibrated.json", &cal)
}

/// Target unitary with the gate's native Z angles (deg) folded in.
#[derive(Clone, Debug, Serialize)]
struct BudgetRow {
    channel: &'static str,
    fidelity: Fidelities,
    t1_error: f64,
}

fn run_qpt(q: &QptScenario, dev: &DeviceParams, out: &mut Outputs) -> Result<()> {
    let sim = GateSimulator::new(dev.clone(), q.pulse.gate)?
        .with_padding(q.padding_ns)
        .with_line(q.line);
    let (_, block) = sim.propagate(&q.pulse)?;
    let z = calibrate_z_corrections(&block, q.pulse.gate, ZMechanism::Virtual)?;
    let ideal = chi_of_unitary(&target_with_z(q.pulse.gate, z.theta_z1, z.theta_z2));
    let all = NoiseParams::from_device(dev);
    let mut runs: Vec<(&'static str, NoiseParams)> = vec![("closed", NoiseParams::closed()), ("all", all)];
    if q.budget {
        runs.push(("qb1", all.only(SubsystemId::Qb1)));
        runs.push(("qb2", all.only(SubsystemId::Qb2)));
        runs.push(("cplr", all.only(SubsystemId::Cplr)));
    }
    let channels = runs
        .par_iter()
        .map(|(_, n)| sim.channel(&q.pulse, n))
        .collect::<Result<Vec<_>>>()?;
    let fids: Vec<Fidelities> = channels
        .iter()
        .map(|ch| fidelities(&chi_from_superop(&ch.superop), &ideal))
        .collect();
    let rows: Vec<BudgetRow> = runs
        .iter()
        .zip(&fids)
        .map(|((name, _), f)| BudgetRow {
            channel: name,
            fidelity: *f,
            t1_error: fids[0].average - f.average,
        })
        .collect();
    out.csv("budget.csv", |w| {
        writeln!(w, "channel,process_fidelity,average_fidelity,t1_error")?;
        for r in &rows {
            writeln!(w, "{},{},{},{:e}", r.channel, r.fidelity.process, r.fidelity.average, r.t1_error)?;
        }
        Ok(())
    })?;
    let chi = chi_from_superop(&channels[1].superop);
    out.csv("chi_all.csv", |w| {
        writeln!(w, "row,col,re,im")?;
        for i in 0..16 {
            for j in 0..16 {
                let v = chi.0[(i, j)];
                writeln!(w, "{i},{j},{:e},{:e}", v.re, v.im)?;
            }
        }
        Ok(())
    })?;
    let element_sum: f64 = rows.iter().skip(2).map(|r| r.t1_error).sum();
    out.json(
        "qpt.json",
        &serde_json::json!({
            "pulse": q.pulse,
            "padding_ns": q.padding_ns,
            "z_correction_deg": [z.theta_z1, z.theta_z2],
            "leakage_closed": channels[0].leakage,
            "runs": rows,
            "sum_of_element_errors": if q.budget { Some(element_sum) } else { None },
        }),
    )
}

fn run_rb(r: &RbScenario, dev: &DeviceParams, seed: u64, out: &mut Outputs) -> Result<()> {
    let group = CliffordGroup::build(r.native)?;
    let model: Box<dyn SequenceModel> = match &r.model {
        RbModel::Depolarizing { p, p_interleaved } => Box::new(DepolarizingCliffords {
            p: *p,
            p_interleaved: *p_interleaved,
        }),
        RbModel::GateChannels {
            pulse,
            t1,
            padding_ns,
            xy_error,
        } => {
            let sim = GateSimulator::new(dev.clone(), pulse.gate)?.with_padding(*padding_ns);
            let (_, block) = sim.propagate(pulse)?;
            let z = calibrate_z_corrections(&block, pulse.gate, ZMechanism::Virtual)?;
            let noise = if *t1 { NoiseParams::from_device(dev) } else { NoiseParams::closed() };
            Box::new(GateChannels {
                native: sim.channel(pulse, &noise)?,
                z: [z.theta_z1.to_radians(), z.theta_z2.to_radians()],
                xy_error: *xy_error,
            })
        }
    };
    let cfg = |interleave| RbConfig {
        lengths: r.lengths.clone(),
        n_seq: r.n_seq,
        seed,
        interleave,
    };
    let reference = simulate_rb(&group, model.as_ref(), &cfg(false))?;
    let write = |out: &mut Outputs, name: &str, res: &RbResult| out.csv(name, |w| res.write_csv(w));
    write(out, "rb_reference.csv", &reference)?;
    let interleaved = if r.interleave {
        let res = simulate_rb(&group, model.as_ref(), &cfg(true))?;
        write(out, "rb_interleaved.csv", &res)?;
        Some(res)
    } else {
        None
    };
    let r_int = interleaved
        .as_ref()
        .map(|i| interleaved_error(reference.fit.alpha, i.fit.alpha));
    out.json(
        "rb.json",
        &serde_json::json!({
            "native": r.native,
            "seed": seed,
            "reference": reference.fit,
            "interleaved": interleaved.as_ref().map(|i| &i.fit),
            "r_interleaved": r_int,
            "xy_overhead_per_clifford": interleaving_xy_overhead(&group),
        }),
    )
}

fn run_zz_free(z: &ZzFreeScenario, dev: &DeviceParams, out: &mut Outputs) -> Result<()> {
    let sim = GateSimulator::new(dev.clone(), GateKind::Iswap)?;
    let bracket = (z.fc_bracket[0], z.fc_bracket[1]);
    let f2 = dev.idle_bias(GateKind::Iswap).f2;
    let scan = z
        .scan_ns
        .par_iter()
        .map(|&t| synced_iswap(&sim, t, bracket, f2, z.shape))
        .collect::<Result<Vec<_>>>()?;
    let search = find_zz_free_length(&sim, (z.range_ns[0], z.range_ns[1]), bracket, z.shape, z.tol_ns)?;
    let mut points: Vec<_> = scan.iter().chain(&search.points).cloned().collect();
    points.sort_by(|a, b| a.t_g.total_cmp(&b.t_g));
    out.csv("zz_free.csv", |w| {
        writeln!(w, "t_g_ns,fc_min_ghz,swap_angle_deg,zz_slope_deg_per_gate")?;
        for p in &points {
            writeln!(w, "{},{},{},{}", p.t_g, p.fc_min, p.swap_angle, p.slope_deg_per_gate)?;
        }
        Ok(())
    })?;
    out.json("zz_free.json", &serde_json::json!({ "root_ns": search.root_ns, "at_root": search.at_root }))
}

fn run_predistortion(p: &PredistortionScenario, dev: &DeviceParams, out: &mut Outputs) -> Result<()> {
    let mut rows = Vec::new();
    for (k, spec) in p.pulses.iter().enumerate() {
        let w = spec.waveforms(dev)?;
        let idle = dev.idle_bias(spec.gate);
        let fc = flux_excursion(&w.fc, &dev.cplr_squid, idle.fc)?;
        let f2 = flux_excursion(&w.f2, &dev.qb2_squid, idle.f2)?;
        let t = &dev.transients;
        for (line, x, m) in [("cplr", &fc, &t.cplr), ("qb2", &f2, &t.qb2), ("crosstalk_cplr_to_qb2", &fc, &t.crosstalk_cplr_to_qb2)] {
            rows.push((k, spec.gate, line, round_trip_error(x, m)?));
        }
    }
    out.csv("round_trip.csv", |w| {
        writeln!(w, "pulse,gate,line,max_abs_error_flux")?;
        for (k, g, line, e) in &rows {
            writeln!(w, "{k},{},{line},{e:e}", if *g == GateKind::Cz { "cz" } else { "iswap" })?;
        }
        Ok(())
    })?;
    let phases = [LineResponse::Ideal, LineResponse::Distorted, LineResponse::Predistorted]
        .par_iter()
        .map(|&line| {
            let sim = GateSimulator::new(dev.clone(), GateKind::Cz)?
                .with_padding(p.padding_ns)
                .with_line(line);
            let (_, block) = sim.propagate(&p.phase_pulse)?;
            Ok(conditional_phase(&block)?.phi_cz)
        })
        .collect::<Result<Vec<f64>>>()?;
    let shift = |k: usize| crate::linalg::wrap_deg(phases[k] - phases[0]);
    out.json(
        "predistortion.json",
        &serde_json::json!({
            "max_round_trip_error": rows.iter().map(|r| r.3).fold(0.0, f64::max),
            "phi_cz_deg": { "ideal": phases[0], "distorted": phases[1], "predistorted": phases[2] },
            "shift_distorted_deg": shift(1),
            "shift_predistorted_deg": shift(2),
        }),
    )
}
