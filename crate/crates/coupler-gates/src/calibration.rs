//! Gate tune-up: coarse amplitude grids, repeated-pulse refinement, Z corrections and
//! the ZZ-free iSWAP length search.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::GateKind;
use crate::dynamics::GateSimulator;
use crate::error::{Error, Result};
use crate::gates::{cphase_with_z, iswap, iswap_with_z, rx, ry, zphase};
use crate::linalg::{wrap_deg, CMat};
use crate::metrics::{conditional_phase, iswap_phases, swap_angle, zz_accumulation, GatePhases};
use crate::optimize::{brent_root, golden_section, nelder_mead, Simplex};
use crate::pulse::{PulseShape, PulseSpec};

/// Evenly spaced axis including both ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(start: f64, stop: f64, steps: usize) -> Self {
        Axis { start, stop, steps }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.start];
        }
        (0..self.steps)
            .map(|k| self.start + (self.stop - self.start) * k as f64 / (self.steps - 1) as f64)
            .collect()
    }

    pub fn spacing(&self) -> f64 {
        if self.steps <= 1 {
            0.0
        } else {
            (self.stop - self.start).abs() / (self.steps - 1) as f64
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.steps < 3 || !(self.start.is_finite() && self.stop.is_finite()) || self.start == self.stop {
            return Err(Error::Config(format!("{name} axis needs at least 3 distinct points")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub fc_min: Axis,
    pub f2_peak: Axis,
}

impl GridSpec {
    /// Around the |101>–|200> resonance for the default device.
    pub fn default_cz() -> Self {
        GridSpec {
            fc_min: Axis::new(4.25, 4.55, 7),
            f2_peak: Axis::new(3.93, 3.97, 9),
        }
    }

    /// Around the |100>–|001> resonance for the default device.
    pub fn default_iswap() -> Self {
        GridSpec {
            fc_min: Axis::new(4.35, 4.65, 7),
            f2_peak: Axis::new(4.15, 4.17, 5),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridCell {
    pub fc_min: f64,
    pub f2_peak: f64,
    /// Population leaving the target transition: 1 − p|101> (CZ) or 1 − p|001> from |100> (iSWAP).
    pub leakage: f64,
    /// φ_CZ (CZ) or θ_iSWAP (iSWAP) in degrees; NaN where undefined.
    pub observable: f64,
    pub score: f64,
}

/// Rectangular tune-up map, row-major in (fc_min, f2_peak).
#[derive(Clone, Debug, Serialize)]
pub struct TuneupGrid {
    pub gate: GateKind,
    pub spec: GridSpec,
    pub cells: Vec<GridCell>,
}

impl TuneupGrid {
    pub fn best(&self) -> (usize, &GridCell) {
        self.cells
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.score.total_cmp(&b.1.score))
            .expect("non-empty grid")
    }

    pub fn write_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        let name = match self.gate {
            GateKind::Cz => "phi_cz_deg",
            GateKind::Iswap => "theta_iswap_deg",
        };
        writeln!(out, "fc_min_ghz,f2_peak_ghz,leakage,{name},score")?;
        for c in &self.cells {
            writeln!(out, "{},{},{:e},{},{:e}", c.fc_min, c.f2_peak, c.leakage, c.observable, c.score)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZMechanism {
    #[default]
    Virtual,
    Euler,
}

/// Single-qubit Z angles native to a gate (deg) and how they are undone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZCorrection {
    pub theta_z1: f64,
    pub theta_z2: f64,
    pub mechanism: ZMechanism,
}

impl ZCorrection {
    pub fn none() -> Self {
        ZCorrection {
            theta_z1: 0.0,
            theta_z2: 0.0,
            mechanism: ZMechanism::Virtual,
        }
    }

    /// One-qubit operator that removes a native Z rotation of `theta` degrees.
    pub fn undo(theta: f64, mechanism: ZMechanism) -> CMat {
        let t = theta.to_radians();
        match mechanism {
            ZMechanism::Virtual => zphase(-t),
            // time order Rx(−π/2), Ry(−θ), Rx(π/2)
            ZMechanism::Euler => rx(PI / 2.0) * ry(-t) * rx(-PI / 2.0),
        }
    }

    /// Block followed by the correcting Z rotations.
    pub fn apply(&self, block: &CMat) -> CMat {
        let post = Self::undo(self.theta_z1, self.mechanism).kronecker(&Self::undo(self.theta_z2, self.mechanism));
        post * block
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub leakage: f64,
    pub phi_cz: f64,
    pub phase_error: f64,
    pub swap_angle: f64,
    pub phi_zz: f64,
    /// Score after the coarse grid and after each refinement round.
    pub history: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibratedGate {
    pub spec: PulseSpec,
    pub z: ZCorrection,
    pub diagnostics: Diagnostics,
}

impl CalibratedGate {
    /// Target unitary including the gate's native Z angles.
    pub fn ideal_with_z(&self) -> CMat {
        target_with_z(self.spec.gate, self.z.theta_z1, self.z.theta_z2)
    }
}

/// Ideal CZ or iSWAP followed by local Z phases (deg) on QB1 and QB2.
pub fn target_with_z(gate: GateKind, z1_deg: f64, z2_deg: f64) -> CMat {
    let (a, b) = (z1_deg.to_radians(), z2_deg.to_radians());
    match gate {
        GateKind::Cz => cphase_with_z(PI, a, b),
        GateKind::Iswap => iswap_with_z(a, b, 0.0),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneOptions {
    /// Repetition counts of the refinement rounds.
    pub repetitions: Vec<usize>,
    /// Final tolerance on fc_min and f2_peak (GHz).
    pub tol_ghz: f64,
    pub mechanism: ZMechanism,
}

impl TuneOptions {
    pub fn cz() -> Self {
        TuneOptions {
            repetitions: vec![1, 5, 11],
            tol_ghz: 1e-7,
            mechanism: ZMechanism::Virtual,
        }
    }

    pub fn iswap() -> Self {
        TuneOptions {
            repetitions: vec![1, 21, 51, 101],
            tol_ghz: 1e-7,
            mechanism: ZMechanism::Virtual,
        }
    }
}

fn population(u: &CMat, from: usize, to: usize) -> f64 {
    u[(to, from)].norm_sqr()
}

/// Population of |11> that does not return after U^n (leakage out of |101>).
pub fn cz_leakage(block: &CMat, n: usize) -> f64 {
    1.0 - population(&block.pow(n as u32), 3, 3)
}

/// 1 − p(|10> → |01>) after U^n (n odd keeps the ideal action a full swap).
pub fn iswap_error(block: &CMat, n: usize) -> f64 {
    1.0 - population(&block.pow(n as u32), 2, 1)
}

fn cz_score(block: &CMat) -> (f64, f64, f64) {
    let leak = cz_leakage(block, 1);
    match conditional_phase(block) {
        Ok(p) => {
            let err = wrap_deg(p.phi_cz - 180.0);
            (leak, p.phi_cz, leak + (err / 180.0).powi(2))
        }
        Err(_) => (leak, f64::NAN, leak + 1.0),
    }
}

fn iswap_score(block: &CMat) -> (f64, f64, f64) {
    let err = iswap_error(block, 1);
    let angle = swap_angle(population(block, 2, 1), population(block, 2, 2)).unwrap_or(f64::NAN);
    (err, angle, err)
}

/// Evaluate a coarse grid (cells in parallel, deterministic order).
pub fn tuneup_grid(sim: &GateSimulator, t_g: f64, shape: PulseShape, grid: &GridSpec) -> Result<TuneupGrid> {
    grid.fc_min.validate("fc_min")?;
    grid.f2_peak.validate("f2_peak")?;
    let points: Vec<(f64, f64)> = grid
        .fc_min
        .values()
        .into_iter()
        .flat_map(|fc| grid.f2_peak.values().into_iter().map(move |f2| (fc, f2)))
        .collect();
    let cells = points
        .par_iter()
        .map(|&(fc_min, f2_peak)| {
            let spec = PulseSpec::new(sim.gate, t_g, fc_min, f2_peak, shape);
            let (_, block) = sim.propagate(&spec)?;
            let (leakage, observable, score) = match sim.gate {
                GateKind::Cz => cz_score(&block),
                GateKind::Iswap => iswap_score(&block),
            };
            Ok(GridCell {
                fc_min,
                f2_peak,
                leakage,
                observable,
                score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TuneupGrid {
        gate: sim.gate,
        spec: *grid,
        cells,
    })
}

fn interior_best(grid: &TuneupGrid) -> Result<GridCell> {
    let (k, cell) = grid.best();
    let nf2 = grid.spec.f2_peak.steps;
    let (i, j) = (k / nf2, k % nf2);
    if i == 0 || i + 1 == grid.spec.fc_min.steps || j == 0 || j + 1 == nf2 {
        return Err(Error::Bracket(format!(
            "best {:?} cell (fc_min {:.4}, f2_peak {:.4}) lies on the grid edge",
            grid.gate, cell.fc_min, cell.f2_peak
        )));
    }
    Ok(*cell)
}

/// Phase error wrapped into (−180°, 180°]; NaN-free so root finders can use it.
fn phase_residual(sim: &GateSimulator, spec: &PulseSpec) -> Result<f64> {
    let (_, block) = sim.propagate(spec)?;
    Ok(wrap_deg(conditional_phase(&block)?.phi_cz - 180.0))
}

/// Root of the CZ phase error in f2_peak around `f2`, searching outward for a sign change.
fn solve_f2_for_phase(sim: &GateSimulator, base: &PulseSpec, step: f64, tol: f64) -> Result<f64> {
    let eval = |f2: f64| {
        let mut s = *base;
        s.f2_peak = f2;
        phase_residual(sim, &s)
    };
    let r0 = eval(base.f2_peak)?;
    if r0 == 0.0 {
        return Ok(base.f2_peak);
    }
    let mut width = step;
    for _ in 0..8 {
        for dir in [1.0, -1.0] {
            let other = base.f2_peak + dir * width;
            let Ok(r) = eval(other) else { continue };
            if r.signum() != r0.signum() && (r - r0).abs() < 180.0 {
                return brent_root(eval, base.f2_peak, other, tol, 100);
            }
        }
        width *= 2.0;
    }
    Err(Error::Bracket(format!(
        "no φ_CZ = 180° crossing within {width:.4} GHz of f2_peak {:.5}",
        base.f2_peak
    )))
}

/// Grid, then alternating refinement: golden-section on fc_min minimizing the
/// repeated-pulse leakage, and a root solve on f2_peak for φ_CZ = 180°.
pub fn tune_cz(sim: &GateSimulator, t_g: f64, shape: PulseShape, grid: &GridSpec, opts: &TuneOptions) -> Result<CalibratedGate> {
    if sim.gate != GateKind::Cz {
        return Err(Error::Config("tune_cz needs a simulator at the CZ idle point".into()));
    }
    let coarse = tuneup_grid(sim, t_g, shape, grid)?;
    let start = interior_best(&coarse)?;
    let mut spec = PulseSpec::new(GateKind::Cz, t_g, start.fc_min, start.f2_peak, shape);
    let mut best_score = start.score;
    let mut history = vec![best_score];
    let mut half = grid.fc_min.spacing();
    let mut step_f2 = grid.f2_peak.spacing() / 2.0;
    for &n in &opts.repetitions {
        let mut trial = spec;
        let (fc, _) = golden_section(
            |fc| {
                let mut s = trial;
                s.fc_min = fc;
                Ok(cz_leakage(&sim.propagate(&s)?.1, n))
            },
            spec.fc_min - half,
            spec.fc_min + half,
            opts.tol_ghz,
            120,
        )?;
        trial.fc_min = fc;
        trial.f2_peak = solve_f2_for_phase(sim, &trial, step_f2, opts.tol_ghz)?;
        let score = cz_score(&sim.propagate(&trial)?.1).2;
        if score <= best_score {
            best_score = score;
            spec = trial;
        }
        history.push(best_score);
        half /= 4.0;
        step_f2 /= 4.0;
    }
    finish(sim, spec, opts.mechanism, history)
}

/// Grid, then alternating golden sections on fc_min and f2_peak minimizing the
/// swap error of U^N for each repetition count.
pub fn tune_iswap(sim: &GateSimulator, t_g: f64, shape: PulseShape, grid: &GridSpec, opts: &TuneOptions) -> Result<CalibratedGate> {
    if sim.gate != GateKind::Iswap {
        return Err(Error::Config("tune_iswap needs a simulator at the iSWAP idle point".into()));
    }
    if opts.repetitions.iter().any(|n| n % 2 == 0) {
        return Err(Error::Config("iSWAP repetition counts must be odd".into()));
    }
    let coarse = tuneup_grid(sim, t_g, shape, grid)?;
    let start = interior_best(&coarse)?;
    let mut spec = PulseSpec::new(GateKind::Iswap, t_g, start.fc_min, start.f2_peak, shape);
    let mut best_score = start.score;
    let mut history = vec![best_score];
    let (mut half_fc, mut half_f2) = (grid.fc_min.spacing(), grid.f2_peak.spacing());
    let mut prev_n = 1;
    for &n in &opts.repetitions {
        let shrink = prev_n as f64 / n as f64;
        half_fc *= shrink.max(0.05);
        half_f2 *= shrink.max(0.05);
        prev_n = n;
        let mut trial = spec;
        for _ in 0..2 {
            let (fc, _) = golden_section(
                |fc| {
                    let mut s = trial;
                    s.fc_min = fc;
                    Ok(iswap_error(&sim.propagate(&s)?.1, n))
                },
                trial.fc_min - half_fc,
                trial.fc_min + half_fc,
                opts.tol_ghz,
                120,
            )?;
            trial.fc_min = fc;
            let (f2, _) = golden_section(
                |f2| {
                    let mut s = trial;
                    s.f2_peak = f2;
                    Ok(iswap_error(&sim.propagate(&s)?.1, n))
                },
                trial.f2_peak - half_f2,
                trial.f2_peak + half_f2,
                opts.tol_ghz,
                120,
            )?;
            trial.f2_peak = f2;
        }
        let score = iswap_error(&sim.propagate(&trial)?.1, 1);
        if score <= best_score {
            best_score = score;
            spec = trial;
        }
        history.push(best_score);
    }
    finish(sim, spec, opts.mechanism, history)
}

fn finish(sim: &GateSimulator, spec: PulseSpec, mechanism: ZMechanism, history: Vec<f64>) -> Result<CalibratedGate> {
    let (u, block) = sim.propagate(&spec)?;
    let leak = crate::metrics::leakage_of_unitary(&u, &sim.frame);
    let z = calibrate_z_corrections(&block, spec.gate, mechanism)?;
    let diagnostics = match spec.gate {
        GateKind::Cz => {
            let p = conditional_phase(&block)?;
            Diagnostics {
                leakage: leak.worst,
                phi_cz: p.phi_cz,
                phase_error: wrap_deg(p.phi_cz - 180.0),
                swap_angle: 0.0,
                phi_zz: 0.0,
                history,
            }
        }
        GateKind::Iswap => {
            let ph = iswap_phases(&block);
            Diagnostics {
                leakage: leak.worst,
                phi_cz: 0.0,
                phase_error: 0.0,
                swap_angle: swap_angle(population(&block, 2, 1), population(&block, 2, 2))?,
                phi_zz: ph.phi_zz,
                history,
            }
        }
    };
    Ok(CalibratedGate { spec, z, diagnostics })
}

/// Native single-qubit Z angles of a gate block: local phases of the diagonal (CZ) or
/// of the swapped amplitudes (iSWAP), in degrees.
pub fn calibrate_z_corrections(block: &CMat, gate: GateKind, mechanism: ZMechanism) -> Result<ZCorrection> {
    let (theta_z1, theta_z2) = match gate {
        GateKind::Cz => {
            let GatePhases { theta_z1, theta_z2, .. } = conditional_phase(block)?;
            (theta_z1, theta_z2)
        }
        GateKind::Iswap => {
            let p = iswap_phases(block);
            (p.a, p.b)
        }
    };
    Ok(ZCorrection {
        theta_z1,
        theta_z2,
        mechanism,
    })
}

/// Simplex refinement of (θz1, θz2) against an objective to be minimized
/// (typically 1 − sequence fidelity). Returns the start point when no vertex improves on it.
pub fn refine_z_by_sequence_fidelity<F>(initial: [f64; 2], step_deg: f64, objective: F) -> Result<([f64; 2], Simplex)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut objective = objective;
    let f0 = objective(&initial)?;
    let s = nelder_mead(&mut objective, &initial, &[step_deg, step_deg], 1e-4, 400)?;
    if s.value < f0 {
        Ok(([s.x[0], s.x[1]], s))
    } else {
        Ok((initial, Simplex { x: initial.to_vec(), value: f0, ..s }))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LengthPoint {
    pub t_g: f64,
    pub fc_min: f64,
    pub swap_angle: f64,
    pub slope_deg_per_gate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZzFreeSearch {
    pub root_ns: f64,
    pub at_root: LengthPoint,
    /// Every length evaluated, in evaluation order (the amplitude curve of the sync rule).
    pub points: Vec<LengthPoint>,
}

/// Repetition counts used for the ZZ-angle slope.
pub const ZZ_REPETITIONS: [usize; 4] = [1, 5, 11, 21];

/// Coarse amplitude points scanned before each full-swap solve.
pub const SYNC_SCAN_POINTS: usize = 13;

/// Full-swap amplitude at length `t_g` (sample spacing chosen to fit a whole number of
/// samples) and the resulting ZZ slope.
pub fn synced_iswap(sim: &GateSimulator, t_g: f64, fc_bracket: (f64, f64), f2_peak: f64, shape: PulseShape) -> Result<LengthPoint> {
    let n = t_g.round().max(1.0);
    let make = |fc: f64| {
        let mut s = PulseSpec::new(GateKind::Iswap, t_g, fc, f2_peak, shape);
        s.dt = t_g / n;
        s
    };
    let (lo, hi) = (fc_bracket.0.min(fc_bracket.1), fc_bracket.0.max(fc_bracket.1));
    let scan = Axis::new(lo, hi, SYNC_SCAN_POINTS).values();
    let errs = scan
        .iter()
        .map(|&fc| Ok(iswap_error(&sim.propagate(&make(fc))?.1, 1)))
        .collect::<Result<Vec<_>>>()?;
    // first full swap: the local minimum at the weakest coupling (highest fc_min)
    let k = (1..scan.len() - 1)
        .rev()
        .find(|&k| errs[k] <= errs[k - 1] && errs[k] <= errs[k + 1] && errs[k] < 0.5)
        .ok_or_else(|| {
            Error::Bracket(format!(
                "no full-swap amplitude for t_G = {t_g} ns within fc_min [{lo}, {hi}] GHz"
            ))
        })?;
    let (fc_min, _) = golden_section(
        |fc| Ok(iswap_error(&sim.propagate(&make(fc))?.1, 1)),
        scan[k - 1],
        scan[k + 1],
        1e-7,
        120,
    )?;
    let (_, block) = sim.propagate(&make(fc_min))?;
    let angle = swap_angle(population(&block, 2, 1), population(&block, 2, 2))?;
    let slope = zz_accumulation(&block, &iswap(), &ZZ_REPETITIONS)?;
    Ok(LengthPoint {
        t_g,
        fc_min,
        swap_angle: angle,
        slope_deg_per_gate: slope,
    })
}

/// Root of the ZZ slope over gate length (Brent's method), with the amplitude re-solved
/// for a full swap at each length. The returned slope is evaluated at the root.
pub fn find_zz_free_length(
    sim: &GateSimulator,
    range: (f64, f64),
    fc_bracket: (f64, f64),
    shape: PulseShape,
    tol_ns: f64,
) -> Result<ZzFreeSearch> {
    let f2 = sim.device().idle_bias(GateKind::Iswap).f2;
    let mut points = Vec::new();
    let (lo, hi) = (range.0.min(range.1), range.0.max(range.1));
    let root = brent_root(
        |t| {
            let p = synced_iswap(sim, t, fc_bracket, f2, shape)?;
            let s = p.slope_deg_per_gate;
            points.push(p);
            Ok(s)
        },
        lo,
        hi,
        tol_ns,
        60,
    )
    .map_err(|e| match e {
        Error::Bracket(_) => Error::Bracket(format!(
            "ZZ slope keeps its sign on [{lo}, {hi}] ns: {:.4}°, {:.4}° per gate",
            points[0].slope_deg_per_gate, points[1].slope_deg_per_gate
        )),
        other => other,
    })?;
    let at_root = synced_iswap(sim, root, fc_bracket, f2, shape)?;
    Ok(ZzFreeSearch {
        root_ns: root,
        at_root,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::cz;
    use crate::linalg::{equal_up_to_phase, identity};

    #[test]
    fn z_mechanisms_agree() {
        let u = cphase_with_z(PI, 0.4, -1.3);
        let a = ZCorrection { theta_z1: 0.4f64.to_degrees(), theta_z2: -1.3f64.to_degrees(), mechanism: ZMechanism::Virtual };
        let b = ZCorrection { mechanism: ZMechanism::Euler, ..a };
        assert!((a.apply(&u) - cz()).iter().all(|z| z.norm() < 1e-12));
        assert!(equal_up_to_phase(&b.apply(&u), &cz(), 1e-12));
    }

    #[test]
    fn identity_has_no_z() {
        let z = calibrate_z_corrections(&identity(4), GateKind::Cz, ZMechanism::Virtual).unwrap();
        assert_eq!((z.theta_z1, z.theta_z2), (0.0, 0.0));
    }

    #[test]
    fn iswap_z_round_trip() {
        let u = iswap_with_z(0.3, -0.8, 0.05);
        let z = calibrate_z_corrections(&u, GateKind::Iswap, ZMechanism::Virtual).unwrap();
        let fixed = z.apply(&u);
        let want = iswap_with_z(0.0, 0.0, 0.05);
        assert!((fixed - want).iter().all(|e| e.norm() < 1e-12));
    }

    #[test]
    fn axis_values() {
        let a = Axis::new(1.0, 2.0, 5);
        assert_eq!(a.values(), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert_eq!(a.spacing(), 0.25);
    }
}
