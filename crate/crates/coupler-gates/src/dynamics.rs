//! Time evolution of the three-element system: unitary propagators, Lindblad
//! trajectories with energy relaxation, and quantum channels on the computational subspace.

use rayon::prelude::*;
use serde::Serialize;

use crate::device::{DeviceParams, GateKind, Squid, TransientModel};
use crate::error::{Error, Result};
use crate::linalg::{expm_real_symmetric, identity, unitarity_error, CMat, CVec, C64, I, ONE};
use crate::pulse::{apply_transient, predistort, GateWaveforms, PulseSpec, Waveform};
use crate::qutrit::{BasisLabel, DressedBasis, Space, SubsystemId, COMPUTATIONAL};
use crate::system::System;

/// Default number of substeps per waveform sample.
pub const DEFAULT_SUBSTEPS: usize = 10;

/// Frequency trajectories of the tunable elements; QB1 is fixed.
#[derive(Clone, Debug)]
pub struct ControlSchedule {
    pub f1: f64,
    pub fc: Waveform,
    pub f2: Waveform,
}

impl ControlSchedule {
    pub fn new(f1: f64, fc: Waveform, f2: Waveform) -> Result<Self> {
        if fc.len() != f2.len() || (fc.dt() - f2.dt()).abs() > 1e-12 {
            return Err(Error::Validation("schedule waveforms differ in length or dt".into()));
        }
        Ok(ControlSchedule { f1, fc, f2 })
    }

    pub fn from_gate(w: GateWaveforms) -> Result<Self> {
        Self::new(w.f1, w.fc, w.f2)
    }

    pub fn from_spec(spec: &PulseSpec, dev: &DeviceParams) -> Result<Self> {
        Self::from_gate(spec.waveforms(dev)?)
    }

    /// Constant bias held for `duration` (rounded to whole samples).
    pub fn constant(f1: f64, fc: f64, f2: f64, duration: f64, dt: f64) -> Result<Self> {
        let n = (duration / dt).round() as usize + 1;
        Self::new(f1, Waveform::constant(fc, n, dt)?, Waveform::constant(f2, n, dt)?)
    }

    pub fn idle(dev: &DeviceParams, gate: GateKind, duration: f64, dt: f64) -> Result<Self> {
        let b = dev.idle_bias(gate);
        Self::constant(b.f1, b.fc, b.f2, duration, dt)
    }

    pub fn dt(&self) -> f64 {
        self.fc.dt()
    }

    pub fn intervals(&self) -> usize {
        self.fc.len() - 1
    }

    pub fn duration(&self) -> f64 {
        self.fc.duration()
    }

    pub fn at(&self, t: f64) -> (f64, f64, f64) {
        (self.f1, self.fc.value_at(t), self.f2.value_at(t))
    }

    /// The schedule with `pad` ns of idle bias (rounded to whole samples) on both sides.
    pub fn padded(&self, pad: f64) -> Result<Self> {
        let n = (pad / self.dt()).round() as usize;
        if n == 0 {
            return Ok(self.clone());
        }
        let ext = |w: &Waveform| {
            let mut v = vec![w.first(); n];
            v.extend_from_slice(w.samples());
            v.extend(std::iter::repeat_n(w.last(), n));
            Waveform::new(v, w.dt(), w.interp())
        };
        Self::new(self.f1, ext(&self.fc)?, ext(&self.f2)?)
    }

    /// The schedule as seen by the elements after the control lines: flux excursions
    /// from idle pass through the coupler and QB2 transient models. With `line` set to
    /// [`LineResponse::Predistorted`] the inverse filter is applied first.
    pub fn through_lines(&self, dev: &DeviceParams, gate: GateKind, line: LineResponse) -> Result<Self> {
        if line == LineResponse::Ideal {
            return Ok(self.clone());
        }
        let idle = dev.idle_bias(gate);
        let pass = |w: &Waveform, squid: &Squid, f_idle: f64, model: &TransientModel| -> Result<Waveform> {
            let phi0 = squid.flux_for_frequency(f_idle)?;
            let mut x = flux_excursion(w, squid, f_idle)?;
            if line == LineResponse::Predistorted {
                x = predistort(&x, model)?;
            }
            Ok(apply_transient(&x, model).map(|d| squid.frequency(phi0 + d)))
        };
        let fc = pass(&self.fc, &dev.cplr_squid, idle.fc, &dev.transients.cplr)?;
        let f2 = pass(&self.f2, &dev.qb2_squid, idle.f2, &dev.transients.qb2)?;
        Self::new(self.f1, fc, f2)
    }
}

/// Flux excursion from the idle bias that produces the frequency waveform `w`.
pub fn flux_excursion(w: &Waveform, squid: &Squid, f_idle: f64) -> Result<Waveform> {
    let phi0 = squid.flux_for_frequency(f_idle)?;
    let dev_flux = w
        .samples()
        .iter()
        .map(|&f| Ok(squid.flux_for_frequency(f)? - phi0))
        .collect::<Result<Vec<_>>>()?;
    Waveform::new(dev_flux, w.dt(), w.interp())
}

/// How control waveforms reach the device.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineResponse {
    /// Waveforms arrive undistorted.
    #[default]
    Ideal,
    /// Transient models applied, no correction.
    Distorted,
    /// Inverse filter applied before the transient models.
    Predistorted,
}

/// Γ1 = 1/T1 per element (1/ns) in QB1, CPLR, QB2 order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct NoiseParams {
    pub gamma: [f64; 3],
}

impl NoiseParams {
    pub fn closed() -> Self {
        Self::default()
    }

    pub fn from_device(dev: &DeviceParams) -> Self {
        NoiseParams {
            gamma: dev.decay_rates(),
        }
    }

    /// Keep only the relaxation of one element.
    pub fn only(&self, sub: SubsystemId) -> Self {
        let mut g = [0.0; 3];
        g[sub.position()] = self.gamma[sub.position()];
        NoiseParams { gamma: g }
    }

    pub fn is_closed(&self) -> bool {
        self.gamma.iter().all(|&g| g == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma.iter().any(|&g| !(g >= 0.0)) {
            return Err(Error::Validation("decay rates must be non-negative".into()));
        }
        Ok(())
    }
}

/// Superoperator on the 4-dimensional computational subspace (column stacking,
/// S[(a + 4b), (i + 4j)] = ⟨a|Λ(|i⟩⟨j|)|b⟩) plus leakage per computational input.
#[derive(Clone, Debug)]
pub struct QuantumChannel {
    pub superop: CMat,
    pub leakage: [f64; 4],
    pub duration: f64,
}

impl QuantumChannel {
    pub fn identity() -> Self {
        QuantumChannel {
            superop: identity(16),
            leakage: [0.0; 4],
            duration: 0.0,
        }
    }

    /// Channel ρ → VρV† of a 4×4 (possibly sub-unitary) block.
    pub fn from_block(v: &CMat, duration: f64) -> Self {
        let leakage = std::array::from_fn(|i| 1.0 - v.column(i).norm_squared());
        QuantumChannel {
            superop: v.conjugate().kronecker(v),
            leakage,
            duration,
        }
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        let v = CVec::from_iterator(16, (0..16).map(|k| rho[(k % 4, k / 4)]));
        let out = &self.superop * v;
        CMat::from_fn(4, 4, |a, b| out[a + 4 * b])
    }

    /// Sequential composition: `self` then `next`.
    pub fn then(&self, next: &QuantumChannel) -> QuantumChannel {
        let superop = &next.superop * &self.superop;
        let leakage = std::array::from_fn(|i| {
            let mut e = CMat::zeros(4, 4);
            e[(i, i)] = ONE;
            1.0 - superop_apply(&superop, &e).trace().re
        });
        QuantumChannel {
            superop,
            leakage,
            duration: self.duration + next.duration,
        }
    }

    /// Rotating frame with logical energies E_a (rad/ns) after `t` ns:
    /// every output element picks up e^{i(E_a − E_b)t}.
    pub fn in_rotating_frame(&self, energies: &[f64; 4], t: f64) -> QuantumChannel {
        let mut s = self.superop.clone();
        for a in 0..4 {
            for b in 0..4 {
                let ph = C64::from_polar(1.0, (energies[a] - energies[b]) * t);
                for col in 0..16 {
                    s[(a + 4 * b, col)] *= ph;
                }
            }
        }
        QuantumChannel {
            superop: s,
            leakage: self.leakage,
            duration: self.duration,
        }
    }

    /// Choi matrix J = Σ_ij |i⟩⟨j| ⊗ Λ(|i⟩⟨j|), 16×16, first factor the input.
    pub fn choi(&self) -> CMat {
        let mut j = CMat::zeros(16, 16);
        for i in 0..4 {
            for k in 0..4 {
                let col = i + 4 * k;
                for a in 0..4 {
                    for b in 0..4 {
                        j[(4 * i + a, 4 * k + b)] = self.superop[(a + 4 * b, col)];
                    }
                }
            }
        }
        j
    }
}

fn superop_apply(s: &CMat, rho: &CMat) -> CMat {
    let v = CVec::from_iterator(16, (0..16).map(|k| rho[(k % 4, k / 4)]));
    let out = s * v;
    CMat::from_fn(4, 4, |a, b| out[a + 4 * b])
}

/// Sparse real lowering operator: (row, col, value) with one entry per column at most.
#[derive(Clone, Debug)]
struct Ladder {
    entries: Vec<(usize, usize, f64)>,
    number: Vec<f64>,
}

impl Ladder {
    fn new(space: &Space, sub: SubsystemId) -> Self {
        let b = space.lowering(sub);
        let d = space.dim();
        let mut entries = Vec::new();
        for c in 0..d {
            for r in 0..d {
                if b[(r, c)] != 0.0 {
                    entries.push((r, c, b[(r, c)]));
                }
            }
        }
        let number = (0..d).map(|i| space.occupation(i, sub) as f64).collect();
        Ladder { entries, number }
    }
}

/// Time-dependent propagation with `substeps` midpoint substeps per sample.
#[derive(Clone, Debug)]
pub struct Engine {
    pub system: System,
    pub substeps: usize,
}

impl Engine {
    pub fn new(system: System) -> Self {
        Engine {
            system,
            substeps: DEFAULT_SUBSTEPS,
        }
    }

    pub fn with_substeps(system: System, substeps: usize) -> Self {
        Engine {
            system,
            substeps: substeps.max(1),
        }
    }

    pub fn qutrits(dev: DeviceParams) -> Self {
        Self::new(System::qutrits(dev))
    }

    pub fn device(&self) -> &DeviceParams {
        &self.system.device
    }

    fn step(&self, sched: &ControlSchedule) -> f64 {
        sched.dt() / self.substeps as f64
    }

    /// Fourth-order commutator-free Magnus step over [t0, t0 + h]: two exponentials of
    /// Gauss-node combinations of H.
    fn magnus_step(&self, sched: &ControlSchedule, t0: f64, h: f64) -> CMat {
        let r = 3f64.sqrt() / 6.0;
        let (a1, a2) = (0.25 - r, 0.25 + r);
        let ham = |t: f64| {
            let (f1, fc, f2) = sched.at(t);
            self.system.hamiltonian_real(f1, fc, f2)
        };
        let h1 = ham(t0 + (0.5 - r) * h);
        let h2 = ham(t0 + (0.5 + r) * h);
        let first = expm_real_symmetric(&(&h1 * a2 + &h2 * a1), h);
        let second = expm_real_symmetric(&(&h1 * a1 + &h2 * a2), h);
        second * first
    }

    /// Propagator of every substep in time order.
    pub fn step_propagators(&self, sched: &ControlSchedule) -> Vec<CMat> {
        let h = self.step(sched);
        let total = sched.intervals() * self.substeps;
        (0..total)
            .into_par_iter()
            .map(|s| self.magnus_step(sched, s as f64 * h, h))
            .collect()
    }

    /// Propagators of the two halves of every substep.
    fn half_step_propagators(&self, sched: &ControlSchedule) -> Vec<(CMat, CMat)> {
        let h = self.step(sched);
        let total = sched.intervals() * self.substeps;
        (0..total)
            .into_par_iter()
            .map(|s| {
                let t0 = s as f64 * h;
                (self.magnus_step(sched, t0, 0.5 * h), self.magnus_step(sched, t0 + 0.5 * h, 0.5 * h))
            })
            .collect()
    }

    /// Time-ordered product of the substep propagators.
    pub fn propagate_unitary(&self, sched: &ControlSchedule) -> Result<CMat> {
        let steps = self.step_propagators(sched);
        let mut u = identity(self.system.dim());
        for s in &steps {
            u = s * u;
        }
        let err = unitarity_error(&u);
        if err > 1e-9 {
            return Err(Error::numerical(
                "dynamics-engine",
                format!("propagator deviates from unitarity by {err:e}"),
            ));
        }
        Ok(u)
    }

    /// Propagates state vectors, recording them after every sample interval.
    pub fn propagate_states(&self, sched: &ControlSchedule, psi0: &[CVec]) -> Vec<Vec<CVec>> {
        let steps = self.step_propagators(sched);
        let mut out = vec![psi0.to_vec()];
        let mut cur = psi0.to_vec();
        for chunk in steps.chunks(self.substeps) {
            for s in chunk {
                cur = cur.iter().map(|p| s * p).collect();
            }
            out.push(cur.clone());
        }
        out
    }

    fn dissipator(&self, ladders: &[(f64, Ladder)], rho: &CMat) -> CMat {
        let d = rho.nrows();
        let mut out = CMat::zeros(d, d);
        for (gamma, l) in ladders {
            for &(r1, c1, v1) in &l.entries {
                for &(r2, c2, v2) in &l.entries {
                    out[(r1, r2)] += rho[(c1, c2)] * (gamma * v1 * v2);
                }
            }
            for a in 0..d {
                for b in 0..d {
                    out[(a, b)] -= rho[(a, b)] * (0.5 * gamma * (l.number[a] + l.number[b]));
                }
            }
        }
        out
    }

    fn ladders(&self, noise: &NoiseParams) -> Vec<(f64, Ladder)> {
        SubsystemId::ALL
            .iter()
            .filter(|s| noise.gamma[s.position()] > 0.0)
            .map(|&s| (noise.gamma[s.position()], Ladder::new(&self.system.space(), s)))
            .collect()
    }

    /// One integrating-factor RK4 step: the coherent evolution enters through the
    /// propagators of the two half steps, the dissipator is integrated to fourth order.
    fn lawson_step(&self, halves: &(CMat, CMat), ladders: &[(f64, Ladder)], h: f64, y: &CMat, hermitian: bool) -> CMat {
        let (pa, pb) = halves;
        let hh = C64::new(h, 0.0);
        let ca = |x: &CMat| pa * x * pa.adjoint();
        let cb = |x: &CMat| pb * x * pb.adjoint();
        let n = |x: &CMat| self.dissipator(ladders, x);
        let k1 = n(y);
        let a = ca(y);
        let b = ca(&(y + &k1 * (hh * 0.5)));
        let k2 = n(&b);
        let k3 = n(&(&a + &k2 * (hh * 0.5)));
        let k4 = n(&cb(&(&a + &k3 * hh)));
        let inner = &a + (&b - &a) * C64::new(1.0 / 3.0, 0.0) + (&k2 + &k3) * (hh / 3.0);
        let mut out = cb(&inner) + k4 * (hh / 6.0);
        if hermitian {
            out = (&out + out.adjoint()) * C64::new(0.5, 0.0);
        }
        out
    }

    fn evolve(&self, halves: &[(CMat, CMat)], ladders: &[(f64, Ladder)], h: f64, rho0: &CMat, record_every: Option<usize>) -> Result<Vec<CMat>> {
        let hermitian = (rho0 - rho0.adjoint()).iter().all(|z| z.norm() < 1e-14);
        let tr0 = rho0.trace();
        let mut rho = rho0.clone();
        let mut out = Vec::new();
        if record_every.is_some() {
            out.push(rho.clone());
        }
        for (s, half) in halves.iter().enumerate() {
            rho = if ladders.is_empty() {
                let full = &half.1 * &half.0;
                &full * &rho * full.adjoint()
            } else {
                self.lawson_step(half, ladders, h, &rho, hermitian)
            };
            if hermitian {
                rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
            }
            if let Some(every) = record_every {
                if (s + 1) % every == 0 {
                    out.push(rho.clone());
                }
            }
        }
        let drift = (rho.trace() - tr0).norm();
        if drift > 1e-6 {
            return Err(Error::numerical(
                "dynamics-engine",
                format!("trace drift {drift:e} exceeds 1e-6; use more substeps"),
            ));
        }
        if record_every.is_none() {
            out.push(rho);
        }
        Ok(out)
    }

    /// dρ/dt = −i[H(t), ρ] + Σ Γ_j D[b_j](ρ); states at every sample boundary.
    pub fn propagate_lindblad(&self, rho0: &CMat, sched: &ControlSchedule, noise: &NoiseParams) -> Result<Vec<CMat>> {
        noise.validate()?;
        let halves = self.half_step_propagators(sched);
        self.evolve(&halves, &self.ladders(noise), self.step(sched), rho0, Some(self.substeps))
    }

    /// Final state only.
    pub fn evolve_lindblad(&self, rho0: &CMat, sched: &ControlSchedule, noise: &NoiseParams) -> Result<CMat> {
        noise.validate()?;
        let halves = self.half_step_propagators(sched);
        Ok(self
            .evolve(&halves, &self.ladders(noise), self.step(sched), rho0, None)?
            .pop()
            .unwrap())
    }

    /// Lab-frame channel on the dressed computational states of `frame`.
    pub fn channel(&self, sched: &ControlSchedule, noise: &NoiseParams, frame: &DressedBasis) -> Result<QuantumChannel> {
        noise.validate()?;
        let p = frame.computational();
        if noise.is_closed() {
            let u = self.propagate_unitary(sched)?;
            return Ok(QuantumChannel::from_block(&(p.adjoint() * u * &p), sched.duration()));
        }
        let halves = self.half_step_propagators(sched);
        let ladders = self.ladders(noise);
        let h = self.step(sched);
        // Hermitian inputs: |i⟩⟨i|, |i⟩⟨j| + |j⟩⟨i|, −i|i⟩⟨j| + i|j⟩⟨i|
        let mut inputs = Vec::new();
        for i in 0..4 {
            for j in i..4 {
                inputs.push((i, j, false));
                if i != j {
                    inputs.push((i, j, true));
                }
            }
        }
        let outs: Vec<CMat> = inputs
            .par_iter()
            .map(|&(i, j, imag)| {
                let (pi, pj) = (p.column(i), p.column(j));
                let rho = if i == j {
                    pi * pi.adjoint()
                } else if imag {
                    (pi * pj.adjoint()) * (-I) + (pj * pi.adjoint()) * I
                } else {
                    pi * pj.adjoint() + pj * pi.adjoint()
                };
                let out = self.evolve(&halves, &ladders, h, &rho, None)?.pop().unwrap();
                Ok(p.adjoint() * out * &p)
            })
            .collect::<Result<_>>()?;
        let mut superop = CMat::zeros(16, 16);
        let mut leakage = [0.0; 4];
        let mut put = |i: usize, j: usize, m: &CMat| {
            for a in 0..4 {
                for b in 0..4 {
                    superop[(a + 4 * b, i + 4 * j)] = m[(a, b)];
                }
            }
        };
        let mut k = 0;
        for i in 0..4 {
            for j in i..4 {
                if i == j {
                    leakage[i] = 1.0 - outs[k].trace().re;
                    put(i, i, &outs[k]);
                    k += 1;
                } else {
                    let (x, y) = (&outs[k], &outs[k + 1]);
                    // Λ(|i⟩⟨j|) = (Λ(X) + iΛ(Y))/2, Λ(|j⟩⟨i|) = (Λ(X) − iΛ(Y))/2
                    let eij = (x + y * I) * C64::new(0.5, 0.0);
                    let eji = (x - y * I) * C64::new(0.5, 0.0);
                    put(i, j, &eij);
                    put(j, i, &eji);
                    k += 2;
                }
            }
        }
        Ok(QuantumChannel {
            superop,
            leakage,
            duration: sched.duration(),
        })
    }
}

/// Populations of the given labels in the dressed frame `frame` (state vector or density matrix).
pub enum State<'a> {
    Pure(&'a CVec),
    Mixed(&'a CMat),
}

pub fn populations(state: State<'_>, labels: &[BasisLabel], frame: &DressedBasis) -> Result<Vec<(BasisLabel, f64)>> {
    labels
        .iter()
        .map(|&l| {
            let d = frame.state(l)?;
            let p = match state {
                State::Pure(psi) => d.dotc(psi).norm_sqr(),
                State::Mixed(rho) => (d.adjoint() * rho * &d)[(0, 0)].re,
            };
            Ok((l, p))
        })
        .collect()
}

/// Density matrix of a dressed basis state.
pub fn dressed_projector(frame: &DressedBasis, l: BasisLabel) -> Result<CMat> {
    let v = frame.state(l)?;
    Ok(&v * v.adjoint())
}

/// Computational 4×4 block ⟨a|U|b⟩ in the rotating frame of the idle dressed qubit frequencies.
pub fn computational_block(u: &CMat, frame: &DressedBasis, t: f64) -> CMat {
    let p = frame.computational();
    let mut v = p.adjoint() * u * &p;
    let e = logical_energies(frame);
    for a in 0..4 {
        let ph = C64::from_polar(1.0, e[a] * t);
        for b in 0..4 {
            v[(a, b)] *= ph;
        }
    }
    v
}

/// E_a = E_000 + n1·ω̃1 + n2·ω̃2 for the computational labels (rad/ns).
pub fn logical_energies(frame: &DressedBasis) -> [f64; 4] {
    std::array::from_fn(|k| frame.frame_energy(COMPUTATIONAL[k]))
}

/// Full-space rotating-frame correction diag(e^{i E_frame(label) t}).
pub fn frame_rotation(frame: &DressedBasis, t: f64) -> CMat {
    let d = frame.space.dim();
    let mut r = CMat::zeros(d, d);
    for k in 0..d {
        r[(k, k)] = C64::from_polar(1.0, frame.frame_energy(frame.space.label(k)) * t);
    }
    r
}

/// Gate-level simulation at one idle configuration: builds the schedule for a
/// [`PulseSpec`], propagates it and reports results in the idle dressed frame.
#[derive(Clone, Debug)]
pub struct GateSimulator {
    pub engine: Engine,
    pub frame: DressedBasis,
    pub gate: GateKind,
    pub line: LineResponse,
    /// Idle time (ns) simulated before and after every pulse.
    pub pad_ns: f64,
}

impl GateSimulator {
    pub fn new(dev: DeviceParams, gate: GateKind) -> Result<Self> {
        Self::with_engine(Engine::qutrits(dev), gate)
    }

    pub fn with_engine(engine: Engine, gate: GateKind) -> Result<Self> {
        let frame = engine.system.idle_frame(gate)?;
        Ok(GateSimulator {
            engine,
            frame,
            gate,
            line: LineResponse::Ideal,
            pad_ns: 0.0,
        })
    }

    pub fn with_line(mut self, line: LineResponse) -> Self {
        self.line = line;
        self
    }

    pub fn with_padding(mut self, pad_ns: f64) -> Self {
        self.pad_ns = pad_ns.max(0.0);
        self
    }

    pub fn device(&self) -> &DeviceParams {
        self.engine.device()
    }

    pub fn schedule(&self, spec: &PulseSpec) -> Result<ControlSchedule> {
        if spec.gate != self.gate {
            return Err(Error::Config(format!(
                "pulse is for {:?} but the simulator idles at the {:?} point",
                spec.gate, self.gate
            )));
        }
        ControlSchedule::from_spec(spec, self.device())?
            .padded(self.pad_ns)?
            .through_lines(self.device(), self.gate, self.line)
    }

    /// Full-space propagator and its computational block in the idle rotating frame.
    pub fn propagate(&self, spec: &PulseSpec) -> Result<(CMat, CMat)> {
        let sched = self.schedule(spec)?;
        let u = self.engine.propagate_unitary(&sched)?;
        let block = computational_block(&u, &self.frame, sched.duration());
        Ok((u, block))
    }

    /// Channel on the computational subspace in the idle rotating frame.
    pub fn channel(&self, spec: &PulseSpec, noise: &NoiseParams) -> Result<QuantumChannel> {
        let sched = self.schedule(spec)?;
        let ch = self.engine.channel(&sched, noise, &self.frame)?;
        Ok(ch.in_rotating_frame(&logical_energies(&self.frame), sched.duration()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm_hermitian, frobenius};

    #[test]
    fn constant_schedule_matches_exponential() {
        let dev = DeviceParams::default();
        let eng = Engine::qutrits(dev.clone());
        let sched = ControlSchedule::idle(&dev, GateKind::Cz, 7.0, 1.0).unwrap();
        let u = eng.propagate_unitary(&sched).unwrap();
        let h = eng.system.hamiltonian(4.16, 5.45, 4.0);
        let want = expm_hermitian(&h, 7.0).unwrap();
        assert!(frobenius(&(u - want)) < 1e-9);
    }

    #[test]
    fn single_decay_is_exponential() {
        let dev = DeviceParams::default();
        let mut f = dev.clone();
        f.capacitances_ff.c1c = 1e-12;
        f.capacitances_ff.c2c = 1e-12;
        f.capacitances_ff.c12 = 1e-12;
        let eng = Engine::qutrits(f);
        let sched = ControlSchedule::constant(4.16, 5.45, 4.0, 20.0, 1.0).unwrap();
        let space = eng.system.space();
        let i = space.index(BasisLabel::new(1, 0, 0)).unwrap();
        let mut rho = CMat::zeros(27, 27);
        rho[(i, i)] = ONE;
        let gamma = 0.01;
        let noise = NoiseParams {
            gamma: [gamma, 0.0, 0.0],
        };
        let out = eng.evolve_lindblad(&rho, &sched, &noise).unwrap();
        assert!((out[(i, i)].re - (-gamma * 20.0f64).exp()).abs() < 1e-9);
        assert!((out.trace().re - 1.0).abs() < 1e-12);
    }
}
