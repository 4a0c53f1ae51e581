//! Single- and two-qubit Clifford groups compiled into XY pulses plus a native
//! two-qubit gate, standard and interleaved randomized benchmarking, and decay fits.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{GateSimulator, NoiseParams, QuantumChannel};
use crate::error::{Error, Result};
use crate::gates::{cnot, cz, iswap, rx, ry, swap, zphase};
use crate::linalg::{equal_up_to_phase, identity, phase_key, CMat, CVec, C64, ONE};
use crate::pulse::PulseSpec;

/// Single-qubit pulse of the gate vocabulary. Angles in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Pulse {
    I,
    X,
    Y,
    X2,
    Y2,
    MX2,
    MY2,
    Rx(f64),
    Ry(f64),
    /// Virtual Z: frame update, no physical pulse.
    Rz(f64),
}

impl Pulse {
    pub fn unitary(&self) -> CMat {
        match *self {
            Pulse::I => identity(2),
            Pulse::X => rx(PI),
            Pulse::Y => ry(PI),
            Pulse::X2 => rx(PI / 2.0),
            Pulse::Y2 => ry(PI / 2.0),
            Pulse::MX2 => rx(-PI / 2.0),
            Pulse::MY2 => ry(-PI / 2.0),
            Pulse::Rx(t) => rx(t),
            Pulse::Ry(t) => ry(t),
            Pulse::Rz(t) => zphase(t),
        }
    }

    /// Physical XY pulses (identity counted as an idle slot, virtual Z not counted).
    pub fn is_xy(&self) -> bool {
        !matches!(self, Pulse::Rz(_))
    }
}

/// Product of pulses applied in time order.
pub fn pulse_unitary(pulses: &[Pulse]) -> CMat {
    pulses.iter().fold(identity(2), |u, p| p.unitary() * u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NativeGate {
    Iswap,
    Cz,
}

impl NativeGate {
    pub fn unitary(&self) -> CMat {
        match self {
            NativeGate::Iswap => iswap(),
            NativeGate::Cz => cz(),
        }
    }
}

/// One time slice of a compiled two-qubit circuit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Layer {
    Local([Vec<Pulse>; 2]),
    Native(NativeGate),
}

impl Layer {
    fn local(q1: &[Pulse], q2: &[Pulse]) -> Self {
        Layer::Local([q1.to_vec(), q2.to_vec()])
    }

    pub fn unitary(&self) -> CMat {
        match self {
            Layer::Local([a, b]) => pulse_unitary(a).kronecker(&pulse_unitary(b)),
            Layer::Native(g) => g.unitary(),
        }
    }

    pub fn xy_count(&self) -> usize {
        match self {
            Layer::Local([a, b]) => a.iter().chain(b).filter(|p| p.is_xy()).count(),
            Layer::Native(_) => 0,
        }
    }
}

/// Product of layers applied in time order.
pub fn circuit_unitary(layers: &[Layer]) -> CMat {
    layers.iter().fold(identity(4), |u, l| l.unitary() * u)
}

/// x–y–x Euler angles (α, β, γ) with U ∝ Rx(γ)·Ry(β)·Rx(α), α applied first.
pub fn euler_xyx(u: &CMat) -> (f64, f64, f64) {
    // H·Rz·H = Rx and H·Ry(θ)·H = Ry(−θ): decompose H·U·H as z–y–z.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let h = CMat::from_row_slice(2, 2, &[C64::new(s, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0)]);
    let v = &h * u * &h;
    let det = v[(0, 0)] * v[(1, 1)] - v[(0, 1)] * v[(1, 0)];
    let v = v / det.sqrt();
    let beta = 2.0 * v[(1, 0)].norm().atan2(v[(0, 0)].norm());
    let (sum, diff) = if v[(0, 0)].norm() > 1e-12 && v[(1, 0)].norm() > 1e-12 {
        (-2.0 * v[(0, 0)].arg(), 2.0 * v[(1, 0)].arg())
    } else if v[(0, 0)].norm() > 1e-12 {
        let s = -2.0 * v[(0, 0)].arg();
        (s, s)
    } else {
        let d = 2.0 * v[(1, 0)].arg();
        (d, d)
    };
    let gamma = 0.5 * (sum + diff);
    let alpha = 0.5 * (sum - diff);
    (alpha, -beta, gamma)
}

/// Pulses realizing `u` up to global phase as an x–y–x triple.
pub fn euler_pulses(u: &CMat) -> Vec<Pulse> {
    let (a, b, g) = euler_xyx(u);
    vec![Pulse::Rx(a), Pulse::Ry(b), Pulse::Rx(g)]
}

use Pulse::{I, MX2, MY2, X, X2, Y, Y2};

/// The 24 single-qubit Cliffords as XY pulse lists in time order (1.875 pulses on average).
pub const C1_PULSES: [&[Pulse]; 24] = [
    &[I],
    &[X],
    &[Y],
    &[Y, X],
    &[X2, Y2],
    &[X2, MY2],
    &[MX2, Y2],
    &[MX2, MY2],
    &[Y2, X2],
    &[Y2, MX2],
    &[MY2, X2],
    &[MY2, MX2],
    &[X2],
    &[MX2],
    &[Y2],
    &[MY2],
    &[MX2, Y2, X2],
    &[MX2, MY2, X2],
    &[X, Y2],
    &[X, MY2],
    &[Y, X2],
    &[Y, MX2],
    &[X2, Y2, X2],
    &[MX2, Y2, MX2],
];

/// Three-element rotation group S1 (identity and the two axis-cycling rotations).
pub const S1_PULSES: [&[Pulse]; 3] = [&[I], &[Y2, X2], &[MX2, MY2]];

#[derive(Clone, Debug)]
pub struct SingleClifford {
    pub pulses: Vec<Pulse>,
    pub unitary: CMat,
}

pub fn build_c1() -> Vec<SingleClifford> {
    C1_PULSES
        .iter()
        .map(|p| SingleClifford {
            pulses: p.to_vec(),
            unitary: pulse_unitary(p),
        })
        .collect()
}

/// CNOT (control QB1) as native gates plus XY pulses.
pub fn decompose_cnot(native: NativeGate) -> Vec<Layer> {
    match native {
        NativeGate::Iswap => vec![
            Layer::Native(NativeGate::Iswap),
            Layer::local(&[Y2], &[I]),
            Layer::Native(NativeGate::Iswap),
            Layer::local(&[MX2, Y2, X2], &[Y, X2]),
        ],
        NativeGate::Cz => vec![
            Layer::local(&[I], &[MY2]),
            Layer::Native(NativeGate::Cz),
            Layer::local(&[I], &[Y2]),
        ],
    }
}

/// CZ written with two iSWAPs, or the native CZ itself.
pub fn decompose_cz(native: NativeGate) -> Vec<Layer> {
    match native {
        NativeGate::Cz => vec![Layer::Native(NativeGate::Cz)],
        NativeGate::Iswap => vec![
            Layer::local(&[MY2], &[I]),
            Layer::Native(NativeGate::Iswap),
            Layer::local(&[I], &[X2, Y2]),
            Layer::Native(NativeGate::Iswap),
            Layer::local(&[MX2], &[MX2, MY2, X2]),
        ],
    }
}

/// iSWAP written with two CZs, or the native iSWAP itself.
pub fn decompose_iswap(native: NativeGate) -> Vec<Layer> {
    match native {
        NativeGate::Iswap => vec![Layer::Native(NativeGate::Iswap)],
        NativeGate::Cz => vec![
            Layer::local(&[MX2], &[Y2]),
            Layer::Native(NativeGate::Cz),
            Layer::local(&[X2], &[Y2]),
            Layer::Native(NativeGate::Cz),
            Layer::local(&[X2], &[MY2]),
        ],
    }
}

/// SWAP = (S†⊗S†)·iSWAP·CZ: three native gates either way.
pub fn decompose_swap(native: NativeGate) -> Vec<Layer> {
    let mut out = decompose_cz(native);
    out.extend(decompose_iswap(native));
    out.push(Layer::local(&[Pulse::Rz(-PI / 2.0)], &[Pulse::Rz(-PI / 2.0)]));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CliffordClass {
    SingleQubitLike,
    CnotLike,
    IswapLike,
    SwapLike,
}

#[derive(Clone, Debug)]
pub struct CliffordElement {
    pub class: CliffordClass,
    pub layers: Vec<Layer>,
    /// Ideal unitary from the class construction (independent of the compilation).
    pub unitary: CMat,
}

impl CliffordElement {
    pub fn xy_count(&self) -> usize {
        self.layers.iter().map(Layer::xy_count).sum()
    }

    pub fn native_count(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, Layer::Native(_))).count()
    }
}

/// Append layers, merging a local layer into a preceding local layer as an x–y–x triple.
fn push_merged(out: &mut Vec<Layer>, layer: Layer) {
    if let (Some(Layer::Local(prev)), Layer::Local(next)) = (out.last(), &layer) {
        let u1 = pulse_unitary(&next[0]) * pulse_unitary(&prev[0]);
        let u2 = pulse_unitary(&next[1]) * pulse_unitary(&prev[1]);
        *out.last_mut().unwrap() = Layer::Local([euler_pulses(&u1), euler_pulses(&u2)]);
    } else {
        out.push(layer);
    }
}

/// The two-qubit Clifford group (11,520 elements modulo global phase).
pub struct CliffordGroup {
    pub native: NativeGate,
    pub elements: Vec<CliffordElement>,
    index: HashMap<Vec<i64>, usize>,
}

const KEY_GRID: f64 = 1e-6;

impl CliffordGroup {
    pub fn build(native: NativeGate) -> Result<Self> {
        let c1 = build_c1();
        let s1: Vec<Vec<Pulse>> = S1_PULSES.iter().map(|p| p.to_vec()).collect();
        let s1y: Vec<Vec<Pulse>> = s1.iter().map(|p| [p.as_slice(), &[Y2]].concat()).collect();
        let s1x: Vec<Vec<Pulse>> = s1.iter().map(|p| [p.as_slice(), &[X2]].concat()).collect();
        let mut elements = Vec::with_capacity(11_520);
        let local_u = |a: &[Pulse], b: &[Pulse]| pulse_unitary(a).kronecker(&pulse_unitary(b));
        for a in &c1 {
            for b in &c1 {
                elements.push(CliffordElement {
                    class: CliffordClass::SingleQubitLike,
                    layers: vec![Layer::Local([a.pulses.clone(), b.pulses.clone()])],
                    unitary: a.unitary.kronecker(&b.unitary),
                });
            }
        }
        let two_qubit = |class, core: CMat, decomposition: Vec<Layer>, tail: Option<(&[Vec<Pulse>], &[Vec<Pulse>])>| {
            let mut out = Vec::new();
            let tails: Vec<(Vec<Pulse>, Vec<Pulse>)> = match tail {
                Some((t1, t2)) => t1.iter().flat_map(|x| t2.iter().map(move |y| (x.clone(), y.clone()))).collect(),
                None => vec![(vec![I], vec![I])],
            };
            for a in &c1 {
                for b in &c1 {
                    for (t1, t2) in &tails {
                        let unitary = local_u(t1, t2) * &core * a.unitary.kronecker(&b.unitary);
                        // front layer always written as x–y–x triples
                        let mut layers = vec![Layer::Local([euler_pulses(&a.unitary), euler_pulses(&b.unitary)])];
                        for l in &decomposition {
                            push_merged(&mut layers, l.clone());
                        }
                        if tail.is_some() {
                            push_merged(&mut layers, Layer::Local([t1.clone(), t2.clone()]));
                        }
                        out.push(CliffordElement { class, layers, unitary });
                    }
                }
            }
            out
        };
        elements.extend(two_qubit(
            CliffordClass::CnotLike,
            cnot(),
            decompose_cnot(native),
            Some((&s1, &s1y)),
        ));
        elements.extend(two_qubit(
            CliffordClass::IswapLike,
            iswap(),
            decompose_iswap(native),
            Some((&s1y, &s1x)),
        ));
        elements.extend(two_qubit(CliffordClass::SwapLike, swap(), decompose_swap(native), None));

        let mut index = HashMap::with_capacity(elements.len());
        for (k, e) in elements.iter().enumerate() {
            let compiled = circuit_unitary(&e.layers);
            if !equal_up_to_phase(&compiled, &e.unitary, 1e-10) {
                return Err(Error::numerical(
                    "rb",
                    format!("element {k} ({:?}): compiled circuit differs from its unitary", e.class),
                ));
            }
            if index.insert(phase_key(&e.unitary, KEY_GRID), k).is_some() {
                return Err(Error::numerical("rb", format!("element {k} ({:?}) duplicates another", e.class)));
            }
        }
        Ok(CliffordGroup {
            native,
            elements,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Index of the element equal to `u` up to global phase.
    pub fn find(&self, u: &CMat) -> Option<usize> {
        self.index.get(&phase_key(u, KEY_GRID)).copied()
    }

    pub fn class_sizes(&self) -> [usize; 4] {
        let mut out = [0; 4];
        for e in &self.elements {
            out[e.class as usize] += 1;
        }
        out
    }

    pub fn inverse(&self, k: usize) -> usize {
        self.find(&self.elements[k].unitary.adjoint()).expect("group is closed under inversion")
    }
}

/// One RB sequence: random Cliffords, optionally each followed by the native gate,
/// then the recovery element.
#[derive(Clone, Debug, Serialize)]
pub struct RbSequence {
    pub cliffords: Vec<usize>,
    pub interleaved: bool,
    pub recovery: usize,
}

pub fn sample_rb_sequence(group: &CliffordGroup, m: usize, interleave: bool, rng: &mut impl Rng) -> RbSequence {
    let mut net = identity(4);
    let inter = group.native.unitary();
    let cliffords: Vec<usize> = (0..m).map(|_| rng.random_range(0..group.len())).collect();
    for &c in &cliffords {
        net = &group.elements[c].unitary * net;
        if interleave {
            net = &inter * net;
        }
    }
    let recovery = group.find(&net.adjoint()).expect("group is closed");
    RbSequence {
        cliffords,
        interleaved: interleave,
        recovery,
    }
}

/// A gate in a compiled, Z-compensated sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum GateSymbol {
    /// Pulse on QB1 (0) or QB2 (1).
    One(usize, Pulse),
    Native(NativeGate),
}

/// Flatten a sequence into gates. `z` holds the native gate's unwanted Z angles (rad);
/// they are undone in the next local layer, which becomes an x–y–x triple (or a pure
/// virtual-Z update when the layer has no XY pulses).
pub fn compile_sequence(group: &CliffordGroup, seq: &RbSequence, z: [f64; 2]) -> Vec<GateSymbol> {
    let mut layers: Vec<Layer> = Vec::new();
    let push_clifford = |k: usize, layers: &mut Vec<Layer>| layers.extend(group.elements[k].layers.iter().cloned());
    for &c in &seq.cliffords {
        push_clifford(c, &mut layers);
        if seq.interleaved {
            layers.push(Layer::Native(group.native));
        }
    }
    push_clifford(seq.recovery, &mut layers);
    compensate(&layers, z)
}

fn compensate(layers: &[Layer], z: [f64; 2]) -> Vec<GateSymbol> {
    let active = z.iter().any(|&t| t != 0.0);
    let mut out = Vec::new();
    let mut pending = false;
    for l in layers {
        match l {
            Layer::Native(g) => {
                if pending {
                    out.extend((0..2).map(|q| GateSymbol::One(q, Pulse::Rz(-z[q]))));
                }
                out.push(GateSymbol::Native(*g));
                pending = active;
            }
            Layer::Local(p) => {
                for q in 0..2 {
                    let pulses = if pending {
                        if p[q].iter().all(|x| !x.is_xy()) {
                            [p[q].clone(), vec![Pulse::Rz(-z[q])]].concat()
                        } else {
                            euler_pulses(&(pulse_unitary(&p[q]) * zphase(-z[q])))
                        }
                    } else {
                        p[q].clone()
                    };
                    out.extend(pulses.into_iter().map(|x| GateSymbol::One(q, x)));
                }
                pending = false;
            }
        }
    }
    if pending {
        out.extend((0..2).map(|q| GateSymbol::One(q, Pulse::Rz(-z[q]))));
    }
    out
}

/// Average number of XY pulses added per Clifford when the native gate interleaved
/// before it forces its front layer into an x–y–x compensation triple.
pub fn interleaving_xy_overhead(group: &CliffordGroup) -> f64 {
    let extra: usize = group
        .elements
        .iter()
        .map(|e| {
            let mut layers = vec![Layer::Native(group.native)];
            layers.extend(e.layers.iter().cloned());
            let with = compensate(&layers, [1.0, 1.0]);
            let front = match &e.layers[0] {
                Layer::Local(p) => p.iter().flatten().filter(|x| x.is_xy()).count(),
                Layer::Native(_) => 0,
            };
            let front_with = with
                .iter()
                .skip(1)
                .take_while(|g| matches!(g, GateSymbol::One(..)))
                .filter(|g| matches!(g, GateSymbol::One(_, p) if p.is_xy()))
                .count();
            front_with - front
        })
        .sum();
    extra as f64 / group.len() as f64
}

/// Sequence-fidelity model: survival probability of |00> after a sequence.
pub trait SequenceModel: Sync {
    fn survival(&self, group: &CliffordGroup, seq: &RbSequence) -> Result<f64>;
}

fn ground() -> CMat {
    let mut r = CMat::zeros(4, 4);
    r[(0, 0)] = ONE;
    r
}

fn depolarize(rho: &CMat, p: f64) -> CMat {
    let tr = rho.trace();
    rho * C64::new(1.0 - p, 0.0) + identity(4) * (tr * (p / 4.0))
}

/// Ideal Cliffords each followed by two-qubit depolarizing noise of parameter `p`;
/// the interleaved native gate gets `p_interleaved`.
#[derive(Clone, Copy, Debug)]
pub struct DepolarizingCliffords {
    pub p: f64,
    pub p_interleaved: f64,
}

impl SequenceModel for DepolarizingCliffords {
    fn survival(&self, group: &CliffordGroup, seq: &RbSequence) -> Result<f64> {
        let mut rho = ground();
        let inter = group.native.unitary();
        let apply = |rho: &CMat, u: &CMat, p: f64| depolarize(&(u * rho * u.adjoint()), p);
        for &c in &seq.cliffords {
            rho = apply(&rho, &group.elements[c].unitary, self.p);
            if seq.interleaved {
                rho = apply(&rho, &inter, self.p_interleaved);
            }
        }
        rho = apply(&rho, &group.elements[seq.recovery].unitary, self.p);
        Ok(rho[(0, 0)].re)
    }
}

/// Gate-level model: XY pulses with optional single-qubit depolarizing error, virtual Z
/// error-free, and the native gate given by a computational-subspace channel whose
/// unwanted Z angles are compensated in the compiled sequence.
#[derive(Clone, Debug)]
pub struct GateChannels {
    pub native: QuantumChannel,
    /// Unwanted native Z angles (rad).
    pub z: [f64; 2],
    /// Depolarizing parameter per XY pulse on the pulsed qubit.
    pub xy_error: f64,
}

impl GateChannels {
    pub fn ideal(native: NativeGate) -> Self {
        GateChannels {
            native: QuantumChannel::from_block(&native.unitary(), 0.0),
            z: [0.0; 2],
            xy_error: 0.0,
        }
    }
}

fn one_qubit_depolarize(rho: &CMat, q: usize, p: f64) -> CMat {
    if p == 0.0 {
        return rho.clone();
    }
    // ρ → (1 − p)ρ + p·tr_q(ρ) ⊗ I/2, written with the Pauli twirl
    let mut out = rho * C64::new(1.0 - 3.0 * p / 4.0, 0.0);
    for k in 1..4 {
        let pk = crate::gates::pauli(k);
        let u = if q == 0 { pk.kronecker(&identity(2)) } else { identity(2).kronecker(&pk) };
        out += &u * rho * u.adjoint() * C64::new(p / 4.0, 0.0);
    }
    out
}

impl SequenceModel for GateChannels {
    fn survival(&self, group: &CliffordGroup, seq: &RbSequence) -> Result<f64> {
        let mut rho = ground();
        for g in compile_sequence(group, seq, self.z) {
            rho = match g {
                GateSymbol::Native(_) => self.native.apply(&rho),
                GateSymbol::One(q, p) => {
                    let u1 = p.unitary();
                    let u = if q == 0 { u1.kronecker(&identity(2)) } else { identity(2).kronecker(&u1) };
                    let r = &u * &rho * u.adjoint();
                    if p.is_xy() && p != Pulse::I {
                        one_qubit_depolarize(&r, q, self.xy_error)
                    } else {
                        r
                    }
                }
            };
        }
        Ok(rho[(0, 0)].re)
    }
}

/// Re-simulates every native gate through the Lindblad engine on the full space,
/// carrying leakage between gates; single-qubit gates act ideally on the dressed
/// computational states. For cross-checking the matrix mode on short sequences.
pub struct FullDynamics<'a> {
    pub sim: &'a GateSimulator,
    pub spec: PulseSpec,
    pub noise: NoiseParams,
    pub z: [f64; 2],
}

impl SequenceModel for FullDynamics<'_> {
    fn survival(&self, group: &CliffordGroup, seq: &RbSequence) -> Result<f64> {
        let frame = &self.sim.frame;
        let d = frame.space.dim();
        let p = frame.computational();
        let sched = self.sim.schedule(&self.spec)?;
        let t = sched.duration();
        let mut rot = CMat::zeros(d, d);
        for k in 0..d {
            let v = frame.vectors.column(k);
            let e = frame.frame_energy(frame.space.label(k));
            rot += v * v.adjoint() * C64::from_polar(1.0, e * t);
        }
        let embed = |u: &CMat| &p * u * p.adjoint() + (identity(d) - &p * p.adjoint());
        let psi0: CVec = p.column(0).into_owned();
        let mut rho = &psi0 * psi0.adjoint();
        for g in compile_sequence(group, seq, self.z) {
            rho = match g {
                GateSymbol::Native(_) => {
                    let out = self.sim.engine.evolve_lindblad(&rho, &sched, &self.noise)?;
                    &rot * out * rot.adjoint()
                }
                GateSymbol::One(q, pl) => {
                    let u1 = pl.unitary();
                    let u = if q == 0 { u1.kronecker(&identity(2)) } else { identity(2).kronecker(&u1) };
                    let w = embed(&u);
                    &w * rho * w.adjoint()
                }
            };
        }
        Ok((psi0.adjoint() * rho * &psi0)[(0, 0)].re)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbConfig {
    pub lengths: Vec<usize>,
    pub n_seq: usize,
    pub seed: u64,
    #[serde(default)]
    pub interleave: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RbFit {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub sigma_alpha: f64,
    pub r_clifford: f64,
    pub sigma_r: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RbResult {
    pub lengths: Vec<usize>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub n_seq: usize,
    pub interleaved: bool,
    pub fit: RbFit,
}

impl RbResult {
    pub fn write_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "length,mean,variance,n_seq")?;
        for i in 0..self.lengths.len() {
            writeln!(out, "{},{},{:e},{}", self.lengths[i], self.mean[i], self.variance[i], self.n_seq)?;
        }
        Ok(())
    }
}

fn sequence_rng(seed: u64, length: usize, k: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(((length as u64) << 32) | k as u64);
    r
}

/// Sequence fidelities per length (sequences run in parallel, each with its own
/// seeded stream), then the weighted decay fit.
pub fn simulate_rb(group: &CliffordGroup, model: &dyn SequenceModel, cfg: &RbConfig) -> Result<RbResult> {
    if cfg.n_seq < 2 {
        return Err(Error::Config("n_seq must be at least 2".into()));
    }
    let mut mean = Vec::new();
    let mut variance = Vec::new();
    for &m in &cfg.lengths {
        let vals = (0..cfg.n_seq)
            .into_par_iter()
            .map(|k| {
                let seq = sample_rb_sequence(group, m, cfg.interleave, &mut sequence_rng(cfg.seed, m, k));
                model.survival(group, &seq)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mu = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        mean.push(mu);
        variance.push(var);
    }
    let sem2: Vec<f64> = variance.iter().map(|v| v / cfg.n_seq as f64).collect();
    let x: Vec<f64> = cfg.lengths.iter().map(|&m| m as f64).collect();
    let fit = fit_rb_decay(&x, &mean, &sem2)?;
    Ok(RbResult {
        lengths: cfg.lengths.clone(),
        mean,
        variance,
        n_seq: cfg.n_seq,
        interleaved: cfg.interleave,
        fit,
    })
}

/// Weighted least squares for (A, B) at fixed α.
fn linear_ab(m: &[f64], y: &[f64], w: &[f64], alpha: f64) -> (f64, f64, f64) {
    let (mut s00, mut s01, mut s11, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..m.len() {
        let e = alpha.powf(m[i]);
        s00 += w[i] * e * e;
        s01 += w[i] * e;
        s11 += w[i];
        t0 += w[i] * e * y[i];
        t1 += w[i] * y[i];
    }
    let det = s00 * s11 - s01 * s01;
    let (a, b) = if det.abs() > 1e-300 {
        ((t0 * s11 - t1 * s01) / det, (s00 * t1 - s01 * t0) / det)
    } else {
        (0.0, t1 / s11)
    };
    let chi2 = (0..m.len()).map(|i| w[i] * (a * alpha.powf(m[i]) + b - y[i]).powi(2)).sum();
    (a, b, chi2)
}

/// Fit F(m) = A·α^m + B with weights 1/variance (unit weights when every variance is
/// zero); r_Clifford = 3(1 − α)/4.
pub fn fit_rb_decay(m: &[f64], y: &[f64], variance: &[f64]) -> Result<RbFit> {
    let n = m.len();
    if n < 3 || y.len() != n || variance.len() != n {
        return Err(Error::Fit("need at least three lengths with means and variances".into()));
    }
    if variance.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Fit("variances must be non-negative".into()));
    }
    let positive: Vec<f64> = variance.iter().copied().filter(|&v| v > 0.0).collect();
    let floor = positive.iter().copied().fold(f64::INFINITY, f64::min) * 1e-3;
    let w: Vec<f64> = if positive.is_empty() {
        vec![1.0; n]
    } else {
        variance.iter().map(|&v| 1.0 / v.max(floor)).collect()
    };
    let mut best = (f64::INFINITY, 0.5);
    for k in 1..=2000 {
        let alpha = k as f64 / 2000.0;
        let c = linear_ab(m, y, &w, alpha).2;
        if c < best.0 {
            best = (c, alpha);
        }
    }
    let (alpha0, _) = crate::optimize::golden_section(
        |a| Ok(linear_ab(m, y, &w, a).2),
        (best.1 - 5e-4).max(1e-9),
        (best.1 + 5e-4).min(1.0),
        1e-15,
        200,
    )?;
    let (a0, b0, _) = linear_ab(m, y, &w, alpha0);
    // Gauss–Newton polish in (A, B, α) and covariance (JᵀWJ)⁻¹
    let mut p = nalgebra::Vector3::new(a0, b0, alpha0);
    let jac = |p: &nalgebra::Vector3<f64>| {
        let mut jtj = nalgebra::Matrix3::zeros();
        let mut jtr = nalgebra::Vector3::zeros();
        let mut chi2 = 0.0;
        for i in 0..n {
            let e = p[2].powf(m[i]);
            let r = p[0] * e + p[1] - y[i];
            let de = if m[i] == 0.0 { 0.0 } else { m[i] * p[2].powf(m[i] - 1.0) };
            let j = nalgebra::Vector3::new(e, 1.0, p[0] * de);
            jtj += j * j.transpose() * w[i];
            jtr += j * (w[i] * r);
            chi2 += w[i] * r * r;
        }
        (jtj, jtr, chi2)
    };
    for _ in 0..20 {
        let (jtj, jtr, chi2) = jac(&p);
        let Some(dp) = jtj.lu().solve(&jtr) else { break };
        let trial = p - dp;
        if trial[2] > 0.0 && trial[2] <= 1.0 && jac(&trial).2 <= chi2 {
            p = trial;
        } else {
            break;
        }
    }
    let alpha = p[2];
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Fit(format!("fitted α = {alpha} outside (0, 1]")));
    }
    let (jtj, _, chi2) = jac(&p);
    let cov = jtj.try_inverse().unwrap_or_else(nalgebra::Matrix3::zeros);
    // unit weights carry no absolute scale: use the residual variance instead
    let scale = if positive.is_empty() && n > 3 { chi2 / (n - 3) as f64 } else { 1.0 };
    let sig = |k: usize| (cov[(k, k)] * scale).max(0.0).sqrt();
    Ok(RbFit {
        a: p[0],
        b: p[1],
        alpha,
        sigma_a: sig(0),
        sigma_b: sig(1),
        sigma_alpha: sig(2),
        r_clifford: 0.75 * (1.0 - alpha),
        sigma_r: 0.75 * sig(2),
    })
}

/// r_int = (3/4)(1 − α_int/α_ref)
pub fn interleaved_error(alpha_ref: f64, alpha_int: f64) -> f64 {
    0.75 * (1.0 - alpha_int / alpha_ref)
}

/// Gate-error estimate with the single-qubit contribution of the compensation pulses removed.
pub fn interaction_error(r_int: f64, xy_overhead: f64, r_1q: f64) -> f64 {
    r_int - xy_overhead * r_1q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_round_trip() {
        for u in [rx(0.3) * ry(1.1), zphase(0.7), ry(PI), rx(PI) * ry(PI / 2.0), identity(2)] {
            let v = pulse_unitary(&euler_pulses(&u));
            assert!(equal_up_to_phase(&u, &v, 1e-12));
        }
    }

    #[test]
    fn c1_average_length() {
        let n: usize = C1_PULSES.iter().map(|p| p.len()).sum();
        assert_eq!(n, 45);
    }

    #[test]
    fn decompositions_match_targets() {
        for native in [NativeGate::Iswap, NativeGate::Cz] {
            assert!(equal_up_to_phase(&circuit_unitary(&decompose_cnot(native)), &cnot(), 1e-12));
            assert!(equal_up_to_phase(&circuit_unitary(&decompose_cz(native)), &cz(), 1e-12));
            assert!(equal_up_to_phase(&circuit_unitary(&decompose_iswap(native)), &iswap(), 1e-12));
            assert!(equal_up_to_phase(&circuit_unitary(&decompose_swap(native)), &swap(), 1e-12));
        }
    }

    #[test]
    fn depolarizing_closed_form() {
        let rho = ground();
        let out = depolarize(&rho, 1.0);
        assert!((out - identity(4) * C64::new(0.25, 0.0)).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn weighted_fit_exact_decay() {
        let m: Vec<f64> = [1.0, 5.0, 10.0, 20.0, 50.0, 100.0].to_vec();
        let y: Vec<f64> = m.iter().map(|&x| 0.7 * 0.98f64.powf(x) + 0.25).collect();
        let f = fit_rb_decay(&m, &y, &[0.0; 6]).unwrap();
        assert!((f.alpha - 0.98).abs() < 1e-10 && (f.a - 0.7).abs() < 1e-10 && (f.b - 0.25).abs() < 1e-10);
        assert_eq!(interleaved_error(0.98, 0.98), 0.0);
    }

    #[test]
    fn group_structure() {
        for native in [NativeGate::Iswap, NativeGate::Cz] {
            let g = CliffordGroup::build(native).unwrap();
            assert_eq!(g.len(), 11_520);
            assert_eq!(g.class_sizes(), [576, 5184, 5184, 576]);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..2000 {
                let (a, b) = (rng.random_range(0..g.len()), rng.random_range(0..g.len()));
                let prod = &g.elements[a].unitary * &g.elements[b].unitary;
                assert!(g.find(&prod).is_some());
            }
        }
    }

    #[test]
    fn xy_overhead_per_interleaved_gate() {
        let g = CliffordGroup::build(NativeGate::Iswap).unwrap();
        assert!((interleaving_xy_overhead(&g) - 0.1125).abs() < 1e-12, "{}", interleaving_xy_overhead(&g));
        let natives: usize = g.elements.iter().map(CliffordElement::native_count).sum();
        assert!((natives as f64 / g.len() as f64 - 1.5).abs() < 1e-12);
    }

    #[test]
    fn compensated_sequence_is_identity() {
        let g = CliffordGroup::build(NativeGate::Iswap).unwrap();
        let z = [0.4, -1.3];
        let native = crate::gates::iswap_with_z(z[0], z[1], 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seq = sample_rb_sequence(&g, 6, true, &mut rng);
        let mut u = identity(4);
        for s in compile_sequence(&g, &seq, z) {
            let step = match s {
                GateSymbol::Native(_) => native.clone(),
                GateSymbol::One(0, p) => p.unitary().kronecker(&identity(2)),
                GateSymbol::One(_, p) => identity(2).kronecker(&p.unitary()),
            };
            u = step * u;
        }
        assert!(equal_up_to_phase(&u, &identity(4), 1e-9));
    }
}
