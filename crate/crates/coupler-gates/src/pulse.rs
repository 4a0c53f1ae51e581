//! Control waveforms: Hanning-filtered square pulses, Slepian-type adiabatic pulses,
//! control-line transients and their inverse.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, GateKind, TransientModel};
use crate::error::{Error, Result};
use crate::linalg::solve;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    Linear,
    /// Cubic spline with zero slope at both ends.
    Spline,
}

/// Uniformly sampled trajectory; sample k sits at t = k·dt.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    dt: f64,
    interp: Interp,
    curvature: Vec<f64>,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, dt: f64, interp: Interp) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Argument("waveform needs at least one sample".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Argument("waveform dt must be positive".into()));
        }
        let curvature = match interp {
            Interp::Spline if samples.len() > 2 => clamped_spline(&samples, dt),
            _ => vec![0.0; samples.len()],
        };
        Ok(Waveform {
            samples,
            dt,
            interp,
            curvature,
        })
    }

    pub fn constant(value: f64, len: usize, dt: f64) -> Result<Self> {
        Self::new(vec![value; len], dt, Interp::Linear)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// (len − 1)·dt
    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    pub fn with_interp(&self, interp: Interp) -> Self {
        Self::new(self.samples.clone(), self.dt, interp).expect("already validated")
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(self.samples.iter().map(|&x| f(x)).collect(), self.dt, self.interp).expect("already validated")
    }

    pub fn first(&self) -> f64 {
        self.samples[0]
    }

    pub fn last(&self) -> f64 {
        *self.samples.last().unwrap()
    }

    /// Interpolated value; held constant outside [0, duration].
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.samples.len();
        if n == 1 || t <= 0.0 {
            return self.samples[0];
        }
        let x = t / self.dt;
        if x >= (n - 1) as f64 {
            return self.samples[n - 1];
        }
        let i = x.floor() as usize;
        let u = x - i as f64;
        let (y0, y1) = (self.samples[i], self.samples[i + 1]);
        match self.interp {
            Interp::Linear => y0 + u * (y1 - y0),
            Interp::Spline => {
                let (m0, m1) = (self.curvature[i], self.curvature[i + 1]);
                let h2 = self.dt * self.dt;
                let a = 1.0 - u;
                a * y0 + u * y1 + h2 / 6.0 * ((a * a * a - a) * m0 + (u * u * u - u) * m1)
            }
        }
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "t_ns,value")?;
        for (k, v) in self.samples.iter().enumerate() {
            writeln!(out, "{},{}", k as f64 * self.dt, v)?;
        }
        Ok(())
    }

    /// Reads "t_ns,value" rows; '#' lines are skipped and the spacing must be uniform.
    pub fn read_csv(input: impl BufRead, interp: Interp) -> Result<Self> {
        let mut t = Vec::new();
        let mut v = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("waveform csv", e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("t_ns") {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|x| x.trim().parse().ok())
                    .ok_or_else(|| Error::Validation(format!("waveform csv line {}: bad row", n + 1)))
            };
            t.push(parse(parts.next())?);
            v.push(parse(parts.next())?);
        }
        if v.len() < 2 {
            return Self::new(v, 1.0, interp);
        }
        let dt = t[1] - t[0];
        if t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0)) {
            return Err(Error::Validation("waveform csv has non-uniform spacing".into()));
        }
        Self::new(v, dt, interp)
    }
}

/// Second derivatives of the zero-end-slope cubic spline through `y`.
fn clamped_spline(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut diag = vec![4.0; n];
    diag[0] = 2.0;
    diag[n - 1] = 2.0;
    let mut rhs = vec![0.0; n];
    let k = 6.0 / (h * h);
    rhs[0] = k * (y[1] - y[0]);
    rhs[n - 1] = -k * (y[n - 1] - y[n - 2]);
    for i in 1..n - 1 {
        rhs[i] = k * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
    }
    // Thomas algorithm, unit off-diagonals
    for i in 1..n {
        let m = 1.0 / diag[i - 1];
        diag[i] -= m;
        rhs[i] -= m * rhs[i - 1];
    }
    let mut out = vec![0.0; n];
    out[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = (rhs[i] - out[i + 1]) / diag[i];
    }
    out
}

fn sample_count(t_g: f64, dt: f64) -> Result<usize> {
    if !(t_g > 0.0 && dt > 0.0) {
        return Err(Error::Argument("gate length and dt must be positive".into()));
    }
    Ok((t_g / dt).round() as usize)
}

/// Normalized Hanning window of odd length `len` (no zero end taps).
pub fn hanning_window(len: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..len)
        .map(|j| (PI * (j + 1) as f64 / (len + 1) as f64).sin().powi(2))
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Flat-top excursion idle → target → idle, smoothed by a Hanning window.
///
/// The unfiltered plateau is shortened by half the filter support on each side so the
/// filtered pulse still starts and ends exactly at `idle`.
pub fn square_hanning(t_g: f64, idle: f64, target: f64, filter_len: usize, dt: f64) -> Result<Waveform> {
    if filter_len == 0 || filter_len.is_multiple_of(2) {
        return Err(Error::Argument("filter length must be odd and at least 1".into()));
    }
    let n = sample_count(t_g, dt)?;
    let h = (filter_len - 1) / 2;
    if n < 2 * h + 2 {
        return Err(Error::Argument(format!(
            "gate of {t_g} ns is shorter than the filter support of {filter_len} samples"
        )));
    }
    let square: Vec<f64> = (0..=n).map(|k| if k > h && k < n - h { 1.0 } else { 0.0 }).collect();
    let w = hanning_window(filter_len);
    let smooth: Vec<f64> = (0..=n)
        .map(|k| {
            (0..filter_len)
                .map(|j| {
                    let idx = k as isize + j as isize - h as isize;
                    if idx < 0 || idx > n as isize {
                        0.0
                    } else {
                        w[j] * square[idx as usize]
                    }
                })
                .sum()
        })
        .collect();
    let samples = smooth.iter().map(|s| idle + (target - idle) * s).collect();
    Waveform::new(samples, dt, Interp::Linear)
}

/// Parameters of the adiabatic coupler excursion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlepianParams {
    pub g_eff: f64,
    pub f_idle: f64,
    pub fc_min: f64,
    pub f_ref: f64,
    pub t_g: f64,
    pub n_coeffs: usize,
    /// Fraction of t_g spent ramping; the rest is a plateau at fc_min.
    pub ramp_fraction: f64,
    pub dt: f64,
}

#[derive(Clone, Debug)]
pub struct SlepianPulse {
    pub waveform: Waveform,
    pub theta_initial: f64,
    pub theta_final: f64,
    /// λ_n for n = 1..=n_coeffs
    pub coefficients: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Minimum |Δ| (GHz) allowed when inverting θ → f_c.
pub const MIN_DETUNING: f64 = 1e-6;

/// θ(s) = θ_i + Σ λ_n (1 − cos 2πns) for s ∈ [0, 1].
///
/// The peak condition fixes Σ_{odd n} 2λ_n = θ_f − θ_i. The other rows zero the
/// even moments Σ n^{2k} λ_n (k = 1..N−1), which removes the leading high-frequency
/// tails of the spectrum. N = 2 gives λ_2 = −λ_1/4.
pub fn slepian_coefficients(theta_i: f64, theta_f: f64, n_coeffs: usize) -> Result<Vec<f64>> {
    if n_coeffs == 0 {
        return Err(Error::Argument("n_coeffs must be at least 1".into()));
    }
    let n = n_coeffs;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for j in 0..n {
        let order = (j + 1) as f64;
        a[(0, j)] = if (j + 1) % 2 == 1 { 2.0 } else { 0.0 };
        for k in 1..n {
            a[(k, j)] = order.powi(2 * k as i32);
        }
    }
    b[0] = theta_f - theta_i;
    Ok(solve(&a, &b)?.iter().copied().collect())
}

fn theta_at(theta_i: f64, lam: &[f64], s: f64) -> f64 {
    theta_i
        + lam
            .iter()
            .enumerate()
            .map(|(k, l)| l * (1.0 - (2.0 * PI * (k + 1) as f64 * s).cos()))
            .sum::<f64>()
}

pub fn slepian_waveform(p: &SlepianParams) -> Result<SlepianPulse> {
    if !(p.g_eff > 0.0) {
        return Err(Error::Argument("g_eff must be positive".into()));
    }
    if !(p.fc_min < p.f_idle) {
        return Err(Error::Argument("fc_min must lie below the idle frequency".into()));
    }
    if !(p.ramp_fraction > 0.0 && p.ramp_fraction <= 1.0) {
        return Err(Error::Argument("ramp_fraction must be in (0, 1]".into()));
    }
    let mut warnings = Vec::new();
    if p.f_idle - p.f_ref <= 0.0 || p.fc_min - p.f_ref <= 0.0 {
        return Err(Error::Domain(format!(
            "detuning fc − f_ref crosses zero (fc_min = {} GHz, f_ref = {} GHz); raise fc_min",
            p.fc_min, p.f_ref
        )));
    }
    let mut d_min = p.fc_min - p.f_ref;
    if d_min < MIN_DETUNING {
        warnings.push(format!("detuning {d_min:e} GHz clamped to {MIN_DETUNING:e} GHz"));
        d_min = MIN_DETUNING;
    }
    let theta_i = (2.0 * p.g_eff / (p.f_idle - p.f_ref)).atan();
    let theta_f = (2.0 * p.g_eff / d_min).atan();
    let lam = slepian_coefficients(theta_i, theta_f, p.n_coeffs)?;

    // time along the first half of the ramp: t(s) ∝ ∫ sin θ ds, s ∈ [0, 1/2]
    const GRID: usize = 1 << 15;
    let ds = 0.5 / GRID as f64;
    let mut cum = vec![0.0; GRID + 1];
    let mut prev = theta_i.sin();
    for k in 1..=GRID {
        let cur = theta_at(theta_i, &lam, k as f64 * ds).sin();
        cum[k] = cum[k - 1] + 0.5 * (prev + cur) * ds;
        prev = cur;
    }
    let half_ramp = 0.5 * p.ramp_fraction * p.t_g;
    let scale = half_ramp / cum[GRID];

    let n = sample_count(p.t_g, p.dt)?;
    let theta_of_time = |t: f64| -> f64 {
        if t >= half_ramp {
            return theta_f;
        }
        let target = t / scale;
        let j = cum.partition_point(|&c| c < target).clamp(1, GRID);
        let (c0, c1) = (cum[j - 1], cum[j]);
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        theta_at(theta_i, &lam, (j as f64 - 1.0 + frac) * ds)
    };
    let fc_of = |th: f64| p.f_ref + (2.0 * p.g_eff / th.tan()).max(MIN_DETUNING);
    let mut samples = vec![0.0; n + 1];
    for k in 0..=n / 2 {
        let t = k as f64 * p.dt;
        let v = fc_of(theta_of_time(t));
        samples[k] = v;
        samples[n - k] = v;
    }
    samples[0] = p.f_idle;
    samples[n] = p.f_idle;
    Ok(SlepianPulse {
        waveform: Waveform::new(samples, p.dt, Interp::Spline)?,
        theta_initial: theta_i,
        theta_final: theta_f,
        coefficients: lam,
        warnings,
    })
}

/// Forward model of a control line: step response 1 + Σ a_k e^{−t/τ_k}, with the
/// signal assumed to sit at 0 before the first sample.
pub fn apply_transient(w: &Waveform, m: &TransientModel) -> Waveform {
    if m.is_empty() {
        return w.clone();
    }
    let p: Vec<f64> = m.terms.iter().map(|e| (-w.dt() / e.tau_ns).exp()).collect();
    let mut state = vec![0.0; p.len()];
    let mut prev = 0.0;
    let out = w
        .samples()
        .iter()
        .map(|&x| {
            let mut y = x;
            for (k, e) in m.terms.iter().enumerate() {
                state[k] = p[k] * state[k] + (x - prev);
                y += e.amplitude * state[k];
            }
            prev = x;
            y
        })
        .collect();
    Waveform::new(out, w.dt(), w.interp()).expect("same shape")
}

/// Distances s = 1 − z of the transfer-function zeros from z = 1 at sample period `dt`.
///
/// With p_k = 1 − q_k the transfer function is G + Σ r_k/(z − p_k), r_k = −a_k q_k, so the
/// zeros satisfy s ∈ eig(diag(q) + r·1ᵀ/G). Working in s keeps the accuracy of poles
/// within 1e−5 of the unit circle.
fn inverse_pole_offsets(m: &TransientModel, dt: f64) -> Vec<num_complex::Complex64> {
    let q: Vec<f64> = m.terms.iter().map(|e| -(-dt / e.tau_ns).exp_m1()).collect();
    let gain = 1.0 + m.terms.iter().map(|e| e.amplitude).sum::<f64>();
    let k = q.len();
    let mut a = DMatrix::<f64>::from_fn(k, k, |i, _| -m.terms[i].amplitude * q[i] / gain);
    for i in 0..k {
        a[(i, i)] += q[i];
    }
    a.complex_eigenvalues().iter().copied().collect()
}

/// Zeros of the transient transfer function (poles of its inverse) at sample period `dt`.
pub fn inverse_poles(m: &TransientModel, dt: f64) -> Vec<num_complex::Complex64> {
    inverse_pole_offsets(m, dt).into_iter().map(|s| 1.0 - s).collect()
}

pub fn check_invertible(m: &TransientModel, dt: f64) -> Result<()> {
    if m.terms.iter().any(|e| !(e.tau_ns > 0.0)) {
        return Err(Error::Validation("transient time constants must be positive".into()));
    }
    let gain = 1.0 + m.terms.iter().map(|e| e.amplitude).sum::<f64>();
    if !(gain > 0.0) {
        return Err(Error::Validation(format!("transient model has 1 + Σa = {gain} ≤ 0")));
    }
    // |1 − s| < 1  ⇔  2·Re s > |s|²
    if let Some(s) = inverse_pole_offsets(m, dt).into_iter().find(|s| 2.0 * s.re <= s.norm_sqr()) {
        return Err(Error::Validation(format!(
            "inverse filter is unstable: pole magnitude {:.9}",
            (1.0 - s).norm()
        )));
    }
    Ok(())
}

/// Exact recursive inverse of `apply_transient`.
pub fn predistort(w: &Waveform, m: &TransientModel) -> Result<Waveform> {
    if m.is_empty() {
        return Ok(w.clone());
    }
    check_invertible(m, w.dt())?;
    let p: Vec<f64> = m.terms.iter().map(|e| (-w.dt() / e.tau_ns).exp()).collect();
    let gain = 1.0 + m.terms.iter().map(|e| e.amplitude).sum::<f64>();
    let mut state = vec![0.0; p.len()];
    let mut prev = 0.0;
    let out = w
        .samples()
        .iter()
        .map(|&y| {
            let carry: f64 = m
                .terms
                .iter()
                .enumerate()
                .map(|(k, e)| e.amplitude * (p[k] * state[k] - prev))
                .sum();
            let x = (y - carry) / gain;
            for k in 0..p.len() {
                state[k] = p[k] * state[k] + (x - prev);
            }
            prev = x;
            x
        })
        .collect();
    Waveform::new(out, w.dt(), w.interp())
}

/// max |apply_transient(predistort(w)) − w| over the samples.
pub fn round_trip_error(w: &Waveform, m: &TransientModel) -> Result<f64> {
    let back = apply_transient(&predistort(w, m)?, m);
    Ok(back
        .samples()
        .iter()
        .zip(w.samples())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PulseShape {
    SquareHanning {
        #[serde(default = "default_filter_len")]
        filter_len: usize,
    },
    Slepian {
        #[serde(default = "default_n_coeffs")]
        n_coeffs: usize,
        #[serde(default = "default_ramp_fraction")]
        ramp_fraction: f64,
    },
}

fn default_filter_len() -> usize {
    5
}
fn default_n_coeffs() -> usize {
    2
}
fn default_ramp_fraction() -> f64 {
    1.0
}

impl PulseShape {
    pub fn slepian() -> Self {
        PulseShape::Slepian {
            n_coeffs: 2,
            ramp_fraction: 1.0,
        }
    }

    pub fn square() -> Self {
        PulseShape::SquareHanning { filter_len: 5 }
    }
}

/// A two-qubit gate pulse: coupler excursion to `fc_min` and QB2 excursion to `f2_peak`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub gate: GateKind,
    pub t_g: f64,
    pub fc_min: f64,
    pub f2_peak: f64,
    pub shape: PulseShape,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    1.0
}

/// Coupler and QB2 waveforms for one gate; f1 is fixed.
#[derive(Clone, Debug)]
pub struct GateWaveforms {
    pub f1: f64,
    pub fc: Waveform,
    pub f2: Waveform,
    pub warnings: Vec<String>,
}

impl PulseSpec {
    pub fn new(gate: GateKind, t_g: f64, fc_min: f64, f2_peak: f64, shape: PulseShape) -> Self {
        PulseSpec {
            gate,
            t_g,
            fc_min,
            f2_peak,
            shape,
            dt: 1.0,
        }
    }

    /// Effective coupling steering the coupler pulse, evaluated at the pulse extremum.
    pub fn g_eff(&self, dev: &DeviceParams) -> f64 {
        let idle = dev.idle_bias(self.gate);
        let (g1c, _, _) = dev.couplings(idle.f1, self.fc_min, idle.f2);
        match self.gate {
            GateKind::Cz => g1c,
            GateKind::Iswap => std::f64::consts::SQRT_2 * g1c,
        }
    }

    pub fn waveforms(&self, dev: &DeviceParams) -> Result<GateWaveforms> {
        let idle = dev.idle_bias(self.gate);
        let mut warnings = Vec::new();
        let fc = match self.shape {
            PulseShape::SquareHanning { filter_len } => {
                square_hanning(self.t_g, idle.fc, self.fc_min, filter_len, self.dt)?
            }
            PulseShape::Slepian {
                n_coeffs,
                ramp_fraction,
            } => {
                let sp = slepian_waveform(&SlepianParams {
                    g_eff: self.g_eff(dev),
                    f_idle: idle.fc,
                    fc_min: self.fc_min,
                    f_ref: idle.f1,
                    t_g: self.t_g,
                    n_coeffs,
                    ramp_fraction,
                    dt: self.dt,
                })?;
                warnings.extend(sp.warnings);
                sp.waveform
            }
        };
        let f2 = if (self.f2_peak - idle.f2).abs() > 0.0 {
            let filter_len = match self.shape {
                PulseShape::SquareHanning { filter_len } => filter_len,
                PulseShape::Slepian { .. } => 5,
            };
            square_hanning(self.t_g, idle.f2, self.f2_peak, filter_len, self.dt)?
        } else {
            Waveform::constant(idle.f2, fc.len(), self.dt)?
        };
        Ok(GateWaveforms {
            f1: idle.f1,
            fc,
            f2,
            warnings,
        })
    }
}
