//! Transmit and receive signal synthesis on a fine simulation grid.
//!
//! Time is normalized to the unit interval `T`. Symbols are spaced `T / M_Tx`
//! apart, the receiver samples every `T_s = T / (M_Tx M)`, and the simulation
//! grid resolves each `T_s` with `K_sim` points. Block `n` of the receiver
//! output holds the `M` samples taken at `t = n T/M_Tx + (m + 1/2) T_s`,
//! `m = 0..M`, i.e. strictly inside the `n`-th symbol slot.

use crate::error::{invalid, Result, ZxmError};
use crate::rll::{nrzi_encode, sample_dk_sequence, RllFsm};
use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

pub type C64 = Complex64;

/// Transmit pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PulseShape {
    /// `√(1/3T)(1 − cos(π t / T))` on `[0, 2T)`.
    Cosine,
    /// Root-raised-cosine truncated to `span` unit intervals, delayed by `span/2`.
    RootRaisedCosine { rolloff: f64, span: usize },
}

/// Parameters of one link-level experiment. The receive filter is the
/// integrate-and-dump integrator over `T / M_Tx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Unit time interval.
    pub t: f64,
    /// FTN factor.
    pub m_tx: usize,
    /// Receiver oversampling factor.
    pub m: usize,
    /// Grid points per sampling interval `T_s` (even).
    pub k_sim: usize,
    pub pulse: PulseShape,
    /// Noise power spectral density.
    pub n0: f64,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            t: 1.0,
            m_tx: 1,
            m: 1,
            k_sim: 16,
            pulse: PulseShape::Cosine,
            n0: 0.0,
            seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn new(m_tx: usize, m: usize) -> Self {
        ChainConfig {
            m_tx,
            m,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) {
            return invalid("T must be positive");
        }
        if self.m_tx == 0 || self.m == 0 {
            return invalid("M_Tx and M must be positive");
        }
        if self.k_sim < 2 || self.k_sim % 2 != 0 {
            return invalid("K_sim must be an even integer >= 2");
        }
        if !(self.n0 >= 0.0) {
            return invalid("N0 must be non-negative");
        }
        if let PulseShape::RootRaisedCosine { rolloff, span } = self.pulse {
            if !(0.0..=1.0).contains(&rolloff) || span == 0 {
                return invalid("RRC pulse needs rolloff in [0,1] and span >= 1");
            }
        }
        Ok(())
    }

    /// Grid step.
    pub fn dt(&self) -> f64 {
        self.t / (self.m_tx * self.m * self.k_sim) as f64
    }

    /// Sampling interval `T_s`.
    pub fn ts(&self) -> f64 {
        self.t / (self.m_tx * self.m) as f64
    }

    /// Grid points per symbol spacing `T / M_Tx`.
    pub fn spacing(&self) -> usize {
        self.m * self.k_sim
    }

    /// Grid index of sample `m` of block `n`.
    pub fn sample_index(&self, n: usize, m: usize) -> usize {
        // grid cell `i` spans `[i dt, (i + 1) dt)`; the trailing window ending
        // with cell `j` closes at `(j + 1) dt`
        n * self.spacing() + m * self.k_sim + self.k_sim / 2 - 1
    }

    /// Transmit pulse sampled at the grid cell midpoints.
    pub fn pulse_samples(&self) -> Vec<f64> {
        let dt = self.dt();
        match self.pulse {
            PulseShape::Cosine => {
                let len = 2 * self.m_tx * self.m * self.k_sim;
                (0..len).map(|i| cosine_pulse((i as f64 + 0.5) * dt, self.t)).collect()
            }
            PulseShape::RootRaisedCosine { rolloff, span } => {
                let len = span * self.m_tx * self.m * self.k_sim;
                let center = span as f64 * self.t / 2.0;
                (0..len)
                    .map(|i| rrc_pulse((i as f64 + 0.5) * dt - center, self.t, rolloff))
                    .collect()
            }
        }
    }

    /// Effective pulse `g = h ⊛ h_Rx` on the grid.
    pub fn effective_pulse(&self) -> Vec<f64> {
        let h = self.pulse_samples();
        let s = self.spacing();
        let gain = (self.m_tx as f64 / self.t).sqrt() * self.dt();
        let mut prefix = vec![0.0; h.len() + 1];
        for (i, &v) in h.iter().enumerate() {
            prefix[i + 1] = prefix[i] + v;
        }
        (0..h.len() + s - 1)
            .map(|j| {
                let hi = (j + 1).min(h.len());
                let lo = (j + 1).saturating_sub(s).min(h.len());
                gain * (prefix[hi] - prefix[lo])
            })
            .collect()
    }

    /// Channel memory `L` in symbols: block `n` depends on `x_{n-L..=n}`.
    pub fn memory(&self) -> usize {
        let g = self.effective_pulse();
        let peak = g.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let last = g
            .iter()
            .rposition(|&v| v.abs() > 1e-14 * peak)
            .unwrap_or(0);
        // the earliest sample of a block sits K/2 grid points into the slot
        let first_offset = self.k_sim / 2 - 1;
        if last < first_offset {
            0
        } else {
            (last - first_offset) / self.spacing()
        }
    }

    /// Noiseless per-sample response to a unit symbol `l` slots back:
    /// `taps[l][m] = g(l T/M_Tx + (m + 1/2) T_s)`.
    pub fn sample_taps(&self) -> Vec<Vec<f64>> {
        let g = self.effective_pulse();
        let l = self.memory();
        (0..=l)
            .map(|lag| {
                (0..self.m)
                    .map(|m| {
                        let j = lag * self.spacing() + self.sample_index(0, m);
                        g.get(j).copied().unwrap_or(0.0)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Cosine transmit pulse.
pub fn cosine_pulse(t: f64, period: f64) -> f64 {
    if (0.0..2.0 * period).contains(&t) {
        (1.0 / (3.0 * period)).sqrt() * (1.0 - (PI * t / period).cos())
    } else {
        0.0
    }
}

/// Unit-energy root-raised-cosine pulse centred at `t = 0`.
pub fn rrc_pulse(t: f64, period: f64, rolloff: f64) -> f64 {
    let b = rolloff;
    let x = t / period;
    let norm = 1.0 / period.sqrt();
    if x.abs() < 1e-12 {
        return norm * (1.0 - b + 4.0 * b / PI);
    }
    if b > 0.0 && ((4.0 * b * x).abs() - 1.0).abs() < 1e-9 {
        return norm * b / 2f64.sqrt()
            * ((1.0 + 2.0 / PI) * (PI / (4.0 * b)).sin() + (1.0 - 2.0 / PI) * (PI / (4.0 * b)).cos());
    }
    let num = (PI * x * (1.0 - b)).sin() + 4.0 * b * x * (PI * x * (1.0 + b)).cos();
    let den = PI * x * (1.0 - (4.0 * b * x).powi(2));
    norm * num / den
}

/// QPSK symbols `(a + j b)/√2` from two ±1 rails.
pub fn build_symbols(a: &[i8], b: &[i8]) -> Result<Vec<C64>> {
    if a.len() != b.len() {
        return Err(ZxmError::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok(a.iter()
        .zip(b)
        .map(|(&ai, &bi)| C64::new(ai as f64 * s, bi as f64 * s))
        .collect())
}

/// Superpose pulses spaced `T / M_Tx` on the grid. Output length is
/// `(N − 1)·spacing + pulse_len`.
pub fn modulate(x: &[C64], cfg: &ChainConfig) -> Vec<C64> {
    let h = cfg.pulse_samples();
    let s = cfg.spacing();
    if x.is_empty() {
        return Vec::new();
    }
    let mut out = vec![C64::new(0.0, 0.0); (x.len() - 1) * s + h.len()];
    for (n, &xn) in x.iter().enumerate() {
        if xn == C64::new(0.0, 0.0) {
            continue;
        }
        let base = n * s;
        for (i, &hv) in h.iter().enumerate() {
            out[base + i] += xn * hv;
        }
    }
    out
}

/// Integrate-and-dump receive filter followed by sampling, producing
/// `M · n_blocks` samples. The filter output at grid index `j` is
/// `√(M_Tx/T) ∫` over the trailing window of length `T/M_Tx` ending at `j`.
pub fn rx_filter_and_sample(signal: &[C64], cfg: &ChainConfig, n_blocks: usize) -> Vec<C64> {
    let s = cfg.spacing();
    let gain = (cfg.m_tx as f64 / cfg.t).sqrt() * cfg.dt();
    let mut out = Vec::with_capacity(n_blocks * cfg.m);
    for n in 0..n_blocks {
        for m in 0..cfg.m {
            let j = cfg.sample_index(n, m);
            let lo = (j + 1).saturating_sub(s);
            let hi = (j + 1).min(signal.len());
            let acc: C64 = if lo < hi {
                signal[lo..hi].iter().sum()
            } else {
                C64::new(0.0, 0.0)
            };
            out.push(acc * gain);
        }
    }
    out
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `csign(r) = sign(Re r) + j sign(Im r)` with `sign(0) = −1`.
#[inline]
pub fn csign(r: C64) -> C64 {
    C64::new(sign(r.re), sign(r.im))
}

/// Output of the 1-bit ADC, `M` samples per transmit symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedFrame {
    pub y: Vec<C64>,
    pub m: usize,
    /// Index of the first sample belonging to the first transmitted symbol.
    pub alignment: usize,
    /// First block whose samples are free of the zero-padding transient.
    pub valid_from: usize,
}

impl QuantizedFrame {
    pub fn blocks(&self) -> usize {
        (self.y.len() - self.alignment) / self.m
    }

    /// Sign pattern of one rail: `+1/−1` as `i8`, `M` entries per block.
    pub fn rail(&self, quadrature: bool) -> Vec<i8> {
        self.y[self.alignment..]
            .iter()
            .map(|v| {
                let x = if quadrature { v.im } else { v.re };
                if x > 0.0 {
                    1
                } else {
                    -1
                }
            })
            .collect()
    }

    /// Flat little-endian f64 layout, interleaved re/im.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        for v in &self.y {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8], m: usize, alignment: usize, valid_from: usize) -> Result<Self> {
        if bytes.len() % 16 != 0 {
            return invalid("frame payload must be a multiple of 16 bytes");
        }
        let y = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                C64::new(re, im)
            })
            .collect();
        Ok(QuantizedFrame {
            y,
            m,
            alignment,
            valid_from,
        })
    }

    /// JSON header accompanying the binary payload.
    pub fn header(&self, cfg: &ChainConfig) -> FrameHeader {
        FrameHeader {
            config: cfg.clone(),
            samples: self.y.len(),
            m: self.m,
            alignment: self.alignment,
            valid_from: self.valid_from,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameHeader {
    pub config: ChainConfig,
    pub samples: usize,
    pub m: usize,
    pub alignment: usize,
    pub valid_from: usize,
}

/// Elementwise `csign`.
pub fn quantize_1bit(r: &[C64], m: usize) -> QuantizedFrame {
    QuantizedFrame {
        y: r.iter().map(|&v| csign(v)).collect(),
        m,
        alignment: 0,
        valid_from: 0,
    }
}

/// Statistical law of each rail's ±1 sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Source {
    /// Independent uniformly distributed symbols.
    Iud,
    /// Max-entropy `(d, ∞)` sequence after NRZI.
    Rll { d: usize },
}

impl Source {
    /// Entropy per rail symbol in bits.
    pub fn entropy_per_rail_symbol(&self) -> Result<f64> {
        match *self {
            Source::Iud => Ok(1.0),
            Source::Rll { d } => Ok(RllFsm::new(d)?.lambda.log2()),
        }
    }

    /// Draw one rail of `n` ±1 levels.
    pub fn sample_rail<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<i8>> {
        match *self {
            Source::Iud => Ok((0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()),
            Source::Rll { d } => {
                let fsm = RllFsm::new(d)?;
                Ok(nrzi_encode(&sample_dk_sequence(&fsm, n, rng)))
            }
        }
    }

    /// `E[a_n a_{n+l}]` for `l = 0..=max_lag`.
    pub fn autocorrelation(&self, max_lag: usize) -> Result<Vec<f64>> {
        match *self {
            Source::Iud => Ok((0..=max_lag).map(|l| if l == 0 { 1.0 } else { 0.0 }).collect()),
            Source::Rll { d } => {
                let fsm = RllFsm::new(d)?;
                let n = fsm.num_states();
                // signed transfer matrix: a 1 flips the level
                let mut q = vec![vec![0.0; n]; n];
                for e in &fsm.edges {
                    q[e.from][e.to] += if e.emit == 1 { -e.prob } else { e.prob };
                }
                let mut v = fsm.stationary.clone();
                let mut out = Vec::with_capacity(max_lag + 1);
                for _ in 0..=max_lag {
                    out.push(v.iter().sum());
                    let mut next = vec![0.0; n];
                    for i in 0..n {
                        for j in 0..n {
                            next[j] += v[i] * q[i][j];
                        }
                    }
                    v = next;
                }
                Ok(out)
            }
        }
    }
}

/// Draw `n` QPSK symbols with independent rails from `source`.
pub fn sample_symbols<R: Rng + ?Sized>(source: &Source, n: usize, rng: &mut R) -> Result<Vec<C64>> {
    let a = source.sample_rail(n, rng)?;
    let b = source.sample_rail(n, rng)?;
    build_symbols(&a, &b)
}

/// Time-averaged transmit power from the source autocorrelation and the
/// pulse cross-energies, `P = (M_Tx/T) Σ_l R(l) ∫ h(t) h(t − l T/M_Tx) dt`.
pub fn analytic_power(cfg: &ChainConfig, source: &Source) -> Result<f64> {
    let h = cfg.pulse_samples();
    let s = cfg.spacing();
    let dt = cfg.dt();
    let max_lag = h.len() / s + 1;
    let r = source.autocorrelation(max_lag)?;
    let mut p = 0.0;
    for lag in 0..=max_lag {
        let shift = lag * s;
        let rho: f64 = if shift < h.len() {
            h[shift..].iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() * dt
        } else {
            0.0
        };
        p += if lag == 0 { r[0] * rho } else { 2.0 * r[lag] * rho };
    }
    Ok(p * cfg.m_tx as f64 / cfg.t)
}

/// Settings of the averaged-periodogram bandwidth estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdOptions {
    pub realizations: usize,
    pub symbols: usize,
    /// PSD grid rate in samples per `T`.
    pub samples_per_t: usize,
}

impl Default for PsdOptions {
    fn default() -> Self {
        PsdOptions {
            realizations: 100,
            symbols: 1 << 14,
            samples_per_t: 16,
        }
    }
}

/// Averaged periodogram of the transmit signal and derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    /// Frequencies in units of `1/T`, FFT order.
    pub freqs: Vec<f64>,
    pub density: Vec<f64>,
    /// Time-averaged `|x(t)|²`.
    pub power: f64,
    /// Two-sided 90 % power-containment bandwidth.
    pub b90: f64,
}

impl PsdEstimate {
    /// `frequency,density` rows sorted by frequency.
    pub fn to_csv(&self) -> String {
        let mut idx: Vec<usize> = (0..self.freqs.len()).collect();
        idx.sort_by(|&a, &b| self.freqs[a].total_cmp(&self.freqs[b]));
        let mut s = String::from("frequency,density\n");
        for i in idx {
            s.push_str(&format!("{:.16e},{:.16e}\n", self.freqs[i], self.density[i]));
        }
        s
    }
}

/// Estimate the PSD of `x(t)` by averaging flat-window periodograms over
/// independent realizations.
pub fn estimate_psd<R: Rng + ?Sized>(
    cfg: &ChainConfig,
    source: &Source,
    opts: &PsdOptions,
    rng: &mut R,
) -> Result<PsdEstimate> {
    cfg.validate()?;
    if opts.realizations == 0 || opts.symbols < 16 {
        return invalid("PSD estimator needs realizations >= 1 and symbols >= 16");
    }
    if opts.samples_per_t % cfg.m_tx != 0 {
        return invalid("samples_per_t must be a multiple of M_Tx");
    }
    let q = opts.samples_per_t / cfg.m_tx; // samples per symbol spacing
    let dt = cfg.t / opts.samples_per_t as f64;
    let pulse: Vec<f64> = match cfg.pulse {
        PulseShape::Cosine => (0..2 * opts.samples_per_t)
            .map(|i| cosine_pulse(i as f64 * dt, cfg.t))
            .collect(),
        PulseShape::RootRaisedCosine { rolloff, span } => (0..span * opts.samples_per_t)
            .map(|i| rrc_pulse(i as f64 * dt - span as f64 * cfg.t / 2.0, cfg.t, rolloff))
            .collect(),
    };
    let guard = pulse.len().div_ceil(q);
    let seg_len = opts.symbols * q;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(seg_len);
    let mut acc = vec![0.0; seg_len];
    let mut power = 0.0;
    for _ in 0..opts.realizations {
        let x = sample_symbols(source, opts.symbols + 2 * guard, rng)?;
        // steady-state window: skip the first `guard` symbols of ramp-up
        let mut buf = vec![C64::new(0.0, 0.0); seg_len];
        let start = guard * q;
        for (n, &xn) in x.iter().enumerate() {
            let base = n * q;
            for (i, &hv) in pulse.iter().enumerate() {
                let j = base + i;
                if j >= start && j < start + seg_len {
                    buf[j - start] += xn * hv;
                }
            }
        }
        power += buf.iter().map(|v| v.norm_sqr()).sum::<f64>() / seg_len as f64;
        fft.process(&mut buf);
        for (a, v) in acc.iter_mut().zip(&buf) {
            *a += v.norm_sqr();
        }
    }
    let df = 1.0 / (seg_len as f64 * dt);
    let scale = dt / (seg_len as f64 * opts.realizations as f64);
    let density: Vec<f64> = acc.iter().map(|v| v * scale).collect();
    let freqs: Vec<f64> = (0..seg_len)
        .map(|k| {
            if k <= seg_len / 2 {
                k as f64 * df
            } else {
                (k as f64 - seg_len as f64) * df
            }
        })
        .collect();
    let b90 = containment_bandwidth(&density, df, 0.9);
    Ok(PsdEstimate {
        freqs,
        density,
        power: power / opts.realizations as f64,
        b90,
    })
}

/// Smallest symmetric interval `[−B/2, B/2]` holding `fraction` of the power.
/// Each bin's power is spread uniformly over its width.
pub fn containment_bandwidth(density: &[f64], df: f64, fraction: f64) -> f64 {
    let n = density.len();
    let total: f64 = density.iter().sum();
    let target = fraction * total;
    // bin 0 covers |f| < df/2; bins ±k cover (k − 1/2, k + 1/2)·df
    let mut acc = density[0];
    if acc >= target {
        return df * target / density[0];
    }
    for k in 1..=n / 2 {
        let neg = n - k;
        let p = if neg != k { density[k] + density[neg] } else { density[k] };
        if acc + p >= target {
            let frac = (target - acc) / p;
            let half = (k as f64 - 0.5 + frac) * df;
            return 2.0 * half;
        }
        acc += p;
    }
    n as f64 * df
}

/// Two-sided 90 % power-containment bandwidth of the transmit signal.
pub fn b90_bandwidth<R: Rng + ?Sized>(
    cfg: &ChainConfig,
    source: &Source,
    opts: &PsdOptions,
    rng: &mut R,
) -> Result<f64> {
    Ok(estimate_psd(cfg, source, opts, rng)?.b90)
}

/// `SNR = P / (N0 · B_90%)`.
pub fn snr(power: f64, n0: f64, b90: f64) -> Result<f64> {
    if !(b90 > 0.0) {
        return invalid("B90 must be positive");
    }
    Ok(power / (n0 * b90))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn qpsk_symbols() {
        let x = build_symbols(&[1], &[1]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((x[0] - C64::new(s, s)).norm() < 1e-15);
        let mut rng = stream(1, 0);
        let a = Source::Iud.sample_rail(200, &mut rng).unwrap();
        let b = Source::Iud.sample_rail(200, &mut rng).unwrap();
        let x = build_symbols(&a, &b).unwrap();
        for (i, v) in x.iter().enumerate() {
            assert!((v.norm() - 1.0).abs() < 1e-15);
            assert_eq!(v.re, a[i] as f64 * s);
            assert_eq!(v.im, b[i] as f64 * s);
        }
        assert!(build_symbols(&[1, 1], &[1]).is_err());
    }

    #[test]
    fn cosine_pulse_values_and_energy() {
        assert_eq!(cosine_pulse(0.0, 1.0), 0.0);
        assert!(cosine_pulse(2.0 - 1e-9, 1.0) < 1e-12);
        assert!((cosine_pulse(1.0, 1.0) - 2.0 * (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        for (m_tx, m) in [(1, 1), (2, 3), (4, 2)] {
            let cfg = ChainConfig::new(m_tx, m);
            let e: f64 = cfg.pulse_samples().iter().map(|v| v * v).sum::<f64>() * cfg.dt();
            assert!((e - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn rrc_pulse_energy() {
        let cfg = ChainConfig {
            pulse: PulseShape::RootRaisedCosine { rolloff: 0.2, span: 40 },
            ..ChainConfig::new(1, 2)
        };
        let e: f64 = cfg.pulse_samples().iter().map(|v| v * v).sum::<f64>() * cfg.dt();
        assert!((e - 1.0).abs() < 2e-3, "e = {e}");
    }

    #[test]
    fn modulate_single_symbol_and_linearity() {
        let cfg = ChainConfig::new(2, 2);
        let h = cfg.pulse_samples();
        let sig = modulate(&[C64::new(0.5, -1.0)], &cfg);
        for (a, &b) in sig.iter().zip(&h) {
            assert!((a - C64::new(0.5, -1.0) * b).norm() < 1e-15);
        }
        let mut rng = stream(2, 0);
        let x1 = sample_symbols(&Source::Iud, 20, &mut rng).unwrap();
        let x2 = sample_symbols(&Source::Iud, 20, &mut rng).unwrap();
        let sum: Vec<C64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
        let (s1, s2, s12) = (modulate(&x1, &cfg), modulate(&x2, &cfg), modulate(&sum, &cfg));
        for i in 0..s12.len() {
            assert!((s12[i] - s1[i] - s2[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn ftn_pulses_overlap() {
        let cfg = ChainConfig::new(2, 1);
        let taps = cfg.sample_taps();
        // more than one tap contributes at the sample instants
        assert!(taps.iter().filter(|t| t[0].abs() > 1e-6).count() > 1);
        assert_eq!(cfg.memory(), 4);
        assert_eq!(ChainConfig::new(1, 1).memory(), 2);
        assert_eq!(ChainConfig::new(4, 3).memory(), 8);
    }

    #[test]
    fn integrate_and_dump_constant_input() {
        let cfg = ChainConfig::new(2, 2);
        let c = C64::new(0.7, -0.2);
        let sig = vec![c; 40 * cfg.spacing()];
        let r = rx_filter_and_sample(&sig, &cfg, 30);
        let expect = c * (cfg.t / cfg.m_tx as f64).sqrt();
        for v in &r[4..] {
            assert!((v - expect).norm() < 1e-12);
        }
        // unit-energy receive filter
        let e = cfg.spacing() as f64 * cfg.dt() * cfg.m_tx as f64 / cfg.t;
        assert!((e - 1.0).abs() < 1e-9);
    }

    #[test]
    fn effective_pulse_support_and_sign() {
        for (m_tx, m) in [(1, 1), (2, 2), (3, 1)] {
            let cfg = ChainConfig::new(m_tx, m);
            let g = cfg.effective_pulse();
            // support [0, 2T + T/M_Tx)
            let support = g.len() as f64 * cfg.dt();
            assert!((support - (2.0 + 1.0 / m_tx as f64)).abs() <= cfg.dt() + 1e-12);
            assert!(g.iter().all(|&v| v >= 0.0));
            // oracle: direct convolution sum
            let h = cfg.pulse_samples();
            let s = cfg.spacing();
            let gain = (m_tx as f64).sqrt() * cfg.dt();
            for j in (0..g.len()).step_by(7) {
                let direct: f64 = (0..s).filter(|&i| i <= j && j - i < h.len()).map(|i| h[j - i]).sum::<f64>() * gain;
                assert!((direct - g[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quantizer_convention() {
        assert_eq!(csign(C64::new(0.3, -0.0)), C64::new(1.0, -1.0));
        assert_eq!(csign(C64::new(0.3, 0.0)), C64::new(1.0, -1.0));
        assert_eq!(csign(C64::new(-2.0, 5.0)), C64::new(-1.0, 1.0));
        for &re in &[-1.0, 1.0] {
            for &im in &[-1.0, 1.0] {
                let v = C64::new(re, im);
                assert_eq!(csign(v), v);
            }
        }
    }

    #[test]
    fn iq_paths_decouple() {
        let cfg = ChainConfig::new(2, 2);
        let mut rng = stream(3, 0);
        let x = sample_symbols(&Source::Iud, 30, &mut rng).unwrap();
        let xr: Vec<C64> = x.iter().map(|v| C64::new(v.re, 0.0)).collect();
        let xi: Vec<C64> = x.iter().map(|v| C64::new(0.0, v.im)).collect();
        let n = 30;
        let r = rx_filter_and_sample(&modulate(&x, &cfg), &cfg, n);
        let rr = rx_filter_and_sample(&modulate(&xr, &cfg), &cfg, n);
        let ri = rx_filter_and_sample(&modulate(&xi, &cfg), &cfg, n);
        for k in 0..r.len() {
            assert_eq!(r[k].re, rr[k].re);
            assert_eq!(r[k].im, ri[k].im);
            assert_eq!(rr[k].im, 0.0);
        }
    }

    #[test]
    fn grid_refinement_is_stable() {
        let mut rng = stream(4, 0);
        let x = sample_symbols(&Source::Rll { d: 1 }, 40, &mut rng).unwrap();
        for (m_tx, m) in [(1, 1), (2, 2)] {
            let coarse = ChainConfig { k_sim: 16, ..ChainConfig::new(m_tx, m) };
            let fine = ChainConfig { k_sim: 32, ..ChainConfig::new(m_tx, m) };
            let rc = rx_filter_and_sample(&modulate(&x, &coarse), &coarse, 40);
            let rf = rx_filter_and_sample(&modulate(&x, &fine), &fine, 40);
            let scale = rf.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (a, b) in rc.iter().zip(&rf) {
                assert!((a - b).norm() < 1e-3 * scale);
            }
        }
    }

    #[test]
    fn analytic_power_matches_empirical() {
        for (src, m_tx) in [(Source::Iud, 1), (Source::Rll { d: 1 }, 2), (Source::Rll { d: 2 }, 4)] {
            let cfg = ChainConfig::new(m_tx, 1);
            let pa = analytic_power(&cfg, &src).unwrap();
            let mut rng = stream(5, m_tx as u64);
            let opts = PsdOptions { realizations: 20, symbols: 1 << 13, samples_per_t: 16 };
            let pe = estimate_psd(&cfg, &src, &opts, &mut rng).unwrap().power;
            assert!((pa / pe - 1.0).abs() < 0.01, "{src:?}: {pa} vs {pe}");
            if src == Source::Iud {
                assert!((pa - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn b90_orderings() {
        let opts = PsdOptions { realizations: 20, symbols: 1 << 13, samples_per_t: 16 };
        let b = |m_tx: usize, src: Source, seed: u64| {
            b90_bandwidth(&ChainConfig::new(m_tx, 1), &src, &opts, &mut stream(seed, 0)).unwrap()
        };
        let iud1 = b(1, Source::Iud, 1);
        let iud2 = b(2, Source::Iud, 2);
        assert!(iud2 > iud1);
        let d1 = b(2, Source::Rll { d: 1 }, 3);
        let d2 = b(2, Source::Rll { d: 2 }, 4);
        assert!(d2 < d1 && d1 < iud2);
    }

    #[test]
    fn b90_converges_with_realizations() {
        let cfg = ChainConfig::new(1, 1);
        let o1 = PsdOptions { realizations: 100, symbols: 1 << 14, samples_per_t: 16 };
        let o2 = PsdOptions { realizations: 200, ..o1 };
        let b1 = b90_bandwidth(&cfg, &Source::Iud, &o1, &mut stream(6, 0)).unwrap();
        let b2 = b90_bandwidth(&cfg, &Source::Iud, &o2, &mut stream(6, 1)).unwrap();
        assert!((b1 / b2 - 1.0).abs() < 0.01, "{b1} vs {b2}");
    }

    #[test]
    fn snr_definition() {
        assert_eq!(snr(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert!((snr(1.0, 0.5, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(snr(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn frame_binary_round_trip() {
        let r = vec![C64::new(0.1, -0.2), C64::new(-3.0, 4.0)];
        let f = quantize_1bit(&r, 2);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 32);
        let g = QuantizedFrame::read_binary(&buf, 2, 0, 0).unwrap();
        assert_eq!(f, g);
        let hdr = serde_json::to_string(&f.header(&ChainConfig::new(1, 2))).unwrap();
        let back: FrameHeader = serde_json::from_str(&hdr).unwrap();
        assert_eq!(back.samples, 2);
    }
}
