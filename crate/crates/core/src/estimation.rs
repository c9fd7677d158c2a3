//! Phase and frequency estimation with 1-bit samples: unsynchronized frames,
//! Fisher information with and without quantization, closed-form CRLB
//! bounds, and the dithered least-squares phase estimator.
//!
//! Receive samples are `r_k = u_k e^{j(Ω (t_k − t_c) + φ + ϕ_k)} + n_k` with
//! i.i.d. `CN(0, N0)` noise, `t_k = k T_s` and `t_c` the frame centre. The
//! noiseless samples `u_k = Σ x_n g(t_k − nT − εT)` use the transmit pulse
//! lowpass-filtered to `|f| < 1/(2 T_s)` and scaled by `√T_s`.

use crate::channel::complex_gaussian;
use crate::error::{invalid, Result, ZxmError};
use crate::rng::stream;
use crate::special::{normal_cdf, normal_pdf, wrap_phase};
use crate::waveform::{csign, C64};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

/// Transmit pulse of the pilot signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstPulse {
    RootRaisedCosine { rolloff: f64 },
    /// `sinc(t/T)/√T`: one nonzero sample per pilot at `M = 1`.
    Sinc,
}

/// Per-sample phase dither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dither {
    None,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationScenario {
    /// Known unit-energy QPSK pilots.
    pub pilots: Vec<C64>,
    pub pulse: EstPulse,
    /// Oversampling factor (`M_Tx = 1`).
    pub m: usize,
    /// Timing offset in units of `T`.
    pub eps: f64,
    pub phi: f64,
    /// Frequency offset in rad per `T`.
    pub omega: f64,
    pub dither: Dither,
    /// `Es/N0` in dB with `Es = 1`.
    pub esn0_db: f64,
}

/// Pulse span on each side of its centre, in symbols.
pub const PULSE_HALF_SPAN: usize = 12;

/// Dither grid points for the averaged Fisher information.
pub const DITHER_POINTS: usize = 10_000;

impl EstimationScenario {
    /// `n` i.i.d. QPSK pilots drawn from `seed`, RRC(0.2) pulse, no offsets.
    pub fn qpsk(n: usize, m: usize, esn0_db: f64, seed: u64) -> Self {
        let mut rng = stream(seed, 0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let pilots = (0..n)
            .map(|_| {
                let re = if rng.random::<bool>() { s } else { -s };
                let im = if rng.random::<bool>() { s } else { -s };
                C64::new(re, im)
            })
            .collect();
        EstimationScenario {
            pilots,
            pulse: EstPulse::RootRaisedCosine { rolloff: 0.2 },
            m,
            eps: 0.0,
            phi: 0.0,
            omega: 0.0,
            dither: Dither::None,
            esn0_db,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pilots.is_empty() || self.m == 0 {
            return invalid("scenario needs pilots and M >= 1");
        }
        if let EstPulse::RootRaisedCosine { rolloff } = self.pulse {
            if !(0.0..=1.0).contains(&rolloff) {
                return invalid("rolloff must lie in [0, 1]");
            }
        }
        if !self.esn0_db.is_finite() {
            return invalid("Es/N0 must be finite");
        }
        Ok(())
    }

    pub fn n0(&self) -> f64 {
        10f64.powf(-self.esn0_db / 10.0)
    }

    pub fn ts(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn num_samples(&self) -> usize {
        self.pilots.len() * self.m
    }

    /// Sample time relative to the frame centre.
    pub fn centered_time(&self, k: usize) -> f64 {
        (k as f64 - (self.num_samples() as f64 - 1.0) / 2.0) * self.ts()
    }

    /// Noiseless samples `u_k`.
    pub fn baseband(&self) -> Vec<C64> {
        let ts = self.ts();
        let g = |t: f64| receive_pulse(self.pulse, t, ts);
        (0..self.num_samples())
            .map(|k| {
                let t = k as f64 * ts - self.eps;
                let centre = t.round() as i64;
                let lo = (centre - PULSE_HALF_SPAN as i64).max(0) as usize;
                let hi = ((centre + PULSE_HALF_SPAN as i64) as usize).min(self.pilots.len() - 1);
                if (centre + PULSE_HALF_SPAN as i64) < 0 {
                    return C64::new(0.0, 0.0);
                }
                (lo..=hi).map(|n| self.pilots[n] * g(t - n as f64)).sum()
            })
            .collect()
    }

    /// Dither phases of one frame.
    pub fn draw_dither<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self.dither {
            Dither::None => vec![0.0; self.num_samples()],
            Dither::Uniform => (0..self.num_samples()).map(|_| rng.random::<f64>() * 2.0 * PI).collect(),
        }
    }
}

/// Unit-energy RRC spectrum magnitude (`T = 1`).
fn rrc_spectrum(f: f64, beta: f64) -> f64 {
    let f = f.abs();
    let f1 = (1.0 - beta) / 2.0;
    let f2 = (1.0 + beta) / 2.0;
    if f <= f1 {
        1.0
    } else if f < f2 {
        (PI / (2.0 * beta) * (f - f1)).cos()
    } else {
        0.0
    }
}

/// `√T_s` times the transmit pulse lowpass-filtered to `|f| < 1/(2 T_s)`.
pub fn receive_pulse(pulse: EstPulse, t: f64, ts: f64) -> f64 {
    let wr = 1.0 / (2.0 * ts);
    match pulse {
        EstPulse::Sinc => {
            // bandwidth 1/2 <= W_r for every M >= 1
            let x = PI * t;
            ts.sqrt() * if x.abs() < 1e-12 { 1.0 } else { x.sin() / x }
        }
        EstPulse::RootRaisedCosine { rolloff } => {
            let f1 = (1.0 - rolloff) / 2.0;
            let f2 = ((1.0 + rolloff) / 2.0).min(wr);
            // flat part in closed form
            let flat_end = f1.min(wr);
            let w = 2.0 * PI * t;
            let mut acc = if w.abs() < 1e-12 { 2.0 * flat_end } else { 2.0 * (w * flat_end).sin() / w };
            if f2 > f1 && rolloff > 0.0 {
                // Simpson over the rolloff band
                let n = 512;
                let h = (f2 - f1) / n as f64;
                let mut s = 0.0;
                for i in 0..=n {
                    let f = f1 + i as f64 * h;
                    let c = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    s += c * rrc_spectrum(f, rolloff) * (w * f).cos();
                }
                acc += 2.0 * s * h / 3.0;
            }
            ts.sqrt() * acc
        }
    }
}

/// Unsynchronized frame: noiseless samples, unquantized received samples and
/// the 1-bit output, plus the dither used.
#[derive(Debug, Clone, PartialEq)]
pub struct UnsyncFrame {
    pub u: Vec<C64>,
    pub r: Vec<C64>,
    pub y: Vec<C64>,
    pub dither: Vec<f64>,
}

fn rotation(sc: &EstimationScenario, k: usize, phi: f64, omega: f64, dither: f64) -> C64 {
    C64::from_polar(1.0, omega * sc.centered_time(k) + phi + dither)
}

pub fn unsync_frame<R: Rng + ?Sized>(sc: &EstimationScenario, rng: &mut R) -> Result<UnsyncFrame> {
    sc.validate()?;
    let u = sc.baseband();
    frame_from_baseband(sc, &u, rng)
}

/// As [`unsync_frame`] with precomputed `u`.
pub fn frame_from_baseband<R: Rng + ?Sized>(sc: &EstimationScenario, u: &[C64], rng: &mut R) -> Result<UnsyncFrame> {
    let dither = sc.draw_dither(rng);
    let noise = complex_gaussian(u.len(), sc.n0(), rng);
    let r: Vec<C64> = u
        .iter()
        .enumerate()
        .map(|(k, &uk)| uk * rotation(sc, k, sc.phi, sc.omega, dither[k]) + noise[k])
        .collect();
    let y = r.iter().map(|&v| csign(v)).collect();
    Ok(UnsyncFrame { u: u.to_vec(), r, y, dither })
}

/// Probabilities of the four outcomes `(+,+), (+,−), (−,+), (−,−)` of one
/// sample with noiseless value `m`.
pub fn outcome_probabilities(m: C64, n0: f64) -> [f64; 4] {
    let a = SQRT_2 / n0.sqrt();
    let (pr, pi) = (normal_cdf(a * m.re), normal_cdf(a * m.im));
    [pr * pi, pr * (1.0 - pi), (1.0 - pr) * pi, (1.0 - pr) * (1.0 - pi)]
}

/// Derivatives of [`outcome_probabilities`] along `dm = ∂m/∂θ`.
pub fn outcome_derivatives(m: C64, dm: C64, n0: f64) -> [f64; 4] {
    let a = SQRT_2 / n0.sqrt();
    let (pr, pi) = (normal_cdf(a * m.re), normal_cdf(a * m.im));
    let dpr = normal_pdf(a * m.re) * a * dm.re;
    let dpi = normal_pdf(a * m.im) * a * dm.im;
    [
        dpr * pi + pr * dpi,
        dpr * (1.0 - pi) - pr * dpi,
        -dpr * pi + (1.0 - pr) * dpi,
        -dpr * (1.0 - pi) - (1.0 - pr) * dpi,
    ]
}

/// Probability floor of the Fisher-information sums.
pub const PROB_FLOOR: f64 = 1e-300;

/// 2×2 Fisher information for `(φ, Ω)` together with the number of clamped
/// outcome probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherInfo {
    pub f: [[f64; 2]; 2],
    pub clamped: usize,
}

impl FisherInfo {
    pub fn phase(&self) -> f64 {
        self.f[0][0]
    }

    /// Full inverse; errors when singular.
    pub fn inverse(&self) -> Result<[[f64; 2]; 2]> {
        let [[a, b], [c, d]] = self.f;
        let det = a * d - b * c;
        if !(det.abs() > 1e-300) || !det.is_finite() {
            return Err(ZxmError::Singular("Fisher information is singular".into()));
        }
        Ok([[d / det, -b / det], [-c / det, a / det]])
    }
}

/// Per-sample FI of a binary outcome: `(∂P)² / (P (1 − P))`.
fn bernoulli_fi(x: f64, a: f64, clamped: &mut usize) -> f64 {
    let p = normal_cdf(x);
    let q = normal_cdf(-x);
    let mut denom = p * q;
    if denom < PROB_FLOOR {
        *clamped += 1;
        denom = PROB_FLOOR;
    }
    let d = normal_pdf(x) * a;
    d * d / denom
}

/// Contribution of one sample with noiseless value `m` and time `tau` to the
/// quantized FI; the two quadrature signs are independent Bernoulli outcomes.
fn sample_fi_1bit(m: C64, tau: f64, n0: f64, clamped: &mut usize) -> [[f64; 2]; 2] {
    let a = SQRT_2 / n0.sqrt();
    let dphi = C64::i() * m;
    let fr = bernoulli_fi(a * m.re, a, clamped);
    let fi = bernoulli_fi(a * m.im, a, clamped);
    // ∂m/∂Ω = τ ∂m/∂φ
    let pp = fr * dphi.re * dphi.re + fi * dphi.im * dphi.im;
    [[pp, tau * pp], [tau * pp, tau * tau * pp]]
}

/// Fisher information of the 1-bit samples at `(φ, Ω)`. With dither the
/// per-sample information is averaged over an equispaced grid of
/// [`DITHER_POINTS`] phases with a random offset drawn from `seed`.
pub fn fisher_info_1bit(sc: &EstimationScenario, phi: f64, omega: f64, seed: u64) -> Result<FisherInfo> {
    sc.validate()?;
    let u = sc.baseband();
    fisher_info_1bit_from(sc, &u, phi, omega, seed)
}

pub fn fisher_info_1bit_from(sc: &EstimationScenario, u: &[C64], phi: f64, omega: f64, seed: u64) -> Result<FisherInfo> {
    let n0 = sc.n0();
    let mut f = [[0.0; 2]; 2];
    let mut clamped = 0;
    let offset: f64 = stream(seed, 7).random::<f64>();
    for (k, &uk) in u.iter().enumerate() {
        let tau = sc.centered_time(k);
        let contrib = match sc.dither {
            Dither::None => sample_fi_1bit(uk * rotation(sc, k, phi, omega, 0.0), tau, n0, &mut clamped),
            Dither::Uniform => {
                let mut acc = [[0.0; 2]; 2];
                for j in 0..DITHER_POINTS {
                    let dph = 2.0 * PI * (j as f64 + offset) / DITHER_POINTS as f64;
                    let c = sample_fi_1bit(uk * rotation(sc, k, phi, omega, dph), tau, n0, &mut clamped);
                    for (r, row) in acc.iter_mut().enumerate() {
                        for (s, v) in row.iter_mut().enumerate() {
                            *v += c[r][s];
                        }
                    }
                }
                acc.map(|row| row.map(|v| v / DITHER_POINTS as f64))
            }
        };
        for r in 0..2 {
            for s in 0..2 {
                f[r][s] += contrib[r][s];
            }
        }
    }
    Ok(FisherInfo { f, clamped })
}

/// Fisher information of the 1-bit samples by explicit summation over the
/// four outcomes per sample (no dither).
pub fn fisher_info_1bit_outcomes(sc: &EstimationScenario, phi: f64, omega: f64) -> Result<FisherInfo> {
    sc.validate()?;
    let n0 = sc.n0();
    let u = sc.baseband();
    let mut f = [[0.0; 2]; 2];
    let mut clamped = 0;
    for (k, &uk) in u.iter().enumerate() {
        let m = uk * rotation(sc, k, phi, omega, 0.0);
        let tau = sc.centered_time(k);
        let p = outcome_probabilities(m, n0);
        let dp = outcome_derivatives(m, C64::i() * m, n0);
        let dw = outcome_derivatives(m, C64::i() * m * tau, n0);
        for o in 0..4 {
            let mut po = p[o];
            if po < PROB_FLOOR {
                clamped += 1;
                po = PROB_FLOOR;
            }
            let g = [dp[o], dw[o]];
            for r in 0..2 {
                for s in 0..2 {
                    f[r][s] += g[r] * g[s] / po;
                }
            }
        }
    }
    Ok(FisherInfo { f, clamped })
}

/// Fisher information of the unquantized samples:
/// `F_ij = (2/N0) Σ Re(∂m/∂θ_i conj(∂m/∂θ_j))`.
pub fn fisher_info_unquantized(sc: &EstimationScenario, phi: f64, omega: f64) -> Result<FisherInfo> {
    sc.validate()?;
    let n0 = sc.n0();
    let u = sc.baseband();
    let mut f = [[0.0; 2]; 2];
    for (k, &uk) in u.iter().enumerate() {
        let m = uk * rotation(sc, k, phi, omega, 0.0);
        let tau = sc.centered_time(k);
        let g = [C64::i() * m, C64::i() * m * tau];
        for r in 0..2 {
            for s in 0..2 {
                f[r][s] += 2.0 / n0 * (g[r] * g[s].conj()).re;
            }
        }
    }
    Ok(FisherInfo { f, clamped: 0 })
}

/// Quantization loss `χ(φ) = F_y,φφ / F_r,φφ` with `Ω` known.
pub fn chi_loss(sc: &EstimationScenario, phi: f64) -> Result<f64> {
    let fy = fisher_info_1bit(sc, phi, 0.0, 0)?.phase();
    let fr = fisher_info_unquantized(sc, phi, 0.0)?.phase();
    if !(fr > 0.0) {
        return Err(ZxmError::Singular("unquantized Fisher information vanishes".into()));
    }
    Ok(fy / fr)
}

/// Scenario of the quantization-loss study: one pilot, `M = 1`, sinc pulse.
pub fn chi_scenario(esn0_db: f64) -> EstimationScenario {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    EstimationScenario {
        pilots: vec![C64::new(s, s)],
        pulse: EstPulse::Sinc,
        m: 1,
        eps: 0.0,
        phi: 0.0,
        omega: 0.0,
        dither: Dither::None,
        esn0_db,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnrRegime {
    Low,
    High,
}

/// Constants of the high-SNR bound. The defaults are placeholders and must be
/// calibrated before the high-SNR bound is used quantitatively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighSnrConstants {
    pub c1: f64,
    pub c2: f64,
    pub calibrated: bool,
}

impl Default for HighSnrConstants {
    fn default() -> Self {
        HighSnrConstants {
            c1: 1.0,
            c2: 1.0,
            calibrated: false,
        }
    }
}

/// Closed-form phase CRLB approximations for 1-bit samples.
///
/// Low SNR: `((4/π) Es/N0)⁻¹ / N`.
/// High SNR: `((2 c1 / √(2π³ c2)) √(Es/N0))⁻¹ / (N √M)`.
pub fn crlb_phase_bounds(esn0: f64, n: usize, m: usize, regime: SnrRegime, consts: HighSnrConstants) -> Result<f64> {
    if !(esn0 > 0.0) || n == 0 || m == 0 {
        return invalid("bounds need Es/N0 > 0, N >= 1 and M >= 1");
    }
    match regime {
        SnrRegime::Low => Ok(1.0 / (4.0 / PI * esn0) / n as f64),
        SnrRegime::High => {
            if !(consts.c1 > 0.0 && consts.c2 > 0.0) {
                return invalid("high-SNR constants must be positive");
            }
            let k = 2.0 * consts.c1 / (2.0 * PI.powi(3) * consts.c2).sqrt();
            Ok(1.0 / (k * esn0.sqrt()) / (n as f64 * (m as f64).sqrt()))
        }
    }
}

/// `φ̂ = arg Σ conj(u_k) e^{−jϕ_k} y_k`; `None` when the accumulator is zero.
pub fn ls_phase_estimate(y: &[C64], u: &[C64], dither: &[f64]) -> Result<Option<f64>> {
    if y.len() != u.len() || y.len() != dither.len() {
        return Err(ZxmError::LengthMismatch {
            expected: u.len(),
            actual: y.len(),
        });
    }
    let acc: C64 = y
        .iter()
        .zip(u)
        .zip(dither)
        .map(|((&yk, &uk), &d)| uk.conj() * C64::from_polar(1.0, -d) * yk)
        .sum();
    if acc.norm() == 0.0 {
        return Ok(None);
    }
    Ok(Some(wrap_phase(acc.arg())))
}

/// Phase estimator evaluated by [`mc_mse`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseEstimator {
    LeastSquares,
}

/// Monte Carlo MSE with a percentile-bootstrap 95 % interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseEstimate {
    pub mse: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mean_error: f64,
    pub trials: usize,
    /// Trials whose accumulator vanished (counted with error π).
    pub erasures: usize,
}

pub const BOOTSTRAP_RESAMPLES: usize = 500;

/// Wrapped squared phase errors of `trials` independent frames. Trial `i`
/// uses stream `i` of `seed` for its noise and dither.
pub fn phase_errors(estimator: PhaseEstimator, sc: &EstimationScenario, u: &[C64], trials: usize, seed: u64) -> Result<(Vec<f64>, usize)> {
    let mut errs = Vec::with_capacity(trials);
    let mut erasures = 0;
    for i in 0..trials {
        let mut rng = stream(seed, i as u64);
        let fr = frame_from_baseband(sc, u, &mut rng)?;
        let est = match estimator {
            PhaseEstimator::LeastSquares => ls_phase_estimate(&fr.y, u, &fr.dither)?,
        };
        match est {
            Some(p) => errs.push(wrap_phase(p - sc.phi)),
            None => {
                erasures += 1;
                errs.push(PI);
            }
        }
    }
    Ok((errs, erasures))
}

pub fn mc_mse(estimator: PhaseEstimator, sc: &EstimationScenario, trials: usize, seed: u64) -> Result<MseEstimate> {
    if trials < 100 {
        return invalid("at least 100 trials are required");
    }
    sc.validate()?;
    let u = sc.baseband();
    let (errs, erasures) = phase_errors(estimator, sc, &u, trials, seed)?;
    Ok(summarize_errors(&errs, erasures, seed))
}

/// MSE, bootstrap interval and mean of wrapped phase errors.
pub fn summarize_errors(errs: &[f64], erasures: usize, seed: u64) -> MseEstimate {
    let sq: Vec<f64> = errs.iter().map(|e| e * e).collect();
    let n = sq.len();
    let mse = sq.iter().sum::<f64>() / n as f64;
    let mut rng = stream(seed, u64::MAX);
    let mut boots: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| (0..n).map(|_| sq[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    boots.sort_by(f64::total_cmp);
    let lo = boots[(0.025 * BOOTSTRAP_RESAMPLES as f64) as usize];
    let hi = boots[((0.975 * BOOTSTRAP_RESAMPLES as f64) as usize).min(BOOTSTRAP_RESAMPLES - 1)];
    MseEstimate {
        mse,
        ci_lo: lo,
        ci_hi: hi,
        mean_error: errs.iter().sum::<f64>() / n as f64,
        trials: n,
        erasures,
    }
}
