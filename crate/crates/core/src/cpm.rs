//! Continuous-phase FSK with 1-bit oversampled reception.
//!
//! With modulation index `h = 1/M_cpm`, inputs `α_n = 2u_n − (M_cpm − 1)`
//! and the intermediate frequency `f_IF = Δf + n_IF/T`, `n_IF = c·h`, the
//! signal seen by the receiver inside symbol `n` at offset `τ ∈ [0, T)` is
//!
//! `A exp(j(2π S_n/M_cpm + 2π (u_n + c) τ/(M_cpm T) + φ0))`,
//!
//! where the phase state `S_{n+1} = S_n + u_n + c (mod M_cpm)`. Symbol `n`
//! owns the interval `(nT, (n+1)T]` and the samples `τ_k = kT/M`, `k = 1..M`.
//! All phases at the sample instants are rational multiples of `π`, so
//! quantization is decided with integer arithmetic.

use crate::error::{invalid, Result};
use crate::special::log_normal_cdf;
use crate::trellis::{forward_log_likelihoods, Edge, Trellis};
use crate::rate::{batch_mean_stderr, RateEstimate, BOOTSTRAP_BLOCKS};
use crate::waveform::C64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::f64::consts::{LN_2, PI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpmConfig {
    /// Even alphabet size.
    pub m_cpm: usize,
    /// Receiver oversampling factor.
    pub m: usize,
    /// IF offset numerator: `n_IF = c / M_cpm`.
    pub c: i64,
    pub t: f64,
    pub es: f64,
}

impl CpmConfig {
    pub fn new(m_cpm: usize, m: usize, c: i64) -> Self {
        CpmConfig {
            m_cpm,
            m,
            c,
            t: 1.0,
            es: 1.0,
        }
    }

    /// Configuration at the smallest IF offset that keeps all phase
    /// transitions visible.
    pub fn at_min_if(m_cpm: usize, m: usize) -> Result<Self> {
        Ok(CpmConfig::new(m_cpm, m, n_if_min_index(m_cpm)?))
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_cpm < 2 || self.m_cpm % 2 != 0 {
            return invalid("M_cpm must be an even integer >= 2");
        }
        if self.m == 0 {
            return invalid("oversampling factor must be positive");
        }
        if !(self.t > 0.0 && self.es > 0.0) {
            return invalid("T and Es must be positive");
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        1.0 / self.m_cpm as f64
    }

    pub fn phi0(&self) -> f64 {
        PI / self.m_cpm as f64
    }

    pub fn n_if(&self) -> f64 {
        self.c as f64 / self.m_cpm as f64
    }

    /// `{±1, ±3, …, ±(M_cpm − 1)}` in increasing order.
    pub fn alphabet(&self) -> Vec<i64> {
        (0..self.m_cpm as i64).map(|u| 2 * u - (self.m_cpm as i64 - 1)).collect()
    }

    /// Envelope `√(2Es/T)`.
    pub fn amplitude(&self) -> f64 {
        (2.0 * self.es / self.t).sqrt()
    }
}

/// `Δf = h (M_cpm − 1) / (2T)`.
pub fn delta_f(cfg: &CpmConfig) -> f64 {
    cfg.h() * (cfg.m_cpm as f64 - 1.0) / (2.0 * cfg.t)
}

/// `f_IF = Δf + n_IF / T`.
pub fn tilted_if(cfg: &CpmConfig) -> f64 {
    delta_f(cfg) + cfg.n_if() / cfg.t
}

/// `⌈1/(4h) − 1⌉` as the integer multiple of `h`.
pub fn n_if_min_index(m_cpm: usize) -> Result<i64> {
    if m_cpm < 2 || m_cpm % 2 != 0 {
        return invalid("M_cpm must be an even integer >= 2");
    }
    // ⌈M/4 − 1⌉ = ⌈(M − 4)/4⌉ in integers
    let num = m_cpm as i64 - 4;
    Ok(if num <= 0 { num / 4 } else { (num + 3) / 4 })
}

/// `n_IF,min = ⌈1/(4h) − 1⌉ · h`.
pub fn n_if_min(m_cpm: usize) -> Result<f64> {
    Ok(n_if_min_index(m_cpm)? as f64 / m_cpm as f64)
}

/// CPFSK phase smoothing response.
fn q(t: f64, period: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else if t < period {
        t / (2.0 * period)
    } else {
        0.5
    }
}

/// `φ(t) = 2πh Σ α_n q(t − nT) + φ0`.
pub fn cpfsk_phase(alpha: &[i64], t: f64, cfg: &CpmConfig) -> f64 {
    2.0 * PI * cfg.h() * alpha.iter().enumerate().map(|(n, &a)| a as f64 * q(t - n as f64 * cfg.t, cfg.t)).sum::<f64>()
        + cfg.phi0()
}

/// Complex baseband `√(2Es/T) e^{jφ(t)}`.
pub fn cpfsk_signal(alpha: &[i64], t: f64, cfg: &CpmConfig) -> C64 {
    C64::from_polar(cfg.amplitude(), cpfsk_phase(alpha, t, cfg))
}

/// Signal on the IF: `c(t) e^{j 2π f_IF t}`.
pub fn if_signal(alpha: &[i64], t: f64, cfg: &CpmConfig) -> C64 {
    cpfsk_signal(alpha, t, cfg) * C64::from_polar(1.0, 2.0 * PI * tilted_if(cfg) * t)
}

/// Next phase state.
pub fn next_state(cfg: &CpmConfig, s: usize, u: usize) -> usize {
    (s as i64 + u as i64 + cfg.c).rem_euclid(cfg.m_cpm as i64) as usize
}

/// Phase of sample `k` (at `τ = (k+1)T/M`) in state `s` with input `u`, as
/// `π · num / den`.
pub fn sample_phase_fraction(cfg: &CpmConfig, s: usize, u: usize, k: usize) -> (i64, i64) {
    let (mc, m) = (cfg.m_cpm as i64, cfg.m as i64);
    let num = m * (1 + 2 * s as i64) + 2 * (u as i64 + cfg.c) * (k as i64 + 1);
    (num, mc * m)
}

/// 1-bit quantization of `e^{jπ num/den}` decided exactly; `sign(0) = −1`.
pub fn quantize_phase(num: i64, den: i64) -> (i8, i8) {
    let r = num.rem_euclid(2 * den);
    // cos > 0 on (−π/2, π/2), i.e. 2r < den or 2r > 3den
    let re = if 2 * r < den || 2 * r > 3 * den { 1 } else { -1 };
    // sin > 0 on (0, π)
    let im = if r > 0 && r < den { 1 } else { -1 };
    (re, im)
}

/// Quantized sample vector of one symbol, `2M` signs (I then Q per sample).
pub fn quantized_pattern(cfg: &CpmConfig, s: usize, u: usize) -> Vec<i8> {
    let mut out = Vec::with_capacity(2 * cfg.m);
    for k in 0..cfg.m {
        let (n, d) = sample_phase_fraction(cfg, s, u, k);
        let (re, im) = quantize_phase(n, d);
        out.push(re);
        out.push(im);
    }
    out
}

/// `N_d` and `log2 N_d`: distinct quantized patterns per symbol, averaged
/// uniformly over the phase states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathCount {
    pub nd: f64,
    pub log2_nd: f64,
}

pub fn count_distinguishable_paths(cfg: &CpmConfig) -> Result<PathCount> {
    cfg.validate()?;
    let mut total = 0usize;
    for s in 0..cfg.m_cpm {
        let distinct: BTreeSet<Vec<i8>> = (0..cfg.m_cpm).map(|u| quantized_pattern(cfg, s, u)).collect();
        total += distinct.len();
    }
    let nd = total as f64 / cfg.m_cpm as f64;
    Ok(PathCount { nd, log2_nd: nd.log2() })
}

/// One row of an `N_d` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NdRow {
    pub m_cpm: usize,
    pub m: usize,
    pub c: i64,
    pub n_if: f64,
    pub f_if: f64,
    pub log2_nd: f64,
}

pub const ND_CSV_HEADER: &str = "M_cpm,M,n_IF,f_IF,log2_Nd";

impl NdRow {
    pub fn csv_row(&self) -> String {
        format!("{},{},{:.16e},{:.16e},{:.16e}", self.m_cpm, self.m, self.n_if, self.f_if, self.log2_nd)
    }
}

/// `log2 N_d` over a grid of oversampling factors and IF indices `c`.
pub fn nd_sweep(m_cpm: usize, ms: &[usize], cs: &[i64]) -> Result<Vec<NdRow>> {
    if ms.is_empty() || cs.is_empty() {
        return invalid("sweep ranges must be nonempty");
    }
    let mut rows = Vec::with_capacity(ms.len() * cs.len());
    for &m in ms {
        for &c in cs {
            let cfg = CpmConfig::new(m_cpm, m, c);
            let pc = count_distinguishable_paths(&cfg)?;
            rows.push(NdRow {
                m_cpm,
                m,
                c,
                n_if: cfg.n_if(),
                f_if: tilted_if(&cfg),
                log2_nd: pc.log2_nd,
            });
        }
    }
    Ok(rows)
}

/// Smallest period `p` (in steps of `c`) such that `f(c + p) = f(c)` for all
/// `c` in `0..len − p`, with `f` the `log2 N_d` sequence.
pub fn empirical_period(values: &[f64]) -> Option<usize> {
    (1..values.len() / 2 + 1).find(|&p| (0..values.len() - p).all(|i| (values[i] - values[i + p]).abs() < 1e-12))
}

/// Receive filter of the rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CpmFilter {
    /// Ideal sampling; noise i.i.d. `CN(0, N0)` per sample.
    Delta,
    /// `√(2/T) rect(2t/T)` modulated to the IF.
    Rect,
}

/// Noise-free rect-filter output at offset `tau` into symbol `n`, when
/// symbol `n − 1` had state `sp`, input `up` and symbol `n` state `s`, input `u`.
/// The filter integrates over `[τ − T/4, τ + T/4]`, which must lie inside
/// symbols `n − 1` and `n`.
fn rect_output(cfg: &CpmConfig, prev: (usize, usize), cur: (usize, usize), tau: f64) -> C64 {
    let t = cfg.t;
    let w = 2.0 * PI * tilted_if(cfg);
    // segment integral of ψ(s) e^{j w (t − s)} with ψ in tilted form
    let seg = |state: usize, u: usize, lo: f64, hi: f64, t_rel: f64| -> C64 {
        if hi <= lo {
            return C64::new(0.0, 0.0);
        }
        let a = 2.0 * PI * state as f64 / cfg.m_cpm as f64 + cfg.phi0() + w * t_rel;
        let b = 2.0 * PI * (u as f64 + cfg.c as f64) / (cfg.m_cpm as f64 * t) - w;
        let integral = if b.abs() < 1e-14 {
            C64::new(hi - lo, 0.0)
        } else {
            (C64::from_polar(1.0, b * hi) - C64::from_polar(1.0, b * lo)) / C64::new(0.0, b)
        };
        C64::from_polar(1.0, a) * integral
    };
    let lo = tau - t / 4.0;
    let hi = tau + t / 4.0;
    // previous symbol spans [−T, 0) relative to the start of symbol n
    let p = seg(prev.0, prev.1, (lo + t).max(0.0), (hi + t).min(t), tau + t);
    let c = seg(cur.0, cur.1, lo.max(0.0), hi.min(t), tau);
    (p + c) * cfg.amplitude() * (2.0 / t).sqrt()
}

/// Noise-free sample vectors for one symbol transition, interleaved I/Q.
fn symbol_means(cfg: &CpmConfig, filter: CpmFilter, prev: (usize, usize), s: usize, u: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * cfg.m);
    for k in 0..cfg.m {
        let tau = (k + 1) as f64 * cfg.t / cfg.m as f64;
        let v = match filter {
            CpmFilter::Delta => {
                let (n, d) = sample_phase_fraction(cfg, s, u, k);
                C64::from_polar(cfg.amplitude(), PI * n as f64 / d as f64)
            }
            // sample instants advanced by T/4 so every window covers at most
            // the previous and the current symbol
            CpmFilter::Rect => rect_output(cfg, prev, (s, u), tau - cfg.t / 4.0),
        };
        out.push(v.re);
        out.push(v.im);
    }
    out
}

/// Trellis of the CPM receiver. Delta filter: state `S_n`. Rect filter:
/// state `(S_{n−1}, u_{n−1})`.
pub fn cpm_trellis(cfg: &CpmConfig, filter: CpmFilter) -> Result<Trellis> {
    cfg.validate()?;
    let mc = cfg.m_cpm;
    let prior = 1.0 / mc as f64;
    let mut edges = Vec::new();
    match filter {
        CpmFilter::Delta => {
            for s in 0..mc {
                for u in 0..mc {
                    edges.push(Edge {
                        from: s,
                        to: next_state(cfg, s, u),
                        prior,
                        label: u,
                        aux: 0,
                        mean: symbol_means(cfg, filter, (0, 0), s, u),
                    });
                }
            }
            Ok(Trellis {
                num_states: mc,
                num_labels: mc,
                emission_len: 2 * cfg.m,
                edges,
            })
        }
        CpmFilter::Rect => {
            for sp in 0..mc {
                for up in 0..mc {
                    let s = next_state(cfg, sp, up);
                    for u in 0..mc {
                        edges.push(Edge {
                            from: sp * mc + up,
                            to: s * mc + u,
                            prior,
                            label: u,
                            aux: 0,
                            mean: symbol_means(cfg, filter, (sp, up), s, u),
                        });
                    }
                }
            }
            Ok(Trellis {
                num_states: mc * mc,
                num_labels: mc,
                emission_len: 2 * cfg.m,
                edges,
            })
        }
    }
}

/// Achievable-rate lower bound of i.u.d. CPM over `n` symbols at noise level
/// `n0`, in bits per symbol.
pub fn cpm_rate<R: Rng + ?Sized>(cfg: &CpmConfig, filter: CpmFilter, n0: f64, n: usize, rng: &mut R) -> Result<RateEstimate> {
    if !(n0 > 0.0) {
        return invalid("N0 must be positive");
    }
    if n < BOOTSTRAP_BLOCKS {
        return invalid("N must be at least the number of bootstrap blocks");
    }
    let trellis = cpm_trellis(cfg, filter)?;
    let mc = cfg.m_cpm;
    let el = 2 * cfg.m;
    // transmitted path
    let mut sp = rng.random_range(0..mc);
    let mut up = rng.random_range(0..mc);
    let mut s = next_state(cfg, sp, up);
    let mut mu = Vec::with_capacity(n * el);
    for _ in 0..n {
        let u = rng.random_range(0..mc);
        mu.extend(symbol_means(cfg, filter, (sp, up), s, u));
        (sp, up) = (s, u);
        s = next_state(cfg, s, u);
    }
    let noise = match filter {
        CpmFilter::Delta => {
            let normal = Normal::new(0.0, (n0 / 2.0).sqrt()).expect("finite std");
            (0..mu.len()).map(|_| normal.sample(rng)).collect::<Vec<f64>>()
        }
        CpmFilter::Rect => rect_noise(cfg, n, n0, rng),
    };
    let y: Vec<f64> = mu.iter().zip(&noise).map(|(m, z)| if m + z > 0.0 { 1.0 } else { -1.0 }).collect();
    let sigma = (n0 / 2.0).sqrt();
    let init = vec![1.0 / trellis.num_states as f64; trellis.num_states];
    let fwd = forward_log_likelihoods(&trellis, &init, &y, sigma)?;
    let info: Vec<f64> = fwd
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let cond: f64 = (i * el..(i + 1) * el).map(|j| log_normal_cdf(y[j] * mu[j] / sigma)).sum();
            (cond - f) / LN_2
        })
        .collect();
    let (rate, stderr) = batch_mean_stderr(&info, BOOTSTRAP_BLOCKS);
    Ok(RateEstimate {
        rate,
        stderr,
        rail_rates: [rate, 0.0],
    })
}

/// White noise through the rect filter at the sample instants, interleaved
/// I/Q. Cells of length `T/(2M)` are i.i.d.; every window covers `M` cells.
fn rect_noise<R: Rng + ?Sized>(cfg: &CpmConfig, n: usize, n0: f64, rng: &mut R) -> Vec<f64> {
    let m = cfg.m;
    let normal = Normal::new(0.0, (n0 / (2.0 * m as f64)).sqrt()).expect("finite std");
    // sample k of symbol i starts its window at cell 2(iM + k + 1) − M,
    // offset here by M cells
    let total = 2 * n * m + 2 * m + 2;
    let cells: Vec<(f64, f64)> = (0..total).map(|_| (normal.sample(rng), normal.sample(rng))).collect();
    let mut prefix = vec![(0.0, 0.0); total + 1];
    for (i, c) in cells.iter().enumerate() {
        prefix[i + 1] = (prefix[i].0 + c.0, prefix[i].1 + c.1);
    }
    let mut out = Vec::with_capacity(2 * n * m);
    for i in 0..n {
        for k in 0..m {
            let start = 2 * (i * m + k + 1);
            let end = start + m;
            out.push(prefix[end].0 - prefix[start].0);
            out.push(prefix[end].1 - prefix[start].1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn alphabet_and_frequencies() {
        let cfg = CpmConfig::new(4, 1, 0);
        assert_eq!(cfg.alphabet(), vec![-3, -1, 1, 3]);
        assert!((tilted_if(&cfg) - 3.0 / 8.0).abs() < 1e-15);
        let c1 = CpmConfig::new(4, 1, 1);
        assert!((tilted_if(&c1) - tilted_if(&cfg) - 0.25).abs() < 1e-15);
        assert_eq!(n_if_min(8).unwrap(), 1.0 / 8.0);
        assert_eq!(n_if_min(16).unwrap(), 3.0 / 16.0);
        assert_eq!(n_if_min(4).unwrap(), 0.0);
        assert_eq!(n_if_min_index(2).unwrap(), 0);
        assert_eq!(n_if_min_index(6).unwrap(), 1);
        assert!(n_if_min(3).is_err());
    }

    #[test]
    fn phase_examples() {
        let cfg = CpmConfig::new(8, 1, 0);
        let p = cpfsk_phase(&[1], 1.0, &cfg) - cfg.phi0();
        assert!((p - PI * cfg.h()).abs() < 1e-15);
        let all = vec![1i64; 8];
        let p = cpfsk_phase(&all, 8.0, &cfg) - cfg.phi0();
        assert!((p - PI).abs() < 1e-12);
        // continuity at the boundaries
        let alpha = [3, -5, 7, 1, -1];
        for n in 1..5 {
            let t = n as f64;
            let jump = cpfsk_phase(&alpha, t - 1e-13, &cfg) - cpfsk_phase(&alpha, t, &cfg);
            assert!(jump.abs() < 1e-11);
        }
        for i in 0..100 {
            let v = cpfsk_signal(&alpha, i as f64 * 0.05, &cfg);
            assert!((v.norm() - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn integer_quadrants() {
        // den = 4: phases 0, π/4, π/2, 3π/4, π, …
        assert_eq!(quantize_phase(1, 4), (1, 1));
        assert_eq!(quantize_phase(2, 4), (-1, 1)); // cos = 0 → −1
        assert_eq!(quantize_phase(0, 4), (1, -1)); // sin = 0 → −1
        assert_eq!(quantize_phase(5, 4), (-1, -1));
        assert_eq!(quantize_phase(-1, 4), (1, -1));
    }

    #[test]
    fn tilted_model_matches_direct_synthesis() {
        for (mc, m, c) in [(4, 3, 0), (8, 5, 1), (16, 7, 3), (8, 4, 5)] {
            let cfg = CpmConfig::new(mc, m, c);
            let mut rng = stream(1, mc as u64);
            let us: Vec<usize> = (0..12).map(|_| rng.random_range(0..mc)).collect();
            let alpha: Vec<i64> = us.iter().map(|&u| 2 * u as i64 - (mc as i64 - 1)).collect();
            let mut s = 0usize;
            for (n, &u) in us.iter().enumerate() {
                for k in 0..m {
                    let t = n as f64 + (k + 1) as f64 / m as f64;
                    let direct = if_signal(&alpha, t, &cfg) / cfg.amplitude();
                    let (num, den) = sample_phase_fraction(&cfg, s, u, k);
                    let model = C64::from_polar(1.0, PI * num as f64 / den as f64);
                    assert!((direct - model).norm() < 1e-9, "mc={mc} n={n} k={k}");
                }
                s = next_state(&cfg, s, u);
            }
        }
    }

    #[test]
    fn pattern_map_is_time_invariant() {
        // with u = −c (mod M_cpm) the phase state repeats, so the quantized
        // IF samples of three consecutive slots must coincide
        for (mc, m, c) in [(8usize, 5usize, 1i64), (16, 14, 3), (4, 3, 0)] {
            let cfg = CpmConfig::new(mc, m, c);
            let u = (-c).rem_euclid(mc as i64) as usize;
            let mut rng = stream(3, mc as u64);
            let mut us: Vec<usize> = (0..5).map(|_| rng.random_range(0..mc)).collect();
            us.extend([u, u, u]);
            let alpha: Vec<i64> = us.iter().map(|&v| 2 * v as i64 - (mc as i64 - 1)).collect();
            let quant = |n: usize| -> Vec<i8> {
                (0..m)
                    .flat_map(|k| {
                        let z = if_signal(&alpha, n as f64 + (k + 1) as f64 / m as f64, &cfg);
                        let q = |x: f64| if x > 1e-9 { 1 } else { -1 };
                        [q(z.re), q(z.im)]
                    })
                    .collect()
            };
            assert_eq!(quant(5), quant(6));
            assert_eq!(quant(6), quant(7));
        }
    }

    #[test]
    fn single_sample_resolves_at_most_four() {
        for mc in [4, 8, 16] {
            for c in 0..mc as i64 {
                let pc = count_distinguishable_paths(&CpmConfig::new(mc, 1, c)).unwrap();
                assert!(pc.nd <= 4.0);
            }
        }
    }

    #[test]
    fn rect_output_bounded_by_filter_gain() {
        // |z| ≤ A · √(2/T) · T/2
        let cfg = CpmConfig::new(4, 3, 0);
        for sp in 0..4 {
            for up in 0..4 {
                let s = next_state(&cfg, sp, up);
                for u in 0..4 {
                    let v = symbol_means(&cfg, CpmFilter::Rect, (sp, up), s, u);
                    for pair in v.chunks(2) {
                        let mag = (pair[0] * pair[0] + pair[1] * pair[1]).sqrt();
                        assert!(mag <= cfg.amplitude() * (0.5f64).sqrt() + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn rate_bounded_by_alphabet() {
        let cfg = CpmConfig::new(4, 2, 0);
        let r = cpm_rate(&cfg, CpmFilter::Delta, 0.5, 2000, &mut stream(2, 0)).unwrap();
        assert!(r.rate <= 2.0 + 3.0 * r.stderr);
        let r = cpm_rate(&cfg, CpmFilter::Rect, 0.5, 2000, &mut stream(2, 1)).unwrap();
        assert!(r.rate <= 2.0 + 3.0 * r.stderr);
    }

    #[test]
    fn resolution_claims() {
        let a = count_distinguishable_paths(&CpmConfig::at_min_if(8, 5).unwrap()).unwrap();
        assert_eq!(a.nd, 8.0);
        let b = count_distinguishable_paths(&CpmConfig::at_min_if(16, 14).unwrap()).unwrap();
        assert_eq!(b.nd, 16.0);
    }

    #[test]
    fn nd_periodic_in_if_offset() {
        for m in [3usize, 5, 7] {
            let cs: Vec<i64> = (0..(4 * 8 * m) as i64).collect();
            let v: Vec<f64> = nd_sweep(8, &[m], &cs).unwrap().iter().map(|r| r.log2_nd).collect();
            let p = empirical_period(&v).expect("periodic");
            // c → c + M_cpm·M rotates every sample by a multiple of 2π
            assert_eq!((8 * m) % p, 0);
        }
    }

    #[test]
    fn nested_grids_never_merge_paths() {
        for mc in [8usize, 16] {
            for c in n_if_min_index(mc).unwrap()..2 * mc as i64 {
                for m in [1usize, 2, 3, 5, 7] {
                    let a = count_distinguishable_paths(&CpmConfig::new(mc, m, c)).unwrap().nd;
                    let b = count_distinguishable_paths(&CpmConfig::new(mc, 2 * m, c)).unwrap().nd;
                    assert!(b >= a, "mc={mc} c={c} m={m}");
                }
            }
        }
    }

    #[test]
    fn delta_rate_reaches_resolution_at_high_snr() {
        let cfg = CpmConfig::new(4, 3, 0);
        let r = cpm_rate(&cfg, CpmFilter::Delta, 1e-6, 2000, &mut stream(4, 0)).unwrap();
        assert!((r.rate - 2.0).abs() < 0.05, "{}", r.rate);
    }
}
