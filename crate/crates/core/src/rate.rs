//! Achievable-rate lower bound via an auxiliary channel and the resulting
//! spectral efficiency.
//!
//! The auxiliary channel treats the `M` samples of a block as conditionally
//! independent given the last `L + 1` transmit levels of the rail. For `M = 1`
//! this is the exact channel law; for `M > 1` the filtered noise is correlated
//! and the estimate is a lower bound on the true information rate.

use crate::channel::filtered_rail_noise;
use crate::error::{invalid, Result, ZxmError};
use crate::rll::RllFsm;
use crate::special::log_normal_cdf;
use crate::trellis::{forward_log_likelihoods, reachable, sign_log_likelihood, Edge, Trellis};
use crate::waveform::{ChainConfig, Source};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

/// Largest channel memory for which a trellis is built.
pub const MAX_MEMORY: usize = 14;

/// Per-rail ISI trellis: state = (constraint-graph state, last `L` levels).
#[derive(Debug, Clone)]
pub struct IsiTrellis {
    /// Channel memory in symbols.
    pub memory: usize,
    /// Samples per block.
    pub m: usize,
    pub d: usize,
    /// `taps[l][m]`: response at sample `m` to a unit level `l` slots back.
    pub taps: Vec<Vec<f64>>,
    /// `(fsm state, level history)`; history bit `i` is level `n−1−i` (1 = `+1`).
    pub states: Vec<(usize, u32)>,
    pub trellis: Trellis,
    start: usize,
}

fn level(bit: u32) -> f64 {
    if bit == 1 {
        1.0
    } else {
        -1.0
    }
}

impl IsiTrellis {
    pub fn build(cfg: &ChainConfig, source: &Source) -> Result<Self> {
        cfg.validate()?;
        let d = match *source {
            Source::Iud => 0,
            Source::Rll { d } => d,
        };
        let fsm = RllFsm::new(d)?;
        let memory = cfg.memory();
        if memory > MAX_MEMORY {
            return invalid(format!("channel memory {memory} exceeds the trellis limit {MAX_MEMORY}"));
        }
        let taps = cfg.sample_taps();
        let hist_len = memory.max(1);
        let mask = if hist_len >= 32 { u32::MAX } else { (1u32 << hist_len) - 1 };
        let key = |s: usize, h: u32| s * (mask as usize + 1) + h as usize;
        let successors = |k: usize| -> Vec<(usize, u32, u8, f64, usize)> {
            let (s, h) = (k / (mask as usize + 1), (k % (mask as usize + 1)) as u32);
            let prev = h & 1;
            fsm.edges_from(s)
                .map(|e| {
                    let new = if e.emit == 1 { prev ^ 1 } else { prev };
                    let nh = ((h << 1) | new) & mask;
                    (key(e.to, nh), new, e.emit, e.prob, e.to)
                })
                .collect()
        };
        // all levels −1 in the state that allows any next bit
        let start_key = key(d, 0);
        let keys = reachable(start_key, |k| successors(k).into_iter().map(|t| t.0).collect());
        let index: HashMap<usize, usize> = keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let states: Vec<(usize, u32)> = keys
            .iter()
            .map(|&k| (k / (mask as usize + 1), (k % (mask as usize + 1)) as u32))
            .collect();
        let mut edges = Vec::new();
        for (i, &k) in keys.iter().enumerate() {
            let (_, h) = states[i];
            for (nk, new, emit, prob, _) in successors(k) {
                let mean = (0..cfg.m)
                    .map(|m| {
                        let mut acc = taps[0][m] * level(new);
                        for l in 1..=memory {
                            acc += taps[l][m] * level(h >> (l - 1) & 1);
                        }
                        FRAC_1_SQRT_2 * acc
                    })
                    .collect();
                edges.push(Edge {
                    from: i,
                    to: index[&nk],
                    prior: prob,
                    label: new as usize,
                    aux: emit,
                    mean,
                });
            }
        }
        let trellis = Trellis {
            num_states: keys.len(),
            num_labels: 2,
            emission_len: cfg.m,
            edges,
        };
        trellis.validate()?;
        Ok(IsiTrellis {
            memory,
            m: cfg.m,
            d,
            taps,
            states,
            start: index[&start_key],
            trellis,
        })
    }

    pub fn num_states(&self) -> usize {
        self.trellis.num_states
    }

    /// Index of the state with all-`−1` history from which any bit may follow.
    pub fn start_state(&self) -> usize {
        self.start
    }

    /// Point mass on the start state.
    pub fn start_distribution(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.num_states()];
        v[self.start] = 1.0;
        v
    }

    pub fn uniform_distribution(&self) -> Vec<f64> {
        vec![1.0 / self.num_states() as f64; self.num_states()]
    }

    /// Noiseless rail samples of blocks `L..levels.len()`, `M` per block.
    pub fn rail_means(&self, levels: &[i8]) -> Vec<f64> {
        let l = self.memory;
        let mut out = Vec::with_capacity(levels.len().saturating_sub(l) * self.m);
        for n in l..levels.len() {
            for m in 0..self.m {
                let acc: f64 = (0..=l).map(|k| self.taps[k][m] * levels[n - k] as f64).sum();
                out.push(FRAC_1_SQRT_2 * acc);
            }
        }
        out
    }
}

/// Auxiliary block likelihood `Π Φ(y · μ / σ)`, `σ² = N0/2`, over all real
/// components (both rails interleaved or one rail).
pub fn aux_block_likelihood(mu: &[f64], y: &[f64], n0: f64) -> Result<f64> {
    if !(n0 > 0.0) {
        return invalid("N0 must be positive");
    }
    if mu.len() != y.len() {
        return Err(ZxmError::LengthMismatch {
            expected: mu.len(),
            actual: y.len(),
        });
    }
    Ok(sign_log_likelihood(y, mu, (n0 / 2.0).sqrt()).exp())
}

/// Rate estimate in bits per channel use (one complex symbol).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: f64,
    /// Batch-means standard error.
    pub stderr: f64,
    pub rail_rates: [f64; 2],
}

/// Number of contiguous batches behind the standard error.
pub const BOOTSTRAP_BLOCKS: usize = 20;

/// Mean of `v` and the standard error of the mean from `blocks` contiguous
/// batch means.
pub fn batch_mean_stderr(v: &[f64], blocks: usize) -> (f64, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let size = v.len() / blocks;
    if blocks < 2 || size == 0 {
        return (mean, f64::NAN);
    }
    let means: Vec<f64> = (0..blocks)
        .map(|b| v[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let mb = means.iter().sum::<f64>() / blocks as f64;
    let var = means.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / (blocks - 1) as f64;
    (mean, (var / blocks as f64).sqrt())
}

/// Per-step information density of one rail, in bits.
fn rail_information<R: Rng + ?Sized>(isi: &IsiTrellis, source: &Source, n: usize, n0: f64, rng: &mut R) -> Result<Vec<f64>> {
    let levels = source.sample_rail(n + isi.memory, rng)?;
    let mu = isi.rail_means(&levels);
    let noise = filtered_rail_noise(mu.len(), isi.m, n0, rng);
    let y: Vec<f64> = mu
        .iter()
        .zip(&noise)
        .map(|(m, z)| if m + z > 0.0 { 1.0 } else { -1.0 })
        .collect();
    let sigma = (n0 / 2.0).sqrt();
    let fwd = forward_log_likelihoods(&isi.trellis, &isi.uniform_distribution(), &y, sigma)?;
    Ok(fwd
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let s = k * isi.m;
            let cond: f64 = (s..s + isi.m).map(|i| log_normal_cdf(y[i] * mu[i] / sigma)).sum();
            (cond - f) / LN_2
        })
        .collect())
}

/// `(1/N)(−log2 W(y^N) + log2 W(y^N | x^N))` summed over both rails, for
/// `N` blocks at the noise level `cfg.n0`.
pub fn rate_lower_bound<R: Rng + ?Sized>(cfg: &ChainConfig, source: &Source, n: usize, rng: &mut R) -> Result<RateEstimate> {
    if !(cfg.n0 > 0.0) {
        return invalid("rate estimation needs N0 > 0");
    }
    if n < BOOTSTRAP_BLOCKS {
        return invalid("N must be at least the number of bootstrap blocks");
    }
    let isi = IsiTrellis::build(cfg, source)?;
    let i = rail_information(&isi, source, n, cfg.n0, rng)?;
    let q = rail_information(&isi, source, n, cfg.n0, rng)?;
    let total: Vec<f64> = i.iter().zip(&q).map(|(a, b)| a + b).collect();
    let (rate, stderr) = batch_mean_stderr(&total, BOOTSTRAP_BLOCKS);
    if !rate.is_finite() {
        return Err(ZxmError::Numeric("rate estimate is not finite".into()));
    }
    Ok(RateEstimate {
        rate,
        stderr,
        rail_rates: [i.iter().sum::<f64>() / n as f64, q.iter().sum::<f64>() / n as f64],
    })
}

/// `SE = rate · M_Tx / (T · B90)`.
pub fn spectral_efficiency(rate_bpcu: f64, cfg: &ChainConfig, b90: f64) -> Result<f64> {
    if !(b90 > 0.0) {
        return invalid("B90 must be positive");
    }
    Ok(rate_bpcu * cfg.m_tx as f64 / (cfg.t * b90))
}

/// `N0` that realizes `SNR = P / (N0 B90)`.
pub fn n0_for_snr_db(snr_db: f64, power: f64, b90: f64) -> f64 {
    power / (10f64.powf(snr_db / 10.0) * b90)
}

/// One row of a spectral-efficiency sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SePoint {
    pub snr_db: f64,
    pub rate_bpcu: f64,
    pub stderr: f64,
    pub b90: f64,
    pub se: f64,
}

pub const SE_CSV_HEADER: &str = "snr_db,rate_bpcu,stderr,B90,SE";

impl SePoint {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.snr_db, self.rate_bpcu, self.stderr, self.b90, self.se
        )
    }
}

/// Rate and SE at one SNR, given the signal power and bandwidth.
pub fn se_point<R: Rng + ?Sized>(
    cfg: &ChainConfig,
    source: &Source,
    snr_db: f64,
    power: f64,
    b90: f64,
    n: usize,
    rng: &mut R,
) -> Result<SePoint> {
    let cfg = ChainConfig {
        n0: n0_for_snr_db(snr_db, power, b90),
        ..cfg.clone()
    };
    let est = rate_lower_bound(&cfg, source, n, rng)?;
    Ok(SePoint {
        snr_db,
        rate_bpcu: est.rate,
        stderr: est.stderr,
        b90,
        se: spectral_efficiency(est.rate, &cfg, b90)?,
    })
}
