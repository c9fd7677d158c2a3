//! Additive white Gaussian noise and the end-to-end frame simulator.

use crate::error::{invalid, Result};
use crate::waveform::{modulate, quantize_1bit, rx_filter_and_sample, ChainConfig, QuantizedFrame, C64};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Where the noise enters the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// White noise on the simulation grid, shaped by the receive filter.
    GridWhiteThenFiltered,
    /// Independent samples, variance `N0` per complex sample.
    SampleIid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub n0: f64,
}

impl NoiseModel {
    pub fn sample_iid(n0: f64) -> Self {
        NoiseModel {
            kind: NoiseKind::SampleIid,
            n0,
        }
    }

    /// `len` samples of circularly symmetric noise; in grid mode the
    /// per-sample variance is `N0 / dt` for the grid of `cfg`.
    pub fn draw<R: Rng + ?Sized>(&self, len: usize, cfg: &ChainConfig, rng: &mut R) -> Vec<C64> {
        match self.kind {
            NoiseKind::GridWhiteThenFiltered => awgn_grid(len, &ChainConfig { n0: self.n0, ..cfg.clone() }, rng),
            NoiseKind::SampleIid => complex_gaussian(len, self.n0, rng),
        }
    }
}

/// I.i.d. `CN(0, var)` samples.
pub fn complex_gaussian<R: Rng + ?Sized>(len: usize, var: f64, rng: &mut R) -> Vec<C64> {
    if var <= 0.0 {
        return vec![C64::new(0.0, 0.0); len];
    }
    let normal = Normal::new(0.0, (var / 2.0).sqrt()).expect("finite std");
    (0..len)
        .map(|_| C64::new(normal.sample(rng), normal.sample(rng)))
        .collect()
}

/// Discrete white noise whose PSD is `N0` on the grid of `cfg`: per-sample
/// variance `N0 / dt`, so a unit-energy receive filter yields variance `N0`.
pub fn awgn_grid<R: Rng + ?Sized>(len: usize, cfg: &ChainConfig, rng: &mut R) -> Vec<C64> {
    complex_gaussian(len, cfg.n0 / cfg.dt(), rng)
}

/// Noise at the receiver samples of one real rail, exactly distributed as
/// grid noise after the integrate-and-dump filter.
///
/// The integration window of every sample is the union of `M` consecutive
/// grid cells of length `T_s`, so the filtered noise is a length-`M` moving
/// sum of i.i.d. cell integrals with variance `N0 / (2M)` each.
pub fn filtered_rail_noise<R: Rng + ?Sized>(samples: usize, m: usize, n0: f64, rng: &mut R) -> Vec<f64> {
    if n0 <= 0.0 {
        return vec![0.0; samples];
    }
    let normal = Normal::new(0.0, (n0 / (2.0 * m as f64)).sqrt()).expect("finite std");
    let cells: Vec<f64> = (0..samples + m - 1).map(|_| normal.sample(rng)).collect();
    let mut out = Vec::with_capacity(samples);
    let mut acc: f64 = cells[..m].iter().sum();
    out.push(acc);
    for k in 1..samples {
        acc += cells[k + m - 1] - cells[k - 1];
        out.push(acc);
    }
    out
}

/// Correlation coefficient of filtered noise samples `lag` apart:
/// `max(0, 1 − lag / M)`.
pub fn filtered_noise_correlation(lag: usize, m: usize) -> f64 {
    (1.0 - lag as f64 / m as f64).max(0.0)
}

/// Modulate, add grid noise, filter, sample and quantize. Returns the
/// unquantized samples alongside the frame; `M · N` samples for `N` symbols,
/// of which the first `L` blocks see the zero signal before the frame.
pub fn transmit_frame<R: Rng + ?Sized>(
    x: &[C64],
    cfg: &ChainConfig,
    rng: &mut R,
) -> Result<(Vec<C64>, QuantizedFrame)> {
    cfg.validate()?;
    if x.is_empty() {
        return invalid("empty symbol sequence");
    }
    let mut signal = modulate(x, cfg);
    let noise = awgn_grid(signal.len(), cfg, rng);
    for (s, n) in signal.iter_mut().zip(&noise) {
        *s += n;
    }
    let r = rx_filter_and_sample(&signal, cfg, x.len());
    let mut frame = quantize_1bit(&r, cfg.m);
    frame.valid_from = cfg.memory().min(x.len());
    Ok((r, frame))
}
