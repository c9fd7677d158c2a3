//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::io::Write;
use zxm::equalizer::bcjr_equalize_rail;
use zxm::rate::IsiTrellis;
use zxm::rll::{nrzi_encode_from, sample_dk_sequence, RllFsm};
use zxm::rng::stream;
use zxm::special::normal_cdf;
use zxm::waveform::{ChainConfig, Source};

/// Write straight to stderr so the line survives libtest output capture.
pub fn report(id: usize, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("[acceptance {id:>2}] {verdict} {name}: {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

/// Posteriors `P(level_n = +1)` and `P(bit_n = 1)` by brute force over every
/// constrained bit sequence of length `n`, starting after a run of `−1`
/// levels long enough to allow an immediate transition.
pub fn enumerate_posteriors(isi: &IsiTrellis, fsm: &RllFsm, y: &[f64], n0: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let sigma = (n0 / 2.0).sqrt();
    let mut level_one = vec![0.0; n];
    let mut bit_one = vec![0.0; n];
    let mut total = 0.0;
    for word in 0u32..(1 << n) {
        let bits: Vec<u8> = (0..n).map(|i| ((word >> i) & 1) as u8).collect();
        let mut state = fsm.d;
        let mut prior = 1.0;
        let mut ok = true;
        for &b in &bits {
            match fsm.edges_from(state).find(|e| e.emit == b) {
                Some(e) => {
                    // parallel edges (d = 0) share the emitted bit
                    prior *= fsm.emit_prob(state, b);
                    state = e.to;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok || prior == 0.0 {
            continue;
        }
        let mut levels = vec![-1i8; isi.memory];
        levels.extend(nrzi_encode_from(&bits, -1));
        let mu = isi.rail_means(&levels);
        let lik: f64 = mu.iter().zip(y).map(|(m, s)| normal_cdf(s * m / sigma)).product();
        let w = prior * lik;
        total += w;
        for i in 0..n {
            if levels[isi.memory + i] == 1 {
                level_one[i] += w;
            }
            if bits[i] == 1 {
                bit_one[i] += w;
            }
        }
    }
    (level_one.iter().map(|v| v / total).collect(), bit_one.iter().map(|v| v / total).collect())
}

/// Largest deviation between BCJR and enumeration over `frames` noisy frames
/// of one configuration.
pub fn bcjr_vs_enumeration(d: usize, m_tx: usize, m: usize, frames: usize, seed: u64) -> f64 {
    let cfg = ChainConfig::new(m_tx, m);
    let isi = IsiTrellis::build(&cfg, &Source::Rll { d }).unwrap();
    let fsm = RllFsm::new(d).unwrap();
    let mut worst: f64 = 0.0;
    for f in 0..frames {
        let mut rng = stream(seed, f as u64);
        let n = rng.random_range(4..=8usize);
        let n0 = 10f64.powf(rng.random_range(-1.5..0.5));
        let bits = sample_dk_sequence(&fsm, n, &mut rng);
        let mut levels = vec![-1i8; isi.memory];
        levels.extend(nrzi_encode_from(&bits, -1));
        let normal = Normal::new(0.0, (n0 / 2.0).sqrt()).unwrap();
        let y: Vec<f64> = isi
            .rail_means(&levels)
            .iter()
            .map(|mu| if mu + normal.sample(&mut rng) > 0.0 { 1.0 } else { -1.0 })
            .collect();
        let apps = bcjr_equalize_rail(&y, &isi, n0).unwrap();
        let (lv, bt) = enumerate_posteriors(&isi, &fsm, &y, n0, n);
        for i in 0..n {
            worst = worst.max((apps.levels.rows[i][1] - lv[i]).abs());
            worst = worst.max((apps.bit_one[i] - bt[i]).abs());
        }
    }
    worst
}
