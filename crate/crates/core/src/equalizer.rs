//! MAP symbol detection on the quantized ISI channel and the coded link.

use crate::channel::transmit_frame;
use crate::error::{invalid, Result, ZxmError};
use crate::fec::{FecCode, Interleaver};
use crate::rate::IsiTrellis;
use crate::rll::{build_block_code, nrzi_encode_from, sample_dk_sequence, RllBlockCode, RllFsm};
use crate::rng::stream;
use crate::trellis::forward_backward;
use crate::waveform::{build_symbols, ChainConfig, QuantizedFrame, Source};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Posterior level probabilities of one rail, `[P(−1), P(+1)]` per symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct AppMatrix {
    pub rows: Vec<[f64; 2]>,
}

impl AppMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// BCJR output for one rail.
#[derive(Debug, Clone, PartialEq)]
pub struct RailApps {
    pub levels: AppMatrix,
    /// `P(b_n = 1 | y)` for the constrained bit behind each level.
    pub bit_one: Vec<f64>,
    pub log_likelihood_forward: f64,
    pub log_likelihood_backward: f64,
}

/// Equalize one rail from its sign samples (`M` per block, `±1`), starting in
/// the all-`−1` state.
pub fn bcjr_equalize_rail(signs: &[f64], isi: &IsiTrellis, n0: f64) -> Result<RailApps> {
    if !(n0 > 0.0) {
        return invalid("N0 must be positive");
    }
    let post = forward_backward(&isi.trellis, &isi.start_distribution(), signs, (n0 / 2.0).sqrt())?;
    Ok(RailApps {
        levels: AppMatrix {
            rows: post.labels.iter().map(|l| [l[0], l[1]]).collect(),
        },
        bit_one: post.aux_one,
        log_likelihood_forward: post.log_likelihood_forward,
        log_likelihood_backward: post.log_likelihood_backward,
    })
}

/// Equalize both rails of `frame` from block `start_block` on. The levels
/// of the `L` symbols before `start_block` must be `−1`.
pub fn bcjr_equalize(frame: &QuantizedFrame, isi: &IsiTrellis, n0: f64, start_block: usize) -> Result<[RailApps; 2]> {
    if frame.m != isi.m {
        return invalid("frame and trellis disagree on M");
    }
    let from = frame.alignment + start_block * frame.m;
    if from > frame.y.len() {
        return invalid("start block beyond the frame");
    }
    let rail = |q: bool| -> Vec<f64> {
        frame.y[from..]
            .iter()
            .map(|v| {
                let x = if q { v.im } else { v.re };
                if x > 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect()
    };
    Ok([
        bcjr_equalize_rail(&rail(false), isi, n0)?,
        bcjr_equalize_rail(&rail(true), isi, n0)?,
    ])
}

/// Per-symbol argmax; ties go to `−1`.
pub fn map_detect(apps: &AppMatrix) -> Vec<i8> {
    apps.rows.iter().map(|r| if r[1] > r[0] { 1 } else { -1 }).collect()
}

/// Rate of the bundled `(d = 1)` block code.
pub const RLL_RATE: f64 = 0.6;

/// `N0` for a given `Eb/N0` with unit symbol energy; each symbol carries
/// `2 · 0.6 · R_FEC` information bits.
pub fn ebn0_to_n0(ebn0_db: f64, fec_rate: f64) -> f64 {
    let eb = 1.0 / (2.0 * RLL_RATE * fec_rate);
    eb / 10f64.powf(ebn0_db / 10.0)
}

/// Layout of a coded frame on the two rails.
#[derive(Debug, Clone)]
pub struct CodedLink {
    pub cfg: ChainConfig,
    pub isi: IsiTrellis,
    pub block: RllBlockCode,
    pub interleaver: Interleaver,
    /// Number of `−1` levels before the data on each rail.
    pub preamble: usize,
    /// Number of hold levels after the data.
    pub tail: usize,
    /// FEC code length.
    pub n: usize,
    /// Zero bits appended after interleaving.
    pub pad: usize,
}

impl CodedLink {
    /// Link for `(d = 1)` block-coded frames of FEC length `n`.
    pub fn new(cfg: &ChainConfig, n: usize, interleaver_seed: u64) -> Result<Self> {
        let isi = IsiTrellis::build(cfg, &Source::Rll { d: 1 })?;
        let block = build_block_code();
        let group = 2 * block.k_bits;
        let pad = (group - n % group) % group;
        Ok(CodedLink {
            cfg: cfg.clone(),
            preamble: isi.memory.max(1),
            tail: isi.memory,
            isi,
            block,
            interleaver: Interleaver::new(n, interleaver_seed),
            n,
            pad,
        })
    }

    /// Constrained bits per rail.
    pub fn rail_bits(&self) -> usize {
        (self.n + self.pad) / self.block.k_bits * self.block.n / 2
    }

    /// Map a FEC codeword to the two rails' level sequences, including
    /// preamble and tail.
    pub fn map_codeword(&self, codeword: &[u8]) -> Result<[Vec<i8>; 2]> {
        if codeword.len() != self.n {
            return Err(ZxmError::LengthMismatch {
                expected: self.n,
                actual: codeword.len(),
            });
        }
        let mut bits = self.interleaver.interleave(codeword);
        bits.extend(std::iter::repeat(0).take(self.pad));
        let dk = self.block.encode(&bits)?;
        let half = dk.len() / 2;
        let rail = |b: &[u8]| -> Vec<i8> {
            let mut lv = vec![-1i8; self.preamble];
            lv.extend(nrzi_encode_from(b, -1));
            let last = *lv.last().unwrap();
            lv.extend(std::iter::repeat(last).take(self.tail));
            lv
        };
        Ok([rail(&dk[..half]), rail(&dk[half..])])
    }

    /// Soft demapping of both rails' bit APPs into FEC-order LLRs.
    pub fn demap(&self, apps: &[RailApps; 2]) -> Result<Vec<f64>> {
        let per_rail = self.rail_bits();
        let mut llrs = Vec::with_capacity(self.n + self.pad);
        for rail in apps {
            if rail.bit_one.len() < per_rail {
                return invalid("rail posteriors shorter than the data");
            }
            for word in rail.bit_one[..per_rail].chunks(self.block.n) {
                let p: Vec<f64> = word.iter().map(|v| v.clamp(0.0, 1.0)).collect();
                let dec = self.block.soft_decode(&p)?;
                // erasures carry zero LLRs
                llrs.extend(dec.llrs);
            }
        }
        llrs.truncate(self.n);
        Ok(self.interleaver.deinterleave(&llrs))
    }
}

/// Outcome of one coded frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub decoded: Vec<u8>,
    pub converged: bool,
    pub block_error: bool,
}

/// Nominal `N0` used for likelihoods when the channel is noiseless.
const NOISELESS_N0: f64 = 1e-6;

/// FEC encode, RLL encode, NRZI, transmit, equalize, demap, FEC decode.
pub fn coded_frame<R: Rng + ?Sized>(info: &[u8], link: &CodedLink, fec: &dyn FecCode, rng: &mut R) -> Result<FrameOutcome> {
    let cw = fec.encode(info)?;
    let [a, b] = link.map_codeword(&cw)?;
    let x = build_symbols(&a, &b)?;
    let (_, frame) = transmit_frame(&x, &link.cfg, rng)?;
    let n0 = if link.cfg.n0 > 0.0 { link.cfg.n0 } else { NOISELESS_N0 };
    let apps = bcjr_equalize(&frame, &link.isi, n0, link.preamble)?;
    let llrs = link.demap(&apps)?;
    let (decoded, converged) = fec.decode(&llrs)?;
    let block_error = decoded != info;
    Ok(FrameOutcome {
        decoded,
        converged,
        block_error,
    })
}

/// Block error statistics at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlerStats {
    pub ebn0_db: f64,
    pub m: usize,
    pub frames: usize,
    pub errors: usize,
    pub bler: f64,
}

pub const BLER_CSV_HEADER: &str = "ebn0_db,M,bler,frames,errors";

impl BlerStats {
    pub fn csv_row(&self) -> String {
        format!("{:.16e},{},{:.16e},{},{}", self.ebn0_db, self.m, self.bler, self.frames, self.errors)
    }
}

/// Run the coded chain over `bits` (a multiple of `k`), one FEC block after
/// another.
pub fn coded_chain<R: Rng + ?Sized>(
    bits: &[u8],
    cfg: &ChainConfig,
    fec: &dyn FecCode,
    interleaver_seed: u64,
    rng: &mut R,
) -> Result<(Vec<u8>, BlerStats)> {
    let k = fec.k();
    if bits.is_empty() || bits.len() % k != 0 {
        return invalid(format!("bit count must be a positive multiple of {k}"));
    }
    let link = CodedLink::new(cfg, fec.n(), interleaver_seed)?;
    let mut out = Vec::with_capacity(bits.len());
    let mut errors = 0;
    for info in bits.chunks(k) {
        let o = coded_frame(info, &link, fec, rng)?;
        errors += o.block_error as usize;
        out.extend(o.decoded);
    }
    let frames = bits.len() / k;
    Ok((
        out,
        BlerStats {
            ebn0_db: f64::NAN,
            m: cfg.m,
            frames,
            errors,
            bler: errors as f64 / frames as f64,
        },
    ))
}

/// Stopping rule of a BLER measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlerBudget {
    pub max_frames: usize,
    pub min_errors: usize,
    /// Frames simulated between stopping checks.
    pub batch: usize,
}

impl Default for BlerBudget {
    fn default() -> Self {
        BlerBudget {
            max_frames: 4000,
            min_errors: 60,
            batch: 200,
        }
    }
}

/// BLER at one `Eb/N0`. Frame `i` draws its data and noise from stream `i`
/// of `seed`, so results do not depend on scheduling.
pub fn bler_point(cfg: &ChainConfig, ebn0_db: f64, fec: &dyn FecCode, budget: &BlerBudget, seed: u64) -> Result<BlerStats> {
    let cfg = ChainConfig {
        n0: ebn0_to_n0(ebn0_db, fec.rate()),
        ..cfg.clone()
    };
    let link = CodedLink::new(&cfg, fec.n(), seed ^ 0x1a7e)?;
    let mut frames = 0;
    let mut errors = 0;
    while frames < budget.max_frames && errors < budget.min_errors {
        let end = (frames + budget.batch.max(1)).min(budget.max_frames);
        let batch: Result<Vec<bool>> = (frames..end)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, i as u64);
                let info: Vec<u8> = (0..fec.k()).map(|_| rng.random_range(0..2u8)).collect();
                Ok(coded_frame(&info, &link, fec, &mut rng)?.block_error)
            })
            .collect();
        errors += batch?.into_iter().filter(|&e| e).count();
        frames = end;
    }
    Ok(BlerStats {
        ebn0_db,
        m: cfg.m,
        frames,
        errors,
        bler: errors as f64 / frames as f64,
    })
}

/// Uncoded level error statistics of MAP detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerStats {
    pub esn0_db: f64,
    pub m: usize,
    pub symbols: usize,
    pub errors: usize,
    pub ber: f64,
}

pub const BER_CSV_HEADER: &str = "esn0_db,M,ber,symbols,errors";

impl BerStats {
    pub fn csv_row(&self) -> String {
        format!("{:.16e},{},{:.16e},{},{}", self.esn0_db, self.m, self.ber, self.symbols, self.errors)
    }
}

/// Level error rate of symbol-wise MAP detection for a max-entropy `(d, ∞)`
/// source at `Es/N0` (unit symbol energy). Both rails count; frame `i` uses
/// stream `i` of `seed`.
pub fn uncoded_ber_point(cfg: &ChainConfig, d: usize, esn0_db: f64, symbols: usize, frames: usize, seed: u64) -> Result<BerStats> {
    if symbols == 0 || frames == 0 {
        return invalid("symbols and frames must be positive");
    }
    let cfg = ChainConfig {
        n0: 10f64.powf(-esn0_db / 10.0),
        ..cfg.clone()
    };
    let isi = IsiTrellis::build(&cfg, &Source::Rll { d })?;
    let fsm = RllFsm::new(d)?;
    let preamble = isi.memory.max(d + 1);
    let errors: Result<Vec<usize>> = (0..frames)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let mut rails = [vec![-1i8; preamble], vec![-1i8; preamble]];
            for r in rails.iter_mut() {
                r.extend(nrzi_encode_from(&sample_dk_sequence(&fsm, symbols, &mut rng), -1));
            }
            let x = build_symbols(&rails[0], &rails[1])?;
            let (_, frame) = transmit_frame(&x, &cfg, &mut rng)?;
            let apps = bcjr_equalize(&frame, &isi, cfg.n0, preamble)?;
            let mut errs = 0;
            for (rail, app) in rails.iter().zip(&apps) {
                let det = map_detect(&app.levels);
                errs += det.iter().zip(&rail[preamble..]).filter(|(a, b)| a != b).count();
            }
            Ok(errs)
        })
        .collect();
    let errors: usize = errors?.into_iter().sum();
    let total = 2 * symbols * frames;
    Ok(BerStats {
        esn0_db,
        m: cfg.m,
        symbols: total,
        errors,
        ber: errors as f64 / total as f64,
    })
}

/// `Eb/N0` where the BLER curve crosses `target`, interpolating `log10 BLER`
/// linearly between the bracketing points. Points must be sorted by `Eb/N0`.
pub fn ebn0_at_bler(points: &[BlerStats], target: f64) -> Option<f64> {
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.bler >= target && b.bler < target {
            if b.bler <= 0.0 {
                // no errors observed: place the crossing by a floor of one error
                let floor = 1.0 / b.frames as f64;
                if floor >= target {
                    return Some(b.ebn0_db);
                }
                let (la, lb) = (a.bler.log10(), floor.log10());
                return Some(a.ebn0_db + (target.log10() - la) / (lb - la) * (b.ebn0_db - a.ebn0_db));
            }
            let (la, lb) = (a.bler.log10(), b.bler.log10());
            return Some(a.ebn0_db + (target.log10() - la) / (lb - la) * (b.ebn0_db - a.ebn0_db));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fec::LdpcCode;

    #[test]
    fn map_detect_rules() {
        let apps = AppMatrix {
            rows: vec![[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]],
        };
        assert_eq!(map_detect(&apps), vec![1, -1, -1]);
    }

    #[test]
    fn noiseless_frame_is_confident() {
        let cfg = ChainConfig::new(2, 2);
        let isi = IsiTrellis::build(&cfg, &Source::Rll { d: 1 }).unwrap();
        let mut rng = stream(1, 0);
        let mut a = vec![-1i8; isi.memory];
        a.extend(Source::Rll { d: 1 }.sample_rail(300, &mut rng).unwrap());
        let b = a.clone();
        let x = build_symbols(&a, &b).unwrap();
        let (_, frame) = transmit_frame(&x, &cfg, &mut rng).unwrap();
        let apps = bcjr_equalize(&frame, &isi, 1e-4, isi.memory).unwrap();
        for (n, row) in apps[0].levels.rows.iter().enumerate().take(290).skip(2) {
            let tx = a[isi.memory + n];
            let p = if tx == 1 { row[1] } else { row[0] };
            assert!(p > 0.999, "n = {n}: {p}");
        }
        assert!((apps[0].log_likelihood_forward - apps[0].log_likelihood_backward).abs() < 1e-9);
    }

    #[test]
    fn rails_are_independent() {
        let cfg = ChainConfig { n0: 0.5, ..ChainConfig::new(1, 2) };
        let isi = IsiTrellis::build(&cfg, &Source::Rll { d: 1 }).unwrap();
        let mut rng = stream(2, 0);
        let a = Source::Rll { d: 1 }.sample_rail(100, &mut rng).unwrap();
        let b1 = Source::Rll { d: 1 }.sample_rail(100, &mut rng).unwrap();
        let b2 = Source::Rll { d: 1 }.sample_rail(100, &mut rng).unwrap();
        // same noise seed, different Q data
        let (_, f1) = transmit_frame(&build_symbols(&a, &b1).unwrap(), &cfg, &mut stream(3, 0)).unwrap();
        let (_, f2) = transmit_frame(&build_symbols(&a, &b2).unwrap(), &cfg, &mut stream(3, 0)).unwrap();
        let e1 = bcjr_equalize(&f1, &isi, 0.5, 2).unwrap();
        let e2 = bcjr_equalize(&f2, &isi, 0.5, 2).unwrap();
        assert_eq!(e1[0], e2[0]);
    }

    #[test]
    fn ebn0_mapping() {
        // Eb = 1/(1.2 R); at 0 dB N0 = Eb
        assert!((ebn0_to_n0(0.0, 0.5) - 1.0 / 0.6).abs() < 1e-12);
    }

    #[test]
    fn link_layout() {
        let link = CodedLink::new(&ChainConfig::new(2, 1), 1024, 1).unwrap();
        assert_eq!(link.pad, 2);
        assert_eq!(link.rail_bits(), 855);
        let cw = vec![0u8; 1024];
        let [a, b] = link.map_codeword(&cw).unwrap();
        assert_eq!(a.len(), link.preamble + 855 + link.tail);
        assert_eq!(a.len(), b.len());
    }

    #[test]
    fn noiseless_coded_chain_is_error_free() {
        let fec = LdpcCode::bundled();
        let mut rng = stream(4, 0);
        let bits: Vec<u8> = (0..2 * fec.k()).map(|_| rng.random_range(0..2)).collect();
        let (dec, stats) = coded_chain(&bits, &ChainConfig::new(2, 1), &fec, 9, &mut rng).unwrap();
        assert_eq!(stats.errors, 0);
        assert_eq!(dec, bits);
    }

    #[test]
    fn crossing_interpolation() {
        let p = |e: f64, b: f64| BlerStats { ebn0_db: e, m: 1, frames: 1000, errors: 0, bler: b };
        let x = ebn0_at_bler(&[p(1.0, 1e-1), p(2.0, 1e-3)], 1e-2).unwrap();
        assert!((x - 1.5).abs() < 1e-12);
        assert!(ebn0_at_bler(&[p(1.0, 1e-3), p(2.0, 1e-4)], 1e-2).is_none());
    }

    #[test]
    fn uncoded_ber_falls_with_snr() {
        let cfg = ChainConfig::new(2, 1);
        let lo = uncoded_ber_point(&cfg, 1, 0.0, 500, 4, 1).unwrap();
        let hi = uncoded_ber_point(&cfg, 1, 20.0, 500, 4, 1).unwrap();
        assert_eq!(lo.symbols, 4000);
        assert!(hi.ber < lo.ber, "{} vs {}", hi.ber, lo.ber);
        assert!(hi.ber < 0.02);
    }
}
