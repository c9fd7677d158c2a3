//! Forward error correction behind a small codec interface, with a bundled
//! regular (3, 6) LDPC code and a seeded block interleaver.

use crate::error::{invalid, Result, ZxmError};
use crate::rng::stream;
use rand::seq::SliceRandom;

/// Block codec. LLRs are `ln P(b = 0) / P(b = 1)`.
pub trait FecCode: Send + Sync {
    /// Code length.
    fn n(&self) -> usize;
    /// Information length.
    fn k(&self) -> usize;
    fn encode(&self, info: &[u8]) -> Result<Vec<u8>>;
    /// Returns the information bits and whether decoding converged to a codeword.
    fn decode(&self, llrs: &[f64]) -> Result<(Vec<u8>, bool)>;
    fn rate(&self) -> f64 {
        self.k() as f64 / self.n() as f64
    }
}

/// Regular LDPC code with column weight `dv` and row weight `dc`, decoded by
/// sum-product belief propagation.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    n: usize,
    /// Variable nodes of each check.
    checks: Vec<Vec<usize>>,
    /// `(check, slot)` pairs of each variable node.
    vars: Vec<Vec<(usize, usize)>>,
    /// Columns carrying the information bits.
    info_cols: Vec<usize>,
    /// For each pivot row: its pivot column and the information positions
    /// (indices into `info_cols`) it sums.
    parity_eqs: Vec<(usize, Vec<usize>)>,
    pub max_iterations: usize,
}

const LLR_CLAMP: f64 = 50.0;

impl LdpcCode {
    /// Random `(dv, dc)`-regular code of length `n` from `seed`. Parallel
    /// edges are removed by re-drawing the socket permutation.
    pub fn regular(n: usize, dv: usize, dc: usize, seed: u64) -> Result<Self> {
        if n == 0 || dv == 0 || dc == 0 || (n * dv) % dc != 0 {
            return invalid("LDPC parameters need n·dv divisible by dc");
        }
        let m = n * dv / dc;
        let mut rng = stream(seed, 0);
        let mut sockets: Vec<usize> = (0..n * dv).map(|e| e / dv).collect();
        let mut checks = Vec::new();
        for _attempt in 0..1000 {
            sockets.shuffle(&mut rng);
            let cand: Vec<Vec<usize>> = sockets.chunks(dc).map(|c| c.to_vec()).collect();
            let ok = cand.iter().all(|c| {
                let mut s = c.clone();
                s.sort_unstable();
                s.windows(2).all(|w| w[0] != w[1])
            });
            if ok {
                checks = cand;
                break;
            }
            // repair by swapping duplicates with random sockets
            for _ in 0..100 {
                let mut fixed = true;
                for ci in 0..m {
                    for a in 0..dc {
                        for b in a + 1..dc {
                            if sockets[ci * dc + a] == sockets[ci * dc + b] {
                                fixed = false;
                                let j = rand::Rng::random_range(&mut rng, 0..n * dv);
                                sockets.swap(ci * dc + b, j);
                            }
                        }
                    }
                }
                if fixed {
                    break;
                }
            }
            let cand: Vec<Vec<usize>> = sockets.chunks(dc).map(|c| c.to_vec()).collect();
            if cand.iter().all(|c| {
                let mut s = c.clone();
                s.sort_unstable();
                s.windows(2).all(|w| w[0] != w[1])
            }) {
                checks = cand;
                break;
            }
        }
        if checks.is_empty() {
            return Err(ZxmError::Numeric("could not build a simple LDPC graph".into()));
        }
        Self::from_checks(n, checks)
    }

    /// Code defined by the parity-check rows `checks`.
    pub fn from_checks(n: usize, checks: Vec<Vec<usize>>) -> Result<Self> {
        let mut vars = vec![Vec::new(); n];
        for (ci, c) in checks.iter().enumerate() {
            for (slot, &v) in c.iter().enumerate() {
                if v >= n {
                    return invalid("check references a variable outside the code");
                }
                vars[v].push((ci, slot));
            }
        }
        // Gauss-Jordan elimination over GF(2) on bit-packed rows
        let words = n.div_ceil(64);
        let mut rows: Vec<Vec<u64>> = checks
            .iter()
            .map(|c| {
                let mut r = vec![0u64; words];
                for &v in c {
                    r[v / 64] ^= 1 << (v % 64);
                }
                r
            })
            .collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..n {
            let (w, b) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (rank..rows.len()).find(|&r| rows[r][w] & b != 0) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[w] & b != 0 {
                    for (x, y) in row.iter_mut().zip(&pivot) {
                        *x ^= y;
                    }
                }
            }
            pivots.push(col);
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        let is_pivot: Vec<bool> = {
            let mut v = vec![false; n];
            for &p in &pivots {
                v[p] = true;
            }
            v
        };
        let info_cols: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let parity_eqs = pivots
            .iter()
            .enumerate()
            .map(|(r, &pc)| {
                let deps = info_cols
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| rows[r][c / 64] >> (c % 64) & 1 == 1)
                    .map(|(i, _)| i)
                    .collect();
                (pc, deps)
            })
            .collect();
        Ok(LdpcCode {
            n,
            checks,
            vars,
            info_cols,
            parity_eqs,
            max_iterations: 50,
        })
    }

    /// The bundled code: `n = 1024`, regular (3, 6).
    pub fn bundled() -> Self {
        LdpcCode::regular(1024, 3, 6, 0x5eed_1dbc).expect("bundled LDPC construction")
    }

    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    pub fn syndrome_ok(&self, word: &[u8]) -> bool {
        self.checks
            .iter()
            .all(|c| c.iter().fold(0u8, |acc, &v| acc ^ word[v]) == 0)
    }
}

impl FecCode for LdpcCode {
    fn n(&self) -> usize {
        self.n
    }

    fn k(&self) -> usize {
        self.info_cols.len()
    }

    fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k() {
            return Err(ZxmError::LengthMismatch {
                expected: self.k(),
                actual: info.len(),
            });
        }
        let mut word = vec![0u8; self.n];
        for (&c, &b) in self.info_cols.iter().zip(info) {
            word[c] = b & 1;
        }
        for (pc, deps) in &self.parity_eqs {
            word[*pc] = deps.iter().fold(0u8, |acc, &i| acc ^ (info[i] & 1));
        }
        Ok(word)
    }

    fn decode(&self, llrs: &[f64]) -> Result<(Vec<u8>, bool)> {
        if llrs.len() != self.n {
            return Err(ZxmError::LengthMismatch {
                expected: self.n,
                actual: llrs.len(),
            });
        }
        let ch: Vec<f64> = llrs
            .iter()
            .map(|&l| if l.is_nan() { 0.0 } else { l.clamp(-LLR_CLAMP, LLR_CLAMP) })
            .collect();
        // messages indexed like `checks`
        let mut c2v: Vec<Vec<f64>> = self.checks.iter().map(|c| vec![0.0; c.len()]).collect();
        let mut v2c: Vec<Vec<f64>> = self.checks.iter().map(|c| c.iter().map(|&v| ch[v]).collect()).collect();
        let mut hard = vec![0u8; self.n];
        let mut ok = false;
        let mut tanh = Vec::new();
        for _ in 0..self.max_iterations {
            for (ci, c) in self.checks.iter().enumerate() {
                tanh.clear();
                tanh.extend(v2c[ci].iter().map(|&m| (m / 2.0).tanh()));
                for slot in 0..c.len() {
                    let prod: f64 = tanh
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != slot)
                        .map(|(_, &t)| t)
                        .product();
                    let p = prod.clamp(-0.999_999_999_999, 0.999_999_999_999);
                    c2v[ci][slot] = 2.0 * p.atanh();
                }
            }
            for (v, edges) in self.vars.iter().enumerate() {
                let total: f64 = ch[v] + edges.iter().map(|&(ci, s)| c2v[ci][s]).sum::<f64>();
                hard[v] = (total < 0.0) as u8;
                for &(ci, s) in edges {
                    v2c[ci][s] = (total - c2v[ci][s]).clamp(-LLR_CLAMP, LLR_CLAMP);
                }
            }
            if self.syndrome_ok(&hard) {
                ok = true;
                break;
            }
        }
        Ok((self.info_cols.iter().map(|&c| hard[c]).collect(), ok))
    }
}

/// Seeded pseudo-random permutation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
}

impl Interleaver {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut stream(seed, 1));
        Interleaver { perm }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// `out[i] = input[perm[i]]`.
    pub fn interleave<T: Copy>(&self, input: &[T]) -> Vec<T> {
        self.perm.iter().map(|&p| input[p]).collect()
    }

    pub fn deinterleave<T: Copy + Default>(&self, input: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); input.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = input[i];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn bundled_code_shape() {
        let c = LdpcCode::bundled();
        assert_eq!(c.n(), 1024);
        assert!(c.k() >= 512);
        assert_eq!(c.checks().len(), 512);
        assert!(c.checks().iter().all(|r| r.len() == 6));
        let mut col = vec![0; 1024];
        for r in c.checks() {
            for &v in r {
                col[v] += 1;
            }
        }
        assert!(col.iter().all(|&w| w == 3));
    }

    #[test]
    fn encode_yields_codewords_and_round_trips() {
        let c = LdpcCode::bundled();
        let mut rng = stream(1, 0);
        for _ in 0..5 {
            let info: Vec<u8> = (0..c.k()).map(|_| rng.random_range(0..2)).collect();
            let w = c.encode(&info).unwrap();
            assert!(c.syndrome_ok(&w));
            let llrs: Vec<f64> = w.iter().map(|&b| if b == 0 { 10.0 } else { -10.0 }).collect();
            let (dec, ok) = c.decode(&llrs).unwrap();
            assert!(ok);
            assert_eq!(dec, info);
        }
    }

    #[test]
    fn corrects_noisy_bpsk_at_moderate_snr() {
        let c = LdpcCode::bundled();
        let mut rng = stream(2, 0);
        // Eb/N0 = 3 dB at rate 1/2: BPSK sigma² = 1/(2 R Eb/N0)
        let sigma = (1.0 / (2.0 * 0.5 * 10f64.powf(0.3))).sqrt();
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut failures = 0;
        for _ in 0..20 {
            let info: Vec<u8> = (0..c.k()).map(|_| rng.random_range(0..2)).collect();
            let w = c.encode(&info).unwrap();
            let llrs: Vec<f64> = w
                .iter()
                .map(|&b| {
                    let s = if b == 0 { 1.0 } else { -1.0 };
                    2.0 * (s + noise.sample(&mut rng)) / (sigma * sigma)
                })
                .collect();
            let (dec, ok) = c.decode(&llrs).unwrap();
            if !ok || dec != info {
                failures += 1;
            }
        }
        assert!(failures <= 1, "{failures}");
    }

    #[test]
    fn interleaver_is_a_permutation() {
        let il = Interleaver::new(100, 5);
        let x: Vec<usize> = (0..100).collect();
        let y = il.interleave(&x);
        assert_ne!(x, y);
        assert_eq!(il.deinterleave(&y), x);
        assert_eq!(Interleaver::new(100, 5), il);
    }

    #[test]
    fn length_checks() {
        let c = LdpcCode::bundled();
        assert!(c.encode(&[0, 1]).is_err());
        assert!(c.decode(&[0.0; 3]).is_err());
    }
}
