//! Trellis recursions for 1-bit observations of Gaussian-perturbed means.
//!
//! Every branch carries a vector of noiseless real sample values `μ`; the
//! branch likelihood of a sign vector `y` is `Π_e Φ(y_e μ_e / σ)`. The noise
//! correlation between samples is deliberately not modelled.

use crate::error::{invalid, Result, ZxmError};
use crate::special::{log_normal_cdf, normal_cdf};

/// One branch of a time-invariant trellis.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Prior probability of taking this branch from `from`.
    pub prior: f64,
    /// Input symbol index carried by the branch.
    pub label: usize,
    /// Secondary binary label (e.g. the channel bit behind a level).
    pub aux: u8,
    /// Noiseless means of the observed real components.
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trellis {
    pub num_states: usize,
    pub num_labels: usize,
    /// Number of real components observed per step.
    pub emission_len: usize,
    pub edges: Vec<Edge>,
}

impl Trellis {
    pub fn validate(&self) -> Result<()> {
        let mut out = vec![0.0; self.num_states];
        for e in &self.edges {
            if e.from >= self.num_states || e.to >= self.num_states || e.label >= self.num_labels {
                return invalid("edge index out of range");
            }
            if e.mean.len() != self.emission_len {
                return invalid("edge mean has wrong length");
            }
            out[e.from] += e.prior;
        }
        for (s, p) in out.iter().enumerate() {
            if (p - 1.0).abs() > 1e-9 {
                return Err(ZxmError::Numeric(format!("outgoing priors of state {s} sum to {p}")));
            }
        }
        Ok(())
    }
}

/// Pack a ±1 observation vector into a pattern index (bit `e` set for `+1`).
pub fn pattern_index(y: &[f64]) -> usize {
    y.iter()
        .enumerate()
        .fold(0, |acc, (e, &v)| if v > 0.0 { acc | (1 << e) } else { acc })
}

/// Log-likelihood of sign vector `y` given means `mu`.
pub fn sign_log_likelihood(y: &[f64], mu: &[f64], sigma: f64) -> f64 {
    y.iter()
        .zip(mu)
        .map(|(&yv, &m)| log_normal_cdf(yv.signum() * m / sigma))
        .sum()
}

const TABLE_MAX_LEN: usize = 8;

/// Branch weights `prior · W(y | branch)` for every edge, cached by pattern
/// when the emission is short enough.
pub struct BranchModel<'a> {
    trellis: &'a Trellis,
    sigma: f64,
    table: Option<Vec<f64>>,
    patterns: usize,
}

impl<'a> BranchModel<'a> {
    pub fn new(trellis: &'a Trellis, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return invalid("noise standard deviation must be positive");
        }
        let table = if trellis.emission_len <= TABLE_MAX_LEN {
            let patterns = 1usize << trellis.emission_len;
            let mut t = vec![0.0; patterns * trellis.edges.len()];
            for p in 0..patterns {
                for (i, e) in trellis.edges.iter().enumerate() {
                    let w: f64 = e
                        .mean
                        .iter()
                        .enumerate()
                        .map(|(c, &m)| {
                            let y = if p >> c & 1 == 1 { 1.0 } else { -1.0 };
                            normal_cdf(y * m / sigma)
                        })
                        .product();
                    t[p * trellis.edges.len() + i] = e.prior * w;
                }
            }
            Some(t)
        } else {
            None
        };
        Ok(BranchModel {
            trellis,
            sigma,
            table,
            patterns: 1usize << trellis.emission_len.min(TABLE_MAX_LEN),
        })
    }

    /// Fill `out[i]` with the weight of edge `i` for observation `y`.
    pub fn weights(&self, y: &[f64], out: &mut [f64]) {
        let ne = self.trellis.edges.len();
        match &self.table {
            Some(t) => {
                let p = pattern_index(y);
                debug_assert!(p < self.patterns);
                out.copy_from_slice(&t[p * ne..(p + 1) * ne]);
            }
            None => {
                for (o, e) in out.iter_mut().zip(&self.trellis.edges) {
                    *o = e.prior * sign_log_likelihood(y, &e.mean, self.sigma).exp();
                }
            }
        }
    }
}

fn normalize(v: &mut [f64]) -> Result<f64> {
    let s: f64 = v.iter().sum();
    if !(s > 0.0) || !s.is_finite() {
        return Err(ZxmError::Numeric("forward vector vanished".into()));
    }
    for x in v.iter_mut() {
        *x /= s;
    }
    Ok(s)
}

/// Forward recursion. Returns `ln W(y_n | y^{n−1})` for every step; their sum
/// is `ln W(y^N)`. The state posterior is renormalized at each step and the
/// scale factors carry the likelihood.
pub fn forward_log_likelihoods(trellis: &Trellis, initial: &[f64], obs: &[f64], sigma: f64) -> Result<Vec<f64>> {
    let el = trellis.emission_len;
    if obs.len() % el != 0 {
        return invalid("observation length is not a multiple of the emission length");
    }
    if initial.len() != trellis.num_states {
        return invalid("initial distribution has wrong length");
    }
    let model = BranchModel::new(trellis, sigma)?;
    let mut alpha = initial.to_vec();
    normalize(&mut alpha)?;
    let mut next = vec![0.0; trellis.num_states];
    let mut w = vec![0.0; trellis.edges.len()];
    let steps = obs.len() / el;
    let mut out = Vec::with_capacity(steps);
    for n in 0..steps {
        model.weights(&obs[n * el..(n + 1) * el], &mut w);
        next.iter_mut().for_each(|v| *v = 0.0);
        for (e, &wi) in trellis.edges.iter().zip(&w) {
            next[e.to] += alpha[e.from] * wi;
        }
        let s = normalize(&mut next)?;
        out.push(s.ln());
        std::mem::swap(&mut alpha, &mut next);
    }
    Ok(out)
}

/// Output of the forward-backward recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors {
    /// `labels[n][l] = P(label_n = l | y^N)`.
    pub labels: Vec<Vec<f64>>,
    /// `P(aux_n = 1 | y^N)`.
    pub aux_one: Vec<f64>,
    /// `ln W(y^N)` from the forward pass.
    pub log_likelihood_forward: f64,
    /// `ln W(y^N)` from the backward pass.
    pub log_likelihood_backward: f64,
}

/// BCJR with a given start distribution and an open end.
pub fn forward_backward(trellis: &Trellis, initial: &[f64], obs: &[f64], sigma: f64) -> Result<Posteriors> {
    let el = trellis.emission_len;
    if obs.len() % el != 0 {
        return invalid("observation length is not a multiple of the emission length");
    }
    if initial.len() != trellis.num_states {
        return invalid("initial distribution has wrong length");
    }
    let ns = trellis.num_states;
    let ne = trellis.edges.len();
    let steps = obs.len() / el;
    let model = BranchModel::new(trellis, sigma)?;
    let mut weights = vec![0.0; steps * ne];
    for n in 0..steps {
        model.weights(&obs[n * el..(n + 1) * el], &mut weights[n * ne..(n + 1) * ne]);
    }
    // alpha[n] is the state distribution before step n
    let mut alpha = vec![0.0; (steps + 1) * ns];
    alpha[..ns].copy_from_slice(initial);
    normalize(&mut alpha[..ns])?;
    let mut log_fwd = 0.0;
    for n in 0..steps {
        let (cur, rest) = alpha.split_at_mut((n + 1) * ns);
        let cur = &cur[n * ns..];
        let next = &mut rest[..ns];
        for (e, &w) in trellis.edges.iter().zip(&weights[n * ne..(n + 1) * ne]) {
            next[e.to] += cur[e.from] * w;
        }
        log_fwd += normalize(next)?.ln();
    }
    let mut beta = vec![1.0; ns];
    let mut log_bwd = normalize(&mut beta)?.ln();
    let mut prev = vec![0.0; ns];
    let mut labels = vec![vec![0.0; trellis.num_labels]; steps];
    let mut aux_one = vec![0.0; steps];
    for n in (0..steps).rev() {
        let a = &alpha[n * ns..(n + 1) * ns];
        let w = &weights[n * ne..(n + 1) * ne];
        let mut total = 0.0;
        let mut aux = 0.0;
        prev.iter_mut().for_each(|v| *v = 0.0);
        for (e, &wi) in trellis.edges.iter().zip(w) {
            let joint = a[e.from] * wi * beta[e.to];
            labels[n][e.label] += joint;
            if e.aux == 1 {
                aux += joint;
            }
            total += joint;
            prev[e.from] += wi * beta[e.to];
        }
        if !(total > 0.0) {
            return Err(ZxmError::Numeric(format!("zero posterior mass at step {n}")));
        }
        for v in labels[n].iter_mut() {
            *v /= total;
        }
        aux_one[n] = aux / total;
        log_bwd += normalize(&mut prev)?.ln();
        std::mem::swap(&mut beta, &mut prev);
    }
    let init_mass: f64 = initial.iter().zip(&beta).map(|(p, b)| p * b).sum::<f64>() / initial.iter().sum::<f64>();
    log_bwd += init_mass.ln();
    Ok(Posteriors {
        labels,
        aux_one,
        log_likelihood_forward: log_fwd,
        log_likelihood_backward: log_bwd,
    })
}

/// Breadth-first reachable set from `start` in a directed graph given as
/// `succ(state) -> successors`.
pub fn reachable<F: Fn(usize) -> Vec<usize>>(start: usize, succ: F) -> Vec<usize> {
    let mut seen = std::collections::BTreeSet::new();
    let mut queue = std::collections::VecDeque::from([start]);
    seen.insert(start);
    while let Some(s) = queue.pop_front() {
        for t in succ(s) {
            if seen.insert(t) {
                queue.push_back(t);
            }
        }
    }
    seen.into_iter().collect()
}
