//! Reference values for the limiting exceedance laws.
//!
//! Poisson and compound-Poisson quantities are computed exactly by finite
//! recursions: every event here depends only on partial sums capped at `k`,
//! so no truncation of infinite series is involved.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process_models::{GaussianWindowModel, WeightProfile};
use crate::rng::{par_chunks, RandomStream};

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("beta must be positive and finite, got {beta}")))
    }
}

fn check_k(k: usize) -> Result<()> {
    if k >= 1 {
        Ok(())
    } else {
        Err(Error::Domain("k must be >= 1".into()))
    }
}

/// `P(Q ≥ k)` for `Q ~ Poisson(β)`.
pub fn poisson_tail(beta: f64, k: usize) -> Result<f64> {
    check_beta(beta)?;
    check_k(k)?;
    if k as f64 > beta {
        // direct upper sum; terms decrease geometrically from j = k
        let mut term = (-beta + k as f64 * beta.ln() - ln_factorial(k)).exp();
        let mut sum = 0.0;
        let mut j = k;
        while term > 1e-18 * sum || sum == 0.0 {
            sum += term;
            j += 1;
            term *= beta / j as f64;
            if term == 0.0 {
                break;
            }
        }
        Ok(sum)
    } else {
        let head: f64 = poisson_pmf(beta, k)[1..].iter().sum();
        Ok(-(-beta).exp_m1() - head)
    }
}

fn ln_factorial(k: usize) -> f64 {
    statrs::function::gamma::ln_gamma(k as f64 + 1.0)
}

/// `P(Q = j)` for `j < len`.
fn poisson_pmf(beta: f64, len: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(len);
    let mut term = (-beta).exp();
    for j in 0..len {
        p.push(term);
        term *= beta / (j + 1) as f64;
    }
    p
}

/// Probability that partial sums of i.i.d. increments satisfy `S_i ≥ i` for all
/// `i ≤ k`. `inc[j] = P(increment = j)` for `j < k`; `inc_pos` is `P(increment ≥ 1)`,
/// supplied separately so upper tails avoid cancellation against 1.
fn capped_partial_sums(inc: &[f64], inc_pos: f64, k: usize) -> f64 {
    // tail[j] = P(increment ≥ j) for j in 1..=k
    let mut tail = vec![0.0; k + 1];
    tail[1] = inc_pos;
    for j in 2..=k {
        tail[j] = (tail[j - 1] - inc[j - 1]).max(0.0);
    }
    // state s in 0..=k, s = k absorbing ("at least k")
    let mut dist = vec![0.0; k + 1];
    dist[0] = 1.0;
    for i in 1..=k {
        let mut next = vec![0.0; k + 1];
        for (s, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            if s == k {
                next[k] += p;
                continue;
            }
            for j in 0..k - s {
                next[s + j] += p * inc[j];
            }
            next[k] += p * tail[k - s];
        }
        for v in next.iter_mut().take(i) {
            *v = 0.0;
        }
        dist = next;
    }
    dist.iter().sum()
}

/// `P(Q_1 + … + Q_i ≥ i for 1 ≤ i ≤ k)` with `Q_j` i.i.d. Poisson(β).
pub fn fdr_limit_prob(beta: f64, k: usize) -> Result<f64> {
    check_beta(beta)?;
    check_k(k)?;
    Ok(capped_partial_sums(&poisson_pmf(beta, k), -(-beta).exp_m1(), k))
}

/// Limiting law of the within-cluster exceedance count, on sizes `1..=m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSizePmf {
    /// `probs[q − 1] = p_q`.
    pub probs: Vec<f64>,
    pub mu: f64,
}

impl ClusterSizePmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::Parameter("cluster-size probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("cluster-size pmf sums to {total}")));
        }
        let mu = probs.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum();
        Ok(Self { probs, mu })
    }

    /// Point mass at size 1.
    pub fn unit() -> Self {
        Self { probs: vec![1.0], mu: 1.0 }
    }

    pub fn prob(&self, q: usize) -> f64 {
        if q == 0 {
            0.0
        } else {
            self.probs.get(q - 1).copied().unwrap_or(0.0)
        }
    }

    /// Sizes with positive probability.
    pub fn as_map(&self) -> BTreeMap<usize, f64> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| (i + 1, p))
            .collect()
    }
}

/// `p_q = (θ_(q)^ρ − θ_(q+1)^ρ) / θ_(1)^ρ` over the nonzero weights ranked
/// in decreasing order, `θ_(m+1) = 0`.
pub fn cluster_size_pmf(weights: &WeightProfile, rho: f64) -> Result<ClusterSizePmf> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    if !weights.is_nonnegative() {
        return Err(Error::Domain("cluster-size law needs nonnegative weights".into()));
    }
    let mut w = weights.nonzero_values();
    w.sort_unstable_by(|a, b| b.total_cmp(a));
    let top = w[0];
    let pw: Vec<f64> = w.iter().map(|v| (v / top).powf(rho)).chain([0.0]).collect();
    let probs: Vec<f64> = pw.windows(2).map(|p| p[0] - p[1]).collect();
    ClusterSizePmf::new(probs)
}

/// `g[s] = P(S = s)` for `s < len`, `S` compound Poisson with rate `λ` and
/// jump law `pmf` (Panjer recursion).
fn compound_pmf(lambda: f64, pmf: &ClusterSizePmf, len: usize) -> Vec<f64> {
    let mut g = vec![0.0; len];
    if len == 0 {
        return g;
    }
    g[0] = (-lambda).exp();
    for s in 1..len {
        let m = pmf.probs.len().min(s);
        g[s] = lambda / s as f64
            * (1..=m).map(|j| j as f64 * pmf.probs[j - 1] * g[s - j]).sum::<f64>();
    }
    g
}

/// `P(Σ_{i≤Q} M_i ≥ k)`, `Q ~ Poisson(β/μ)`, `M_i` i.i.d. from `pmf`.
pub fn compound_tail(beta: f64, pmf: &ClusterSizePmf, k: usize) -> Result<f64> {
    check_beta(beta)?;
    check_k(k)?;
    let lambda = beta / pmf.mu;
    let g = compound_pmf(lambda, pmf, k);
    Ok((-(-lambda).exp_m1() - g[1..].iter().sum::<f64>()).max(0.0))
}

/// Step-down limit with compound-Poisson bins: each bin contributes an
/// independent `Σ_{ℓ≤Q_j} M_{jℓ}`, and all partial sums must reach their index.
pub fn compound_fdr_prob(beta: f64, pmf: &ClusterSizePmf, k: usize) -> Result<f64> {
    check_beta(beta)?;
    check_k(k)?;
    let lambda = beta / pmf.mu;
    Ok(capped_partial_sums(&compound_pmf(lambda, pmf, k), -(-lambda).exp_m1(), k))
}

/// `(Σ_k θ_k^{γ/(γ−1)})^{−(γ−1)}`: the coefficient `C'` in
/// `P(Σ θ_k ε_k > x) = exp(−C' x^γ (1 + o(1)))` for unit-rate Weibull-type tails.
pub fn ld_rate(weights: &WeightProfile, gamma: f64) -> Result<f64> {
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("rate formula needs gamma > 1, got {gamma}")));
    }
    if !weights.is_nonnegative() {
        return Err(Error::Domain("rate formula needs nonnegative weights".into()));
    }
    let p = gamma / (gamma - 1.0);
    let s: f64 = weights.nonzero_values().iter().map(|w| w.powf(p)).sum();
    Ok(s.powf(-(gamma - 1.0)))
}

/// Tallies of "exactly `k` of the `2r` neighbours exceed" with binomial errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiEstimate {
    pub probs: Vec<f64>,
    pub se: Vec<f64>,
    pub counts: Vec<u64>,
}

impl PiEstimate {
    fn from_counts(counts: Vec<u64>) -> Self {
        let n = counts.iter().sum::<u64>() as f64;
        let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let se = probs.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect();
        Self { probs, se, counts }
    }
}

/// `δ = (d / t)²`.
pub fn thm36_delta(d: f64, t: f64) -> f64 {
    (d / t).powi(2)
}

const PI_CHUNK: u64 = 1 << 16;

fn tally<F>(m: usize, budget: u64, stream: RandomStream, f: F) -> Result<PiEstimate>
where
    F: Fn(&mut crate::rng::StreamRng, &mut [f64]) -> usize + Sync,
{
    if budget == 0 {
        return Err(Error::Parameter("budget must be >= 1".into()));
    }
    let parts = par_chunks(budget, PI_CHUNK, stream, |rng, len| {
        let mut counts = vec![0u64; m + 1];
        let mut buf = vec![0.0; m];
        for _ in 0..len {
            counts[f(rng, &mut buf)] += 1;
        }
        counts
    });
    let counts = parts.into_iter().fold(vec![0u64; m + 1], |mut acc, c| {
        acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        acc
    });
    Ok(PiEstimate::from_counts(counts))
}

/// Monte Carlo evaluation of the limit `π_k⁰`: with `z ~ Exp(1)` and
/// `Z ~ N(0, Σ₁)`, the number of `i` with `Z_i > d c_{|i|} − z/d`.
pub fn thm36_reference_pi(
    model: &GaussianWindowModel,
    d: f64,
    budget: u64,
    stream: RandomStream,
) -> Result<PiEstimate> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Parameter(format!("d must be positive, got {d}")));
    }
    let levels: Vec<f64> = model
        .offsets()
        .iter()
        .map(|i| d * model.c_at(i.unsigned_abs() as usize))
        .collect();
    tally(2 * model.r, budget, stream, |rng, buf| {
        let z: f64 = Exp1.sample(rng);
        model.sample_sigma1(rng, buf);
        buf.iter().zip(&levels).filter(|(zi, l)| **zi > *l - z / d).count()
    })
}

/// Empirical `π̂_k`: draws the window given `X_0 > t` and counts neighbours above `t`.
pub fn thm36_empirical_pi(
    model: &GaussianWindowModel,
    t: f64,
    budget: u64,
    stream: RandomStream,
) -> Result<PiEstimate> {
    if !t.is_finite() {
        return Err(Error::Parameter(format!("t must be finite, got {t}")));
    }
    tally(2 * model.r, budget, stream, |rng, buf| {
        model.sample_into(t, rng, buf);
        buf.iter().filter(|&&x| x > t).count()
    })
}
