//! Critical values and threshold ladders.
//!
//! A ladder `t_1 > t_2 > … > t_k` puts marginal survival `iβ/ν` at `t_i`,
//! with `β = −log(1 − α)`. Marginals come either from a closed form
//! ([`AnalyticMarginal`]) or from a brute-force Monte Carlo quantile over
//! i.i.d. draws of one statistic.

use serde::{Deserialize, Serialize};

use crate::distributions::{quantile_survival, survival, ContinuousSampler, ErrorModel};
use crate::error::{Error, Result};
use crate::numeric::{integrate, solve_decreasing};
use crate::process_models::{t_statistic, WeightProfile};
use crate::rng::{par_chunks, RandomStream, StreamRng};

/// `β = −log(1 − α)`.
pub fn beta_from_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(-(-alpha).ln_1p())
}

/// Generator of one null statistic.
pub trait StatSampler: Send + Sync {
    fn sample(&self, rng: &mut StreamRng) -> f64;
}

impl<F> StatSampler for F
where
    F: Fn(&mut StreamRng) -> f64 + Send + Sync,
{
    fn sample(&self, rng: &mut StreamRng) -> f64 {
        self(rng)
    }
}

/// One draw of `Σ_k θ_k ε_k` with fresh disturbances.
#[derive(Debug, Clone)]
pub struct MaMarginalSampler {
    weights: Vec<f64>,
    sampler: ContinuousSampler,
}

impl MaMarginalSampler {
    pub fn new(weights: &WeightProfile, model: &ErrorModel) -> Result<Self> {
        Ok(Self {
            weights: weights.nonzero_values(),
            sampler: ContinuousSampler::new(model)?,
        })
    }
}

impl StatSampler for MaMarginalSampler {
    fn sample(&self, rng: &mut StreamRng) -> f64 {
        self.weights.iter().map(|w| w * self.sampler.sample(rng)).sum()
    }
}

/// One t-statistic computed from `n` independent moving-average values.
#[derive(Debug, Clone)]
pub struct TStatSampler {
    inner: MaMarginalSampler,
    n: usize,
}

impl TStatSampler {
    pub fn new(weights: &WeightProfile, model: &ErrorModel, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!("sample size n must be >= 2, got {n}")));
        }
        Ok(Self {
            inner: MaMarginalSampler::new(weights, model)?,
            n,
        })
    }
}

impl StatSampler for TStatSampler {
    fn sample(&self, rng: &mut StreamRng) -> f64 {
        let mut buf = [0.0f64; 64];
        let mut heap;
        let row: &mut [f64] = if self.n <= 64 {
            &mut buf[..self.n]
        } else {
            heap = vec![0.0; self.n];
            &mut heap[..]
        };
        for v in row.iter_mut() {
            *v = self.inner.sample(rng);
        }
        t_statistic(row).unwrap_or(f64::NEG_INFINITY)
    }
}

/// Point estimate of a marginal upper quantile with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub t: f64,
    pub se: f64,
}

/// Draws per independent sub-stream in Monte Carlo calibration.
const MC_CHUNK: u64 = 1 << 20;

fn chunk_top(sampler: &dyn StatSampler, rng: &mut StreamRng, len: u64, keep: usize) -> Vec<f64> {
    let mut buf: Vec<f64> = Vec::with_capacity(2 * keep + 1);
    let mut cutoff = f64::NEG_INFINITY;
    let desc = |a: &f64, b: &f64| b.total_cmp(a);
    for _ in 0..len {
        let x = sampler.sample(rng);
        if x >= cutoff {
            buf.push(x);
            if buf.len() >= 2 * keep {
                buf.select_nth_unstable_by(keep - 1, desc);
                buf.truncate(keep);
                cutoff = buf.iter().copied().fold(f64::INFINITY, f64::min);
            }
        }
    }
    buf.sort_unstable_by(desc);
    buf.truncate(keep);
    buf
}

struct Plan {
    /// rank from the top of the lower interpolation point
    rank: usize,
    frac: f64,
    band: usize,
}

fn plan(n: u64, s: f64) -> Plan {
    // type-7: h = (n − 1) p on ascending order statistics x_0..x_{n−1}
    let h = (n - 1) as f64 * (1.0 - s);
    let lo = h.floor();
    let rank = (n - 1 - lo as u64) as usize;
    let band = ((rank as f64).sqrt().floor() as usize).clamp(1, rank.max(2) - 1);
    Plan {
        rank,
        frac: h - lo,
        band,
    }
}

/// Empirical `(1 − s)`-quantiles of `budget` i.i.d. draws for every level `s`,
/// from a single pass. Only the upper order statistics are retained; the
/// result is a deterministic function of `(sampler, budget, stream)`.
///
/// The standard error uses the order-statistic asymptotic
/// `sqrt(s(1−s)/n) / f̂`, with the density estimated from the spacing of
/// order statistics `±m` ranks around the quantile, `m ≈ sqrt(n s)`.
pub fn mc_marginal_quantiles(
    sampler: &dyn StatSampler,
    levels: &[f64],
    budget: u64,
    stream: RandomStream,
) -> Result<Vec<QuantileEstimate>> {
    for &s in levels {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain(format!("survival level must lie in (0, 1), got {s}")));
        }
        if (budget as f64) * s < 100.0 {
            return Err(Error::InsufficientTailMass {
                budget,
                survival: s,
                required: 100.0,
            });
        }
    }
    let plans: Vec<Plan> = levels.iter().map(|&s| plan(budget, s)).collect();
    let keep = plans.iter().map(|p| p.rank + p.band + 1).max().unwrap_or(1);
    let chunks = par_chunks(budget, MC_CHUNK, stream, |rng, len| {
        chunk_top(sampler, rng, len, keep)
    });
    let mut top: Vec<f64> = chunks.into_iter().flatten().collect();
    top.sort_unstable_by(|a, b| b.total_cmp(a));
    top.truncate(keep);

    let n = budget as f64;
    Ok(levels
        .iter()
        .zip(&plans)
        .map(|(&s, p)| {
            let lower = top[p.rank];
            let upper = top[p.rank - 1];
            let t = lower + p.frac * (upper - lower);
            let spread = top[p.rank - p.band] - top[p.rank + p.band];
            let se = spread * (n * s * (1.0 - s)).sqrt() / (2.0 * p.band as f64);
            QuantileEstimate { t, se }
        })
        .collect())
}

/// Single-level form of [`mc_marginal_quantiles`].
pub fn mc_marginal_quantile(
    sampler: &dyn StatSampler,
    s: f64,
    budget: u64,
    stream: RandomStream,
) -> Result<QuantileEstimate> {
    Ok(mc_marginal_quantiles(sampler, &[s], budget, stream)?[0])
}

/// Closed-form or numerically exact marginal law of one statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnalyticMarginal {
    /// The statistic is itself distributed as `model`.
    Model { model: ErrorModel },
    /// `a ε_1 + b ε_2` for `a, b > 0` and a positive-support `model`, evaluated
    /// by one-dimensional quadrature.
    TwoTerm { a: f64, b: f64, model: ErrorModel },
}

impl AnalyticMarginal {
    /// Marginal of `Σ θ_k ε_k`, when one is available without simulation.
    pub fn for_weights(weights: &WeightProfile, model: &ErrorModel) -> Result<Self> {
        let nz = weights.nonzero_values();
        let unsupported = || Error::Unsupported {
            op: "analytic marginal",
            model: format!("{} with {} nonzero weights", model.name(), nz.len()),
        };
        match model {
            ErrorModel::Gaussian { sd } => {
                let norm = nz.iter().map(|w| w * w).sum::<f64>().sqrt();
                Ok(Self::Model {
                    model: ErrorModel::gaussian(sd * norm)?,
                })
            }
            ErrorModel::StudentT { .. } if nz.len() == 1 => Ok(Self::Model {
                model: model.scaled(nz[0].abs())?,
            }),
            ErrorModel::WeibullTail { .. } | ErrorModel::Pareto { .. }
                if nz.iter().all(|&w| w > 0.0) =>
            {
                match nz.as_slice() {
                    [w] => Ok(Self::Model {
                        model: model.scaled(*w)?,
                    }),
                    [a, b] => Ok(Self::TwoTerm {
                        a: *a,
                        b: *b,
                        model: model.clone(),
                    }),
                    _ => Err(unsupported()),
                }
            }
            _ => Err(unsupported()),
        }
    }

    pub fn survival(&self, x: f64) -> Result<f64> {
        match self {
            Self::Model { model } => survival(model, x),
            Self::TwoTerm { a, b, model } => two_term_survival(*a, *b, model, x),
        }
    }

    pub fn quantile_survival(&self, s: f64) -> Result<f64> {
        match self {
            Self::Model { model } => quantile_survival(model, s),
            Self::TwoTerm { a, b, model } => {
                if !(s > 0.0 && s < 1.0) {
                    return Err(Error::Domain(format!(
                        "survival level must lie in (0, 1), got {s}"
                    )));
                }
                let lo = (a + b) * model.support_min();
                let hi = (a + b) * quantile_survival(model, 0.5 * s)?;
                let ln_s = s.ln();
                solve_decreasing(
                    |x| {
                        two_term_survival(*a, *b, model, x)
                            .map(f64::ln)
                            .unwrap_or(f64::NAN)
                            - ln_s
                    },
                    lo,
                    hi,
                    1e-13,
                )
            }
        }
    }
}

/// `P(a ε_1 + b ε_2 > x)` for a positive-support law.
///
/// Writes the probability as `u* + ∫_{u*}^{1} S((x − b Q(u)) / a) du` with `Q` the
/// survival quantile and `u* = S((x − aL)/b)`, then integrates in `v = −ln u`.
fn two_term_survival(a: f64, b: f64, model: &ErrorModel, x: f64) -> Result<f64> {
    let lower = model.support_min();
    if !(lower.is_finite() && a > 0.0 && b > 0.0) {
        return Err(Error::Unsupported {
            op: "two-term survival",
            model: model.name(),
        });
    }
    if x <= (a + b) * lower {
        return Ok(1.0);
    }
    let e_star = (x - a * lower) / b;
    let u_star = survival(model, e_star)?;
    let v_star = -u_star.ln();
    let q = |u: f64| {
        if u >= 1.0 {
            lower
        } else {
            quantile_survival(model, u).unwrap_or(lower)
        }
    };
    let inner = |v: f64| {
        let u = (-v).exp();
        survival(model, (x - b * q(u)) / a).unwrap_or(1.0) * u
    };
    let floor = survival(model, (x - b * lower) / a)?.max(u_star);
    let body = integrate(inner, 0.0, v_star, 1e-13 * floor, 1e-12);
    Ok((u_star + body).min(1.0))
}

/// How `t_1` is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LadderConvention {
    /// survival `iβ/ν` at every rung
    #[default]
    BetaOverNu,
    /// survival `1 − (1 − α)^{1/ν}` at `t_1`, `iβ/ν` beyond
    Sidak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CalibrationMethod {
    Analytic,
    MonteCarlo { budget: u64, seed: u64, stream_index: u64 },
}

/// Source of the marginal null quantile.
pub enum MarginalSource<'a> {
    Analytic(AnalyticMarginal),
    MonteCarlo {
        sampler: &'a dyn StatSampler,
        budget: u64,
        stream: RandomStream,
    },
}

/// Calibrated critical values `t_1 > … > t_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdLadder {
    pub thresholds: Vec<f64>,
    pub beta: f64,
    pub nu: u64,
    pub method: CalibrationMethod,
    pub convention: LadderConvention,
    /// Standard errors (zero for analytic marginals).
    pub se: Vec<f64>,
}

impl ThresholdLadder {
    /// Ladder with given thresholds, for use with the procedures directly.
    pub fn from_thresholds(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::Parameter("ladder needs at least one threshold".into()));
        }
        if thresholds.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::Parameter("thresholds must be strictly decreasing".into()));
        }
        let k = thresholds.len();
        Ok(Self {
            thresholds,
            beta: f64::NAN,
            nu: 0,
            method: CalibrationMethod::Analytic,
            convention: LadderConvention::BetaOverNu,
            se: vec![0.0; k],
        })
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// `t_1`.
    pub fn first(&self) -> f64 {
        self.thresholds[0]
    }
}

/// Target survival probabilities of each rung.
pub fn ladder_levels(alpha: f64, nu: u64, k: usize, convention: LadderConvention) -> Result<Vec<f64>> {
    let beta = beta_from_alpha(alpha)?;
    if k == 0 || nu == 0 {
        return Err(Error::Domain("ladder needs k >= 1 and nu >= 1".into()));
    }
    let nuf = nu as f64;
    if k as f64 * beta / nuf >= 1.0 {
        return Err(Error::Domain(format!(
            "k beta / nu = {} must be < 1",
            k as f64 * beta / nuf
        )));
    }
    Ok((1..=k)
        .map(|i| match (convention, i) {
            (LadderConvention::Sidak, 1) => -((-alpha).ln_1p() / nuf).exp_m1(),
            _ => i as f64 * beta / nuf,
        })
        .collect())
}

/// Ladders for several `ν` from one marginal; Monte Carlo sources are sampled once.
pub fn threshold_ladders(
    marginal: &MarginalSource<'_>,
    alpha: f64,
    nus: &[u64],
    k: usize,
    convention: LadderConvention,
) -> Result<Vec<ThresholdLadder>> {
    let beta = beta_from_alpha(alpha)?;
    let levels: Vec<Vec<f64>> = nus
        .iter()
        .map(|&nu| ladder_levels(alpha, nu, k, convention))
        .collect::<Result<_>>()?;
    let (estimates, method): (Vec<Vec<QuantileEstimate>>, CalibrationMethod) = match marginal {
        MarginalSource::Analytic(m) => (
            levels
                .iter()
                .map(|ls| {
                    ls.iter()
                        .map(|&s| Ok(QuantileEstimate { t: m.quantile_survival(s)?, se: 0.0 }))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?,
            CalibrationMethod::Analytic,
        ),
        MarginalSource::MonteCarlo {
            sampler,
            budget,
            stream,
        } => {
            let flat: Vec<f64> = levels.iter().flatten().copied().collect();
            let est = mc_marginal_quantiles(*sampler, &flat, *budget, *stream)?;
            (
                est.chunks(k).map(|c| c.to_vec()).collect(),
                CalibrationMethod::MonteCarlo {
                    budget: *budget,
                    seed: stream.master_seed,
                    stream_index: stream.stream_index,
                },
            )
        }
    };
    nus.iter()
        .zip(estimates)
        .map(|(&nu, est)| {
            let thresholds: Vec<f64> = est.iter().map(|e| e.t).collect();
            if thresholds.windows(2).any(|w| !(w[0] > w[1])) {
                return Err(Error::Numerical(format!(
                    "calibrated ladder is not strictly decreasing: {thresholds:?}"
                )));
            }
            Ok(ThresholdLadder {
                thresholds,
                beta,
                nu,
                method,
                convention,
                se: est.iter().map(|e| e.se).collect(),
            })
        })
        .collect()
}

/// Ladder `t_1 > … > t_k` with `P_0(X > t_i) = iβ/ν`.
pub fn threshold_ladder(
    marginal: &MarginalSource<'_>,
    alpha: f64,
    nu: u64,
    k: usize,
    convention: LadderConvention,
) -> Result<ThresholdLadder> {
    Ok(threshold_ladders(marginal, alpha, &[nu], k, convention)?.remove(0))
}
