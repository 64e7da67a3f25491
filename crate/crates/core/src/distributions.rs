//! Disturbance distributions for the moving-average null model.
//!
//! Every continuous variant carries an exact survival function, its inverse,
//! a density and a seeded sampler. `WeibullTail` and `Pareto` live on the
//! nonnegative half-line so that nonnegative weights keep every term of a
//! moving average in the upper tail.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::numeric::solve_decreasing;
use crate::process_models::WeightProfile;
use crate::rng::{RandomStream, StreamRng};

/// Law of the i.i.d. disturbances `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ErrorModel {
    Gaussian { sd: f64 },
    StudentT { df: f64, scale: f64 },
    /// Survival `exp(-rate * x^gamma)` on `x >= 0`.
    WeibullTail { gamma: f64, rate: f64 },
    /// Survival `(x / xmin)^(-rho)` on `x >= xmin`.
    Pareto { rho: f64, xmin: f64 },
    /// Replays a fixed sequence (cyclically). Test stub only.
    Deterministic { values: Vec<f64> },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ErrorModel {
    pub fn gaussian(sd: f64) -> Result<Self> {
        Self::Gaussian { sd }.validated()
    }

    pub fn student_t(df: f64, scale: f64) -> Result<Self> {
        Self::StudentT { df, scale }.validated()
    }

    pub fn weibull_tail(gamma: f64, rate: f64) -> Result<Self> {
        Self::WeibullTail { gamma, rate }.validated()
    }

    pub fn pareto(rho: f64, xmin: f64) -> Result<Self> {
        Self::Pareto { rho, xmin }.validated()
    }

    pub fn deterministic(values: Vec<f64>) -> Result<Self> {
        Self::Deterministic { values }.validated()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian { sd } => positive("sd", *sd),
            Self::StudentT { df, scale } => {
                positive("df", *df)?;
                positive("scale", *scale)
            }
            Self::WeibullTail { gamma, rate } => {
                positive("gamma", *gamma)?;
                positive("rate", *rate)
            }
            Self::Pareto { rho, xmin } => {
                positive("rho", *rho)?;
                positive("xmin", *xmin)
            }
            Self::Deterministic { values } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    Err(Error::Parameter(
                        "deterministic sequence must be nonempty and finite".into(),
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn name(&self) -> String {
        match self {
            Self::Gaussian { sd } => format!("gaussian(sd={sd})"),
            Self::StudentT { df, scale } => format!("student-t(df={df}, scale={scale})"),
            Self::WeibullTail { gamma, rate } => format!("weibull-tail(gamma={gamma}, rate={rate})"),
            Self::Pareto { rho, xmin } => format!("pareto(rho={rho}, xmin={xmin})"),
            Self::Deterministic { values } => format!("deterministic(len={})", values.len()),
        }
    }

    fn unsupported(&self, op: &'static str) -> Error {
        Error::Unsupported {
            op,
            model: self.name(),
        }
    }

    /// Lower end of the support.
    pub fn support_min(&self) -> f64 {
        match self {
            Self::WeibullTail { .. } => 0.0,
            Self::Pareto { xmin, .. } => *xmin,
            _ => f64::NEG_INFINITY,
        }
    }

    /// Returns the same law with every draw multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        positive("scale factor", c)?;
        Ok(match self {
            Self::Gaussian { sd } => Self::Gaussian { sd: sd * c },
            Self::StudentT { df, scale } => Self::StudentT {
                df: *df,
                scale: scale * c,
            },
            Self::WeibullTail { gamma, rate } => Self::WeibullTail {
                gamma: *gamma,
                rate: rate * c.powf(-gamma),
            },
            Self::Pareto { rho, xmin } => Self::Pareto {
                rho: *rho,
                xmin: xmin * c,
            },
            Self::Deterministic { values } => Self::Deterministic {
                values: values.iter().map(|v| v * c).collect(),
            },
        })
    }
}

/// `P(ε > x)`.
pub fn survival(model: &ErrorModel, x: f64) -> Result<f64> {
    Ok(match model {
        ErrorModel::Gaussian { sd } => 0.5 * erfc(x / (sd * SQRT_2)),
        ErrorModel::StudentT { df, scale } => {
            let y = x / scale;
            let upper = 0.5 * beta_reg(0.5 * df, 0.5, df / (df + y * y));
            if y >= 0.0 {
                upper
            } else {
                1.0 - upper
            }
        }
        ErrorModel::WeibullTail { gamma, rate } => {
            if x <= 0.0 {
                1.0
            } else {
                (-rate * x.powf(*gamma)).exp()
            }
        }
        ErrorModel::Pareto { rho, xmin } => {
            if x <= *xmin {
                1.0
            } else {
                (x / xmin).powf(-rho)
            }
        }
        ErrorModel::Deterministic { .. } => return Err(model.unsupported("survival")),
    })
}

/// Probability density at `x`.
pub fn density(model: &ErrorModel, x: f64) -> Result<f64> {
    Ok(match model {
        ErrorModel::Gaussian { sd } => {
            let z = x / sd;
            (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
        }
        ErrorModel::StudentT { df, scale } => {
            let y = x / scale;
            let ln_norm = ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * PI).ln();
            (ln_norm - 0.5 * (df + 1.0) * (y * y / df).ln_1p()).exp() / scale
        }
        ErrorModel::WeibullTail { gamma, rate } => {
            if x < 0.0 {
                0.0
            } else {
                rate * gamma * x.powf(gamma - 1.0) * (-rate * x.powf(*gamma)).exp()
            }
        }
        ErrorModel::Pareto { rho, xmin } => {
            if x < *xmin {
                0.0
            } else {
                rho / xmin * (x / xmin).powf(-rho - 1.0)
            }
        }
        ErrorModel::Deterministic { .. } => return Err(model.unsupported("density")),
    })
}

/// Inverse of [`survival`]: the `x` with `P(ε > x) = s`, for `0 < s < 1`.
pub fn quantile_survival(model: &ErrorModel, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("survival level must lie in (0, 1), got {s}")));
    }
    match model {
        ErrorModel::Gaussian { sd } => {
            let mut z = SQRT_2 * erfc_inv(2.0 * s);
            let unit = ErrorModel::Gaussian { sd: 1.0 };
            for _ in 0..3 {
                let f = density(&unit, z)?;
                if f <= 0.0 {
                    break;
                }
                z += (survival(&unit, z)? - s) / f;
            }
            Ok(z * sd)
        }
        ErrorModel::StudentT { df, scale } => {
            if s == 0.5 {
                return Ok(0.0);
            }
            let unit = ErrorModel::StudentT { df: *df, scale: 1.0 };
            let upper = s.min(1.0 - s);
            let mut hi = 1.0;
            while survival(&unit, hi)? > upper {
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::Numerical("student-t quantile bracket overflow".into()));
                }
            }
            let ln_target = upper.ln();
            let z = solve_decreasing(
                |x| survival(&unit, x).map(f64::ln).unwrap_or(f64::NAN) - ln_target,
                0.0,
                hi,
                1e-15,
            )?;
            Ok(if s < 0.5 { z * scale } else { -z * scale })
        }
        ErrorModel::WeibullTail { gamma, rate } => Ok((-s.ln() / rate).powf(1.0 / gamma)),
        ErrorModel::Pareto { rho, xmin } => Ok(xmin * s.powf(-1.0 / rho)),
        ErrorModel::Deterministic { .. } => Err(model.unsupported("quantile_survival")),
    }
}

/// `Var(ε)`.
pub fn variance(model: &ErrorModel) -> Result<f64> {
    match model {
        ErrorModel::Gaussian { sd } => Ok(sd * sd),
        ErrorModel::StudentT { df, scale } => {
            if *df <= 2.0 {
                Err(Error::InfiniteVariance(model.name()))
            } else {
                Ok(scale * scale * df / (df - 2.0))
            }
        }
        ErrorModel::WeibullTail { gamma, rate } => {
            let m1 = gamma_fn(1.0 + 1.0 / gamma);
            let m2 = gamma_fn(1.0 + 2.0 / gamma);
            Ok(rate.powf(-2.0 / gamma) * (m2 - m1 * m1))
        }
        ErrorModel::Pareto { rho, xmin } => {
            if *rho <= 2.0 {
                Err(Error::InfiniteVariance(model.name()))
            } else {
                Ok(xmin * xmin * rho / ((rho - 1.0) * (rho - 1.0) * (rho - 2.0)))
            }
        }
        ErrorModel::Deterministic { .. } => Err(model.unsupported("variance")),
    }
}

fn gamma_fn(x: f64) -> f64 {
    if x < 170.0 {
        gamma(x)
    } else {
        ln_gamma(x).exp()
    }
}

/// Rescales `weights` so that `Var(Σ θ'_k ε_k) = 1`.
pub fn unit_variance_scale(weights: &WeightProfile, model: &ErrorModel) -> Result<WeightProfile> {
    let var = variance(model)?;
    let c = 1.0 / (var * weights.sum_squares()).sqrt();
    Ok(weights.scaled(c))
}

/// Sampler for a continuous [`ErrorModel`] that works with any generator.
#[derive(Debug, Clone)]
pub enum ContinuousSampler {
    Gaussian { sd: f64 },
    StudentT { dist: rand_distr::StudentT<f64>, scale: f64 },
    WeibullTail { inv_gamma: f64, inv_rate: f64 },
    Pareto { neg_inv_rho: f64, xmin: f64 },
}

impl ContinuousSampler {
    pub fn new(model: &ErrorModel) -> Result<Self> {
        model.validate()?;
        Ok(match model {
            ErrorModel::Gaussian { sd } => Self::Gaussian { sd: *sd },
            ErrorModel::StudentT { df, scale } => Self::StudentT {
                dist: rand_distr::StudentT::new(*df)
                    .map_err(|e| Error::Parameter(format!("student-t: {e}")))?,
                scale: *scale,
            },
            ErrorModel::WeibullTail { gamma, rate } => Self::WeibullTail {
                inv_gamma: 1.0 / gamma,
                inv_rate: 1.0 / rate,
            },
            ErrorModel::Pareto { rho, xmin } => Self::Pareto {
                neg_inv_rho: -1.0 / rho,
                xmin: *xmin,
            },
            ErrorModel::Deterministic { .. } => return Err(model.unsupported("continuous sampling")),
        })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian { sd } => {
                let z: f64 = rng.sample(StandardNormal);
                sd * z
            }
            Self::StudentT { dist, scale } => scale * dist.sample(rng),
            Self::WeibullTail { inv_gamma, inv_rate } => {
                let e: f64 = rng.sample(Exp1);
                (e * inv_rate).powf(*inv_gamma)
            }
            Self::Pareto { neg_inv_rho, xmin } => {
                // open interval (0, 1]: 1 - U with U in [0, 1)
                let u: f64 = 1.0 - rng.random::<f64>();
                xmin * u.powf(*neg_inv_rho)
            }
        }
    }
}

/// Stream of i.i.d. disturbances bound to a [`RandomStream`].
#[derive(Debug, Clone)]
pub struct ErrorDraws {
    inner: DrawSource,
}

#[derive(Debug, Clone)]
enum DrawSource {
    Random { sampler: ContinuousSampler, rng: StreamRng },
    Replay { values: Vec<f64>, pos: usize },
}

impl ErrorDraws {
    pub fn fill(&mut self, buf: &mut [f64]) {
        match &mut self.inner {
            DrawSource::Random { sampler, rng } => {
                for v in buf.iter_mut() {
                    *v = sampler.sample(rng);
                }
            }
            DrawSource::Replay { values, pos } => {
                for v in buf.iter_mut() {
                    *v = values[*pos];
                    *pos = (*pos + 1) % values.len();
                }
            }
        }
    }
}

impl Iterator for ErrorDraws {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let mut v = [0.0];
        self.fill(&mut v);
        Some(v[0])
    }
}

/// Infinite sequence of draws from `model`. Identical `(model, stream)` pairs give
/// bitwise-identical sequences; the deterministic stub ignores the stream.
pub fn draw(model: &ErrorModel, stream: RandomStream) -> Result<ErrorDraws> {
    let inner = match model {
        ErrorModel::Deterministic { values } => {
            model.validate()?;
            DrawSource::Replay {
                values: values.clone(),
                pos: 0,
            }
        }
        _ => DrawSource::Random {
            sampler: ContinuousSampler::new(model)?,
            rng: stream.rng(),
        },
    };
    Ok(ErrorDraws { inner })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn continuous_models() -> Vec<ErrorModel> {
        vec![
            ErrorModel::gaussian(1.0).unwrap(),
            ErrorModel::gaussian(2.5).unwrap(),
            ErrorModel::student_t(1.0, 1.0).unwrap(),
            ErrorModel::student_t(3.0, 0.7).unwrap(),
            ErrorModel::student_t(30.0, 1.0).unwrap(),
            ErrorModel::weibull_tail(0.5, 1.0).unwrap(),
            ErrorModel::weibull_tail(2.0, 3.0).unwrap(),
            ErrorModel::pareto(2.0, 1.0).unwrap(),
            ErrorModel::pareto(0.8, 3.0).unwrap(),
        ]
    }

    #[test]
    fn survival_examples() {
        let g = ErrorModel::gaussian(1.0).unwrap();
        assert_eq!(survival(&g, 0.0).unwrap(), 0.5);
        let p = ErrorModel::pareto(2.0, 1.0).unwrap();
        assert_relative_eq!(survival(&p, 10.0).unwrap(), 0.01, max_relative = 1e-14);
        let w = ErrorModel::weibull_tail(1.0, 1.0).unwrap();
        assert_relative_eq!(survival(&w, 2f64.ln()).unwrap(), 0.5, max_relative = 1e-14);
        // Cauchy: 1/2 - arctan(1)/pi
        let c = ErrorModel::student_t(1.0, 1.0).unwrap();
        let oracle = 0.5 - 1f64.atan() / PI;
        assert_relative_eq!(survival(&c, 1.0).unwrap(), oracle, max_relative = 1e-12);
        assert_relative_eq!(oracle, 0.25, max_relative = 1e-15);
    }

    #[test]
    fn student_t_tail_matches_closed_forms() {
        let c = ErrorModel::student_t(1.0, 1.0).unwrap();
        let t2 = ErrorModel::student_t(2.0, 1.0).unwrap();
        for &x in &[-3.0, 0.3, 2.0, 40.0, 1e4] {
            let cauchy = 0.5 - f64::atan(x) / PI;
            assert_relative_eq!(survival(&c, x).unwrap(), cauchy, max_relative = 1e-10);
            let two = 0.5 * (1.0 - x / (x * x + 2.0).sqrt());
            assert_relative_eq!(survival(&t2, x).unwrap(), two, max_relative = 1e-8);
        }
    }

    #[test]
    fn survival_is_monotone_and_bounded() {
        for m in continuous_models() {
            let mut prev = 1.0;
            for i in -200..=400 {
                let x = i as f64 * 0.1;
                let s = survival(&m, x).unwrap();
                assert!((0.0..=1.0).contains(&s), "{m:?} {x} {s}");
                assert!(s <= prev + 1e-15, "{m:?} not monotone at {x}");
                prev = s;
            }
        }
    }

    #[test]
    fn deterministic_is_unsupported() {
        let d = ErrorModel::deterministic(vec![1.0, 2.0]).unwrap();
        assert!(matches!(survival(&d, 0.0), Err(Error::Unsupported { .. })));
        assert!(matches!(quantile_survival(&d, 0.5), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn quantile_examples() {
        let p = ErrorModel::pareto(2.0, 1.0).unwrap();
        assert_relative_eq!(quantile_survival(&p, 0.01).unwrap(), 10.0, max_relative = 1e-12);
        let g = ErrorModel::gaussian(1.0).unwrap();
        assert!(quantile_survival(&g, 0.5).unwrap().abs() < 1e-14);
        // high-precision oracle: inverse erfc at 2 * 5.12933e-6 gives 4.41213...
        let t = quantile_survival(&g, 5.12933e-6).unwrap();
        assert!((t - 4.412).abs() < 1e-3, "{t}");
    }

    #[test]
    fn quantile_domain_errors() {
        let g = ErrorModel::gaussian(1.0).unwrap();
        for s in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(quantile_survival(&g, s), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn quantile_round_trips() {
        for m in continuous_models() {
            for &s in &[1e-1, 1e-3, 1e-6, 0.7, 0.999] {
                let x = quantile_survival(&m, s).unwrap();
                let back = survival(&m, x).unwrap();
                assert_relative_eq!(back, s, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn density_integrates_to_survival() {
        for m in continuous_models() {
            let a = quantile_survival(&m, 0.3).unwrap();
            let b = quantile_survival(&m, 0.01).unwrap();
            let mass = crate::numeric::integrate(|x| density(&m, x).unwrap(), a, b, 1e-13, 1e-11);
            assert_relative_eq!(mass, 0.29, max_relative = 1e-8);
        }
    }

    #[test]
    fn variance_examples() {
        assert_eq!(variance(&ErrorModel::gaussian(1.0).unwrap()).unwrap(), 1.0);
        let t4 = ErrorModel::student_t(4.0, 1.0).unwrap();
        assert_relative_eq!(variance(&t4).unwrap(), 2.0, max_relative = 1e-14);
        // numerical second moment as the oracle: int x^2 f(x) dx
        let m2 = 2.0
            * crate::numeric::integrate(|x| x * x * density(&t4, x).unwrap(), 0.0, 1e3, 1e-12, 1e-12)
            + 2.0 * crate::numeric::integrate(
                |u| {
                    let x = 1.0 / u;
                    x * x * density(&t4, x).unwrap() / (u * u)
                },
                1e-12,
                1e-3,
                1e-14,
                1e-12,
            );
        assert!((m2 - 2.0).abs() < 1e-6, "{m2}");
        assert!(matches!(
            variance(&ErrorModel::student_t(2.0, 1.0).unwrap()),
            Err(Error::InfiniteVariance(_))
        ));
        assert!(matches!(
            variance(&ErrorModel::pareto(2.0, 1.0).unwrap()),
            Err(Error::InfiniteVariance(_))
        ));
    }

    #[test]
    fn weibull_variance_matches_numerical_moments() {
        for (g, c) in [(2.0, 1.0), (0.5, 1.0), (1.5, 0.3)] {
            let m = ErrorModel::weibull_tail(g, c).unwrap();
            // E[X^k] = int k x^(k-1) S(x) dx
            let upper = quantile_survival(&m, 1e-300).unwrap();
            let mut cuts = vec![0.0];
            cuts.extend((0..).map(|e| 10f64.powi(e)).take_while(|&x| x < upper));
            cuts.push(upper);
            let moment = |k: i32| {
                cuts.windows(2)
                    .map(|w| {
                        crate::numeric::integrate(
                            |x| k as f64 * x.powi(k - 1) * survival(&m, x).unwrap(),
                            w[0],
                            w[1],
                            1e-14,
                            1e-13,
                        )
                    })
                    .sum::<f64>()
            };
            let (m1, m2) = (moment(1), moment(2));
            assert_relative_eq!(variance(&m).unwrap(), m2 - m1 * m1, max_relative = 1e-8);
        }
    }

    #[test]
    fn unit_variance_scale_examples() {
        let g = ErrorModel::gaussian(1.0).unwrap();
        let w = unit_variance_scale(&WeightProfile::equal(4), &g).unwrap();
        for &(_, v) in w.entries() {
            assert_relative_eq!(v, 0.5, max_relative = 1e-14);
        }
        let t4 = ErrorModel::student_t(4.0, 1.0).unwrap();
        let w = unit_variance_scale(&WeightProfile::equal(3), &t4).unwrap();
        for &(_, v) in w.entries() {
            assert_relative_eq!(v, 1.0 / 6f64.sqrt(), max_relative = 1e-14);
        }
        let wb = ErrorModel::weibull_tail(2.0, 1.0).unwrap();
        let w = unit_variance_scale(&WeightProfile::equal(1), &wb).unwrap();
        let m1 = crate::numeric::integrate(|x| (-x * x).exp(), 0.0, 40.0, 1e-15, 1e-14);
        let m2 = crate::numeric::integrate(|x| 2.0 * x * (-x * x).exp(), 0.0, 40.0, 1e-15, 1e-14);
        assert_relative_eq!(w.entries()[0].1, 1.0 / (m2 - m1 * m1).sqrt(), max_relative = 1e-10);
        assert!(unit_variance_scale(&WeightProfile::equal(2), &ErrorModel::student_t(2.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn draws_are_reproducible() {
        let g = ErrorModel::gaussian(1.0).unwrap();
        let s = RandomStream::new(7, 0);
        let a: Vec<f64> = draw(&g, s).unwrap().take(100).collect();
        let b: Vec<f64> = draw(&g, s).unwrap().take(100).collect();
        assert_eq!(a, b);
        let c: Vec<f64> = draw(&g, RandomStream::new(7, 1)).unwrap().take(100).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn deterministic_stub_replays() {
        let d = ErrorModel::deterministic(vec![1.0, 2.0, 3.0]).unwrap();
        let v: Vec<f64> = draw(&d, RandomStream::new(0, 0)).unwrap().take(5).collect();
        assert_eq!(v, vec![1.0, 2.0, 3.0, 1.0, 2.0]);
    }

    #[test]
    fn weibull_half_mean() {
        // int_0^inf exp(-sqrt x) dx = 2 Gamma(2) = 2
        let m = ErrorModel::weibull_tail(0.5, 1.0).unwrap();
        let n = 1_000_000;
        let mean = draw(&m, RandomStream::new(11, 3)).unwrap().take(n).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn gaussian_unit_variance() {
        let m = ErrorModel::gaussian(1.0).unwrap();
        let n = 1_000_000;
        let xs: Vec<f64> = draw(&m, RandomStream::new(5, 0)).unwrap().take(n).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 0.01, "{var}");
    }

    #[test]
    fn scaled_model_matches_scaled_draws() {
        for m in continuous_models() {
            let s = m.scaled(2.0).unwrap();
            let x = quantile_survival(&m, 0.01).unwrap();
            assert_relative_eq!(survival(&s, 2.0 * x).unwrap(), 0.01, max_relative = 1e-9);
        }
    }
}
