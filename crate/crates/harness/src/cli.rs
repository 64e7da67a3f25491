//! Command-line interface. Every command prints JSON to stdout.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use clusterlab_core::calibration::{
    beta_from_alpha, mc_marginal_quantile, AnalyticMarginal, LadderConvention, MaMarginalSampler,
};
use clusterlab_core::cluster_analysis::{conditional_window_histogram, Anchor, MaSeries};
use clusterlab_core::distributions::{unit_variance_scale, ErrorModel};
use clusterlab_core::limit_laws::{
    cluster_size_pmf, compound_fdr_prob, compound_tail, fdr_limit_prob, ld_rate, poisson_tail,
    thm36_empirical_pi, thm36_reference_pi, ClusterSizePmf,
};
use clusterlab_core::process_models::{build_window_model, WeightProfile};
use clusterlab_core::rng::RandomStream;
use serde_json::{json, Value};

use crate::config::{CalibrationChoice, Df, ExperimentSpec, ModelKind};
use crate::error::HarnessError;
use crate::figures::{reproduce_figure, write_meta, Figure, Preset};
use crate::grid::{calibrate_ladders, run_grid};
use crate::report::write_csv_file;

#[derive(Debug, Parser)]
#[command(name = "clusterlab", version, about = "Exceedance clustering experiments for many dependent tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate a threshold ladder for one model cell
    Calibrate(CalibrateArgs),
    /// Run an experiment grid from a JSON config
    Run(RunArgs),
    /// Histogram of exceedance counts in windows around exceedances
    Clusters(ClustersArgs),
    /// Limiting probabilities and reference values
    Limits {
        #[command(subcommand)]
        which: LimitCommand,
    },
    /// Regenerate a clustering figure (CSV + SVG per panel)
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Model1,
    Model2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConventionArg {
    BetaOverNu,
    Sidak,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Auto,
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AnchorArg {
    EveryExceedance,
    ClusterStart,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, value_enum, default_value = "model1")]
    pub model: ModelArg,
    /// Columns per row for model2
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Number of equal nonzero weights
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    /// Explicit weights at offsets 0.. (overrides --r)
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Student t degrees of freedom, or "inf" for Gaussian
    #[arg(long, default_value = "inf")]
    pub df: Df,
    #[arg(long, value_delimiter = ',', default_value = "10000")]
    pub nu: Vec<u64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 200_000_000)]
    pub budget: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "beta-over-nu")]
    pub convention: ConventionArg,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides master_seed from the config
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ClustersArgs {
    /// Weights at offsets 0..
    #[arg(long, value_delimiter = ',', default_value = "2,1")]
    pub weights: Vec<f64>,
    /// gaussian[:sd], t:df[:scale], weibull:gamma[:rate] or pareto:rho[:xmin]
    #[arg(long, default_value = "pareto:2", value_parser = parse_error_model)]
    pub error: ErrorModel,
    /// Marginal survival probability of the scan level
    #[arg(long, default_value_t = 1e-4)]
    pub survival: f64,
    /// Window radius (defaults to the weight support diameter, at least 1)
    #[arg(long)]
    pub radius: Option<usize>,
    /// Number of generated series
    #[arg(long, default_value_t = 16)]
    pub series: u64,
    /// Length of each series
    #[arg(long, default_value_t = 1_000_000)]
    pub nu: usize,
    #[arg(long, value_enum, default_value = "every-exceedance")]
    pub anchor: AnchorArg,
    /// Monte Carlo budget when the level has no closed form
    #[arg(long, default_value_t = 100_000_000)]
    pub budget: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub figure: Figure,
    #[arg(long, value_enum, default_value = "reduced")]
    pub preset: Preset,
    #[arg(long, default_value = "figures")]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BetaArg {
    /// Expected number of exceedances
    #[arg(long, conflicts_with = "alpha")]
    pub beta: Option<f64>,
    /// Derive beta as -ln(1 - alpha)
    #[arg(long)]
    pub alpha: Option<f64>,
}

impl BetaArg {
    fn resolve(&self) -> Result<f64, HarnessError> {
        match (self.beta, self.alpha) {
            (Some(b), _) => Ok(b),
            (None, Some(a)) => Ok(beta_from_alpha(a)?),
            (None, None) => Ok(beta_from_alpha(0.05)?),
        }
    }
}

#[derive(Debug, Args)]
pub struct PmfArg {
    /// Cluster-size probabilities p_1, p_2, ...
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["weights", "rho"])]
    pub pmf: Option<Vec<f64>>,
    /// Nonnegative weights for the Pareto cluster-size law
    #[arg(long, value_delimiter = ',', requires = "rho")]
    pub weights: Option<Vec<f64>>,
    #[arg(long)]
    pub rho: Option<f64>,
}

impl PmfArg {
    fn resolve(&self) -> Result<ClusterSizePmf, HarnessError> {
        match (&self.pmf, &self.weights, self.rho) {
            (Some(p), _, _) => Ok(ClusterSizePmf::new(p.clone())?),
            (None, Some(w), Some(rho)) => Ok(cluster_size_pmf(&WeightProfile::from_values(0, w)?, rho)?),
            _ => Ok(ClusterSizePmf::unit()),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum LimitCommand {
    /// P(Q >= k) for Q ~ Poisson(beta)
    PoissonTail {
        #[command(flatten)]
        beta: BetaArg,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Limit probability that the step-down rule rejects at least k
    FdrLimit {
        #[command(flatten)]
        beta: BetaArg,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Cluster-size law from weights under Pareto tails
    ClusterPmf {
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        #[arg(long)]
        rho: f64,
    },
    /// Compound-Poisson P(N >= k)
    CompoundTail {
        #[command(flatten)]
        beta: BetaArg,
        #[command(flatten)]
        pmf: PmfArg,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Compound-Poisson step-down limit
    CompoundFdr {
        #[command(flatten)]
        beta: BetaArg,
        #[command(flatten)]
        pmf: PmfArg,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Tail exponent coefficient of a weighted sum of Weibull-type variables
    Rate {
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        #[arg(long)]
        gamma: f64,
    },
    /// Neighbour exceedance probabilities in a Gaussian window
    Thm36 {
        /// c_1..c_2r
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.5")]
        c: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        /// Exceedance level; delta is set to (d / t)^2
        #[arg(long, default_value_t = 4.412)]
        t: f64,
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
        #[arg(long, default_value_t = 10_000_000)]
        reference_budget: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// Parses `gaussian[:sd]`, `t:df[:scale]`, `weibull:gamma[:rate]`, `pareto:rho[:xmin]`.
pub fn parse_error_model(s: &str) -> Result<ErrorModel, String> {
    let mut parts = s.split(':');
    let kind = parts.next().unwrap_or_default().to_ascii_lowercase();
    let nums: Vec<f64> = parts
        .map(|p| p.parse::<f64>().map_err(|_| format!("bad number {p:?} in {s:?}")))
        .collect::<Result<_, _>>()?;
    let arg = |i: usize, default: Option<f64>| {
        nums.get(i)
            .copied()
            .or(default)
            .ok_or_else(|| format!("{kind} needs a parameter"))
    };
    let model = match kind.as_str() {
        "gaussian" | "normal" => ErrorModel::gaussian(arg(0, Some(1.0))?),
        "t" | "student-t" => ErrorModel::student_t(arg(0, None)?, arg(1, Some(1.0))?),
        "weibull" => ErrorModel::weibull_tail(arg(0, None)?, arg(1, Some(1.0))?),
        "pareto" => ErrorModel::pareto(arg(0, None)?, arg(1, Some(1.0))?),
        _ => return Err(format!("unknown error model {kind:?}")),
    };
    model.map_err(|e| e.to_string())
}

fn print(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

pub fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Calibrate(a) => calibrate(a),
        Command::Run(a) => run_config(a),
        Command::Clusters(a) => clusters(a),
        Command::Limits { which } => limits(which),
        Command::Reproduce(a) => {
            let out = reproduce_figure(a.figure, a.preset, &a.out, a.threads)?;
            for f in &out.outcome.failures {
                eprintln!("cell failed: nu={} r={} df={}: {}", f.nu, f.r, f.df, f.reason);
            }
            print(&json!({ "files": out.files }));
            Ok(())
        }
    }
}

fn calibrate(a: CalibrateArgs) -> Result<(), HarnessError> {
    let model = match a.model {
        ModelArg::Model1 => ModelKind::Model1,
        ModelArg::Model2 => ModelKind::Model2 { n: a.n },
    };
    let errors = a.df.error_model()?;
    let base = match &a.weights {
        Some(w) => WeightProfile::from_values(0, w)?,
        None => WeightProfile::equal(a.r),
    };
    let weights = unit_variance_scale(&base, &errors)?;
    let choice = match a.method {
        MethodArg::Auto => CalibrationChoice::Auto,
        MethodArg::Analytic => CalibrationChoice::Analytic,
        MethodArg::MonteCarlo => CalibrationChoice::MonteCarlo,
    };
    let convention = match a.convention {
        ConventionArg::BetaOverNu => LadderConvention::BetaOverNu,
        ConventionArg::Sidak => LadderConvention::Sidak,
    };
    let ladders = calibrate_ladders(
        &model,
        &weights,
        &errors,
        choice,
        a.budget,
        RandomStream::new(a.seed, 0),
        a.alpha,
        &a.nu,
        a.k,
        convention,
    )?;
    print(&json!({
        "model": model.id(),
        "errors": errors.name(),
        "weights": weights.entries(),
        "ladders": ladders,
    }));
    Ok(())
}

fn run_config(a: RunArgs) -> Result<(), HarnessError> {
    let mut spec = ExperimentSpec::load(&a.config)?;
    if let Some(t) = a.threads {
        spec.threads = Some(t);
    }
    if let Some(s) = a.seed {
        spec.master_seed = s;
    }
    spec.validate()?;
    std::fs::create_dir_all(&a.out).map_err(|e| HarnessError::io(&a.out, e))?;
    let outcome = run_grid(&spec)?;
    for f in &outcome.failures {
        eprintln!("cell failed: nu={} r={} df={}: {}", f.nu, f.r, f.df, f.reason);
    }
    let csv = a.out.join("results.csv");
    write_csv_file(&outcome.rows, &csv)?;
    let meta = a.out.join("run_meta.json");
    write_meta(&spec, &outcome, &meta)?;
    print(&json!({
        "rows": outcome.rows.len(),
        "failed_cells": outcome.failures.len(),
        "files": [csv, meta],
    }));
    Ok(())
}

fn clusters(a: ClustersArgs) -> Result<(), HarnessError> {
    let weights = WeightProfile::from_values(0, &a.weights)?;
    let radius = a.radius.unwrap_or(weights.diameter().max(1));
    let (level, level_se) = match AnalyticMarginal::for_weights(&weights, &a.error) {
        Ok(m) => (m.quantile_survival(a.survival)?, 0.0),
        Err(_) => {
            let sampler = MaMarginalSampler::new(&weights, &a.error)?;
            let q = mc_marginal_quantile(&sampler, a.survival, a.budget, RandomStream::new(a.seed, 1))?;
            (q.t, q.se)
        }
    };
    let anchor = match a.anchor {
        AnchorArg::EveryExceedance => Anchor::EveryExceedance,
        AnchorArg::ClusterStart => Anchor::ClusterStart,
    };
    let source = MaSeries {
        weights: weights.clone(),
        model: a.error.clone(),
        nu: a.nu,
    };
    let hist = conditional_window_histogram(&source, level, radius, a.series, RandomStream::new(a.seed, 2), anchor)?;
    if hist.empty {
        eprintln!("warning: no exceedances of {level} in {} values", hist.values_scanned);
    }
    let reference = match &a.error {
        ErrorModel::Pareto { rho, .. } if weights.is_nonnegative() => cluster_size_pmf(&weights, *rho).ok(),
        _ => None,
    };
    print(&json!({
        "level": level,
        "level_se": level_se,
        "radius": radius,
        "histogram": hist,
        "pmf": hist.histogram.pmf(),
        "reference_pmf": reference.as_ref().map(|p| p.as_map()),
        "tv_distance": reference.as_ref().map(|p| hist.histogram.tv_distance(&p.as_map())),
    }));
    Ok(())
}

fn limits(which: LimitCommand) -> Result<(), HarnessError> {
    let v = match which {
        LimitCommand::PoissonTail { beta, k } => {
            let b = beta.resolve()?;
            json!({ "beta": b, "k": k, "value": poisson_tail(b, k)? })
        }
        LimitCommand::FdrLimit { beta, k } => {
            let b = beta.resolve()?;
            json!({ "beta": b, "k": k, "value": fdr_limit_prob(b, k)? })
        }
        LimitCommand::ClusterPmf { weights, rho } => {
            let p = cluster_size_pmf(&WeightProfile::from_values(0, &weights)?, rho)?;
            json!({ "pmf": p.as_map(), "mu": p.mu })
        }
        LimitCommand::CompoundTail { beta, pmf, k } => {
            let (b, p) = (beta.resolve()?, pmf.resolve()?);
            json!({ "beta": b, "k": k, "pmf": p.as_map(), "value": compound_tail(b, &p, k)? })
        }
        LimitCommand::CompoundFdr { beta, pmf, k } => {
            let (b, p) = (beta.resolve()?, pmf.resolve()?);
            json!({ "beta": b, "k": k, "pmf": p.as_map(), "value": compound_fdr_prob(b, &p, k)? })
        }
        LimitCommand::Rate { weights, gamma } => {
            json!({ "gamma": gamma, "value": ld_rate(&WeightProfile::from_values(0, &weights)?, gamma)? })
        }
        LimitCommand::Thm36 {
            c,
            r,
            d,
            t,
            budget,
            reference_budget,
            seed,
        } => {
            let delta = clusterlab_core::limit_laws::thm36_delta(d, t);
            let model = build_window_model(r, &c, delta)?;
            let empirical = thm36_empirical_pi(&model, t, budget, RandomStream::new(seed, 0))?;
            let reference = thm36_reference_pi(&model, d, reference_budget, RandomStream::new(seed, 1))?;
            json!({ "delta": delta, "empirical": empirical, "reference": reference })
        }
    };
    print(&v);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_model_strings() {
        assert_eq!(parse_error_model("pareto:2").unwrap(), ErrorModel::pareto(2.0, 1.0).unwrap());
        assert_eq!(parse_error_model("gaussian").unwrap(), ErrorModel::gaussian(1.0).unwrap());
        assert_eq!(parse_error_model("t:3:2").unwrap(), ErrorModel::student_t(3.0, 2.0).unwrap());
        assert_eq!(
            parse_error_model("weibull:0.5").unwrap(),
            ErrorModel::weibull_tail(0.5, 1.0).unwrap()
        );
        assert!(parse_error_model("t").is_err());
        assert!(parse_error_model("cauchy:1").is_err());
        assert!(parse_error_model("pareto:-1").is_err());
    }

    #[test]
    fn parses_subcommands() {
        Cli::try_parse_from(["clusterlab", "limits", "fdr-limit", "--alpha", "0.05", "--k", "2"]).unwrap();
        Cli::try_parse_from(["clusterlab", "limits", "compound-tail", "--weights", "2,1", "--rho", "2"]).unwrap();
        Cli::try_parse_from(["clusterlab", "reproduce", "fig2", "--preset", "full"]).unwrap();
        Cli::try_parse_from(["clusterlab", "calibrate", "--df", "inf", "--nu", "500,1000"]).unwrap();
        assert!(Cli::try_parse_from(["clusterlab", "limits", "fdr-limit", "--beta", "1", "--alpha", "0.1"]).is_err());
        assert!(Cli::try_parse_from(["clusterlab", "reproduce", "fig3"]).is_err());
    }
}
