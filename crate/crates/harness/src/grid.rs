//! Simulation grids over `(ν, r, df)`.

use std::collections::BTreeMap;
use std::time::Instant;

use clusterlab_core::calibration::{
    threshold_ladders, AnalyticMarginal, LadderConvention, MaMarginalSampler, MarginalSource,
    StatSampler, TStatSampler, ThresholdLadder,
};
use clusterlab_core::cluster_analysis::{
    clustering_proportion, default_cluster_gap, dispersion_index, run_clusters,
};
use clusterlab_core::distributions::{unit_variance_scale, ErrorModel};
use clusterlab_core::procedures::{count_exceedances, exceedance_indices};
use clusterlab_core::process_models::{generate_groups, generate_ma, group_t_stats, WeightProfile};
use clusterlab_core::rng::{mix64, RandomStream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CalibrationChoice, Df, ExperimentSpec, ModelKind};
use crate::error::HarnessError;

/// One simulated cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub nu: usize,
    pub r: usize,
    pub df: Df,
    pub threshold: f64,
    pub threshold_se: f64,
    pub repetitions: u64,
    /// `#{N > 0}`
    pub n_positive: u64,
    /// `#{N > 1}`
    pub n_multiple: u64,
    pub clustering_proportion: Option<f64>,
    pub fwer: f64,
    pub dispersion_index: Option<f64>,
    pub mean_cluster_size: Option<f64>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub model: String,
    pub nu: usize,
    pub r: usize,
    pub df: Df,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<FailedCell>,
}

/// Per-replicate exceedance summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Replicate {
    pub n: u64,
    pub clusters: u64,
}

fn df_key(df: Df) -> u64 {
    df.value().to_bits()
}

pub fn calibration_stream(seed: u64, model: &ModelKind, r: usize, df: Df) -> RandomStream {
    let m = match model {
        ModelKind::Model1 => 1,
        ModelKind::Model2 { n } => 2 ^ ((*n as u64) << 8),
    };
    RandomStream::new(seed, mix64(0xCA11 ^ mix64(m ^ mix64(r as u64 ^ mix64(df_key(df))))))
}

/// Stream of replicate `i` is `cell_stream(..).child(i)`.
pub fn cell_stream(seed: u64, model: &ModelKind, nu: usize, r: usize, df: Df) -> RandomStream {
    let base = calibration_stream(seed, model, r, df);
    RandomStream::new(seed, mix64(base.stream_index ^ mix64(nu as u64)))
}

/// Base weights of a cell before variance normalisation.
pub fn base_weights(spec: &ExperimentSpec, r: usize) -> clusterlab_core::Result<WeightProfile> {
    match &spec.weights {
        Some(w) => WeightProfile::from_values(0, w),
        None => Ok(WeightProfile::equal(r)),
    }
}

/// Closed-form marginal of one statistic, when one exists.
pub fn analytic_marginal(
    model: &ModelKind,
    weights: &WeightProfile,
    errors: &ErrorModel,
) -> Option<AnalyticMarginal> {
    match model {
        ModelKind::Model1 => AnalyticMarginal::for_weights(weights, errors).ok(),
        ModelKind::Model2 { n } => match errors {
            // divisor-n t-statistic of Gaussian rows: sqrt(n / (n − 1)) t_{n−1}
            ErrorModel::Gaussian { .. } => {
                let nf = *n as f64;
                ErrorModel::student_t(nf - 1.0, (nf / (nf - 1.0)).sqrt())
                    .ok()
                    .map(|model| AnalyticMarginal::Model { model })
            }
            _ => None,
        },
    }
}

fn stat_sampler(
    model: &ModelKind,
    weights: &WeightProfile,
    errors: &ErrorModel,
) -> clusterlab_core::Result<Box<dyn StatSampler>> {
    Ok(match model {
        ModelKind::Model1 => Box::new(MaMarginalSampler::new(weights, errors)?),
        ModelKind::Model2 { n } => Box::new(TStatSampler::new(weights, errors, *n)?),
    })
}

/// Ladders of length `k` for every `ν`, from one marginal source.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_ladders(
    model: &ModelKind,
    weights: &WeightProfile,
    errors: &ErrorModel,
    choice: CalibrationChoice,
    budget: u64,
    stream: RandomStream,
    alpha: f64,
    nus: &[u64],
    k: usize,
    convention: LadderConvention,
) -> Result<Vec<ThresholdLadder>, HarnessError> {
    let analytic = analytic_marginal(model, weights, errors);
    let use_analytic = match choice {
        CalibrationChoice::Auto => analytic.is_some(),
        CalibrationChoice::Analytic => {
            if analytic.is_none() {
                return Err(clusterlab_core::Error::Unsupported {
                    op: "analytic calibration",
                    model: format!("{} with {}", model.id(), errors.name()),
                }
                .into());
            }
            true
        }
        CalibrationChoice::MonteCarlo => false,
    };
    let ladders = match analytic {
        Some(m) if use_analytic => {
            threshold_ladders(&MarginalSource::Analytic(m), alpha, nus, k, convention)?
        }
        _ => {
            let sampler = stat_sampler(model, weights, errors)?;
            let source = MarginalSource::MonteCarlo {
                sampler: sampler.as_ref(),
                budget,
                stream,
            };
            threshold_ladders(&source, alpha, nus, k, convention)?
        }
    };
    Ok(ladders)
}

/// Calibrates `t_1` for every `ν` of a grid cell at once.
pub fn calibrate_cell(
    spec: &ExperimentSpec,
    weights: &WeightProfile,
    errors: &ErrorModel,
    r: usize,
    df: Df,
    nus: &[usize],
) -> Result<Vec<ThresholdLadder>, HarnessError> {
    let nus: Vec<u64> = nus.iter().map(|&v| v as u64).collect();
    calibrate_ladders(
        &spec.model,
        weights,
        errors,
        spec.calibration.method,
        spec.calibration.budget,
        calibration_stream(spec.master_seed, &spec.model, r, df),
        spec.alpha,
        &nus,
        1,
        LadderConvention::BetaOverNu,
    )
}

/// Null statistics of one replicate.
pub fn replicate_statistics(
    model: &ModelKind,
    weights: &WeightProfile,
    errors: &ErrorModel,
    nu: usize,
    stream: RandomStream,
) -> clusterlab_core::Result<Vec<f64>> {
    match model {
        ModelKind::Model1 => generate_ma(weights, errors, nu, stream),
        ModelKind::Model2 { n } => {
            let data = generate_groups(weights, errors, nu, *n, &vec![0.0; nu], stream)?;
            group_t_stats(&data)
        }
    }
}

/// Runs `repetitions` replicates of one cell at threshold `t`.
pub fn run_replicates(
    model: &ModelKind,
    weights: &WeightProfile,
    errors: &ErrorModel,
    nu: usize,
    t: f64,
    repetitions: u64,
    stream: RandomStream,
) -> clusterlab_core::Result<Vec<Replicate>> {
    let gap = default_cluster_gap(weights);
    (0..repetitions)
        .into_par_iter()
        .map(|i| {
            let stats = replicate_statistics(model, weights, errors, nu, stream.child(i))?;
            Ok(Replicate {
                n: count_exceedances(&stats, t) as u64,
                clusters: run_clusters(&exceedance_indices(&stats, t), gap).len() as u64,
            })
        })
        .collect()
}

fn summarize(
    spec: &ExperimentSpec,
    nu: usize,
    r: usize,
    df: Df,
    ladder: &ThresholdLadder,
    reps: &[Replicate],
    wall_time_secs: f64,
) -> ResultRow {
    let counts: Vec<u64> = reps.iter().map(|x| x.n).collect();
    let n_positive = counts.iter().filter(|&&n| n > 0).count() as u64;
    let n_multiple = counts.iter().filter(|&&n| n > 1).count() as u64;
    let exceed: u64 = counts.iter().sum();
    let clusters: u64 = reps.iter().map(|x| x.clusters).sum();
    ResultRow {
        model: spec.model.id(),
        nu,
        r,
        df,
        threshold: ladder.first(),
        threshold_se: ladder.se[0],
        repetitions: spec.repetitions,
        n_positive,
        n_multiple,
        clustering_proportion: clustering_proportion(&counts),
        fwer: n_positive as f64 / spec.repetitions as f64,
        dispersion_index: dispersion_index(&counts),
        mean_cluster_size: (clusters > 0).then(|| exceed as f64 / clusters as f64),
        wall_time_secs,
    }
}

fn df_order(a: Df, b: Df) -> std::cmp::Ordering {
    a.value().total_cmp(&b.value())
}

/// Runs every cell of the grid. Cells that cannot be simulated (for example
/// infinite-variance disturbances) are reported in `failures`; the remaining
/// rows are sorted by `(ν, r, df)`.
pub fn run_grid(spec: &ExperimentSpec) -> Result<GridOutcome, HarnessError> {
    spec.validate()?;
    match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Runtime(format!("thread pool: {e}")))?
            .install(|| run_grid_inner(spec)),
        None => run_grid_inner(spec),
    }
}

fn run_grid_inner(spec: &ExperimentSpec) -> Result<GridOutcome, HarnessError> {
    let mut nus = spec.nu.clone();
    nus.sort_unstable();
    nus.dedup();
    let mut dfs = spec.df.clone();
    dfs.sort_by(|a, b| df_order(*a, *b));
    dfs.dedup();
    let mut radii = spec.radii();
    radii.sort_unstable();
    radii.dedup();

    let mut rows: BTreeMap<(usize, usize, usize), ResultRow> = BTreeMap::new();
    let mut failures = Vec::new();
    for &r in &radii {
        for (di, &df) in dfs.iter().enumerate() {
            let fail_all = |reason: String, failures: &mut Vec<FailedCell>| {
                for &nu in &nus {
                    failures.push(FailedCell {
                        model: spec.model.id(),
                        nu,
                        r,
                        df,
                        reason: reason.clone(),
                    });
                }
            };
            let prepared = (|| -> Result<_, HarnessError> {
                let errors = df.error_model()?;
                let weights = unit_variance_scale(&base_weights(spec, r)?, &errors)?;
                let ladders = calibrate_cell(spec, &weights, &errors, r, df, &nus)?;
                Ok((errors, weights, ladders))
            })();
            let (errors, weights, ladders) = match prepared {
                Ok(p) => p,
                Err(e) => {
                    fail_all(e.to_string(), &mut failures);
                    continue;
                }
            };
            for (&nu, ladder) in nus.iter().zip(&ladders) {
                let start = Instant::now();
                let stream = cell_stream(spec.master_seed, &spec.model, nu, r, df);
                match run_replicates(&spec.model, &weights, &errors, nu, ladder.first(), spec.repetitions, stream) {
                    Ok(reps) => {
                        let row = summarize(spec, nu, r, df, ladder, &reps, start.elapsed().as_secs_f64());
                        rows.insert((nu, r, di), row);
                    }
                    Err(e) => failures.push(FailedCell {
                        model: spec.model.id(),
                        nu,
                        r,
                        df,
                        reason: e.to_string(),
                    }),
                }
            }
        }
    }
    failures.sort_by(|a, b| (a.nu, a.r).cmp(&(b.nu, b.r)).then(df_order(a.df, b.df)));
    Ok(GridOutcome {
        rows: rows.into_values().collect(),
        failures,
    })
}
