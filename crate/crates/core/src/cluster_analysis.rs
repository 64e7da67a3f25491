//! Exceedance clustering: window counts, run clusters and Poisson diagnostics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::ErrorModel;
use crate::error::{Error, Result};
use crate::process_models::{generate_ma, WeightProfile};
use crate::rng::RandomStream;

/// Number of `j` with `|j − i0| ≤ r` and `X_j > x`. `i0` is 1-based.
pub fn window_count(series: &[f64], i0: usize, r: usize, x: f64) -> Result<usize> {
    if i0 <= r || i0 + r > series.len() {
        return Err(Error::Index(format!(
            "window of radius {r} around {i0} leaves 1..={}",
            series.len()
        )));
    }
    Ok(series[i0 - 1 - r..i0 + r].iter().filter(|&&v| v > x).count())
}

/// Sizes of maximal runs of `indices` whose consecutive gaps are at most `gap`.
pub fn run_clusters(indices: &[usize], gap: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut iter = indices.iter();
    let Some(&first) = iter.next() else {
        return sizes;
    };
    let (mut prev, mut size) = (first, 1);
    for &i in iter {
        if i - prev <= gap {
            size += 1;
        } else {
            sizes.push(size);
            size = 1;
        }
        prev = i;
    }
    sizes.push(size);
    sizes
}

/// Run gap used for cluster reporting: the support diameter of the weights, at least 1.
pub fn default_cluster_gap(weights: &WeightProfile) -> usize {
    weights.diameter().max(1)
}

/// Frequencies of cluster or window sizes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterHistogram {
    pub counts: BTreeMap<usize, u64>,
    pub total: u64,
}

impl ClusterHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, size: usize) {
        *self.counts.entry(size).or_default() += 1;
        self.total += 1;
    }

    pub fn merge(mut self, other: Self) -> Self {
        for (q, c) in other.counts {
            *self.counts.entry(q).or_default() += c;
        }
        self.total += other.total;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn pmf(&self) -> BTreeMap<usize, f64> {
        let n = self.total as f64;
        self.counts.iter().map(|(&q, &c)| (q, c as f64 / n)).collect()
    }

    /// Relative frequency of `q`; zero for an empty histogram.
    pub fn prob(&self, q: usize) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(&q).copied().unwrap_or(0) as f64 / self.total as f64
    }

    /// Total-variation distance `½ Σ_q |p̂_q − p_q|` to a reference pmf.
    pub fn tv_distance(&self, reference: &BTreeMap<usize, f64>) -> f64 {
        let own = self.pmf();
        let mut keys: Vec<usize> = own.keys().chain(reference.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        0.5 * keys
            .iter()
            .map(|q| (own.get(q).unwrap_or(&0.0) - reference.get(q).unwrap_or(&0.0)).abs())
            .sum::<f64>()
    }
}

/// Anything that can produce a fresh null series from a stream.
pub trait SeriesSource: Sync {
    fn generate(&self, stream: RandomStream) -> Result<Vec<f64>>;
}

/// Moving-average series of fixed length.
#[derive(Debug, Clone)]
pub struct MaSeries {
    pub weights: WeightProfile,
    pub model: ErrorModel,
    pub nu: usize,
}

impl SeriesSource for MaSeries {
    fn generate(&self, stream: RandomStream) -> Result<Vec<f64>> {
        generate_ma(&self.weights, &self.model, self.nu, stream)
    }
}

/// Which exceedances contribute a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    /// Every exceedance; records follow the law of `M` given `X_0 > x`.
    #[default]
    EveryExceedance,
    /// Only exceedances with none in the preceding `r` positions; one record
    /// per cluster, so records follow the per-cluster size law.
    ClusterStart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowHistogram {
    pub histogram: ClusterHistogram,
    pub anchor: Anchor,
    pub series_scanned: u64,
    pub values_scanned: u64,
    /// Records whose window shares a position with the previous record's window.
    pub overlapping_records: u64,
    /// Set when no exceedance was found anywhere.
    pub empty: bool,
}

/// Scans `budget` generated series and records `window_count` around exceedances
/// of `x` whose full window fits inside the series. Series `s` uses `stream.child(s)`.
pub fn conditional_window_histogram(
    source: &dyn SeriesSource,
    x: f64,
    r: usize,
    budget: u64,
    stream: RandomStream,
    anchor: Anchor,
) -> Result<WindowHistogram> {
    if budget == 0 {
        return Err(Error::Parameter("budget must be >= 1".into()));
    }
    type Tally = (ClusterHistogram, u64, u64);
    let parts: Vec<Tally> = (0..budget)
        .into_par_iter()
        .map(|s| -> Result<Tally> {
            let series = source.generate(stream.child(s))?;
            let mut hist = ClusterHistogram::new();
            let mut overlap = 0u64;
            let mut last_record: Option<usize> = None;
            let mut last_exceed: Option<usize> = None;
            for (pos, &v) in series.iter().enumerate() {
                if v <= x {
                    continue;
                }
                let i0 = pos + 1;
                let starts = last_exceed.is_none_or(|p| i0 - p > r);
                last_exceed = Some(i0);
                if anchor == Anchor::ClusterStart && !starts {
                    continue;
                }
                if let Ok(m) = window_count(&series, i0, r, x) {
                    if last_record.is_some_and(|p| i0 - p <= 2 * r) {
                        overlap += 1;
                    }
                    last_record = Some(i0);
                    hist.record(m);
                }
            }
            Ok((hist, overlap, series.len() as u64))
        })
        .collect::<Result<_>>()?;
    let (histogram, overlapping_records, values_scanned) = parts.into_iter().fold(
        (ClusterHistogram::new(), 0, 0),
        |(h, o, v), (h2, o2, v2)| (h.merge(h2), o + o2, v + v2),
    );
    Ok(WindowHistogram {
        empty: histogram.is_empty(),
        histogram,
        anchor,
        series_scanned: budget,
        values_scanned,
        overlapping_records,
    })
}

/// `#{N > 1} / #{N > 0}`; `None` when no sample is positive.
pub fn clustering_proportion(counts: &[u64]) -> Option<f64> {
    let pos = counts.iter().filter(|&&n| n > 0).count();
    let multi = counts.iter().filter(|&&n| n > 1).count();
    (pos > 0).then(|| multi as f64 / pos as f64)
}

/// Unbiased sample variance over sample mean; `None` for fewer than two samples
/// or a zero mean.
pub fn dispersion_index(counts: &[u64]) -> Option<f64> {
    if counts.len() < 2 {
        return None;
    }
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    if mean == 0.0 {
        return None;
    }
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(var / mean)
}

/// Kolmogorov–Smirnov distance between `{I_j / ν}` and the uniform law on
/// `[0, 1]`. Indices may be unsorted (e.g. pooled over replicates). `None` when
/// empty or when an index falls outside `1..=ν`.
pub fn spacing_uniformity(indices: &[usize], nu: usize) -> Option<f64> {
    if indices.is_empty() || indices.iter().any(|&i| i == 0 || i > nu) {
        return None;
    }
    let mut u: Vec<f64> = indices.iter().map(|&i| i as f64 / nu as f64).collect();
    u.sort_unstable_by(f64::total_cmp);
    let n = u.len() as f64;
    Some(u.iter().enumerate().fold(0.0f64, |d, (j, &v)| {
        let j = j as f64;
        d.max((j + 1.0) / n - v).max(v - j / n)
    }))
}
