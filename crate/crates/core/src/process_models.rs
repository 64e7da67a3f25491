//! Generators for dependent test statistics.
//!
//! * finite moving averages `X_i = Σ_k θ_k ε_{i+k}`,
//! * group-level data `V_ij = μ_i + Σ_k θ_k ε'_{i+k,j}` with mean and
//!   t-statistic reductions,
//! * the near-unit-correlation Gaussian window, sampled conditionally on the
//!   centre value exceeding a level.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distributions::{draw, ErrorModel};
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Finite-support moving-average weights `θ_k`, keyed by offset `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(i64, f64)>", into = "Vec<(i64, f64)>")]
pub struct WeightProfile {
    entries: Vec<(i64, f64)>,
}

impl TryFrom<Vec<(i64, f64)>> for WeightProfile {
    type Error = Error;

    fn try_from(entries: Vec<(i64, f64)>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<WeightProfile> for Vec<(i64, f64)> {
    fn from(w: WeightProfile) -> Self {
        w.entries
    }
}

impl WeightProfile {
    pub fn new(entries: Vec<(i64, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Parameter("weight profile is empty".into()));
        }
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Parameter(
                "weight offsets must be strictly increasing".into(),
            ));
        }
        if entries.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::Parameter("weights must be finite".into()));
        }
        if entries.iter().all(|(_, v)| *v == 0.0) {
            return Err(Error::Parameter("at least one weight must be nonzero".into()));
        }
        Ok(Self { entries })
    }

    /// Consecutive offsets `start, start + 1, ...`.
    pub fn from_values(start: i64, values: &[f64]) -> Result<Self> {
        Self::new(
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| (start + i as i64, v))
                .collect(),
        )
    }

    /// `m` unit weights at offsets `0..m`.
    pub fn equal(m: usize) -> Self {
        assert!(m >= 1, "equal weights need at least one term");
        Self {
            entries: (0..m as i64).map(|k| (k, 1.0)).collect(),
        }
    }

    pub fn entries(&self) -> &[(i64, f64)] {
        &self.entries
    }

    pub fn min_offset(&self) -> i64 {
        self.entries[0].0
    }

    pub fn max_offset(&self) -> i64 {
        self.entries[self.entries.len() - 1].0
    }

    /// Distance between the extreme offsets.
    pub fn diameter(&self) -> usize {
        (self.max_offset() - self.min_offset()) as usize
    }

    pub fn sum_squares(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|&(k, v)| (k, v * c)).collect(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries.iter().all(|(_, v)| *v >= 0.0)
    }

    pub fn nonzero_values(&self) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|(_, v)| *v != 0.0)
            .map(|&(_, v)| v)
            .collect()
    }

    /// Weight at offset `k` (zero off the support).
    pub fn get(&self, k: i64) -> f64 {
        self.entries
            .binary_search_by_key(&k, |&(o, _)| o)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    /// Weights on every offset from `min_offset` to `max_offset`.
    pub fn dense(&self) -> Vec<f64> {
        let lo = self.min_offset();
        let mut out = vec![0.0; self.diameter() + 1];
        for &(k, v) in &self.entries {
            out[(k - lo) as usize] = v;
        }
        out
    }
}

/// Precomputed filter for `X_i = Σ_d w_d e_{i+d}`.
#[derive(Debug, Clone)]
pub struct MovingAverage {
    dense: Vec<f64>,
    uniform: Option<f64>,
}

impl MovingAverage {
    pub fn new(weights: &WeightProfile) -> Self {
        let dense = weights.dense();
        let uniform = (dense.len() > 4 && dense.iter().all(|&w| w == dense[0])).then(|| dense[0]);
        Self { dense, uniform }
    }

    /// Number of extra disturbances needed beyond the output length.
    pub fn overhang(&self) -> usize {
        self.dense.len() - 1
    }

    /// Filters `eps` (length `len + overhang`) into `out` (length `len`).
    pub fn apply(&self, eps: &[f64], out: &mut Vec<f64>) {
        let width = self.dense.len();
        let len = eps.len() + 1 - width;
        out.clear();
        out.reserve(len);
        match self.uniform {
            Some(w) => {
                // running window sum, refreshed periodically to bound rounding drift
                let mut acc = 0.0;
                for i in 0..len {
                    if i % 1024 == 0 {
                        acc = eps[i..i + width].iter().sum();
                    } else {
                        acc += eps[i + width - 1] - eps[i - 1];
                    }
                    out.push(w * acc);
                }
            }
            None => {
                for i in 0..len {
                    let s: f64 = self
                        .dense
                        .iter()
                        .zip(&eps[i..i + width])
                        .map(|(w, e)| w * e)
                        .sum();
                    out.push(s);
                }
            }
        }
    }
}

/// `ν` consecutive values of the moving average, using disturbances over the
/// extended index range `[1 + k_min, ν + k_max]` so every value is stationary.
pub fn generate_ma(
    weights: &WeightProfile,
    model: &ErrorModel,
    nu: usize,
    stream: RandomStream,
) -> Result<Vec<f64>> {
    if nu == 0 {
        return Err(Error::Parameter("nu must be at least 1".into()));
    }
    let filter = MovingAverage::new(weights);
    let mut eps = vec![0.0; nu + filter.overhang()];
    draw(model, stream)?.fill(&mut eps);
    let mut out = Vec::with_capacity(nu);
    filter.apply(&eps, &mut out);
    Ok(out)
}

/// `err_var · Σ_k θ_k θ_{k+lag}`.
pub fn autocovariance(weights: &WeightProfile, err_var: f64, lag: usize) -> f64 {
    let lag = lag as i64;
    err_var
        * weights
            .entries()
            .iter()
            .map(|&(k, v)| v * weights.get(k + lag))
            .sum::<f64>()
}

/// `ν × n` matrix of group data, rows are tests, columns are replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupData {
    values: Vec<f64>,
    pub means: Vec<f64>,
    pub n: usize,
    pub nu: usize,
}

impl GroupData {
    pub fn from_rows(rows: Vec<Vec<f64>>, means: Vec<f64>) -> Result<Self> {
        let nu = rows.len();
        if nu == 0 {
            return Err(Error::Parameter("group data needs at least one row".into()));
        }
        let n = rows[0].len();
        if n < 2 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parameter("rows must share a length n >= 2".into()));
        }
        if means.len() != nu {
            return Err(Error::Parameter("one mean per row is required".into()));
        }
        Ok(Self {
            values: rows.into_iter().flatten().collect(),
            means,
            n,
            nu,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Group data `V_ij = μ_i + Σ_k θ_k ε'_{i+k,j}`; column `j` draws its own
/// disturbance stream `stream.child(j)`.
pub fn generate_groups(
    weights: &WeightProfile,
    model: &ErrorModel,
    nu: usize,
    n: usize,
    mu: &[f64],
    stream: RandomStream,
) -> Result<GroupData> {
    if n < 2 {
        return Err(Error::Parameter(format!("sample size n must be >= 2, got {n}")));
    }
    if nu == 0 || mu.len() != nu {
        return Err(Error::Parameter(format!(
            "expected {nu} means, got {}",
            mu.len()
        )));
    }
    let filter = MovingAverage::new(weights);
    let mut eps = vec![0.0; nu + filter.overhang()];
    let mut col = Vec::with_capacity(nu);
    let mut values = vec![0.0; nu * n];
    for j in 0..n {
        draw(model, stream.child(j as u64))?.fill(&mut eps);
        filter.apply(&eps, &mut col);
        for (i, x) in col.iter().enumerate() {
            values[i * n + j] = mu[i] + x;
        }
    }
    Ok(GroupData {
        values,
        means: mu.to_vec(),
        n,
        nu,
    })
}

/// `X_i = n^{-1/2} Σ_j V_ij`.
pub fn group_mean_stats(data: &GroupData) -> Vec<f64> {
    let scale = 1.0 / (data.n as f64).sqrt();
    (0..data.nu)
        .map(|i| scale * data.row(i).iter().sum::<f64>())
        .collect()
}

/// t-statistic of one row with the divisor-`n` variance estimate.
pub fn t_statistic(row: &[f64]) -> Option<f64> {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (var > 0.0).then(|| n.sqrt() * mean / var.sqrt())
}

/// `Y_i = n^{-1/2} Σ_j V_ij / (n^{-1} Σ_j V_ij² − (n^{-1} Σ_j V_ij)²)^{1/2}`.
pub fn group_t_stats(data: &GroupData) -> Result<Vec<f64>> {
    (0..data.nu)
        .map(|i| t_statistic(data.row(i)).ok_or(Error::DegenerateSample { row: i }))
        .collect()
}

/// Truncated first-order autoregressive weights: `ρ_0 = 1`, `ρ_k = 1 − a_k δ`,
/// `θ_{−k} = c Π_{j≤k} ρ_j` for `0 ≤ k ≤ r`, normalised to `Σ θ² = 1`.
pub fn ar_truncated_weights(a: &[f64], delta: f64) -> Result<WeightProfile> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Parameter(format!("delta must be >= 0, got {delta}")));
    }
    if a.iter().any(|&ak| !(ak >= 0.0 && ak.is_finite())) {
        return Err(Error::Parameter("coefficients a_k must be nonnegative".into()));
    }
    let r = a.len();
    let mut prods = Vec::with_capacity(r + 1);
    prods.push(1.0);
    for (k, &ak) in a.iter().enumerate() {
        let rho = 1.0 - ak * delta;
        if rho < 0.0 {
            return Err(Error::Parameter(format!(
                "rho_{} = {rho} is negative; delta too large",
                k + 1
            )));
        }
        prods.push(prods[k] * rho);
    }
    let c = 1.0 / prods.iter().map(|p| p * p).sum::<f64>().sqrt();
    // offsets -r..=0 in increasing order
    let entries = (0..=r)
        .rev()
        .map(|k| (-(k as i64), c * prods[k]))
        .collect();
    WeightProfile::new(entries)
}

/// Window coefficients `c_j = (r+1)^{-1} Σ_{k=0}^{r} (a_{k+1} + … + a_{k+j})` for
/// `j = 1..2r`, taking `a_m = 0` for `m > r`.
pub fn window_coefficients(a: &[f64]) -> Vec<f64> {
    let r = a.len();
    let a_at = |m: usize| if (1..=r).contains(&m) { a[m - 1] } else { 0.0 };
    (1..=2 * r)
        .map(|j| {
            (0..=r)
                .map(|k| (k + 1..=k + j).map(a_at).sum::<f64>())
                .sum::<f64>()
                / (r as f64 + 1.0)
        })
        .collect()
}

/// Gaussian window `(X_{-r}, …, X_r)` with `cov(X_i, X_j) = 1 − c_{|i−j|} δ`.
#[derive(Debug, Clone)]
pub struct GaussianWindowModel {
    pub r: usize,
    pub c: Vec<f64>,
    pub delta: f64,
    /// `σ_ij = c_{|i|} + c_{|j|} − c_{|i−j|}` over `i, j ∈ {−r..−1, 1..r}`.
    pub sigma1: DMatrix<f64>,
    sigma1_factor: DMatrix<f64>,
    cond_mean: Vec<f64>,
    cond_factor: DMatrix<f64>,
}

/// Draw of the centre value and its `2r` neighbours (order `−r..−1, 1..r`).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDraw {
    pub x0: f64,
    pub neighbors: Vec<f64>,
}

fn psd_factor(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(m.clone());
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.min();
    if min < -1e-10 {
        return Err(Error::Model(format!(
            "{what} is not positive semidefinite (min eigenvalue {min:e})"
        )));
    }
    let roots = DVector::from_iterator(n, eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

impl GaussianWindowModel {
    /// Neighbour offsets in storage order.
    pub fn offsets(&self) -> Vec<i64> {
        window_offsets(self.r)
    }

    /// `c_j` with `c_0 = 0`.
    pub fn c_at(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.c[j - 1]
        }
    }

    /// Covariance of the full `(2r+1)` window, centre last.
    pub fn full_covariance(&self) -> DMatrix<f64> {
        let offs = self.offsets();
        let mut all: Vec<i64> = offs.clone();
        all.push(0);
        let n = all.len();
        DMatrix::from_fn(n, n, |p, q| {
            1.0 - self.c_at((all[p] - all[q]).unsigned_abs() as usize) * self.delta
        })
    }

    /// Draws `X_0 ~ N(0,1) | X_0 > t` and then the neighbours from the exact
    /// conditional Gaussian given `X_0`. Writes neighbours into `buf`.
    pub fn sample_into<R: Rng + ?Sized>(&self, t: f64, rng: &mut R, buf: &mut [f64]) -> f64 {
        let x0 = truncated_standard_normal(t, rng);
        let m = 2 * self.r;
        let mut z = [0.0f64; 64];
        let z: &mut [f64] = if m <= 64 { &mut z[..m] } else { &mut vec![0.0; m][..] };
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for p in 0..m {
            let mut v = self.cond_mean[p] * x0;
            for q in 0..m {
                v += self.cond_factor[(p, q)] * z[q];
            }
            buf[p] = v;
        }
        x0
    }

    /// `Z ~ N(0, Σ₁)`.
    pub fn sample_sigma1<R: Rng + ?Sized>(&self, rng: &mut R, buf: &mut [f64]) {
        let m = 2 * self.r;
        let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        for p in 0..m {
            buf[p] = (0..m).map(|q| self.sigma1_factor[(p, q)] * z[q]).sum();
        }
    }
}

pub(crate) fn window_offsets(r: usize) -> Vec<i64> {
    let r = r as i64;
    (-r..0).chain(1..=r).collect()
}

/// Builds the window model and validates `Σ₁` and the full-window covariance.
pub fn build_window_model(r: usize, c: &[f64], delta: f64) -> Result<GaussianWindowModel> {
    if r == 0 {
        return Err(Error::Parameter("window radius must be >= 1".into()));
    }
    if c.len() != 2 * r {
        return Err(Error::Parameter(format!(
            "expected {} coefficients c_1..c_2r, got {}",
            2 * r,
            c.len()
        )));
    }
    if c.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::Parameter("coefficients c_j must be nonnegative".into()));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Parameter(format!("delta must be > 0, got {delta}")));
    }
    let offs = window_offsets(r);
    let c_at = |j: u64| if j == 0 { 0.0 } else { c[j as usize - 1] };
    let m = 2 * r;
    let sigma1 = DMatrix::from_fn(m, m, |p, q| {
        let (i, j) = (offs[p], offs[q]);
        c_at(i.unsigned_abs()) + c_at(j.unsigned_abs()) - c_at((i - j).unsigned_abs())
    });
    let sigma1_factor = psd_factor(&sigma1, "Sigma1")?;

    for i in 0..=(2 * r as u64) {
        let cov = 1.0 - c_at(i) * delta;
        if !(-1.0..=1.0).contains(&cov) {
            return Err(Error::Model(format!(
                "window covariance 1 - c_{i} delta = {cov} outside [-1, 1]"
            )));
        }
    }
    // Σ11 − Σ12 Σ21 = δ Σ₁ − δ² c cᵀ with c_p = c_{|i_p|}
    let cvec: Vec<f64> = offs.iter().map(|i| c_at(i.unsigned_abs())).collect();
    let cond_cov = DMatrix::from_fn(m, m, |p, q| delta * sigma1[(p, q)] - delta * delta * cvec[p] * cvec[q]);
    let cond_factor = psd_factor(&cond_cov, "conditional window covariance")?;
    let cond_mean = cvec.iter().map(|cp| 1.0 - cp * delta).collect();
    Ok(GaussianWindowModel {
        r,
        c: c.to_vec(),
        delta,
        sigma1,
        sigma1_factor,
        cond_mean,
        cond_factor,
    })
}

/// One draw of the window conditional on `X_0 > t` (`t = −∞` disables truncation).
pub fn sample_window_conditional<R: Rng + ?Sized>(
    model: &GaussianWindowModel,
    t: f64,
    rng: &mut R,
) -> WindowDraw {
    let mut neighbors = vec![0.0; 2 * model.r];
    let x0 = model.sample_into(t, rng, &mut neighbors);
    WindowDraw { x0, neighbors }
}

/// Standard normal conditioned on exceeding `t`.
pub fn truncated_standard_normal<R: Rng + ?Sized>(t: f64, rng: &mut R) -> f64 {
    if t < 0.5 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z > t {
                return z;
            }
        }
    }
    // exponential proposal with the optimal rate
    let rate = 0.5 * (t + (t * t + 4.0).sqrt());
    loop {
        let e: f64 = rng.sample(Exp1);
        let z = t + e / rate;
        let u: f64 = rng.random();
        if u <= (-0.5 * (z - rate) * (z - rate)).exp() {
            return z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weight_profile_validation() {
        assert!(WeightProfile::new(vec![]).is_err());
        assert!(WeightProfile::new(vec![(0, 0.0), (1, 0.0)]).is_err());
        assert!(WeightProfile::new(vec![(1, 1.0), (0, 1.0)]).is_err());
        assert!(WeightProfile::new(vec![(0, 1.0), (0, 1.0)]).is_err());
        let w = WeightProfile::new(vec![(-2, 1.0), (3, 0.5)]).unwrap();
        assert_eq!(w.diameter(), 5);
        assert_eq!(w.dense(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn ma_stub_examples() {
        let s = RandomStream::new(0, 0);
        let id = WeightProfile::equal(1);
        let stub = ErrorModel::deterministic(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(generate_ma(&id, &stub, 3, s).unwrap(), vec![1.0, 2.0, 3.0]);
        let two = WeightProfile::equal(2);
        let stub = ErrorModel::deterministic(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(generate_ma(&two, &stub, 3, s).unwrap(), vec![3.0, 5.0, 7.0]);
    }

    #[test]
    fn negative_offsets_use_earlier_disturbances() {
        // X_i = e_{i-1} + 10 e_i: extended range starts at index 0
        let w = WeightProfile::new(vec![(-1, 1.0), (0, 10.0)]).unwrap();
        let stub = ErrorModel::deterministic(vec![1.0, 2.0, 3.0]).unwrap();
        let x = generate_ma(&w, &stub, 2, RandomStream::new(0, 0)).unwrap();
        assert_eq!(x, vec![21.0, 32.0]);
    }

    #[test]
    fn uniform_filter_matches_direct_sum() {
        let w = WeightProfile::equal(7);
        let g = ErrorModel::gaussian(1.0).unwrap();
        let mut eps = vec![0.0; 5000 + 6];
        draw(&g, RandomStream::new(3, 3)).unwrap().fill(&mut eps);
        let mut fast = Vec::new();
        MovingAverage::new(&w).apply(&eps, &mut fast);
        for (i, v) in fast.iter().enumerate() {
            let direct: f64 = eps[i..i + 7].iter().sum();
            assert!((v - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn autocovariance_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let w = WeightProfile::from_values(0, &[h, h]).unwrap();
        assert_relative_eq!(autocovariance(&w, 1.0, 0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(autocovariance(&w, 1.0, 1), 0.5, max_relative = 1e-15);
        assert_eq!(autocovariance(&w, 1.0, 2), 0.0);
    }

    #[test]
    fn lag_one_autocovariance_of_generated_series() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let w = WeightProfile::from_values(0, &[h, h]).unwrap();
        let g = ErrorModel::gaussian(1.0).unwrap();
        let x = generate_ma(&w, &g, 1_000_000, RandomStream::new(9, 0)).unwrap();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let c1 = x.windows(2).map(|p| (p[0] - mean) * (p[1] - mean)).sum::<f64>() / (n - 1.0);
        assert!((c1 - 0.5).abs() < 0.005, "{c1}");
    }

    #[test]
    fn group_examples() {
        let s = RandomStream::new(1, 1);
        let stub = ErrorModel::deterministic(vec![0.5, -1.0, 2.0]).unwrap();
        let g = generate_groups(&WeightProfile::equal(1), &stub, 3, 4, &[0.0; 3], s).unwrap();
        for i in 0..3 {
            assert!(g.row(i).iter().all(|&v| v == [0.5, -1.0, 2.0][i]));
        }
        let zero = ErrorModel::deterministic(vec![0.0]).unwrap();
        let g = generate_groups(&WeightProfile::equal(1), &zero, 3, 5, &[5.0, 0.0, 0.0], s).unwrap();
        assert!(g.row(0).iter().all(|&v| v == 5.0));
        assert!(generate_groups(&WeightProfile::equal(1), &zero, 3, 1, &[0.0; 3], s).is_err());
        assert!(generate_groups(&WeightProfile::equal(1), &zero, 3, 2, &[0.0; 2], s).is_err());
    }

    #[test]
    fn mean_stat_examples() {
        let d = GroupData::from_rows(vec![vec![1.0, 2.0, 3.0]], vec![0.0]).unwrap();
        assert_relative_eq!(group_mean_stats(&d)[0], 6.0 / 3f64.sqrt(), max_relative = 1e-15);
        let z = GroupData::from_rows(vec![vec![0.0; 4]; 3], vec![0.0; 3]).unwrap();
        assert_eq!(group_mean_stats(&z), vec![0.0; 3]);
    }

    #[test]
    fn t_stat_examples() {
        let d = GroupData::from_rows(vec![vec![0.0, 2.0]], vec![0.0]).unwrap();
        assert_relative_eq!(group_t_stats(&d).unwrap()[0], 2f64.sqrt(), max_relative = 1e-15);
        let c = GroupData::from_rows(vec![vec![1.0, 2.0], vec![3.0, 3.0]], vec![0.0; 2]).unwrap();
        assert_eq!(group_t_stats(&c), Err(Error::DegenerateSample { row: 1 }));
    }

    #[test]
    fn t_stat_matches_textbook_rescaled() {
        let g = ErrorModel::gaussian(1.0).unwrap();
        let n = 10;
        let data =
            generate_groups(&WeightProfile::equal(1), &g, 500, n, &vec![0.0; 500], RandomStream::new(4, 4))
                .unwrap();
        let ys = group_t_stats(&data).unwrap();
        for (i, y) in ys.iter().enumerate() {
            let row = data.row(i);
            let nf = n as f64;
            let mean = row.iter().sum::<f64>() / nf;
            let s2 = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            let textbook = mean / (s2 / nf).sqrt();
            assert_relative_eq!(*y, textbook * (nf / (nf - 1.0)).sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn ar_weight_examples() {
        let w = ar_truncated_weights(&[1.0], 0.0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(w.entries().len(), 2);
        for &(_, v) in w.entries() {
            assert_relative_eq!(v, h, max_relative = 1e-15);
        }
        let w = ar_truncated_weights(&[1.0], 0.01).unwrap();
        assert_eq!(w.entries()[0].0, -1);
        let norm = (1.0f64 + 0.99 * 0.99).sqrt();
        assert_relative_eq!(w.get(0), 1.0 / norm, max_relative = 1e-14);
        assert_relative_eq!(w.get(-1), 0.99 / norm, max_relative = 1e-14);
        assert!((w.get(0) - 0.71065).abs() < 5e-6 && (w.get(-1) - 0.70354).abs() < 5e-6);
        assert!((w.sum_squares() - 1.0).abs() < 1e-12);
        let w = ar_truncated_weights(&[], 0.3).unwrap();
        assert_eq!(w.entries(), &[(0, 1.0)]);
        assert!(ar_truncated_weights(&[1.0, 50.0], 0.1).is_err());
    }

    #[test]
    fn window_coefficients_follow_convention() {
        // r = 1, a = (1): c_1 = (a_1 + a_2)/2 = 1/2, c_2 = (a_1 + a_2 + a_2 + a_3)/2 = 1/2
        assert_eq!(window_coefficients(&[1.0]), vec![0.5, 0.5]);
        // r = 2, a = (1, 1): c_1 = (1 + 1 + 0)/3, c_4 = (2 + 1 + 0)/3
        let c = window_coefficients(&[1.0, 1.0]);
        assert_relative_eq!(c[0], 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(c[3], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn window_model_examples() {
        let m = build_window_model(1, &[0.5, 0.5], 0.01).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!((&m.sigma1 - expect).abs().max() < 1e-15);
        let z = build_window_model(2, &[0.0; 4], 0.1).unwrap();
        assert_eq!(z.sigma1.abs().max(), 0.0);
        assert!(matches!(build_window_model(1, &[0.1, 1.0], 0.01), Err(Error::Model(_))));
        assert!(build_window_model(1, &[0.5], 0.01).is_err());
        assert!(build_window_model(1, &[0.5, 0.5], 0.0).is_err());
    }

    #[test]
    fn zero_coefficients_copy_centre() {
        let m = build_window_model(2, &[0.0; 4], 0.05).unwrap();
        let mut rng = RandomStream::new(1, 2).rng();
        for _ in 0..100 {
            let d = sample_window_conditional(&m, 2.0, &mut rng);
            assert!(d.x0 > 2.0);
            assert!(d.neighbors.iter().all(|&v| v == d.x0));
        }
    }

    #[test]
    fn truncated_normal_respects_level_and_mean() {
        let mut rng = RandomStream::new(8, 8).rng();
        for &t in &[-1.0, 0.2, 1.0, 4.412] {
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| truncated_standard_normal(t, &mut rng)).collect();
            assert!(xs.iter().all(|&x| x > t));
            // E[X | X > t] = phi(t) / Phi-bar(t)
            let g = ErrorModel::gaussian(1.0).unwrap();
            let mills = crate::distributions::density(&g, t).unwrap()
                / crate::distributions::survival(&g, t).unwrap();
            let mean = xs.iter().sum::<f64>() / n as f64;
            assert!((mean - mills).abs() < 0.01, "t={t} mean={mean} expect={mills}");
        }
    }
}
