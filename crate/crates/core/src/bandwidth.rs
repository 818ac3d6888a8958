//! Effective sample size, the oracle bandwidth rule, cross-validated
//! bandwidth selection, and τ estimation from realization summaries.
//!
//! Under a perturbation of strength `τ` the estimator behaves as if it had
//! `n_eff = n / (1 + nτ)` observations, and the risk-optimal bandwidth
//! scales like `(1/n + τ)^{1/(2β+1)}`, which stops shrinking once
//! `1/n < τ`.
//!
//! Two grid searches are offered. [`domain_cv_bandwidth`] holds out whole
//! realizations, so its validation error contains the distributional
//! variance. [`naive_cv_bandwidth`] uses random row splits and only sees
//! sampling noise. Both score held-out points whose `x` lies inside the
//! evaluation window (default `[0.05, 0.95]`), give `+∞` to any `h` that
//! leaves a scored point without local support, and break ties toward the
//! larger `h`.

use crate::error::{Error, Result};
use crate::lpe::{LpeConfig, SortedDesign};
use crate::model::Dataset;
use crate::rng::StreamKey;
use crate::stats;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveSampleSize {
    pub n: usize,
    pub tau: f64,
    pub n_eff: f64,
}

pub fn effective_sample_size(n: usize, tau: f64) -> Result<EffectiveSampleSize> {
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau", format!("must be finite and >= 0, got {tau}")));
    }
    let nf = n as f64;
    Ok(EffectiveSampleSize { n, tau, n_eff: nf / (1.0 + nf * tau) })
}

/// `scale_c · (1/n + τ)^{1/(2β+1)}`.
pub fn oracle_bandwidth(n: usize, tau: f64, beta: f64, scale_c: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau", "must be finite and >= 0"));
    }
    if !(beta > 0.0) {
        return Err(Error::invalid("beta", "must be > 0"));
    }
    if !(scale_c > 0.0) {
        return Err(Error::invalid("scale_c", "must be > 0"));
    }
    Ok(scale_c * (1.0 / n as f64 + tau).powf(1.0 / (2.0 * beta + 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthMethod {
    Oracle,
    DomainCv,
    NaiveCv,
}

impl fmt::Display for BandwidthMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BandwidthMethod::Oracle => "oracle",
            BandwidthMethod::DomainCv => "domain-cv",
            BandwidthMethod::NaiveCv => "naive-cv",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSelection {
    pub h_star: f64,
    pub method: BandwidthMethod,
    /// `(h, score)` for every grid point, in grid order.
    pub diagnostics: Vec<(f64, f64)>,
}

impl BandwidthSelection {
    pub fn oracle(h_star: f64) -> Self {
        Self { h_star, method: BandwidthMethod::Oracle, diagnostics: vec![] }
    }

    /// CSV rows `method,h,score` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,h,score\n");
        let rows: Vec<(f64, f64)> = if self.diagnostics.is_empty() {
            vec![(self.h_star, f64::NAN)]
        } else {
            self.diagnostics.clone()
        };
        for (h, s) in rows {
            out.push_str(&format!("{},{:.16e},{:.16e}\n", self.method, h, s));
        }
        out
    }
}

/// Held-out points are scored only inside this `x` window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalWindow {
    pub lo: f64,
    pub hi: f64,
}

impl Default for EvalWindow {
    fn default() -> Self {
        Self { lo: 0.05, hi: 0.95 }
    }
}

impl EvalWindow {
    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }

    /// `points` equispaced nodes spanning the window.
    pub fn grid(&self, points: usize) -> Vec<f64> {
        match points {
            0 => vec![],
            1 => vec![0.5 * (self.lo + self.hi)],
            _ => (0..points)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (points - 1) as f64)
                .collect(),
        }
    }
}

/// Index of the smallest score; near-ties (relative `1e-12`) go to the
/// larger `h`. Non-finite scores never win unless all are non-finite.
pub fn argmin_prefer_larger(hs: &[f64], scores: &[f64]) -> usize {
    assert_eq!(hs.len(), scores.len());
    assert!(!hs.is_empty());
    let best = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return (0..hs.len()).max_by(|&a, &b| hs[a].total_cmp(&hs[b])).unwrap();
    }
    let tol = 1e-12 * best.abs().max(1.0);
    (0..hs.len())
        .filter(|&i| scores[i] <= best + tol)
        .max_by(|&a, &b| hs[a].total_cmp(&hs[b]))
        .unwrap()
}

/// Mean squared prediction error of a fit trained on `train` and scored on
/// the `test` points inside `window`. `None` if any scored point has no
/// local support or nothing is scored.
fn holdout_score(cfg: &LpeConfig, train: &SortedDesign, test: &[(f64, f64)], window: EvalWindow) -> Option<f64> {
    let mut sq = Vec::with_capacity(test.len());
    for &(x, y) in test {
        if !window.contains(x) {
            continue;
        }
        let pred = train.predict(cfg, x).ok()?;
        sq.push((y - pred) * (y - pred));
    }
    (!sq.is_empty()).then(|| stats::mean(&sq))
}

fn validate_grid(grid: &[f64], base: &LpeConfig) -> Result<Vec<LpeConfig>> {
    if grid.is_empty() {
        return Err(Error::invalid("h_grid", "must be nonempty"));
    }
    grid.iter().map(|&h| base.with_bandwidth(h)).collect()
}

/// Leave-one-realization-out cross-validation.
///
/// Datasets sharing a `realization_id` are pooled into one domain. For each
/// `h` the score is the average over held-out domains of the held-out mean
/// squared prediction error.
pub fn domain_cv_bandwidth(
    datasets: &[Dataset],
    grid: &[f64],
    lpe_base: &LpeConfig,
    window: EvalWindow,
) -> Result<BandwidthSelection> {
    let cfgs = validate_grid(grid, lpe_base)?;
    let mut domains: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for (i, d) in datasets.iter().enumerate() {
        let id = d.realization_id.ok_or_else(|| {
            Error::DegenerateInput(format!("dataset {i} carries no realization_id"))
        })?;
        domains.entry(id).or_default().extend(d.xs.iter().copied().zip(d.ys.iter().copied()));
    }
    if domains.len() < 2 {
        return Err(Error::NeedsMultipleDomains { found: domains.len() });
    }
    let domains: Vec<Vec<(f64, f64)>> = domains.into_values().collect();
    let trains = (0..domains.len())
        .map(|j| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = domains
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .flat_map(|(_, d)| d.iter().copied())
                .unzip();
            SortedDesign::new(&xs, &ys)
        })
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<f64> = cfgs
        .par_iter()
        .map(|cfg| {
            let per: Option<Vec<f64>> = trains
                .iter()
                .zip(&domains)
                .map(|(train, test)| holdout_score(cfg, train, test, window))
                .collect();
            per.map_or(f64::INFINITY, |v| stats::mean(&v))
        })
        .collect();
    let best = argmin_prefer_larger(grid, &scores);
    Ok(BandwidthSelection {
        h_star: grid[best],
        method: BandwidthMethod::DomainCv,
        diagnostics: grid.iter().copied().zip(scores).collect(),
    })
}

/// Random-split `folds`-fold cross-validation with a fold assignment drawn
/// from `key`.
pub fn naive_cv_bandwidth(
    dataset: &Dataset,
    grid: &[f64],
    lpe_base: &LpeConfig,
    folds: usize,
    window: EvalWindow,
    key: StreamKey,
) -> Result<BandwidthSelection> {
    if folds < 2 {
        return Err(Error::invalid("folds", "must be >= 2"));
    }
    if dataset.len() < folds {
        return Err(Error::invalid("folds", "more folds than observations"));
    }
    let cfgs = validate_grid(grid, lpe_base)?;
    let mut perm: Vec<usize> = (0..dataset.len()).collect();
    perm.shuffle(&mut key.stream());
    let mut fold_of = vec![0usize; dataset.len()];
    for (pos, &i) in perm.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    let mut trains = Vec::with_capacity(folds);
    let mut tests = Vec::with_capacity(folds);
    for f in 0..folds {
        let (mut tx, mut ty, mut test) = (vec![], vec![], vec![]);
        for (i, &fold) in fold_of.iter().enumerate() {
            if fold == f {
                test.push((dataset.xs[i], dataset.ys[i]));
            } else {
                tx.push(dataset.xs[i]);
                ty.push(dataset.ys[i]);
            }
        }
        trains.push(SortedDesign::new(&tx, &ty)?);
        tests.push(test);
    }
    let scores: Vec<f64> = cfgs
        .par_iter()
        .map(|cfg| {
            // pooled over folds: every in-window point counts once
            let mut sq = Vec::new();
            for (train, test) in trains.iter().zip(&tests) {
                for &(x, y) in test.iter().filter(|p| window.contains(p.0)) {
                    match train.predict(cfg, x) {
                        Ok(p) => sq.push((y - p) * (y - p)),
                        Err(_) => return f64::INFINITY,
                    }
                }
            }
            if sq.is_empty() {
                f64::INFINITY
            } else {
                stats::mean(&sq)
            }
        })
        .collect();
    let best = argmin_prefer_larger(grid, &scores);
    Ok(BandwidthSelection {
        h_star: grid[best],
        method: BandwidthMethod::NaiveCv,
        diagnostics: grid.iter().copied().zip(scores).collect(),
    })
}

/// `max(0, (Var(θ) − σ̂²/n_per) / σ̂²)`.
pub fn estimate_tau_from_summaries(theta: &[f64], n_per: usize, sigma2_hat: f64) -> Result<f64> {
    Ok(tau_components(theta, n_per, sigma2_hat, 0.0)?.tau_hat)
}

/// Components of the τ estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub tau_hat: f64,
    /// Sample variance of the realization means.
    pub var_theta: f64,
    /// `σ̂² / n_per`.
    pub sampling_term: f64,
    /// `Var(f(X)) / n_per` (zero unless requested).
    pub design_term: f64,
    pub sigma2_hat: f64,
    pub n_per: usize,
    pub realizations: usize,
}

/// As [`estimate_tau_from_summaries`], with an optional extra subtraction of
/// `design_var / n_per` for the spread of `f(X)` (pass 0 to disable).
pub fn tau_components(theta: &[f64], n_per: usize, sigma2_hat: f64, design_var: f64) -> Result<TauEstimate> {
    if theta.len() < 2 {
        return Err(Error::NeedsMultipleDomains { found: theta.len() });
    }
    if n_per == 0 {
        return Err(Error::invalid("n_per", "must be >= 1"));
    }
    if !(sigma2_hat > 0.0 && sigma2_hat.is_finite()) {
        return Err(Error::invalid("sigma2_hat", "must be finite and > 0"));
    }
    if !(design_var >= 0.0) {
        return Err(Error::invalid("design_var", "must be >= 0"));
    }
    let var_theta = stats::sample_variance(theta);
    let sampling_term = sigma2_hat / n_per as f64;
    let design_term = design_var / n_per as f64;
    let tau_hat = ((var_theta - sampling_term - design_term) / sigma2_hat).max(0.0);
    Ok(TauEstimate {
        tau_hat,
        var_theta,
        sampling_term,
        design_term,
        sigma2_hat,
        n_per,
        realizations: theta.len(),
    })
}

/// Pooled within-bucket variance of `y` across datasets: each
/// (realization, bucket) cell is centered at its own mean, which removes
/// both `f` (to first order) and the shared shift.
pub fn pooled_within_bucket_variance(datasets: &[Dataset]) -> Result<f64> {
    let mut ss = 0.0;
    let mut dof = 0usize;
    for d in datasets {
        let buckets = d
            .bucket_ids
            .as_ref()
            .ok_or_else(|| Error::DegenerateInput("dataset has no bucket ids".into()))?;
        let mut cells: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (&b, &y) in buckets.iter().zip(&d.ys) {
            cells.entry(b).or_default().push(y);
        }
        for ys in cells.values().filter(|v| v.len() >= 2) {
            ss += stats::sample_variance(ys) * (ys.len() - 1) as f64;
            dof += ys.len() - 1;
        }
    }
    if dof == 0 {
        return Err(Error::DegenerateInput("no bucket holds two observations".into()));
    }
    Ok(ss / dof as f64)
}

/// Per-dataset outcome means `θ_j`.
pub fn realization_means(datasets: &[Dataset]) -> Vec<f64> {
    datasets.iter().map(|d| stats::mean(&d.ys)).collect()
}
