//! Monte Carlo risk estimation under random perturbations.
//!
//! # Pointwise decomposition
//!
//! [`pointwise_risk_mc`] runs a nested simulation: `I` perturbation draws
//! `ξ_i`, and for each of them `R` datasets. With `μ_i`, `v_i` the inner
//! mean and unbiased inner variance of `f̂(x0)`:
//!
//! ```text
//! sampling_var = mean_i v_i
//! dist_var     = Var_i(μ_i) − sampling_var / R
//! bias2        = (mean_i μ_i − f(x0))² − Var_i(μ_i) / I
//! total_mse    = mean_{i,d} (f̂_id − f(x0))²
//! ```
//!
//! The two corrections make every component unbiased, and with them the
//! identity `total = bias2 + sampling_var + dist_var` holds exactly on the
//! raw values. Reported components are clamped at zero; the raw values are
//! kept alongside. Standard errors are delete-one jackknife over `ξ`.
//!
//! # Curves
//!
//! [`mise_mc`] draws one `(ξ, dataset)` pair per replicate and evaluates
//! every bandwidth on the same draws. [`optimal_bandwidth_curve`] repeats
//! that per `(n, τ)` cell, sharing random numbers across `τ`.
//!
//! Replicates run in parallel on pre-assigned streams and are reduced in
//! replicate order, so results do not depend on the thread count.

use crate::bandwidth::argmin_prefer_larger;
use crate::error::{Error, Result};
use crate::lpe::{LpeConfig, SortedDesign};
use crate::model::bucket_of;
use crate::rng::StreamKey;
use crate::rup::{draw_perturbation, sample_perturbed, CorrelatedNoiseSpec, RupSpec};
use crate::stats::{self, pairwise_sum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Fraction of failed local fits tolerated before a run is aborted.
pub const MAX_FAILED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub x0: f64,
    pub n: usize,
    pub bandwidth: f64,
    pub tau: f64,
    pub bias2: f64,
    pub sampling_var: f64,
    pub dist_var: f64,
    pub total_mse: f64,
    pub se_bias2: f64,
    pub se_sampling_var: f64,
    pub se_dist_var: f64,
    pub se_total: f64,
    pub raw_bias2: f64,
    pub raw_sampling_var: f64,
    pub raw_dist_var: f64,
    pub reps_xi: usize,
    pub reps_data: usize,
    pub failed_fits: usize,
}

impl RiskReport {
    pub const CSV_HEADER: &'static str = "x0,n,h,tau,bias2,sampling_var,dist_var,total_mse,\
se_bias2,se_sampling_var,se_dist_var,se_total,raw_bias2,raw_dist_var,reps_xi,reps_data,failed_fits";

    /// `total_mse − (bias2 + sampling_var + dist_var)` on reported values.
    pub fn identity_residual(&self) -> f64 {
        self.total_mse - (self.bias2 + self.sampling_var + self.dist_var)
    }

    /// Combined standard error of the identity residual.
    pub fn residual_se(&self) -> f64 {
        (self.se_total.powi(2) + self.se_bias2.powi(2) + self.se_sampling_var.powi(2) + self.se_dist_var.powi(2))
            .sqrt()
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
            self.x0,
            self.n,
            self.bandwidth,
            self.tau,
            self.bias2,
            self.sampling_var,
            self.dist_var,
            self.total_mse,
            self.se_bias2,
            self.se_sampling_var,
            self.se_dist_var,
            self.se_total,
            self.raw_bias2,
            self.raw_dist_var,
            self.reps_xi,
            self.reps_data,
            self.failed_fits
        )
    }
}

/// Per-`ξ` summary: inner mean, inner variance, inner mean squared error.
#[derive(Debug, Clone, Copy)]
struct OuterCell {
    mu: f64,
    v: f64,
    t: f64,
}

#[derive(Debug, Clone, Copy)]
struct Components {
    bias2: f64,
    sampling: f64,
    dist: f64,
    total: f64,
}

fn components(cells: &[OuterCell], r: usize, truth: f64) -> Components {
    let mu: Vec<f64> = cells.iter().map(|c| c.mu).collect();
    let v: Vec<f64> = cells.iter().map(|c| c.v).collect();
    let t: Vec<f64> = cells.iter().map(|c| c.t).collect();
    let var_mu = stats::sample_variance(&mu);
    let sampling = stats::mean(&v);
    Components {
        bias2: (stats::mean(&mu) - truth).powi(2) - var_mu / cells.len() as f64,
        sampling,
        dist: var_mu - sampling / r as f64,
        total: stats::mean(&t),
    }
}

/// Delete-one jackknife standard errors of the four components.
fn jackknife(cells: &[OuterCell], r: usize, truth: f64) -> Components {
    let i = cells.len();
    let mut loo = Vec::with_capacity(i);
    let mut buf = Vec::with_capacity(i - 1);
    for skip in 0..i {
        buf.clear();
        buf.extend(cells.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, c)| *c));
        loo.push(components(&buf, r, truth));
    }
    let se = |f: fn(&Components) -> f64| {
        let xs: Vec<f64> = loo.iter().map(f).collect();
        let m = stats::mean(&xs);
        let ss: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
        ((i - 1) as f64 / i as f64 * pairwise_sum(&ss)).sqrt()
    };
    Components {
        bias2: se(|c| c.bias2),
        sampling: se(|c| c.sampling),
        dist: se(|c| c.dist),
        total: se(|c| c.total),
    }
}

fn spec_tau(spec: &RupSpec) -> f64 {
    crate::rup::perturbation_strength(spec).tau
}

/// Nested Monte Carlo estimate of the bias / sampling / distributional
/// decomposition of the pointwise risk at `x0`.
///
/// Stream layout: `key.child(i).child(0)` draws `ξ_i`,
/// `key.child(i).child(1 + d)` draws dataset `d` given `ξ_i`.
pub fn pointwise_risk_mc(
    spec: &RupSpec,
    lpe: &LpeConfig,
    x0: f64,
    reps_xi: usize,
    reps_data: usize,
    key: StreamKey,
) -> Result<RiskReport> {
    if reps_xi < 2 {
        return Err(Error::invalid("reps_xi", "must be >= 2"));
    }
    if reps_data < 2 {
        return Err(Error::invalid("reps_data", "must be >= 2"));
    }
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::OutOfDomain(x0));
    }
    lpe.validate()?;
    let base = spec.baseline();
    let truth = base.f.eval(x0);
    let n = base.n;

    let outer: Vec<(Vec<f64>, usize)> = (0..reps_xi as u64)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, usize)> {
            let k = key.child(i);
            let xi = draw_perturbation(spec, &mut k.child(0).stream())?.with_id(i);
            let mut fits = Vec::with_capacity(reps_data);
            let mut failed = 0;
            for d in 0..reps_data as u64 {
                let data = sample_perturbed(spec, &xi, n, &mut k.child(1 + d).stream())?;
                match SortedDesign::from_dataset(&data)?.predict(lpe, x0) {
                    Ok(v) => fits.push(v),
                    Err(Error::NoLocalSupport { .. }) => failed += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok((fits, failed))
        })
        .collect::<Result<_>>()?;

    let total_fits = reps_xi * reps_data;
    let failed: usize = outer.iter().map(|o| o.1).sum();
    if failed as f64 > MAX_FAILED_FRACTION * total_fits as f64 {
        return Err(Error::TooManyFailedFits { failed, total: total_fits });
    }
    let cells: Vec<OuterCell> = outer
        .iter()
        .filter(|(fits, _)| fits.len() >= 2)
        .map(|(fits, _)| {
            let sq: Vec<f64> = fits.iter().map(|f| (f - truth).powi(2)).collect();
            OuterCell { mu: stats::mean(fits), v: stats::sample_variance(fits), t: stats::mean(&sq) }
        })
        .collect();
    if cells.len() < 2 {
        return Err(Error::TooManyFailedFits { failed, total: total_fits });
    }
    // failures are rare (≤ 1%); the effective inner count is their mean
    let r_eff = {
        let counts: Vec<f64> = outer.iter().filter(|o| o.0.len() >= 2).map(|o| o.0.len() as f64).collect();
        stats::mean(&counts).round() as usize
    };
    let raw = components(&cells, r_eff, truth);
    let se = jackknife(&cells, r_eff, truth);
    Ok(RiskReport {
        x0,
        n,
        bandwidth: lpe.bandwidth,
        tau: spec_tau(spec),
        bias2: raw.bias2.max(0.0),
        sampling_var: raw.sampling.max(0.0),
        dist_var: raw.dist.max(0.0),
        total_mse: raw.total,
        se_bias2: se.bias2,
        se_sampling_var: se.sampling,
        se_dist_var: se.dist,
        se_total: se.total,
        raw_bias2: raw.bias2,
        raw_sampling_var: raw.sampling,
        raw_dist_var: raw.dist,
        reps_xi,
        reps_data,
        failed_fits: failed,
    })
}

/// Weight-resampling evaluation of `δ²σ² E_X[Σ_k Σ_l W_k W_l 1{b(X_k) = b(X_l)}]`
/// for the correlated noise model. Returns `(mean, standard error)` over
/// `reps` uniform designs.
pub fn distributional_variance_oracle(
    spec: &CorrelatedNoiseSpec,
    lpe: &LpeConfig,
    x0: f64,
    reps: usize,
    key: StreamKey,
) -> Result<(f64, f64)> {
    use rand::Rng;
    if reps < 2 {
        return Err(Error::invalid("reps", "must be >= 2"));
    }
    let n = spec.baseline.n;
    let scale = spec.delta2 * spec.baseline.sigma2;
    let vals: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut s = key.child(r).stream();
            let xs: Vec<f64> = (0..n).map(|_| s.random::<f64>()).collect();
            let design = SortedDesign::new(&xs, &vec![0.0; n])?;
            let mut per_bucket = vec![0.0; spec.b_x];
            for (k, w) in design.sparse_weights(lpe, x0)? {
                per_bucket[bucket_of(xs[k], spec.b_x)] += w;
            }
            let sq: Vec<f64> = per_bucket.iter().map(|s| s * s).collect();
            Ok(scale * pairwise_sum(&sq))
        })
        .collect::<Result<_>>()?;
    Ok((stats::mean(&vals), stats::std_error(&vals)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiseRow {
    pub h: f64,
    /// `+∞` when some replicate had no local support on the grid.
    pub mise: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiseCurve {
    pub rows: Vec<MiseRow>,
    pub argmin_h: f64,
    pub n: usize,
    pub tau: f64,
    pub order: usize,
    pub kernel: String,
    pub reps: usize,
    pub seed: u64,
}

impl MiseCurve {
    pub const CSV_HEADER: &'static str = "h,tau,mise,se";

    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| format!("{:.16e},{:.16e},{:.16e},{:.16e}", r.h, self.tau, r.mise, r.se))
            .collect()
    }

    pub fn min_mise(&self) -> f64 {
        self.rows.iter().map(|r| r.mise).fold(f64::INFINITY, f64::min)
    }
}

fn validate_grids(h_grid: &[f64], eval_grid: &[f64], lpe_base: &LpeConfig) -> Result<Vec<LpeConfig>> {
    if h_grid.is_empty() {
        return Err(Error::invalid("h_grid", "must be nonempty"));
    }
    if eval_grid.is_empty() {
        return Err(Error::invalid("eval_grid", "must be nonempty"));
    }
    if let Some(&bad) = eval_grid.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::OutOfDomain(bad));
    }
    h_grid.iter().map(|&h| lpe_base.with_bandwidth(h)).collect()
}

/// Monte Carlo MISE over `eval_grid` for every bandwidth in `h_grid`.
///
/// Replicate `r` uses `key.child(r).child(0)` for `ξ` and
/// `key.child(r).child(1)` for the dataset; all bandwidths see the same
/// draws.
pub fn mise_mc(
    spec: &RupSpec,
    lpe_base: &LpeConfig,
    h_grid: &[f64],
    eval_grid: &[f64],
    reps: usize,
    key: StreamKey,
) -> Result<MiseCurve> {
    if reps < 2 {
        return Err(Error::invalid("reps", "must be >= 2"));
    }
    let mut cfgs = validate_grids(h_grid, eval_grid, lpe_base)?;
    cfgs.sort_by(|a, b| a.bandwidth.total_cmp(&b.bandwidth));
    let base = spec.baseline();
    let truth: Vec<f64> = eval_grid.iter().map(|&x| base.f.eval(x)).collect();

    // per replicate: ISE per bandwidth, None where a grid point lacked support
    let per_rep: Vec<Vec<Option<f64>>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<Option<f64>>> {
            let k = key.child(r);
            let xi = draw_perturbation(spec, &mut k.child(0).stream())?.with_id(r);
            let data = sample_perturbed(spec, &xi, base.n, &mut k.child(1).stream())?;
            let design = SortedDesign::from_dataset(&data)?;
            Ok(cfgs
                .iter()
                .map(|cfg| {
                    let sq: Option<Vec<f64>> = eval_grid
                        .iter()
                        .zip(&truth)
                        .map(|(&x, &f)| design.predict(cfg, x).ok().map(|p| (p - f).powi(2)))
                        .collect();
                    sq.map(|v| stats::mean(&v))
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let rows: Vec<MiseRow> = cfgs
        .iter()
        .enumerate()
        .map(|(j, cfg)| {
            let vals: Option<Vec<f64>> = per_rep.iter().map(|rep| rep[j]).collect();
            match vals {
                Some(v) => MiseRow { h: cfg.bandwidth, mise: stats::mean(&v), se: stats::std_error(&v) },
                None => MiseRow { h: cfg.bandwidth, mise: f64::INFINITY, se: f64::NAN },
            }
        })
        .collect();
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let ms: Vec<f64> = rows.iter().map(|r| r.mise).collect();
    let argmin_h = hs[argmin_prefer_larger(&hs, &ms)];
    Ok(MiseCurve {
        rows,
        argmin_h,
        n: base.n,
        tau: spec_tau(spec),
        order: lpe_base.order,
        kernel: lpe_base.kernel.kind.to_string(),
        reps,
        seed: key.seed(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HStarRow {
    pub n: usize,
    pub tau: f64,
    pub h_star: f64,
}

impl HStarRow {
    pub const CSV_HEADER: &'static str = "n,tau,h_star";

    pub fn to_csv_row(&self) -> String {
        format!("{},{:.16e},{:.16e}", self.n, self.tau, self.h_star)
    }
}

/// `argmin_h` of the MISE curve for every `(n, τ)` cell. `family` holds one
/// spec per `τ`; its baseline `n` is replaced by each entry of `n_grid`.
/// Cells with the same `n` share random numbers.
#[allow(clippy::too_many_arguments)]
pub fn optimal_bandwidth_curve(
    family: &[RupSpec],
    n_grid: &[usize],
    lpe_base: &LpeConfig,
    h_grid: &[f64],
    eval_grid: &[f64],
    reps: usize,
    key: StreamKey,
) -> Result<Vec<HStarRow>> {
    if family.is_empty() {
        return Err(Error::invalid("tau_grid", "must be nonempty"));
    }
    if n_grid.is_empty() {
        return Err(Error::invalid("n_grid", "must be nonempty"));
    }
    let mut out = Vec::with_capacity(family.len() * n_grid.len());
    for spec in family {
        for &n in n_grid {
            let s = spec.with_baseline(spec.baseline().with_n(n)?);
            let curve = mise_mc(&s, lpe_base, h_grid, eval_grid, reps, key.child(n as u64))?;
            out.push(HStarRow { n, tau: curve.tau, h_star: curve.argmin_h });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(log n_eff, log risk)` pairs.
pub fn rate_fit(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() {
        return Err(Error::DegenerateInput("xs and ys differ in length".into()));
    }
    if xs.len() < 3 {
        return Err(Error::DegenerateInput(format!("rate fit needs >= 3 points, got {}", xs.len())));
    }
    let (slope, intercept, r2) = stats::ols_line(xs, ys)
        .ok_or_else(|| Error::DegenerateInput("all abscissae coincide".into()))?;
    Ok(RateFit { slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BaselineConfig, RegressionFunction};

    fn corr(delta2: f64, sigma2: f64, n: usize, f: RegressionFunction) -> RupSpec {
        RupSpec::from(CorrelatedNoiseSpec::new(10, delta2, BaselineConfig::new(f, sigma2, n).unwrap()).unwrap())
    }

    #[test]
    fn exact_line_rate_fit() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| -0.8 * x + 1.0).collect();
        let fit = rate_fit(&xs, &ys).unwrap();
        assert!((fit.slope + 0.8).abs() < 1e-14 && (fit.r2 - 1.0).abs() < 1e-14);
        assert!(rate_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(rate_fit(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn affine_noiseless_is_exact() {
        let spec = corr(0.0, 0.0, 200, RegressionFunction::affine(0.3, -1.2));
        let lpe = LpeConfig::local_linear(0.1).unwrap();
        let rep = pointwise_risk_mc(&spec, &lpe, 0.4, 3, 3, StreamKey::new(1)).unwrap();
        assert!(rep.total_mse < 1e-10, "{}", rep.total_mse);
        let curve = mise_mc(&spec, &lpe, &[0.08, 0.1, 0.2], &[0.2, 0.5, 0.8], 2, StreamKey::new(1)).unwrap();
        assert_eq!(curve.rows.len(), 3);
        assert!(curve.rows.iter().all(|r| r.mise < 1e-20));
    }

    #[test]
    fn identity_holds_on_raw_components() {
        let spec = corr(0.25, 1.0, 300, RegressionFunction::sine());
        let lpe = LpeConfig::local_linear(0.15).unwrap();
        let rep = pointwise_risk_mc(&spec, &lpe, 0.3, 20, 10, StreamKey::new(4)).unwrap();
        let raw = rep.raw_bias2 + rep.raw_sampling_var + rep.raw_dist_var;
        assert!((rep.total_mse - raw).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_reps() {
        let spec = corr(0.0, 1.0, 50, RegressionFunction::zero());
        let lpe = LpeConfig::local_linear(0.2).unwrap();
        assert!(pointwise_risk_mc(&spec, &lpe, 0.5, 1, 5, StreamKey::new(0)).is_err());
        assert!(mise_mc(&spec, &lpe, &[0.2], &[0.5], 1, StreamKey::new(0)).is_err());
        assert!(mise_mc(&spec, &lpe, &[], &[0.5], 2, StreamKey::new(0)).is_err());
    }

    #[test]
    fn tiny_bandwidth_is_marked_unusable() {
        let spec = corr(0.0, 1.0, 20, RegressionFunction::zero());
        let lpe = LpeConfig::local_linear(0.2).unwrap();
        let grid: Vec<f64> = (0..101).map(|i| 0.05 + 0.009 * i as f64).collect();
        let curve = mise_mc(&spec, &lpe, &[0.001, 0.3], &grid, 2, StreamKey::new(0)).unwrap();
        assert!(curve.rows[0].mise.is_infinite());
        assert_eq!(curve.argmin_h, 0.3);
    }
}
