//! Gaussian KL divergence under the correlated noise model.
//!
//! Conditional on the design, the `n` responses are jointly Gaussian with
//! covariance `σ²(I + δ² · blockdiag(1 1ᵀ))`, one block per occupied
//! bucket. The inverse of a block of size `m` is
//! `σ⁻²(I − δ²/(1 + mδ²) · 1 1ᵀ)`, so `Σ⁻¹ v` costs `O(n)`.

use crate::bandwidth::effective_sample_size;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::model::bucket_of;
use crate::rng::StreamKey;
use crate::rup::CorrelatedNoiseSpec;
use crate::stats::{self, pairwise_sum};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Hypotheses `f0 ≡ 0` and `f1(x) = L h^β K((x − x0)/h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointConstruction {
    pub x0: f64,
    pub h: f64,
    pub beta: f64,
    pub holder_const: f64,
    pub kernel: KernelSpec,
}

impl TwoPointConstruction {
    pub fn new(x0: f64, h: f64, beta: f64, holder_const: f64) -> Result<Self> {
        Self::with_kernel(x0, h, beta, holder_const, KernelSpec::smooth_bump())
    }

    pub fn with_kernel(x0: f64, h: f64, beta: f64, holder_const: f64, kernel: KernelSpec) -> Result<Self> {
        if !(0.0..=1.0).contains(&x0) {
            return Err(Error::OutOfDomain(x0));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid("h", "must be finite and > 0"));
        }
        if !(beta > 0.0) {
            return Err(Error::invalid("beta", "must be > 0"));
        }
        if !(holder_const > 0.0) {
            return Err(Error::invalid("holder_const", "must be > 0"));
        }
        Ok(Self { x0, h, beta, holder_const, kernel })
    }

    pub fn f1(&self, x: f64) -> f64 {
        self.holder_const * self.h.powf(self.beta) * self.kernel.eval((x - self.x0) / self.h)
    }

    /// `∫ (f1 − f0)² dx` over the real line.
    pub fn l2_sq(&self) -> f64 {
        (self.holder_const * self.h.powf(self.beta)).powi(2) * self.h * self.kernel.l2_norm_sq()
    }
}

/// `L h^β K_max`.
pub fn two_point_separation(c: &TwoPointConstruction) -> f64 {
    c.holder_const * c.h.powf(c.beta) * c.kernel.k_max
}

/// Block covariance with blocks laid out contiguously in bucket order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCovariance {
    pub bucket_counts: Vec<usize>,
    pub sigma2: f64,
    pub delta2: f64,
}

impl BlockCovariance {
    pub fn new(bucket_counts: Vec<usize>, sigma2: f64, delta2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid("sigma2", "must be finite and > 0"));
        }
        if !(delta2 >= 0.0 && delta2.is_finite()) {
            return Err(Error::invalid("delta2", "must be finite and >= 0"));
        }
        Ok(Self { bucket_counts, sigma2, delta2 })
    }

    pub fn dim(&self) -> usize {
        self.bucket_counts.iter().sum()
    }

    /// Dense `n × n` matrix; meant for small verification problems.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut start = 0;
        for &c in &self.bucket_counts {
            for i in start..start + c {
                for j in start..start + c {
                    m[(i, j)] = self.sigma2 * (self.delta2 + if i == j { 1.0 } else { 0.0 });
                }
            }
            start += c;
        }
        m
    }
}

fn precision_apply_labeled(sigma2: f64, delta2: f64, labels: &[usize], buckets: usize, v: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; buckets];
    let mut counts = vec![0usize; buckets];
    for (&b, &x) in labels.iter().zip(v) {
        sums[b] += x;
        counts[b] += 1;
    }
    labels
        .iter()
        .zip(v)
        .map(|(&b, &x)| {
            let m = counts[b] as f64;
            (x - delta2 / (1.0 + m * delta2) * sums[b]) / sigma2
        })
        .collect()
}

/// `Σ⁻¹ v` without forming `Σ`.
pub fn block_precision_apply(cov: &BlockCovariance, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != cov.dim() {
        return Err(Error::DegenerateInput(format!(
            "vector has length {} but the covariance has dimension {}",
            v.len(),
            cov.dim()
        )));
    }
    let labels: Vec<usize> = cov
        .bucket_counts
        .iter()
        .enumerate()
        .flat_map(|(b, &c)| std::iter::repeat_n(b, c))
        .collect();
    Ok(precision_apply_labeled(cov.sigma2, cov.delta2, &labels, cov.bucket_counts.len(), v))
}

/// `½ Δfᵀ Σ⁻¹ Δf` for the design `xs`, with `Δf = f1(xs)`.
pub fn conditional_kl(xs: &[f64], c: &TwoPointConstruction, spec: &CorrelatedNoiseSpec) -> Result<f64> {
    let sigma2 = spec.baseline.sigma2;
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("sigma2", "KL needs sigma2 > 0"));
    }
    if let Some(&bad) = xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::OutOfDomain(bad));
    }
    let df: Vec<f64> = xs.iter().map(|&x| c.f1(x)).collect();
    let labels: Vec<usize> = xs.iter().map(|&x| bucket_of(x, spec.b_x)).collect();
    let p = precision_apply_labeled(sigma2, spec.delta2, &labels, spec.b_x, &df);
    let terms: Vec<f64> = df.iter().zip(&p).map(|(a, b)| a * b).collect();
    // the quadratic form is ≥ 0; clamp rounding noise
    Ok((0.5 * pairwise_sum(&terms)).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlRow {
    pub n: usize,
    pub b_x: usize,
    pub n_eff: f64,
    pub h: f64,
    pub kl_mean: f64,
    pub kl_se: f64,
    /// `kl_mean / (n_eff h^{2β+1})`.
    pub ratio: f64,
    /// `n / B_X` has more than doubled since the first row.
    pub regime_warning: bool,
}

impl KlRow {
    pub const CSV_HEADER: &'static str = "n,n_eff,kl_mean,kl_se,ratio,regime_warning";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.n, self.n_eff, self.kl_mean, self.kl_se, self.ratio, self.regime_warning
        )
    }
}

/// Construction with `h = scale · n_eff^{−1/(2β+1)}` centred at `x0`.
pub fn lemma_construction(
    x0: f64,
    beta: f64,
    holder_const: f64,
    scale: f64,
) -> impl Fn(usize, f64) -> Result<TwoPointConstruction> + Sync {
    move |_n, n_eff| {
        TwoPointConstruction::new(x0, (scale * n_eff.powf(-1.0 / (2.0 * beta + 1.0))).min(1.0), beta, holder_const)
    }
}

/// Average conditional KL over `reps` uniform designs for each `n`.
///
/// `bucket_rule(n)` gives `B_X`; `construction_rule(n, n_eff)` gives the
/// hypothesis pair. Design `r` at size `n` is drawn from
/// `key.child(n).child(r)`.
pub fn kl_mc(
    n_grid: &[usize],
    bucket_rule: impl Fn(usize) -> usize,
    delta2: f64,
    sigma2: f64,
    construction_rule: impl Fn(usize, f64) -> Result<TwoPointConstruction> + Sync,
    reps: usize,
    key: StreamKey,
) -> Result<Vec<KlRow>> {
    if n_grid.is_empty() {
        return Err(Error::invalid("n_grid", "must be nonempty"));
    }
    if reps < 2 {
        return Err(Error::invalid("reps", "must be >= 2"));
    }
    let mut rows: Vec<KlRow> = Vec::with_capacity(n_grid.len());
    let mut first_load = None;
    for &n in n_grid {
        let b_x = bucket_rule(n);
        let baseline = crate::model::BaselineConfig::new(crate::model::RegressionFunction::zero(), sigma2, n)?;
        let spec = CorrelatedNoiseSpec::new(b_x, delta2, baseline)?;
        let n_eff = effective_sample_size(n, spec.tau())?.n_eff;
        let c = construction_rule(n, n_eff)?;
        let kls: Vec<f64> = (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                let mut s = key.child(n as u64).child(r).stream();
                let xs: Vec<f64> = (0..n).map(|_| s.random::<f64>()).collect();
                conditional_kl(&xs, &c, &spec)
            })
            .collect::<Result<_>>()?;
        let kl_mean = stats::mean(&kls);
        let load = n as f64 / b_x as f64;
        let first = *first_load.get_or_insert(load);
        rows.push(KlRow {
            n,
            b_x,
            n_eff,
            h: c.h,
            kl_mean,
            kl_se: stats::std_error(&kls),
            ratio: kl_mean / (n_eff * c.h.powf(2.0 * c.beta + 1.0)),
            regime_warning: load > 2.0 * first,
        });
    }
    Ok(rows)
}

/// Limit of the ratio column when `δ² = 0`: `L² ∫K² / (2σ²)`.
pub fn iid_ratio_constant(c: &TwoPointConstruction, sigma2: f64) -> f64 {
    c.holder_const.powi(2) * c.kernel.l2_norm_sq() / (2.0 * sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelKind;
    use crate::model::{BaselineConfig, RegressionFunction};

    fn spec(b_x: usize, delta2: f64, sigma2: f64) -> CorrelatedNoiseSpec {
        CorrelatedNoiseSpec::new(b_x, delta2, BaselineConfig::new(RegressionFunction::zero(), sigma2, 2).unwrap())
            .unwrap()
    }

    #[test]
    fn identity_block() {
        let cov = BlockCovariance::new(vec![2, 1], 2.0, 0.0).unwrap();
        assert_eq!(block_precision_apply(&cov, &[1.0, 2.0, 4.0]).unwrap(), vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn two_by_two_hand_case() {
        let cov = BlockCovariance::new(vec![2], 1.0, 1.0).unwrap();
        let p = block_precision_apply(&cov, &[1.0, 0.0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn same_bucket_pair_kl() {
        let c = TwoPointConstruction::new(0.5, 1.0, 1.0, 1.0).unwrap();
        let xs = [0.5, 0.5];
        let a = c.f1(0.5);
        for delta2 in [0.0, 0.5, 1.0, 3.0] {
            let kl = conditional_kl(&xs, &c, &spec(1, delta2, 1.0)).unwrap();
            assert!((kl - a * a / (1.0 + 2.0 * delta2)).abs() < 1e-14);
        }
        let s = spec(1, 0.5, 1.0);
        let kl = conditional_kl(&xs, &c, &s).unwrap() / (a * a);
        assert!((kl - 0.5).abs() < 1e-14);
    }

    #[test]
    fn no_design_in_support_gives_zero() {
        let c = TwoPointConstruction::new(0.5, 0.1, 1.0, 1.0).unwrap();
        assert_eq!(conditional_kl(&[0.1, 0.9], &c, &spec(4, 1.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn separation_examples() {
        let c = TwoPointConstruction::new(0.5, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(two_point_separation(&c), 1.0);
        let k = KernelSpec { kind: KernelKind::SmoothBump, k_max: 0.8 };
        let c = TwoPointConstruction::with_kernel(0.5, 0.5, 1.0, 2.0, k).unwrap();
        assert!((two_point_separation(&c) - 0.8).abs() < 1e-15);
        let mut last = f64::INFINITY;
        for i in 1..=20 {
            let c = TwoPointConstruction::new(0.5, 1.0 / i as f64, 1.5, 1.0).unwrap();
            let s = two_point_separation(&c);
            assert!(s < last);
            last = s;
        }
    }

    #[test]
    fn f1_support_and_peak() {
        let c = TwoPointConstruction::new(0.4, 0.2, 1.0, 3.0).unwrap();
        assert_eq!(c.f1(0.29), 0.0);
        assert_eq!(c.f1(0.51), 0.0);
        assert!((c.f1(0.4) - 3.0 * 0.2).abs() < 1e-15);
    }

    #[test]
    fn single_n_one_row() {
        let rows = kl_mc(&[50], |n| n, 1.0, 1.0, lemma_construction(0.5, 1.0, 1.0, 1.0), 4, StreamKey::new(1)).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(!rows[0].regime_warning);
    }

    #[test]
    fn fixed_buckets_raise_the_flag() {
        let rows =
            kl_mc(&[50, 100, 400], |_| 10, 1.0, 1.0, lemma_construction(0.5, 1.0, 1.0, 1.0), 4, StreamKey::new(1))
                .unwrap();
        assert_eq!(rows.iter().map(|r| r.regime_warning).collect::<Vec<_>>(), vec![false, false, true]);
    }
}
