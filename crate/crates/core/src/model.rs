//! Baseline law: `X ~ Unif[0,1]`, `Y = f(X) + ε`, `ε ⟂ X`, Gaussian noise.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::rng::RngStream;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Catalog of regression functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FunctionKind {
    Zero,
    /// `sin(2πx)`.
    Sine,
    /// `Σ_k coeffs[k] x^k`.
    Polynomial { coeffs: Vec<f64> },
    /// `amplitude · width^β · K((x − center)/width)` with the smooth bump `K`.
    Bump { center: f64, width: f64, amplitude: f64, beta: f64 },
}

/// Target function `f` with a Hölder certificate `f ∈ Σ(beta, holder_const)`.
///
/// Hölder convention: with `l` the largest integer strictly below `beta`,
/// `|f^(l)(x) − f^(l)(x')| ≤ holder_const · |x − x'|^(beta − l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFunction {
    pub name: String,
    pub kind: FunctionKind,
    pub beta: f64,
    pub holder_const: f64,
}

impl RegressionFunction {
    pub fn zero() -> Self {
        Self { name: "zero".into(), kind: FunctionKind::Zero, beta: 2.0, holder_const: 1.0 }
    }

    /// `sin(2πx)` with the certificate β = 2, L = (2π)².
    pub fn sine() -> Self {
        Self {
            name: "sin".into(),
            kind: FunctionKind::Sine,
            beta: 2.0,
            holder_const: (2.0 * PI).powi(2),
        }
    }

    /// Polynomial, certified as Lipschitz (β = 1) with `L = Σ k |c_k|`.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        let lip: f64 = coeffs.iter().enumerate().map(|(k, c)| k as f64 * c.abs()).sum();
        Self {
            name: "polynomial".into(),
            kind: FunctionKind::Polynomial { coeffs },
            beta: 1.0,
            holder_const: lip.max(f64::MIN_POSITIVE),
        }
    }

    pub fn affine(intercept: f64, slope: f64) -> Self {
        let mut f = Self::polynomial(vec![intercept, slope]);
        f.name = "affine".into();
        f
    }

    /// Lower-bound bump `amplitude · width^β · K((x − center)/width)`.
    ///
    /// Supported for `0 < beta ≤ 2`; the declared Hölder constant is
    /// `amplitude` times a numerically certified Hölder constant of `K`.
    pub fn bump(center: f64, width: f64, amplitude: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 2.0) {
            return Err(Error::invalid("beta", format!("bump supports 0 < beta <= 2, got {beta}")));
        }
        if !(width > 0.0) {
            return Err(Error::invalid("width", "must be positive"));
        }
        if !(amplitude > 0.0) {
            return Err(Error::invalid("amplitude", "must be positive"));
        }
        Ok(Self {
            name: "bump".into(),
            kind: FunctionKind::Bump { center, width, amplitude, beta },
            beta,
            holder_const: amplitude * smooth_bump_holder_constant(beta),
        })
    }

    /// Look up a catalog entry by name (`zero`, `sin`).
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "zero" => Some(Self::zero()),
            "sin" | "sine" => Some(Self::sine()),
            _ => None,
        }
    }

    /// Unchecked evaluation.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            FunctionKind::Zero => 0.0,
            FunctionKind::Sine => (2.0 * PI * x).sin(),
            FunctionKind::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            FunctionKind::Bump { center, width, amplitude, beta } => {
                amplitude * width.powf(*beta) * KernelSpec::smooth_bump().eval((x - center) / width)
            }
        }
    }

    /// Hölder order `l`: the largest integer strictly below β.
    pub fn holder_order(&self) -> u32 {
        (self.beta.ceil() - 1.0).max(0.0) as u32
    }
}

/// Numerical Hölder constant of the smooth bump kernel for `0 < beta ≤ 2`,
/// taken over a 10⁻³ grid of pairs and padded by 5%.
pub fn smooth_bump_holder_constant(beta: f64) -> f64 {
    let k = KernelSpec::smooth_bump();
    let order = (beta.ceil() - 1.0).max(0.0) as u32;
    let alpha = beta - order as f64;
    let g = |u: f64| if order == 0 { k.eval(u) } else { k.derivative(u) };
    let n = 1000;
    let us: Vec<f64> = (0..=n).map(|i| -0.5 + i as f64 / n as f64).collect();
    let vals: Vec<f64> = us.iter().map(|&u| g(u)).collect();
    let mut best: f64 = 0.0;
    for i in 0..us.len() {
        for j in (i + 1)..us.len() {
            let ratio = (vals[i] - vals[j]).abs() / (us[j] - us[i]).powf(alpha);
            best = best.max(ratio);
        }
    }
    1.05 * best
}

/// Checked evaluation on `[0, 1]`.
pub fn eval_f(f: &RegressionFunction, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain(x));
    }
    Ok(f.eval(x))
}

/// Baseline law parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub f: RegressionFunction,
    pub sigma2: f64,
    pub n: usize,
}

impl BaselineConfig {
    /// `sigma2 = 0` is accepted so that noiseless designs can be exercised.
    pub fn new(f: RegressionFunction, sigma2: f64, n: usize) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid("sigma2", format!("must be finite and >= 0, got {sigma2}")));
        }
        if n == 0 {
            return Err(Error::invalid("n", "must be >= 1"));
        }
        Ok(Self { f, sigma2, n })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.f.clone(), self.sigma2, n)
    }
}

/// `n` observations with optional bucket labels and realization tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub bucket_ids: Option<Vec<usize>>,
    pub realization_id: Option<u64>,
}

impl Dataset {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DegenerateInput(format!(
                "xs has {} entries but ys has {}",
                xs.len(),
                ys.len()
            )));
        }
        if let Some(&bad) = xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::OutOfDomain(bad));
        }
        Ok(Self { xs, ys, bucket_ids: None, realization_id: None })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Attach bucket labels `b(x)` for `b_x` equal-width buckets.
    pub fn with_buckets(mut self, b_x: usize) -> Self {
        self.bucket_ids = Some(self.xs.iter().map(|&x| bucket_of(x, b_x)).collect());
        self
    }

    pub fn with_realization(mut self, id: u64) -> Self {
        self.realization_id = Some(id);
        self
    }

    /// Concatenate datasets (realization tag dropped).
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a Dataset>) -> Dataset {
        let mut out = Dataset { xs: vec![], ys: vec![], bucket_ids: None, realization_id: None };
        for d in parts {
            out.xs.extend_from_slice(&d.xs);
            out.ys.extend_from_slice(&d.ys);
        }
        out
    }
}

/// Bucket index `min(⌊b_x · x⌋, b_x − 1)`.
#[inline]
pub fn bucket_of(x: f64, b_x: usize) -> usize {
    ((b_x as f64 * x).floor().max(0.0) as usize).min(b_x - 1)
}

/// Replaceable noise law for the baseline sampler.
pub trait NoiseLaw {
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
    fn variance(&self) -> f64;
}

/// Centered Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianNoise {
    pub sigma: f64,
}

impl NoiseLaw for GaussianNoise {
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        if self.sigma == 0.0 {
            // keep the stream layout independent of sigma
            let _: f64 = rng.sample(StandardNormal);
            return 0.0;
        }
        self.sigma * rng.sample::<f64, _>(StandardNormal)
    }

    fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// Draw `n` iid pairs from the baseline law.
pub fn sample_baseline(config: &BaselineConfig, stream: &mut RngStream) -> Dataset {
    sample_baseline_with(config, &GaussianNoise { sigma: config.sigma() }, stream)
}

pub fn sample_baseline_with(config: &BaselineConfig, noise: &dyn NoiseLaw, stream: &mut RngStream) -> Dataset {
    let mut xs = Vec::with_capacity(config.n);
    let mut ys = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let x: f64 = stream.random();
        let eps = noise.sample(stream);
        xs.push(x);
        ys.push(config.f.eval(x) + eps);
    }
    Dataset { xs, ys, bucket_ids: None, realization_id: None }
}

/// Testing hook: baseline responses at caller-chosen design points.
pub fn sample_baseline_at(config: &BaselineConfig, xs: &[f64], stream: &mut RngStream) -> Result<Dataset> {
    let noise = GaussianNoise { sigma: config.sigma() };
    let ys = xs.iter().map(|&x| config.f.eval(x) + noise.sample(stream)).collect();
    Dataset::new(xs.to_vec(), ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    #[test]
    fn eval_examples() {
        assert_eq!(eval_f(&RegressionFunction::zero(), 0.7).unwrap(), 0.0);
        assert!(eval_f(&RegressionFunction::sine(), 0.5).unwrap().abs() < 1e-15);
        let v = eval_f(&RegressionFunction::sine(), 0.125).unwrap();
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(eval_f(&RegressionFunction::sine(), 1.2), Err(Error::OutOfDomain(_))));
        assert!(eval_f(&RegressionFunction::sine(), -0.1).is_err());
    }

    #[test]
    fn zero_function_zero_noise() {
        let cfg = BaselineConfig::new(RegressionFunction::zero(), 0.0, 3).unwrap();
        let d = sample_baseline(&cfg, &mut RngStream::from_seed(1));
        assert_eq!(d.ys, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn forced_design_point() {
        let cfg = BaselineConfig::new(RegressionFunction::sine(), 0.0, 1).unwrap();
        let d = sample_baseline_at(&cfg, &[0.25], &mut RngStream::from_seed(1)).unwrap();
        assert_eq!(d.ys, vec![1.0]);
    }

    #[test]
    fn unit_noise_variance() {
        let cfg = BaselineConfig::new(RegressionFunction::zero(), 1.0, 100_000).unwrap();
        let d = sample_baseline(&cfg, &mut RngStream::from_seed(2024));
        let v = stats::sample_variance(&d.ys);
        assert!((0.97..=1.03).contains(&v), "{v}");
    }

    #[test]
    fn config_validation() {
        assert!(BaselineConfig::new(RegressionFunction::zero(), -1.0, 3).is_err());
        assert!(BaselineConfig::new(RegressionFunction::zero(), 1.0, 0).is_err());
        assert!(Dataset::new(vec![0.1], vec![]).is_err());
        assert!(Dataset::new(vec![1.5], vec![0.0]).is_err());
    }

    #[test]
    fn bucket_map() {
        assert_eq!(bucket_of(0.30, 4), 1);
        assert_eq!(bucket_of(1.0, 4), 3);
        assert_eq!(bucket_of(0.0, 4), 0);
        assert_eq!(bucket_of(0.999_999, 10), 9);
    }

    #[test]
    fn bump_rejects_unsupported_beta() {
        assert!(RegressionFunction::bump(0.5, 0.1, 1.0, 2.5).is_err());
        let b = RegressionFunction::bump(0.5, 0.2, 1.0, 1.0).unwrap();
        assert!((b.eval(0.5) - 0.2).abs() < 1e-15);
        assert_eq!(b.eval(0.61), 0.0);
    }
}
