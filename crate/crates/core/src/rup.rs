//! Random unbiased perturbations of the conditional law `Y | X`.
//!
//! Two generators are provided:
//!
//! * **Partition model.** The `(X, ε)` plane is cut into `B_X × B_ε`
//!   quantile cells. Each cell receives an iid positive weight `ξ_ij`;
//!   weights are divided by their row mean `ξ̄_i` so the `X` marginal is
//!   untouched, and the noise law inside bucket `i` is tilted by
//!   `ξ_ij / ξ̄_i` on bin `J_j`.
//! * **Correlated noise model.** Each `X` bucket `b` receives an iid
//!   Gaussian shift `ξ_b ~ N(0, δ²σ²)` added to the noise mean.
//!
//! In both models the conditional-mean shift `Δ_ξ(x)` is constant on
//! buckets, so the `X`-correlation kernel is `1{same bucket}` and the
//! average correlation is `ρ̄ = 1/B_X`.

use crate::error::{Error, Result};
use crate::model::{bucket_of, BaselineConfig, Dataset};
use crate::rng::{RngStream, StreamKey};
use crate::stats::{self, normal_pdf, normal_quantile};
use rand::Rng;
use rand::distr::Open01;
use rand_distr::{Distribution, Exp1, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

const MAX_REDRAWS: usize = 100;

/// Law of the iid partition weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum WeightLaw {
    /// `Exp(1)`.
    Exp,
    /// `exp(N(mu, sigma²))`.
    LogNormal { mu: f64, sigma: f64 },
}

impl WeightLaw {
    /// Mean-one log-normal law with squared coefficient of variation `cv2`.
    pub fn lognormal_with_cv2(cv2: f64) -> Result<Self> {
        if !(cv2 > 0.0 && cv2.is_finite()) {
            return Err(Error::invalid("cv2", format!("must be finite and > 0, got {cv2}")));
        }
        let s2 = cv2.ln_1p();
        Ok(WeightLaw::LogNormal { mu: -0.5 * s2, sigma: s2.sqrt() })
    }

    /// `Var(ξ) / E[ξ]²`.
    pub fn cv2(&self) -> f64 {
        match *self {
            WeightLaw::Exp => 1.0,
            WeightLaw::LogNormal { sigma, .. } => (sigma * sigma).exp_m1(),
        }
    }

    fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            WeightLaw::Exp => Exp1.sample(rng),
            WeightLaw::LogNormal { mu, sigma } => {
                // parameters are validated on spec construction
                LogNormal::new(mu, sigma).expect("validated log-normal").sample(rng)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let WeightLaw::LogNormal { mu, sigma } = *self {
            if !(mu.is_finite() && sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::invalid("weight_law", "log-normal needs finite mu and sigma > 0"));
            }
        }
        Ok(())
    }
}

/// Analytic status of the inverse-moment hypothesis behind the
/// partition-model variance expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentCondition {
    /// `E[ξ⁻³] < ∞`.
    pub weight_inverse_third_finite: bool,
    /// `E[ξ̄⁻³] < ∞` for the row mean of `B_ε` weights.
    pub row_mean_inverse_third_finite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub b_x: usize,
    pub b_eps: usize,
    pub weight_law: WeightLaw,
    pub baseline: BaselineConfig,
}

impl PartitionSpec {
    pub fn new(b_x: usize, b_eps: usize, weight_law: WeightLaw, baseline: BaselineConfig) -> Result<Self> {
        if b_x < 1 {
            return Err(Error::invalid("b_x", "must be >= 1"));
        }
        if b_eps < 2 {
            return Err(Error::invalid("b_eps", "must be >= 2"));
        }
        weight_law.validate()?;
        Ok(Self { b_x, b_eps, weight_law, baseline })
    }

    pub fn moment_condition(&self) -> MomentCondition {
        match self.weight_law {
            // density of Exp(1) is 1 at the origin, so ∫ x⁻³ e⁻ˣ dx diverges;
            // the row mean is Gamma(B_ε, B_ε) and has E[ξ̄⁻³] < ∞ iff B_ε > 3
            WeightLaw::Exp => MomentCondition {
                weight_inverse_third_finite: false,
                row_mean_inverse_third_finite: self.b_eps > 3,
            },
            WeightLaw::LogNormal { .. } => MomentCondition {
                weight_inverse_third_finite: true,
                row_mean_inverse_third_finite: true,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedNoiseSpec {
    pub b_x: usize,
    pub delta2: f64,
    pub baseline: BaselineConfig,
}

impl CorrelatedNoiseSpec {
    pub fn new(b_x: usize, delta2: f64, baseline: BaselineConfig) -> Result<Self> {
        if b_x < 1 {
            return Err(Error::invalid("b_x", "must be >= 1"));
        }
        if !(delta2 >= 0.0 && delta2.is_finite()) {
            return Err(Error::invalid("delta2", format!("must be finite and >= 0, got {delta2}")));
        }
        Ok(Self { b_x, delta2, baseline })
    }

    /// Correlation length `λ = 1/B_X`.
    pub fn correlation_length(&self) -> f64 {
        1.0 / self.b_x as f64
    }

    pub fn tau(&self) -> f64 {
        self.delta2 / self.b_x as f64
    }
}

/// Either RUP generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum RupSpec {
    Partition(PartitionSpec),
    CorrelatedNoise(CorrelatedNoiseSpec),
}

impl From<PartitionSpec> for RupSpec {
    fn from(s: PartitionSpec) -> Self {
        RupSpec::Partition(s)
    }
}

impl From<CorrelatedNoiseSpec> for RupSpec {
    fn from(s: CorrelatedNoiseSpec) -> Self {
        RupSpec::CorrelatedNoise(s)
    }
}

impl RupSpec {
    /// The unperturbed law as a degenerate RUP (`δ² = 0`).
    pub fn none(baseline: BaselineConfig) -> Self {
        RupSpec::CorrelatedNoise(CorrelatedNoiseSpec { b_x: 1, delta2: 0.0, baseline })
    }

    pub fn baseline(&self) -> &BaselineConfig {
        match self {
            RupSpec::Partition(s) => &s.baseline,
            RupSpec::CorrelatedNoise(s) => &s.baseline,
        }
    }

    pub fn b_x(&self) -> usize {
        match self {
            RupSpec::Partition(s) => s.b_x,
            RupSpec::CorrelatedNoise(s) => s.b_x,
        }
    }

    pub fn with_baseline(&self, baseline: BaselineConfig) -> Self {
        let mut out = self.clone();
        match &mut out {
            RupSpec::Partition(s) => s.baseline = baseline,
            RupSpec::CorrelatedNoise(s) => s.baseline = baseline,
        }
        out
    }
}

/// One draw `ξ ~ Ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum PerturbationRealization {
    Partition {
        realization_id: u64,
        /// Raw weights, `B_X` rows of `B_ε` entries.
        weights: Vec<Vec<f64>>,
        /// Row means `ξ̄_i`.
        row_normalizers: Vec<f64>,
        /// Truncated-Gaussian bin means `m_j = E_0[ε | ε ∈ J_j]`.
        eps_bin_means: Vec<f64>,
    },
    CorrelatedNoise {
        realization_id: u64,
        bucket_shifts: Vec<f64>,
    },
}

impl PerturbationRealization {
    pub fn realization_id(&self) -> u64 {
        match self {
            PerturbationRealization::Partition { realization_id, .. }
            | PerturbationRealization::CorrelatedNoise { realization_id, .. } => *realization_id,
        }
    }

    pub fn with_id(mut self, id: u64) -> Self {
        match &mut self {
            PerturbationRealization::Partition { realization_id, .. }
            | PerturbationRealization::CorrelatedNoise { realization_id, .. } => *realization_id = id,
        }
        self
    }

    pub fn b_x(&self) -> usize {
        match self {
            PerturbationRealization::Partition { weights, .. } => weights.len(),
            PerturbationRealization::CorrelatedNoise { bucket_shifts, .. } => bucket_shifts.len(),
        }
    }

    /// Testing hook: a correlated-noise realization with given shifts.
    pub fn from_shifts(bucket_shifts: Vec<f64>) -> Self {
        PerturbationRealization::CorrelatedNoise { realization_id: 0, bucket_shifts }
    }

    /// Testing hook: a partition realization from already-normalized
    /// weights (row normalizers are set to 1).
    pub fn from_normalized_weights(weights: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        let b_eps = weights.first().map_or(0, Vec::len);
        if b_eps < 2 || weights.iter().any(|r| r.len() != b_eps) {
            return Err(Error::DegenerateInput("weight rows must share a length >= 2".into()));
        }
        if weights.iter().flatten().any(|w| !(*w > 0.0)) {
            return Err(Error::DegenerateInput("weights must be positive".into()));
        }
        Ok(PerturbationRealization::Partition {
            realization_id: 0,
            row_normalizers: vec![1.0; weights.len()],
            eps_bin_means: eps_bin_means(b_eps, sigma),
            weights,
        })
    }

    /// Normalized weight `ξ_ij / ξ̄_i` (partition realizations only).
    pub fn normalized_weight(&self, row: usize, col: usize) -> Option<f64> {
        match self {
            PerturbationRealization::Partition { weights, row_normalizers, .. } => {
                Some(weights[row][col] / row_normalizers[row])
            }
            _ => None,
        }
    }

    pub fn normalized_row(&self, row: usize) -> Option<Vec<f64>> {
        match self {
            PerturbationRealization::Partition { weights, row_normalizers, .. } => {
                Some(weights[row].iter().map(|w| w / row_normalizers[row]).collect())
            }
            _ => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Realization plus the spec that produced it, for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub spec: RupSpec,
    pub realization: PerturbationRealization,
}

/// Standardized quantile edges `z_0 = −∞ < … < z_B = +∞` of `B` equal-mass
/// Gaussian bins, mirrored so that `z_{B−j} = −z_j` exactly.
pub fn eps_bin_edges(b_eps: usize) -> Vec<f64> {
    let mut z = vec![0.0; b_eps + 1];
    z[0] = f64::NEG_INFINITY;
    z[b_eps] = f64::INFINITY;
    for (j, zj) in z.iter_mut().enumerate().take(b_eps).skip(1) {
        if 2 * j < b_eps {
            *zj = normal_quantile(j as f64 / b_eps as f64);
        } else if 2 * j == b_eps {
            *zj = 0.0;
        }
    }
    for j in 1..b_eps {
        if 2 * j > b_eps {
            z[j] = -z[b_eps - j];
        }
    }
    z
}

/// Exact truncated-Gaussian means of the `B_ε` equal-mass bins of
/// `N(0, σ²)`: `m_j = σ B_ε (φ(z_{j−1}) − φ(z_j))`.
pub fn eps_bin_means(b_eps: usize, sigma: f64) -> Vec<f64> {
    let z = eps_bin_edges(b_eps);
    let mut m = vec![0.0; b_eps];
    for j in 0..b_eps.div_ceil(2) {
        m[j] = sigma * b_eps as f64 * (normal_pdf(z[j]) - normal_pdf(z[j + 1]));
    }
    for j in b_eps.div_ceil(2)..b_eps {
        m[j] = -m[b_eps - 1 - j];
    }
    if b_eps % 2 == 1 {
        m[b_eps / 2] = 0.0;
    }
    m
}

/// Draw one perturbation `ξ` (realization id 0; see
/// [`PerturbationRealization::with_id`]).
pub fn draw_perturbation(spec: &RupSpec, stream: &mut RngStream) -> Result<PerturbationRealization> {
    match spec {
        RupSpec::Partition(p) => {
            let mut weights = Vec::with_capacity(p.b_x);
            for row in 0..p.b_x {
                let mut r = Vec::with_capacity(p.b_eps);
                for col in 0..p.b_eps {
                    let mut attempts = 0;
                    let w = loop {
                        let w = p.weight_law.sample(stream);
                        if w > 0.0 && w.is_finite() {
                            break w;
                        }
                        attempts += 1;
                        if attempts > MAX_REDRAWS {
                            return Err(Error::DegenerateWeights { row, col, attempts });
                        }
                    };
                    r.push(w);
                }
                weights.push(r);
            }
            let row_normalizers = weights.iter().map(|r| stats::mean(r)).collect();
            Ok(PerturbationRealization::Partition {
                realization_id: 0,
                weights,
                row_normalizers,
                eps_bin_means: eps_bin_means(p.b_eps, p.baseline.sigma()),
            })
        }
        RupSpec::CorrelatedNoise(c) => {
            let scale = (c.delta2 * c.baseline.sigma2).sqrt();
            let bucket_shifts = (0..c.b_x)
                .map(|_| scale * stream.sample::<f64, _>(StandardNormal))
                .collect();
            Ok(PerturbationRealization::CorrelatedNoise { realization_id: 0, bucket_shifts })
        }
    }
}

fn check_pairing(spec: &RupSpec, xi: &PerturbationRealization) -> Result<()> {
    match (spec, xi) {
        (RupSpec::Partition(p), PerturbationRealization::Partition { weights, .. }) => {
            if weights.len() != p.b_x || weights.iter().any(|r| r.len() != p.b_eps) {
                return Err(Error::DegenerateInput("realization grid does not match spec".into()));
            }
        }
        (RupSpec::CorrelatedNoise(c), PerturbationRealization::CorrelatedNoise { bucket_shifts, .. }) => {
            if bucket_shifts.len() != c.b_x {
                return Err(Error::DegenerateInput("realization has wrong bucket count".into()));
            }
        }
        (RupSpec::Partition(_), _) => return Err(Error::WrongVariant { expected: "partition" }),
        (RupSpec::CorrelatedNoise(_), _) => return Err(Error::WrongVariant { expected: "correlated-noise" }),
    }
    Ok(())
}

/// Per-row cumulative bin probabilities for tilted sampling.
fn row_cdfs(xi: &PerturbationRealization) -> Vec<Vec<f64>> {
    let PerturbationRealization::Partition { weights, .. } = xi else {
        return vec![];
    };
    weights
        .iter()
        .map(|r| {
            let mut acc = 0.0;
            r.iter()
                .map(|w| {
                    acc += w;
                    acc
                })
                .collect()
        })
        .collect()
}

/// Draw `z ~ N(0,1)` truncated to equal-mass bin `j` of `b_eps` by
/// inverting the CDF on the bin's probability slice. The upper half is
/// sampled through the mirror image to keep tail bins accurate.
fn truncated_bin_draw(j: usize, b_eps: usize, stream: &mut RngStream) -> f64 {
    let v: f64 = stream.sample(Open01);
    let b = b_eps as f64;
    if 2 * j < b_eps {
        normal_quantile((j as f64 + v) / b)
    } else {
        -normal_quantile(((b_eps - 1 - j) as f64 + (1.0 - v)) / b)
    }
}

fn draw_response(
    spec: &RupSpec,
    xi: &PerturbationRealization,
    cdfs: &[Vec<f64>],
    x: f64,
    stream: &mut RngStream,
) -> (usize, f64) {
    match (spec, xi) {
        (RupSpec::Partition(p), _) => {
            let b = bucket_of(x, p.b_x);
            let cdf = &cdfs[b];
            let total = *cdf.last().expect("nonempty row");
            let u: f64 = stream.random::<f64>() * total;
            let j = cdf.partition_point(|&c| c <= u).min(p.b_eps - 1);
            let eps = p.baseline.sigma() * truncated_bin_draw(j, p.b_eps, stream);
            (b, p.baseline.f.eval(x) + eps)
        }
        (RupSpec::CorrelatedNoise(c), PerturbationRealization::CorrelatedNoise { bucket_shifts, .. }) => {
            let b = bucket_of(x, c.b_x);
            let eps = c.baseline.sigma() * stream.sample::<f64, _>(StandardNormal);
            (b, c.baseline.f.eval(x) + bucket_shifts[b] + eps)
        }
        _ => unreachable!("pairing checked"),
    }
}

/// Draw `n` iid observations from `P_ξ`.
pub fn sample_perturbed(
    spec: &RupSpec,
    xi: &PerturbationRealization,
    n: usize,
    stream: &mut RngStream,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    check_pairing(spec, xi)?;
    let cdfs = row_cdfs(xi);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut buckets = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = stream.random();
        let (b, y) = draw_response(spec, xi, &cdfs, x, stream);
        xs.push(x);
        ys.push(y);
        buckets.push(b);
    }
    Ok(Dataset { xs, ys, bucket_ids: Some(buckets), realization_id: Some(xi.realization_id()) })
}

/// Testing hook: responses from `P_ξ` at caller-chosen design points.
pub fn sample_perturbed_at(
    spec: &RupSpec,
    xi: &PerturbationRealization,
    xs: &[f64],
    stream: &mut RngStream,
) -> Result<Dataset> {
    if xs.is_empty() {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    if let Some(&bad) = xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::OutOfDomain(bad));
    }
    check_pairing(spec, xi)?;
    let cdfs = row_cdfs(xi);
    let (buckets, ys) = xs.iter().map(|&x| draw_response(spec, xi, &cdfs, x, stream)).unzip();
    Ok(Dataset {
        xs: xs.to_vec(),
        ys,
        bucket_ids: Some(buckets),
        realization_id: Some(xi.realization_id()),
    })
}

/// Conditional-mean shift `Δ_ξ(x) = E_ξ[ε | X = x] − E_0[ε | X = x]`.
///
/// Partition: `(1/B_ε) Σ_j (ξ_ij/ξ̄_i − 1) m_j` with `i = b(x)`.
/// Correlated noise: `ξ_{b(x)}`.
pub fn delta_at(xi: &PerturbationRealization, x: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&x));
    match xi {
        PerturbationRealization::Partition { weights, row_normalizers, eps_bin_means, .. } => {
            let i = bucket_of(x, weights.len());
            let terms: Vec<f64> = weights[i]
                .iter()
                .zip(eps_bin_means)
                .map(|(w, m)| (w / row_normalizers[i] - 1.0) * m)
                .collect();
            stats::pairwise_sum(&terms) / eps_bin_means.len() as f64
        }
        PerturbationRealization::CorrelatedNoise { bucket_shifts, .. } => {
            bucket_shifts[bucket_of(x, bucket_shifts.len())]
        }
    }
}

/// `τ = δ² ρ̄` together with its factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationStrength {
    pub tau: f64,
    pub delta2: f64,
    pub rho_bar: f64,
    /// Correlation length (bucket width).
    pub lambda: f64,
    /// `δ²` is the leading-order term only (partition model).
    pub leading_order: bool,
    /// Partition model only.
    pub moment_condition: Option<MomentCondition>,
}

pub fn perturbation_strength(spec: &RupSpec) -> PerturbationStrength {
    match spec {
        RupSpec::Partition(p) => {
            let delta2 = p.weight_law.cv2() / p.b_eps as f64;
            let rho_bar = 1.0 / p.b_x as f64;
            PerturbationStrength {
                tau: delta2 * rho_bar,
                delta2,
                rho_bar,
                lambda: rho_bar,
                leading_order: true,
                moment_condition: Some(p.moment_condition()),
            }
        }
        RupSpec::CorrelatedNoise(c) => {
            let rho_bar = 1.0 / c.b_x as f64;
            PerturbationStrength {
                tau: c.delta2 * rho_bar,
                delta2: c.delta2,
                rho_bar,
                lambda: rho_bar,
                leading_order: false,
                moment_condition: None,
            }
        }
    }
}

/// Monte Carlo estimate of the exact variance scale: the sample variance
/// of `Δ_ξ(x)` over `reps` realizations, in units of `σ²`.
pub fn variance_scale_mc(spec: &RupSpec, x: f64, reps: usize, key: StreamKey) -> Result<f64> {
    let sigma2 = spec.baseline().sigma2;
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("sigma2", "variance scale needs sigma2 > 0"));
    }
    let deltas = (0..reps as u64)
        .map(|r| draw_perturbation(spec, &mut key.child(r).stream()).map(|xi| delta_at(&xi, x)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(stats::sample_variance(&deltas) / sigma2)
}

/// `KL(P_0 ‖ P_ξ)` for a partition realization: the cell average of
/// `−log(ξ_ij / ξ̄_i)`.
pub fn kl_to_baseline_partition(xi: &PerturbationRealization) -> Result<f64> {
    let PerturbationRealization::Partition { weights, row_normalizers, .. } = xi else {
        return Err(Error::WrongVariant { expected: "partition" });
    };
    let terms: Vec<f64> = weights
        .iter()
        .zip(row_normalizers)
        .flat_map(|(r, nrm)| r.iter().map(move |w| -(w / nrm).ln()))
        .collect();
    Ok(stats::mean(&terms))
}
