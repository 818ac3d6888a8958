//! Nonparametric regression under random unbiased perturbations (RUPs).
//!
//! A RUP replaces the conditional law of `Y | X` by a random, mean-zero
//! tilt that leaves the covariate marginal alone. Each dataset is drawn
//! from its own perturbed law, so estimators pick up an extra
//! *distributional* variance on top of the usual sampling noise. This
//! crate simulates such data, fits local polynomial estimators, measures
//! the resulting risk, tunes bandwidths, and checks the KL scaling that
//! governs the minimax rate.
//!
//! | Module | Contents |
//! |---|---|
//! | [`model`] | baseline law, regression functions, datasets |
//! | [`rup`] | partition and correlated-noise perturbations |
//! | [`lpe`] | LP(ℓ) equivalent-kernel weights and prediction |
//! | [`bandwidth`] | `n_eff`, oracle rule, CV selection, τ estimation |
//! | [`risk`] | nested Monte Carlo risk decomposition, MISE curves |
//! | [`kl`] | block-covariance Gaussian KL and its scaling |
//! | [`cli`] | config-driven runner used by the `rupkit` binary |
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! * `baseline_sampling`: draw from the unperturbed law
//! * `partition_model`: weight grids, `Δ_ξ`, and the KL to baseline
//! * `correlated_noise`: bucket shifts and the strength `τ`
//! * `local_polynomial_weights`: equivalent kernels and their properties
//! * `risk_decomposition`: bias, sampling and distributional variance
//! * `bandwidth_selection`: oracle rule versus domain and naive CV
//! * `tau_estimation`: recovering `τ` from realization means
//! * `kl_scaling`: the `n_eff` scaling of the two-point KL
//! * `mise_sweep`: MISE curves and their minimizers across `τ`
//!
//! ```
//! use rupkit::prelude::*;
//!
//! let base = BaselineConfig::new(RegressionFunction::sine(), 1.0, 500).unwrap();
//! let spec = RupSpec::from(CorrelatedNoiseSpec::new(10, 0.25, base).unwrap());
//! let mut stream = StreamKey::new(7).stream();
//! let xi = draw_perturbation(&spec, &mut stream).unwrap();
//! let data = sample_perturbed(&spec, &xi, 500, &mut stream).unwrap();
//! let fit = fit_predict(&LpeConfig::local_linear(0.15).unwrap(), &data, 0.5).unwrap();
//! assert!(fit.is_finite());
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod cli;
pub mod error;
pub mod kernel;
pub mod kl;
pub mod lpe;
pub mod model;
pub mod risk;
pub mod rng;
pub mod rup;
pub mod stats;

pub use error::{Error, Result};

/// The types and functions most experiments need.
pub mod prelude {
    pub use crate::bandwidth::{
        domain_cv_bandwidth, effective_sample_size, estimate_tau_from_summaries, naive_cv_bandwidth,
        oracle_bandwidth, BandwidthSelection, EffectiveSampleSize, EvalWindow,
    };
    pub use crate::error::{Error, Result};
    pub use crate::kernel::{KernelKind, KernelSpec};
    pub use crate::kl::{
        block_precision_apply, conditional_kl, kl_mc, two_point_separation, BlockCovariance, TwoPointConstruction,
    };
    pub use crate::lpe::{equivalent_kernel_weights, fit_predict, predict_grid, LpeConfig, SortedDesign, WeightVector};
    pub use crate::model::{sample_baseline, BaselineConfig, Dataset, RegressionFunction};
    pub use crate::risk::{mise_mc, optimal_bandwidth_curve, pointwise_risk_mc, rate_fit, MiseCurve, RiskReport};
    pub use crate::rng::{RngStream, StreamKey};
    pub use crate::rup::{
        delta_at, draw_perturbation, kl_to_baseline_partition, perturbation_strength, sample_perturbed,
        CorrelatedNoiseSpec, PartitionSpec, PerturbationRealization, RupSpec, WeightLaw,
    };
}
