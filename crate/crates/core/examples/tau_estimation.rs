//! Recover the shift strength from per-realization outcome means.
//!
//! cargo run --release --example tau_estimation

use rupkit::bandwidth::{effective_sample_size, pooled_within_bucket_variance, realization_means, tau_components};
use rupkit::prelude::*;

fn main() -> rupkit::Result<()> {
    let n = 2000;
    let spec: RupSpec = CorrelatedNoiseSpec::new(10, 0.25, BaselineConfig::new(RegressionFunction::zero(), 1.0, n)?)?.into();
    let datasets: Vec<Dataset> = (0..500)
        .map(|j| {
            let k = StreamKey::new(14).child(j);
            let xi = draw_perturbation(&spec, &mut k.child(0).stream())?.with_id(j);
            sample_perturbed(&spec, &xi, n, &mut k.child(1).stream())
        })
        .collect::<rupkit::Result<_>>()?;
    let sigma2_hat = pooled_within_bucket_variance(&datasets)?;
    let est = tau_components(&realization_means(&datasets), n, sigma2_hat, 0.0)?;
    println!("true tau = {}", perturbation_strength(&spec).tau);
    println!("tau_hat = {:.5} (var theta {:.3e}, sampling part {:.3e}, sigma2_hat {:.4})", est.tau_hat, est.var_theta, est.sampling_term, est.sigma2_hat);
    println!("implied n_eff = {:.1} of n = {n}", effective_sample_size(n, est.tau_hat)?.n_eff);
    Ok(())
}
