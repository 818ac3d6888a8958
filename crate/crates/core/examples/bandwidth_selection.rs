//! Bandwidth choice under shift: oracle rule, leave-one-domain-out CV and
//! naive random-split CV.
//!
//! cargo run --release --example bandwidth_selection

use rupkit::bandwidth::{domain_cv_bandwidth, naive_cv_bandwidth, oracle_bandwidth, EvalWindow};
use rupkit::prelude::*;

fn main() -> rupkit::Result<()> {
    let grid: Vec<f64> = (0..12).map(|i| 0.05 * 1.2f64.powi(i)).collect();
    let lpe = LpeConfig::local_linear(0.1)?;
    for tau in [0.0, 0.01, 0.05] {
        let base = BaselineConfig::new(RegressionFunction::sine(), 1.0, 300)?;
        let spec: RupSpec = CorrelatedNoiseSpec::new(20, tau * 20.0, base)?.into();
        let domains: Vec<Dataset> = (0..10)
            .map(|j| {
                let k = StreamKey::new(12).child(j);
                let xi = draw_perturbation(&spec, &mut k.child(0).stream())?.with_id(j);
                sample_perturbed(&spec, &xi, 300, &mut k.child(1).stream())
            })
            .collect::<rupkit::Result<_>>()?;
        let dom = domain_cv_bandwidth(&domains, &grid, &lpe, EvalWindow::default())?;
        let naive = naive_cv_bandwidth(&Dataset::pooled(&domains), &grid, &lpe, 10, EvalWindow::default(), StreamKey::new(13))?;
        println!(
            "tau = {tau:<5} oracle h = {:.3}  domain-cv h = {:.3}  naive-cv h = {:.3}",
            oracle_bandwidth(3000, tau, 2.0, 1.0)?,
            dom.h_star,
            naive.h_star
        );
        if tau == 0.05 {
            print!("{}", dom.to_csv());
        }
    }
    Ok(())
}
