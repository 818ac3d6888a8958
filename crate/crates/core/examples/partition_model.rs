//! Partition perturbations: reweighted noise quantile bins per x bucket.
//!
//! cargo run --example partition_model

use rupkit::prelude::*;
use rupkit::rup::{kl_to_baseline_partition, perturbation_strength, variance_scale_mc};
use rupkit::stats;

fn main() -> rupkit::Result<()> {
    let base = BaselineConfig::new(RegressionFunction::zero(), 1.0, 2000)?;
    for law in [WeightLaw::Exp, WeightLaw::lognormal_with_cv2(0.5)?] {
        let spec: RupSpec = PartitionSpec::new(10, 50, law, base.clone())?.into();
        let s = perturbation_strength(&spec);
        let exact = variance_scale_mc(&spec, 0.3, 4000, StreamKey::new(2))?;
        let kls: Vec<f64> = (0..50)
            .map(|r| kl_to_baseline_partition(&draw_perturbation(&spec, &mut StreamKey::new(3).child(r).stream())?))
            .collect::<rupkit::Result<_>>()?;
        println!("{law:?}");
        println!("  leading-order delta2 = {:.4}, Monte Carlo delta2 = {exact:.4}, tau = {:.5}", s.delta2, s.tau);
        println!("  mean KL(P0 || P_xi) over 50 draws = {:.4}", stats::mean(&kls));
    }

    let spec: RupSpec = PartitionSpec::new(4, 20, WeightLaw::Exp, base)?.into();
    let xi = draw_perturbation(&spec, &mut StreamKey::new(4).stream())?;
    let data = sample_perturbed(&spec, &xi, 2000, &mut StreamKey::new(5).stream())?;
    for b in 0..4 {
        let ys: Vec<f64> = data.ys.iter().zip(data.bucket_ids.as_ref().unwrap()).filter(|(_, k)| **k == b).map(|(y, _)| *y).collect();
        let x = (b as f64 + 0.5) / 4.0;
        println!("bucket {b}: shift {:+.4}, empirical mean {:+.4}", delta_at(&xi, x), stats::mean(&ys));
    }
    Ok(())
}
