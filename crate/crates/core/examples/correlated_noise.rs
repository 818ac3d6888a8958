//! Correlated noise: one Gaussian shift per x bucket, shared by all points
//! in the bucket.
//!
//! cargo run --example correlated_noise

use rupkit::prelude::*;

fn main() -> rupkit::Result<()> {
    let base = BaselineConfig::new(RegressionFunction::sine(), 1.0, 500)?;
    let cn = CorrelatedNoiseSpec::new(5, 0.25, base)?;
    println!("tau = {}, correlation length = {}", cn.tau(), cn.correlation_length());
    let spec: RupSpec = cn.into();
    let xi = draw_perturbation(&spec, &mut StreamKey::new(7).stream())?.with_id(1);
    println!("{}", xi.to_json()?);
    let data = sample_perturbed(&spec, &xi, 500, &mut StreamKey::new(8).stream())?;
    println!("first rows (x, y, bucket):");
    for i in 0..5 {
        println!("  {:.4} {:+.4} {}", data.xs[i], data.ys[i], data.bucket_ids.as_ref().unwrap()[i]);
    }
    Ok(())
}
