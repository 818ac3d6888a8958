//! Draw an unperturbed dataset and check its noise moments.
//!
//! cargo run --example baseline_sampling

use rupkit::prelude::*;
use rupkit::stats;

fn main() -> rupkit::Result<()> {
    let cfg = BaselineConfig::new(RegressionFunction::sine(), 0.25, 10_000)?;
    let data = sample_baseline(&cfg, &mut StreamKey::new(1).stream());
    let resid: Vec<f64> = data.xs.iter().zip(&data.ys).map(|(x, y)| y - cfg.f.eval(*x)).collect();
    println!("n = {}", data.len());
    println!("noise mean = {:+.5} (se {:.5})", stats::mean(&resid), stats::std_error(&resid));
    println!("noise variance = {:.5} (target {})", stats::sample_variance(&resid), cfg.sigma2);
    println!("KS distance of x to Unif[0,1] = {:.5}", stats::ks_uniform(&data.xs));
    Ok(())
}
