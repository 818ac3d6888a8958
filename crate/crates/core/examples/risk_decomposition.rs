//! Split pointwise risk into bias, sampling variance and distributional
//! variance with nested Monte Carlo.
//!
//! cargo run --release --example risk_decomposition

use rupkit::prelude::*;
use rupkit::risk::{distributional_variance_oracle, RiskReport};

fn main() -> rupkit::Result<()> {
    let lpe = LpeConfig::local_linear(0.1)?;
    println!("{}", RiskReport::CSV_HEADER);
    for delta2 in [0.0, 0.25, 1.0] {
        let cn = CorrelatedNoiseSpec::new(10, delta2, BaselineConfig::new(RegressionFunction::sine(), 1.0, 500)?)?;
        let r = pointwise_risk_mc(&cn.clone().into(), &lpe, 0.5, 200, 30, StreamKey::new(10))?;
        println!("{}", r.to_csv_row());
        let (oracle, se) = distributional_variance_oracle(&cn, &lpe, 0.5, 2000, StreamKey::new(11))?;
        eprintln!(
            "delta2 = {delta2}: dist_var {:.5} +/- {:.5}, weight oracle {oracle:.5} +/- {se:.5}, identity residual {:+.2e}",
            r.dist_var,
            r.se_dist_var,
            r.identity_residual()
        );
    }
    Ok(())
}
