//! MISE curves over a bandwidth grid for several shift strengths, written
//! as CSV and SVG into a temporary directory.
//!
//! cargo run --release --example mise_sweep

use rupkit::cli::svg::{line_chart, ChartSpec};
use rupkit::prelude::*;
use rupkit::risk::MiseCurve;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let hs: Vec<f64> = (0..16).map(|i| 0.05 * 1.15f64.powi(i)).collect();
    let eval: Vec<f64> = (0..51).map(|i| 0.05 + 0.9 * i as f64 / 50.0).collect();
    let lpe = LpeConfig::local_linear(0.1)?;
    let mut csv = format!("{}\n", MiseCurve::CSV_HEADER);
    for tau in [0.0, 0.005, 0.02] {
        let spec: RupSpec =
            CorrelatedNoiseSpec::new(50, tau * 50.0, BaselineConfig::new(RegressionFunction::sine(), 1.0, 1000)?)?.into();
        let curve = mise_mc(&spec, &lpe, &hs, &eval, 50, StreamKey::new(17))?;
        println!("tau = {tau:<6} argmin h = {:.4}  min MISE = {:.5}", curve.argmin_h, curve.min_mise());
        for row in curve.csv_rows() {
            csv.push_str(&row);
            csv.push('\n');
        }
    }
    let svg = line_chart(
        &csv,
        &ChartSpec { title: "MISE versus bandwidth", x_col: "h", y_col: "mise", series_col: "tau", series_label: "tau", log_x: false, log_y: false },
    )?;
    let dir = std::env::temp_dir().join("rupkit-mise-sweep");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("mise_curve.csv"), &csv)?;
    std::fs::write(dir.join("fig4.svg"), svg)?;
    println!("wrote {}", dir.display());
    Ok(())
}
