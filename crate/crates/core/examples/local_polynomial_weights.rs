//! Equivalent-kernel weights of local polynomial fits.
//!
//! cargo run --example local_polynomial_weights

use rupkit::prelude::*;

fn main() -> rupkit::Result<()> {
    let data = sample_baseline(&BaselineConfig::new(RegressionFunction::sine(), 0.1, 1000)?, &mut StreamKey::new(9).stream());
    for order in 0..=3 {
        let cfg = LpeConfig::new(order, 0.1, KernelSpec::epanechnikov())?;
        for x0 in [0.0, 0.25, 0.5] {
            let w = equivalent_kernel_weights(&cfg, &data.xs, x0)?;
            println!(
                "order {order}, x0 = {x0:.2}: sum W = {:.12}, sum |W| = {:.3}, n h max|W| = {:.3}, fit = {:+.4}, truth = {:+.4}",
                w.sum(),
                w.abs_sum(),
                w.max_abs() * 1000.0 * 0.1,
                w.apply(&data.ys),
                RegressionFunction::sine().eval(x0)
            );
        }
    }
    let design = SortedDesign::from_dataset(&data)?;
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    println!("grid fit: {:?}", design.predict_many(&LpeConfig::local_linear(0.1)?, &grid));
    Ok(())
}
