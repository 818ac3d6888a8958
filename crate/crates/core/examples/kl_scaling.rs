//! KL divergence between two nearby regression functions observed under
//! correlated noise, scaled by the effective sample size.
//!
//! cargo run --release --example kl_scaling

use rupkit::kl::{iid_ratio_constant, kl_mc, lemma_construction, KlRow, TwoPointConstruction};
use rupkit::prelude::*;

fn main() -> rupkit::Result<()> {
    let ns = [200, 400, 800, 1600];
    for (label, delta2) in [("shifted", 1.0), ("iid", 0.0)] {
        println!("# {label}");
        println!("{}", KlRow::CSV_HEADER);
        for row in kl_mc(&ns, |n| n, delta2, 1.0, lemma_construction(0.5, 1.0, 1.0, 1.0), 200, StreamKey::new(15))? {
            println!("{}", row.to_csv_row());
        }
    }
    let c = TwoPointConstruction::new(0.5, 0.1, 1.0, 1.0)?;
    println!("iid limit of the ratio = {:.5}", iid_ratio_constant(&c, 1.0));
    // fixed buckets while n grows leaves the regime; the rows say so
    let rows = kl_mc(&ns, |_| 10, 1.0, 1.0, lemma_construction(0.5, 1.0, 1.0, 1.0), 50, StreamKey::new(16))?;
    println!("fixed B_X = 10 flags: {:?}", rows.iter().map(|r| r.regime_warning).collect::<Vec<_>>());
    Ok(())
}
