//! BH, Storey-BH and quantile-BH on a handful of p-values, plus the
//! counting-knockoff threshold that matches BH on empirical p-values.
//!
//! cargo run --example step_up

use adadetect::conformal::pvalues_from_scores;
use adadetect::mtest::{adaptive_bh, bh_rejections, knockoff_select, storey_pi0};
use adadetect::{PValues, Pi0Method};

fn main() -> adadetect::Result<()> {
    let p = PValues::new(vec![0.001, 0.008, 0.039, 0.041, 0.042, 0.06, 0.074, 0.205, 0.212, 0.216])?;
    let bh = bh_rejections(&p, 0.05)?;
    println!("BH at 0.05 rejects {:?} (k_hat = {})", bh.indices, bh.k_hat);

    let pi0 = storey_pi0(&p, 0.5)?;
    println!("Storey pi0 at lambda 0.5: {:.3}", pi0.value);
    let storey = adaptive_bh(&p, 0.05, Pi0Method::Storey { lambda: 0.5 })?;
    println!("Storey-BH rejects {:?} at level {:.4}", storey.rejections.indices, storey.rejections.level_used);

    let quantile = adaptive_bh(&p, 0.05, Pi0Method::Quantile { k0: 5 })?;
    println!("quantile-BH (k0 = 5) rejects {:?}", quantile.rejections.indices);

    // Knockoff selection on raw scores gives the same set as BH on the
    // empirical p-values those scores induce.
    let calib = [0.1, 0.4, 0.35, 0.8, 0.05, 0.6, 0.22, 0.51, 0.73, 0.18, 0.3];
    let test = [2.5, 0.45, 3.1, 0.2, 1.9, 0.9];
    let ko = knockoff_select(&calib, &test, 0.3)?;
    let via_p = bh_rejections(&pvalues_from_scores(&calib, &test), 0.3)?;
    println!("knockoff threshold {:.2}, rejects {:?}", ko.threshold, ko.rejections.indices);
    println!("BH on empirical p-values rejects {:?}", via_p.indices);
    Ok(())
}
