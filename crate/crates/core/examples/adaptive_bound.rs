//! Monte-Carlo check that the adaptive null-proportion estimators keep
//! Σ_{i in H0} E[1 / G(p')] below 1 under the least-favorable draws.
//!
//! cargo run --release --example adaptive_bound

use adadetect::simlab::{sample_least_favorable, verify_adaptive_bound, BoundEstimator};

fn main() -> adadetect::Result<()> {
    let (m, ell) = (20, 30);
    let h0: Vec<usize> = (0..10).collect();
    println!("one least-favorable draw: {:?}", sample_least_favorable(m, ell, &h0, 0, 1)?);

    for est in [
        BoundEstimator::Storey { storey_k: 2 },
        BoundEstimator::Storey { storey_k: 15 },
        BoundEstimator::Quantile { k0: 10 },
    ] {
        for m0 in [10, 20] {
            let r = verify_adaptive_bound(m, ell, m0, est, 20000, 3)?;
            println!("{est:?} m0={m0}: {:.4} ± {:.4} within bound: {}", r.estimate, r.se, r.within_bound);
        }
    }
    Ok(())
}
