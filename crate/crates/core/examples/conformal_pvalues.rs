//! Empirical p-values from calibration and test scores, and how ties are broken.
//!
//! cargo run --example conformal_pvalues

use adadetect::conformal::{break_ties, empirical_pvalues, ScoredSplit};

fn main() -> adadetect::Result<()> {
    let calib = [0.2, 0.5, 0.5, 0.9, 1.4];
    let test = [0.5, 1.0, 2.0];

    // p_j = (1 + #{calibration scores above X_j}) / (ℓ + 1)
    let split = ScoredSplit::new(&calib, &test, 42)?;
    let p = empirical_pvalues(&split)?;
    println!("calibration {:?}", split.calib());
    println!("test        {:?}", split.test());
    println!("p-values    {:?}", p.as_slice());

    // Only tied entries move, and by a negligible amount.
    let raw = [1.0, 3.0, 1.0, 2.0, 1.0];
    println!("{raw:?} -> {:?}", break_ties(&raw, 7));
    Ok(())
}
