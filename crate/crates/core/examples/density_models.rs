//! The density models behind the density-ratio scorers.
//!
//! cargo run --release --example density_models

use adadetect::rng;
use adadetect::scorers::{histogram_density, GaussianMixture, ParametricParams};
use adadetect::Points;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> adadetect::Result<()> {
    let mut r = rng::stream(1, "density-example");

    // two well separated blobs in the plane
    let mut rows = Vec::new();
    for i in 0..400 {
        let shift = if i % 4 == 0 { 4.0 } else { 0.0 };
        let a: f64 = r.sample(StandardNormal);
        let b: f64 = r.sample(StandardNormal);
        rows.push(vec![a + shift, b - shift]);
    }
    let points = Points::from_rows(&rows)?;
    let params = ParametricParams { restarts: 10, ..Default::default() };
    let mix = GaussianMixture::fit_em(&points, &params, 3)?;
    println!("EM weights {:?}", mix.weights());
    for c in mix.components() {
        println!("  component mean {:?}", c.mean());
    }
    println!("log-likelihood {:.2} (best restart {})", mix.log_likelihood, mix.restart);

    // histogram on [0,1]^2 with the default bin count
    let unit: Vec<Vec<f64>> = (0..500).map(|_| vec![r.random::<f64>(), r.random::<f64>().powi(2)]).collect();
    let unit = Points::from_rows(&unit)?;
    let h = histogram_density(&unit, unit.len(), None)?;
    let mass: f64 = h.cell_masses().sum();
    println!("histogram: {} bins per axis, {} occupied cells, total mass {mass}", h.bins(), h.occupied_cells());
    println!("density at (0.5, 0.1): {:.3}", h.density(&[0.5, 0.1]));
    Ok(())
}
