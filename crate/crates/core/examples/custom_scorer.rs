//! Plugging in a score function of your own.
//!
//! A scorer sees the first null split and the mixed sample (calibration
//! nulls followed by test points). It must not depend on the order of the
//! mixed sample, or the FDR guarantee is lost.
//!
//! cargo run --example custom_scorer

use adadetect::scorers::{FittedScore, FixedScore};
use adadetect::simlab::{gen_dataset, fdp, GeneratorConfig, Setting};
use adadetect::{run_adadetect, Points, Scorer, SplitPolicy};

/// Distance to the mean of the first null split. Ignores the mixed sample,
/// so it is trivially order invariant.
struct DistanceToNullMean;

impl Scorer for DistanceToNullMean {
    fn id(&self) -> String {
        "distance-to-null-mean".into()
    }

    fn fit(&self, first_null: &Points, _mixed: &Points, seed: u64) -> adadetect::Result<FittedScore> {
        let d = first_null.dim();
        let mut centre = vec![0.0; d];
        for row in first_null.rows() {
            for (c, v) in centre.iter_mut().zip(row) {
                *c += v / first_null.len() as f64;
            }
        }
        Ok(FittedScore::new(self.id(), seed, move |x: &[f64]| {
            x.iter().zip(&centre).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        }))
    }
}

fn main() -> adadetect::Result<()> {
    let gen = GeneratorConfig {
        setting: Setting::GaussianSparse { d: 4, signal_coords: 4, amplitude: Some(2.0) },
        n: 600,
        m: 200,
        m1: 30,
        seed: 9,
    };
    let data = gen_dataset(&gen)?;
    let split = data.split(SplitPolicy::Explicit { k: 400 })?;

    let learned = run_adadetect(&split, &DistanceToNullMean, 0.1, 0)?;
    // a closed-form score needs no fitting at all
    let closed = FixedScore::new("coordinate-sum", |x: &[f64]| x.iter().sum());
    let fixed = run_adadetect(&split, &closed, 0.1, 0)?;
    for r in [&learned, &fixed] {
        println!(
            "{:>22}: {:3} rejections, FDP {:.3}",
            r.scorer_id,
            r.rejections.len(),
            fdp(&r.rejections.indices, &data.is_novelty)
        );
    }
    Ok(())
}
