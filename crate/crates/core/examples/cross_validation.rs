//! AdaDetect-cv: pick a scorer from a grid by counting rejections on a
//! surrogate problem built from the nulls.
//!
//! cargo run --release --example cross_validation

use adadetect::adadetect::{default_cv_s, CvOptions};
use adadetect::scorers::{ConstantScore, LogisticParams, MlpParams};
use adadetect::simlab::{gen_dataset, GeneratorConfig, Setting};
use adadetect::{run_adadetect_cv, Scorer, ScorerConfig, SplitPolicy};

fn main() -> adadetect::Result<()> {
    let gen = GeneratorConfig {
        setting: Setting::GaussianSparse { d: 5, signal_coords: 3, amplitude: Some(3.0) },
        n: 2000,
        m: 500,
        m1: 100,
        seed: 5,
    };
    let data = gen_dataset(&gen)?;
    let split = data.split(SplitPolicy::EllEqualsM)?;

    let constant = ConstantScore(0.0);
    let weak = ScorerConfig::Logistic(LogisticParams { l2: 10.0, ..Default::default() });
    let logistic = ScorerConfig::Logistic(LogisticParams::default());
    let mlp = ScorerConfig::Mlp(MlpParams { hidden: 16, ..Default::default() });
    let grid: [&dyn Scorer; 4] = [&constant, &weak, &logistic, &mlp];

    let k = split.first_null().len();
    let s = default_cv_s(k, split.test().len());
    let cv = run_adadetect_cv(&split, &grid, 0.1, s, 11, CvOptions::default())?;
    for (i, (id, r)) in cv.grid_ids.iter().zip(&cv.surrogate_rejections).enumerate() {
        println!("grid {i} {id:>9}: {r} surrogate rejections");
    }
    println!("chose {} (index {}), {} final rejections", cv.chosen_id, cv.chosen_index, cv.report.rejections.len());
    Ok(())
}
