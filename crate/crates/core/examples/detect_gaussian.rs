//! One AdaDetect run on synthetic gaussian data with a PU logistic score.
//!
//! cargo run --release --example detect_gaussian

use adadetect::simlab::{fdp, gen_dataset, tdp, GeneratorConfig, Setting};
use adadetect::{run_adadetect, ScorerConfig, SplitPolicy};

fn main() -> adadetect::Result<()> {
    let gen = GeneratorConfig {
        setting: Setting::GaussianSparse { d: 10, signal_coords: 5, amplitude: None },
        n: 3000,
        m: 1000,
        m1: 100,
        seed: 1,
    };
    let data = gen_dataset(&gen)?;
    // k = 2000 nulls train the score, the other ℓ = 1000 calibrate.
    let split = data.split(SplitPolicy::EllEqualsM)?;

    for name in ["logistic", "mlp", "chi-square"] {
        let scorer = ScorerConfig::from_name(name)?;
        let report = run_adadetect(&split, &scorer, 0.1, 7)?;
        let rej = &report.rejections.indices;
        println!(
            "{name:>10}: {:4} rejections, FDP {:.3}, TDP {:.3}",
            rej.len(),
            fdp(rej, &data.is_novelty),
            tdp(rej, &data.is_novelty)
        );
        for w in &report.warnings {
            println!("            warning: {w}");
        }
    }
    Ok(())
}
