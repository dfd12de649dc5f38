//! Storey- and quantile-adaptive AdaDetect gain power when many test points
//! are novelties.
//!
//! cargo run --release --example adaptive_detection

use adadetect::adadetect::run_storey_adadetect_at_lambda;
use adadetect::simlab::{gen_dataset, tdp, GeneratorConfig, Setting};
use adadetect::{run_adadetect, run_quantile_adadetect, ScorerConfig, SplitPolicy};

fn main() -> adadetect::Result<()> {
    let gen = GeneratorConfig {
        setting: Setting::GaussianSparse { d: 5, signal_coords: 5, amplitude: Some(1.0) },
        n: 1500,
        m: 500,
        m1: 250,
        seed: 3,
    };
    let data = gen_dataset(&gen)?;
    let split = data.split(SplitPolicy::EllEqualsM)?;
    let scorer = ScorerConfig::from_name("logistic")?;

    let plain = run_adadetect(&split, &scorer, 0.1, 0)?;
    let storey = run_storey_adadetect_at_lambda(&split, &scorer, 0.1, 0.5, 0)?;
    let quantile = run_quantile_adadetect(&split, &scorer, 0.1, None, 0)?;
    for (name, r) in [("BH", &plain), ("Storey", &storey), ("quantile", &quantile)] {
        let pi0 = r.pi0_estimate.map(|e| format!("{:.3}", e.value)).unwrap_or_else(|| "-".into());
        println!(
            "{name:>8}: pi0 {pi0:>5}, {:3} rejections, TDP {:.3}",
            r.rejections.len(),
            tdp(&r.rejections.indices, &data.is_novelty)
        );
    }
    Ok(())
}
