//! Monte-Carlo FDR and TDR of a few procedures in the gaussian setting.
//!
//! cargo run --release --example monte_carlo_fdr

use adadetect::simlab::{monte_carlo, GeneratorConfig, MonteCarloConfig, ProcedureConfig, Setting, SimScorer};
use adadetect::{ScorerConfig, SplitPolicy};

fn main() -> adadetect::Result<()> {
    let cfg = MonteCarloConfig {
        generator: GeneratorConfig {
            setting: Setting::GaussianSparse { d: 10, signal_coords: 5, amplitude: None },
            n: 1500,
            m: 500,
            m1: 50,
            seed: 0,
        },
        split: SplitPolicy::EllEqualsM,
        alpha: 0.1,
        replicates: 50,
        seed: 2024,
        workers: None,
        keep_per_replicate: false,
    };
    let methods = [
        ProcedureConfig::Adadetect { scorer: SimScorer::Oracle },
        ProcedureConfig::Adadetect {
            scorer: SimScorer::Config { scorer: ScorerConfig::from_name("logistic")? },
        },
        ProcedureConfig::Adadetect { scorer: SimScorer::Config { scorer: ScorerConfig::ChiSquare } },
        ProcedureConfig::RejectAll,
    ];
    println!("target FDR <= alpha * pi0 = {:.3}", cfg.alpha * cfg.generator.pi0());
    for method in &methods {
        let r = monte_carlo(&cfg, method)?;
        println!(
            "{:>20}: FDR {:.3} ({:.3})  TDR {:.3} ({:.3})",
            match method {
                ProcedureConfig::Adadetect { scorer: SimScorer::Config { scorer } } => scorer.name(),
                ProcedureConfig::Adadetect { scorer: SimScorer::Oracle } => "oracle",
                other => other.name(),
            },
            r.fdr_hat,
            r.fdr_se,
            r.tdr_hat,
            r.tdr_se
        );
    }
    Ok(())
}
