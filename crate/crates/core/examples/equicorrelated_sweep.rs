//! Sweep the equicorrelation ρ and compare Storey-AdaDetect with a
//! Storey-BH that uses the marginal gaussian p-values.
//!
//! The configuration is the same JSON the CLI's `simulate` command reads.
//!
//! cargo run --release --example equicorrelated_sweep [replicates]

use adadetect::simlab::{run_simulation, SimulationConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = include_str!("configs/rho_sweep.json");
    let mut cfg: SimulationConfig = serde_json::from_str(text)?;
    cfg.replicates = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(200);
    println!("{:>5} {:>20} {:>7} {:>7}", "rho", "method", "FDR", "TDR");
    for point in run_simulation(&cfg)? {
        println!(
            "{:>5} {:>20} {:>7.3} {:>7.3}",
            point.sweep_value.unwrap_or(f64::NAN),
            point.report.method,
            point.report.fdr_hat,
            point.report.tdr_hat
        );
    }
    Ok(())
}
