//! Coupled Monte Carlo comparison at n = 50.
//!
//! cargo run --release --example monte_carlo [replications]

use minimax_design::config::{BasisSpec, CalibrateSpec, DesignSpec, MeanSpec};
use minimax_design::sim::{run_experiment, SimConfig};
use minimax_design::Sigma2;

fn main() -> minimax_design::Result<()> {
    let replications = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let config = SimConfig {
        basis: BasisSpec::monomial(1),
        mean: MeanSpec {
            coefficients: None,
            calibrate: Some(CalibrateSpec { base: vec![0.0, 1.0], leading_degree: 2, target: 1.0 }),
        },
        designs: vec![
            DesignSpec::new("uniform", None),
            DesignSpec::new("sqrt-h", None),
            DesignSpec::new("minimax", Some(Sigma2::Finite(1.0))),
        ],
        noise_variance: 1.0,
        n: 50,
        replications,
        seed: 20240601,
        coupling: true,
    };
    let result = run_experiment(&config)?;
    print!("{}", result.to_table());
    for d in &result.designs {
        println!("{}: fallback to nQ in {:.4}% of replications", d.label, 100.0 * d.event_frequency);
    }
    Ok(())
}
