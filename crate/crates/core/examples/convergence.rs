//! Gap between n times the mean integrated squared error and its limit.
//!
//! cargo run --release --example convergence [replications]

use minimax_design::config::{BasisSpec, DesignSpec, MeanSpec};
use minimax_design::sim::{convergence_study, SimConfig};

fn main() -> minimax_design::Result<()> {
    let replications = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let config = SimConfig {
        basis: BasisSpec::monomial(1),
        mean: MeanSpec::polynomial(vec![0.0, 1.0, 3.354]),
        designs: vec![DesignSpec::new("prop-h", None), DesignSpec::new("uniform", None)],
        noise_variance: 1.0,
        n: 50,
        replications,
        seed: 11,
        coupling: true,
    };
    let series = convergence_study(&config, &[25, 50, 100, 200, 400, 800])?;
    for s in &series {
        println!("{}", s.label);
        println!("{:>6} {:>10} {:>8} {:>10} {:>8} {:>10}", "n", "n*ISE", "se", "limit", "gap", "sqrt(n)gap");
        for p in &s.points {
            println!(
                "{:>6} {:>10.4} {:>8.4} {:>10.4} {:>8.4} {:>10.4}",
                p.n, p.mean, p.se, p.trace_risk, p.gap, p.scaled_gap
            );
        }
        let (slope, se) = s.log_log_slope();
        println!("log-log slope of the scaled gap: {slope:.3} (se {se:.3})\n");
    }
    Ok(())
}
