//! Under a non-uniform design, ordinary least squares targets the line that
//! is best for the design, while the weighted fit targets the one that is
//! best for the weight.
//!
//! cargo run --release --example ols_inconsistency

use minimax_design::basis::best_linear_coefficients_under_design;
use minimax_design::design::{build_design, DesignFamily};
use minimax_design::sampling::{sample_predictors, simulate_responses, RngStream};
use minimax_design::wls::{fit_ols, fit_wls, Dataset};
use minimax_design::{best_linear_coefficients, BasisContext, MeanFunction};

fn main() -> minimax_design::Result<()> {
    let ctx = BasisContext::monomial(1)?;
    let m = MeanFunction::polynomial(vec![0.0, 1.0, 3.354]);
    let design = build_design(&ctx, DesignFamily::PropH)?;
    let target = best_linear_coefficients(&m, &ctx);
    let drift = best_linear_coefficients_under_design(&m, &design, &ctx)?;
    println!("best line for the weight: {:?}", target.beta);
    println!("best line for the design: {:?}", drift.beta);
    for n in [100, 1_000, 10_000, 100_000] {
        let mut stream = RngStream::new(1, n as u64);
        let xs = sample_predictors(&design, n, &mut stream)?.xs;
        let ys = simulate_responses(&xs, &m, 1.0, &mut stream)?;
        let data = Dataset::new(xs, ys)?;
        let w = fit_wls(&data, &design, &ctx)?;
        let o = fit_ols(&data, &ctx)?;
        println!(
            "n = {n:>6}  weighted ({:.4}, {:.4})  ordinary ({:.4}, {:.4})",
            w.beta_tilde[0], w.beta_tilde[1], o.beta_tilde[0], o.beta_tilde[1]
        );
    }
    Ok(())
}
