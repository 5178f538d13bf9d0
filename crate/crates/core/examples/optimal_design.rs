//! Minimax designs for linear and quadratic fits across noise levels.
//!
//! cargo run --example optimal_design

use minimax_design::design::{build_design, sigma2_min, solve_threshold, DesignFamily, Sigma2};
use minimax_design::BasisContext;

fn main() -> minimax_design::Result<()> {
    for k in [1, 2] {
        let ctx = BasisContext::monomial(k)?;
        println!("K = {k}: h ranges over [{:.4}, {:.4}], sigma2_min = {:.6}", ctx.h_min(), ctx.h_max(), sigma2_min(&ctx));
        for s in [Sigma2::Finite(1.0), Sigma2::Finite(2.0), Sigma2::Finite(3.0), Sigma2::Finite(10.0), Sigma2::Infinite] {
            let d = build_design(&ctx, DesignFamily::Minimax(s))?;
            let region: Vec<String> = d.sqrt_region().iter().map(|iv| format!("[{:.4}, {:.4}]", iv.lo, iv.hi)).collect();
            println!(
                "  sigma2 = {s:<4} h0 = {:.5}  shape {:<8} sqrt region {}",
                solve_threshold(&ctx, s)?,
                d.shape(),
                if region.is_empty() { "empty".into() } else { region.join(" u ") }
            );
        }
        let d = build_design(&ctx, DesignFamily::Minimax(Sigma2::Finite(2.0)))?;
        println!("  density at sigma2 = 2:");
        for x in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            println!("    pi({x:>4}) = {:.5}", d.density_at(x)?);
        }
    }
    Ok(())
}
