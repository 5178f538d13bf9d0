//! Worst-case risk of each design family across noise levels.
//!
//! cargo run --example dominance

use minimax_design::design::{build_design, DesignFamily, Sigma2};
use minimax_design::risk::worst_case_risk;
use minimax_design::BasisContext;

fn main() -> minimax_design::Result<()> {
    for k in [1, 2, 3] {
        let ctx = BasisContext::monomial(k)?;
        println!("K = {k}");
        println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "sigma2", "minimax", "prop-h", "sqrt-h", "uniform");
        for s in [0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0] {
            let mut row = format!("{s:>8}");
            for fam in [DesignFamily::Minimax(Sigma2::Finite(s)), DesignFamily::PropH, DesignFamily::SqrtH, DesignFamily::Uniform] {
                row += &format!(" {:>10.4}", worst_case_risk(&ctx, &build_design(&ctx, fam)?, s)?);
            }
            println!("{row}");
        }
    }
    Ok(())
}
