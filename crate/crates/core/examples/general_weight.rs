//! A truncated normal weight gives an asymmetric leverage and design.
//!
//! cargo run --example general_weight

use minimax_design::basis::{BasisKind, Interval, Weight, DEFAULT_QUADRATURE_NODES};
use minimax_design::design::{build_design, sigma2_min, DesignFamily, Sigma2};
use minimax_design::risk::worst_case_risk;
use minimax_design::BasisContext;

fn main() -> minimax_design::Result<()> {
    let ctx = BasisContext::new(
        BasisKind::Monomial { degree: 1 },
        Interval::default(),
        Weight::TruncatedNormal { mean: 0.5, variance: 0.25 },
        DEFAULT_QUADRATURE_NODES,
    )?;
    println!("{}", ctx.describe());
    println!("h minimized at x = {:.4}, sigma2_min = {:.5}", ctx.h_argmin(), sigma2_min(&ctx));
    for s in [1.0, 2.0, 5.0] {
        let d = build_design(&ctx, DesignFamily::Minimax(Sigma2::Finite(s)))?;
        let region: Vec<String> = d.sqrt_region().iter().map(|iv| format!("[{:.4}, {:.4}]", iv.lo, iv.hi)).collect();
        let un = build_design(&ctx, DesignFamily::Uniform)?;
        println!(
            "sigma2 = {s}: sqrt region {}, worst case {:.4} (uniform {:.4})",
            if region.is_empty() { "empty".into() } else { region.join(" u ") },
            worst_case_risk(&ctx, &d, s)?,
            worst_case_risk(&ctx, &un, s)?
        );
    }
    Ok(())
}
