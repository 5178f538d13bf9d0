//! Exact asymptotic risks of uniform, sqrt-h and minimax designs.
//!
//! Noise variance is the square of the column label; the minimax design is
//! built at the label itself.
//!
//! cargo run --example asymptotic_risk

use minimax_design::benchmarks::{benchmark_mean, design_sigma2_for_label, noise_variance_for_label};
use minimax_design::design::{build_design, DesignFamily};
use minimax_design::risk::{omega_trace, worst_case_risk, VarianceSpec};
use minimax_design::BasisContext;

fn main() -> minimax_design::Result<()> {
    for k in [1, 2] {
        let ctx = BasisContext::monomial(k)?;
        let m = benchmark_mean(&ctx)?;
        println!("K = {k}, {}", m.description);
        println!("{:>6} {:>10} {:>10} {:>10}", "label", "uniform", "sqrt-h", "minimax");
        for label in [0.5, 1.0, 2.0, 3.0] {
            let v = VarianceSpec::Constant(noise_variance_for_label(label));
            let mut row = format!("{label:>6}");
            for fam in [DesignFamily::Uniform, DesignFamily::SqrtH, DesignFamily::Minimax(design_sigma2_for_label(label))] {
                let d = build_design(&ctx, fam)?;
                row += &format!(" {:>10.3}", omega_trace(&ctx, &d, &m, &v)?.trace_risk);
            }
            println!("{row}");
        }
        println!("worst case over the unit deviation ball at sigma2 = 2:");
        for fam in [DesignFamily::Uniform, DesignFamily::PropH, DesignFamily::SqrtH, DesignFamily::Minimax(2.0.into())] {
            let d = build_design(&ctx, fam)?;
            println!("  {:<14} {:.4}", fam.to_string(), worst_case_risk(&ctx, &d, 2.0)?);
        }
    }
    Ok(())
}
