//! Reference benchmark values for the linear (`K = 1`) and quadratic (`K = 2`)
//! problems on `[-1, 1]` with uniform weight, and comparisons against them.
//!
//! The risk benchmarks use the calibrated means `x + c x²` (`K = 1`) and
//! `x + x²/2 + c x³` (`K = 2`) with unit deviation. A column labelled `s`
//! corresponds to noise variance `s²` and a minimax design built at `s`.

use std::fmt::Write as _;

use crate::basis::{calibrate_leading_coefficient, BasisContext, MeanFunction};
use crate::design::{build_design, implied_sigma2, DesignFamily, Sigma2};
use crate::error::{Error, Result};

/// Positive endpoints of the `√h` region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryBenchmark {
    pub k: usize,
    pub sigma2: f64,
    pub endpoints: &'static [f64],
}

pub const BOUNDARY_BENCHMARKS: [BoundaryBenchmark; 4] = [
    BoundaryBenchmark { k: 1, sigma2: 2.0, endpoints: &[0.364] },
    BoundaryBenchmark { k: 1, sigma2: 3.0, endpoints: &[0.550] },
    BoundaryBenchmark { k: 2, sigma2: 2.0, endpoints: &[0.235, 0.587] },
    BoundaryBenchmark { k: 2, sigma2: 3.0, endpoints: &[0.725] },
];

/// One cell of the risk benchmark: mean of `n·ISE` at `n = 50` and the asymptotic value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskBenchmark {
    pub k: usize,
    pub label: f64,
    pub design: &'static str,
    pub empirical: f64,
    pub empirical_se: f64,
    pub asymptotic: f64,
}

const fn cell(k: usize, label: f64, design: &'static str, empirical: f64, empirical_se: f64, asymptotic: f64) -> RiskBenchmark {
    RiskBenchmark { k, label, design, empirical, empirical_se, asymptotic }
}

pub const RISK_BENCHMARKS: [RiskBenchmark; 24] = [
    cell(1, 0.5, "uniform", 3.42, 0.04, 3.07),
    cell(1, 0.5, "sqrt-h", 2.85, 0.03, 2.62),
    cell(1, 0.5, "minimax", 2.69, 0.03, 2.50),
    cell(1, 1.0, "uniform", 4.93, 0.05, 4.57),
    cell(1, 1.0, "sqrt-h", 4.31, 0.04, 4.04),
    cell(1, 1.0, "minimax", 4.22, 0.04, 4.00),
    cell(1, 2.0, "uniform", 11.21, 0.12, 10.57),
    cell(1, 2.0, "sqrt-h", 10.29, 0.11, 9.76),
    cell(1, 2.0, "minimax", 10.31, 0.11, 9.84),
    cell(1, 3.0, "uniform", 20.95, 0.21, 20.57),
    cell(1, 3.0, "sqrt-h", 19.55, 0.20, 19.29),
    cell(1, 3.0, "minimax", 19.62, 0.20, 19.38),
    cell(2, 0.5, "uniform", 6.21, 0.08, 5.13),
    cell(2, 0.5, "sqrt-h", 4.49, 0.05, 4.03),
    cell(2, 0.5, "minimax", 4.06, 0.04, 3.72),
    cell(2, 1.0, "uniform", 8.77, 0.10, 7.38),
    cell(2, 1.0, "sqrt-h", 6.76, 0.06, 6.13),
    cell(2, 1.0, "minimax", 6.42, 0.06, 5.98),
    cell(2, 2.0, "uniform", 18.46, 0.18, 16.38),
    cell(2, 2.0, "sqrt-h", 15.61, 0.14, 14.57),
    cell(2, 2.0, "minimax", 15.67, 0.14, 14.92),
    cell(2, 3.0, "uniform", 34.37, 0.32, 29.84),
    cell(2, 3.0, "sqrt-h", 30.34, 0.27, 28.62),
    cell(2, 3.0, "minimax", 30.48, 0.27, 29.02),
];

/// Standard error of the coupled minimax minus sqrt-h difference, by `(k, label)`.
pub const DIFFERENCE_SE_BENCHMARKS: [(usize, f64, f64); 8] = [
    (1, 0.5, 0.01),
    (1, 1.0, 0.02),
    (1, 2.0, 0.03),
    (1, 3.0, 0.04),
    (2, 0.5, 0.03),
    (2, 1.0, 0.04),
    (2, 2.0, 0.07),
    (2, 3.0, 0.08),
];

pub fn risk_benchmark(k: usize, label: f64, design: &str) -> Option<&'static RiskBenchmark> {
    RISK_BENCHMARKS.iter().find(|c| c.k == k && c.label == label && c.design == design)
}

pub fn noise_variance_for_label(label: f64) -> f64 {
    label * label
}

pub fn design_sigma2_for_label(label: f64) -> Sigma2 {
    Sigma2::Finite(label)
}

/// Lower-order coefficients and leading degree of the calibrated benchmark mean.
pub fn benchmark_mean_shape(k: usize) -> Result<(Vec<f64>, usize)> {
    match k {
        1 => Ok((vec![0.0, 1.0], 2)),
        2 => Ok((vec![0.0, 1.0, 0.5], 3)),
        _ => Err(Error::Usage(format!("benchmarks exist for K = 1 and 2, not {k}"))),
    }
}

/// The benchmark mean with unit deviation from its best linear approximation.
pub fn benchmark_mean(ctx: &BasisContext) -> Result<MeanFunction> {
    let (base, degree) = benchmark_mean_shape(ctx.size() - 1)?;
    Ok(calibrate_leading_coefficient(&base, degree, ctx, 1.0)?.mean)
}

/// Derived versus benchmark `√h` region endpoints for one `(K, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDiscrepancy {
    pub k: usize,
    pub sigma2: f64,
    pub derived: Vec<f64>,
    pub reference: Vec<f64>,
    /// `σ²` whose optimal threshold puts the outermost boundary at the reference endpoint.
    pub implied_sigma2: Sigma2,
}

impl BoundaryDiscrepancy {
    pub fn max_abs_difference(&self) -> f64 {
        if self.derived.len() != self.reference.len() {
            return f64::INFINITY;
        }
        self.derived.iter().zip(&self.reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn agrees(&self, tol: f64) -> bool {
        self.max_abs_difference() <= tol
    }

    pub fn note(&self) -> String {
        let fmt = |v: &[f64]| v.iter().map(|x| format!("±{x:.4}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let _ = write!(
            s,
            "K={} sigma2={}: derived boundaries {}; benchmark {}",
            self.k,
            self.sigma2,
            fmt(&self.derived),
            fmt(&self.reference)
        );
        if !self.agrees(5e-4) {
            let _ = write!(s, "; the benchmark endpoints correspond to sigma2 = {:.3}", self.implied_sigma2);
        }
        s
    }
}

/// Positive boundary points of the minimax design at `sigma2`.
pub fn derived_endpoints(ctx: &BasisContext, sigma2: Sigma2) -> Result<Vec<f64>> {
    let d = build_design(ctx, DesignFamily::Minimax(sigma2))?;
    Ok(d.boundary_points().iter().copied().filter(|&x| x > 0.0).collect())
}

pub fn boundary_discrepancy(ctx: &BasisContext, bench: &BoundaryBenchmark) -> Result<BoundaryDiscrepancy> {
    let derived = derived_endpoints(ctx, Sigma2::Finite(bench.sigma2))?;
    let outer = bench.endpoints.iter().copied().fold(0.0, f64::max);
    let implied = implied_sigma2(ctx, ctx.evaluate_h(outer)?)?;
    Ok(BoundaryDiscrepancy {
        k: bench.k,
        sigma2: bench.sigma2,
        derived,
        reference: bench.endpoints.to_vec(),
        implied_sigma2: implied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cells_are_complete() {
        for k in [1, 2] {
            for label in [0.5, 1.0, 2.0, 3.0] {
                for d in ["uniform", "sqrt-h", "minimax"] {
                    assert!(risk_benchmark(k, label, d).is_some(), "{k} {label} {d}");
                }
            }
        }
    }

    #[test]
    fn sigma2_two_rows_agree() {
        for bench in BOUNDARY_BENCHMARKS.iter().filter(|b| b.sigma2 == 2.0) {
            let ctx = BasisContext::monomial(bench.k).unwrap();
            let d = boundary_discrepancy(&ctx, bench).unwrap();
            assert!(d.agrees(5e-4), "{}", d.note());
            assert_abs_diff_eq!(d.implied_sigma2.value(), 2.0, epsilon = 0.02);
        }
    }

    #[test]
    fn sigma2_three_rows_disagree_with_note() {
        let ctx = BasisContext::monomial(1).unwrap();
        let d = boundary_discrepancy(&ctx, &BOUNDARY_BENCHMARKS[1]).unwrap();
        assert!(!d.agrees(5e-4));
        assert!(d.note().contains("correspond to sigma2"));
    }

    #[test]
    fn benchmark_means() {
        let c1 = benchmark_mean(&BasisContext::monomial(1).unwrap()).unwrap();
        assert_abs_diff_eq!(c1.coefficients().unwrap()[2], 3.354, epsilon = 5e-4);
        assert!(benchmark_mean(&BasisContext::monomial(3).unwrap()).is_err());
    }
}
