//! Exact asymptotic risk `tr(Q^{-1} Ω_π)` and the minimax criterion.
//!
//! With the leverage convention `h(x) = 4 x^T Q^{-1} x λ(x)^2`,
//!
//! ```text
//! tr(Q^{-1} Ω_π) = ¼ ∫ h(x) [σ²(x) + (m(x) - ℓ(x))²] / π(x) dx
//! R_π            = (σ²/2) ∫ h/π dx + sup_x h(x)/π(x)
//! ```
//!
//! and the worst case of the trace over the unit misspecification ball is `R_π / 2`.

use std::fmt::Write as _;

use crate::basis::{best_linear_coefficients, golden_section, merge_breaks, BasisContext, MeanFunction, ScalarFn, SCAN_GRID};
use crate::design::DesignDensity;
use crate::error::{Error, Result};

/// Density values below this make the risk integrals ill-posed.
pub const DENSITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum VarianceSpec {
    Constant(f64),
    /// Heteroscedastic `σ²(x)`.
    Function(ScalarFn),
}

impl VarianceSpec {
    #[inline]
    fn at(&self, x: f64) -> f64 {
        match self {
            VarianceSpec::Constant(v) => *v,
            VarianceSpec::Function(f) => f.eval(x),
        }
    }

    fn describe(&self) -> String {
        match self {
            VarianceSpec::Constant(v) => v.to_string(),
            VarianceSpec::Function(_) => "function".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    /// `¼ ∫ h σ² / π`
    pub variance_term: f64,
    /// `¼ ∫ h (m - ℓ)² / π`
    pub bias_term: f64,
    /// `tr(Q^{-1} Ω_π)`
    pub trace_risk: f64,
    /// `R_π`
    pub minimax_criterion: f64,
    /// `R_π / 2`
    pub worst_case: f64,
    pub design: String,
    pub mean: String,
    pub variance: String,
}

impl RiskReport {
    pub const CSV_HEADER: &'static str =
        "design,mean,variance,variance_term,bias_term,trace_risk,minimax_criterion,worst_case";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            csv_field(&self.design),
            csv_field(&self.mean),
            csv_field(&self.variance),
            self.variance_term,
            self.bias_term,
            self.trace_risk,
            self.minimax_criterion,
            self.worst_case
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "design = {}", self.design);
        let _ = writeln!(s, "mean = {}", self.mean);
        let _ = writeln!(s, "variance = {}", self.variance);
        let _ = writeln!(s, "variance_term = {}", self.variance_term);
        let _ = writeln!(s, "bias_term = {}", self.bias_term);
        let _ = writeln!(s, "trace_risk = {}", self.trace_risk);
        let _ = writeln!(s, "minimax_criterion = {}", self.minimax_criterion);
        let _ = writeln!(s, "worst_case = {}", self.worst_case);
        s
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn check_floor(design: &DesignDensity) -> Result<()> {
    let s = design.support();
    for x in s.grid(SCAN_GRID).chain(design.breakpoints()) {
        let p = design.pdf(x);
        if !(p >= DENSITY_FLOOR) {
            return Err(Error::IllPosedRisk { x, density: p });
        }
    }
    Ok(())
}

/// `∫ h/π dx` and `∫ h σ²/π dx` over the design's smooth pieces.
fn leverage_integral<F: Fn(f64) -> f64>(ctx: &BasisContext, design: &DesignDensity, extra: &[f64], g: F) -> f64 {
    let breaks = merge_breaks(&design.breakpoints(), extra);
    ctx.integrate_segments(&breaks, |x| ctx.h(x) * g(x) / design.pdf(x))
}

/// `sup_x h(x)/π(x)`: grid maximum refined by golden section on the bracketing cells.
pub fn sup_ratio(ctx: &BasisContext, design: &DesignDensity) -> f64 {
    let ratio = |x: f64| ctx.h(x) / design.pdf(x);
    let grid: Vec<f64> = ctx.support().grid(SCAN_GRID).collect();
    let (i, best) = grid
        .iter()
        .map(|&x| ratio(x))
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty grid");
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let (_, neg) = golden_section(lo, hi, |x| -ratio(x));
    let extra = design.breakpoints().into_iter().map(ratio).fold(f64::NEG_INFINITY, f64::max);
    best.max(-neg).max(extra)
}

/// Exact asymptotic risk and its decomposition for a given mean function.
pub fn omega_trace(
    ctx: &BasisContext,
    design: &DesignDensity,
    m: &MeanFunction,
    variance: &VarianceSpec,
) -> Result<RiskReport> {
    check_floor(design)?;
    let ell = best_linear_coefficients(m, ctx);
    let mb = m.breakpoints();
    let variance_term = 0.25 * leverage_integral(ctx, design, &[], |x| variance.at(x));
    let bias_term = 0.25
        * leverage_integral(ctx, design, &mb, |x| {
            let r = m.eval(x) - ell.eval(ctx, x);
            r * r
        });
    let minimax_criterion = criterion(ctx, design, variance);
    Ok(RiskReport {
        variance_term,
        bias_term,
        trace_risk: variance_term + bias_term,
        minimax_criterion,
        worst_case: 0.5 * minimax_criterion,
        design: design.label().to_string(),
        mean: m.description.clone(),
        variance: variance.describe(),
    })
}

fn criterion(ctx: &BasisContext, design: &DesignDensity, variance: &VarianceSpec) -> f64 {
    0.5 * leverage_integral(ctx, design, &[], |x| variance.at(x)) + sup_ratio(ctx, design)
}

/// `R_π = (σ²/2) ∫ h/π + sup h/π`.
pub fn minimax_criterion(ctx: &BasisContext, design: &DesignDensity, sigma2: f64) -> Result<f64> {
    if !(sigma2 >= 0.0) {
        return Err(Error::Usage(format!("sigma2 must be nonnegative, got {sigma2}")));
    }
    check_floor(design)?;
    Ok(criterion(ctx, design, &VarianceSpec::Constant(sigma2)))
}

/// Supremum of the trace risk over the unit misspecification ball, `R_π / 2`.
///
/// `sigma2` may be an upper bound on the noise variance.
pub fn worst_case_risk(ctx: &BasisContext, design: &DesignDensity, sigma2: f64) -> Result<f64> {
    Ok(0.5 * minimax_criterion(ctx, design, sigma2)?)
}
