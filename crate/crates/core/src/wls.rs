//! Truncated weighted least squares.
//!
//! Observations are weighted by `λ(X_i)/π(X_i)`. When the smallest eigenvalue
//! of the weighted Gram matrix divided by `n` falls below `λ_min(Q)/2`, the
//! Gram matrix is replaced by `nQ`, which keeps the estimator's moments finite.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::basis::{BasisContext, CoefficientVector};
use crate::design::DesignDensity;
use crate::error::{Error, Result};
use crate::linalg::{self, CompensatedSum};

pub use crate::linalg::smallest_eigenvalue;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Dataset {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Usage(format!("{} predictors but {} responses", xs.len(), ys.len())));
        }
        Ok(Dataset { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y")?;
        for (x, y) in self.xs.iter().zip(&self.ys) {
            writeln!(w, "{x},{y}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut header = false;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header {
                if line.replace(' ', "") != "x,y" {
                    return Err(Error::Config(format!("dataset header must be x,y; got '{line}'")));
                }
                header = true;
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| Error::Config(format!("bad row '{line}'")))?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number '{s}'")));
            xs.push(parse(a)?);
            ys.push(parse(b)?);
        }
        Dataset::new(xs, ys)
    }
}

/// Which Gram matrix the weighted estimator inverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimator {
    /// Weighted Gram matrix, replaced by `nQ` on the near-singular event.
    #[default]
    Truncated,
    /// Always `nQ`: `Q^{-1} Ṽ / n`.
    KnownQ,
    /// Weighted Gram matrix, no fallback.
    Untruncated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WlsFit {
    pub beta_tilde: Vec<f64>,
    pub event_triggered: bool,
    /// Smallest eigenvalue of the (weighted) Gram matrix over `n`.
    pub lambda_min_observed: f64,
    pub n: usize,
}

impl WlsFit {
    pub fn coefficients(&self) -> CoefficientVector {
        CoefficientVector { beta: self.beta_tilde.clone() }
    }

    pub fn to_text(&self) -> String {
        let beta: Vec<String> = self.beta_tilde.iter().map(|b| b.to_string()).collect();
        format!(
            "n = {}\nbeta = {}\nevent_triggered = {}\nlambda_min_observed = {}\n",
            self.n,
            beta.join(" "),
            self.event_triggered,
            self.lambda_min_observed
        )
    }
}

/// Gram matrix and moment vector accumulated with compensated sums.
fn weighted_normal_equations<W: Fn(f64) -> f64>(
    ctx: &BasisContext,
    data: &Dataset,
    weight: W,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let k = ctx.size();
    let mut gram = vec![CompensatedSum::default(); k * (k + 1) / 2];
    let mut rhs = vec![CompensatedSum::default(); k];
    let mut feat = vec![0.0; k];
    for (&x, &y) in data.xs.iter().zip(&data.ys) {
        ctx.check_domain(x)?;
        let w = weight(x);
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::DegenerateDesign(format!("weight {w} at x = {x}")));
        }
        ctx.features(x, &mut feat);
        let mut idx = 0;
        for i in 0..k {
            let wi = w * feat[i];
            for f in &feat[..=i] {
                gram[idx].add(wi * f);
                idx += 1;
            }
            rhs[i].add(wi * y);
        }
    }
    let mut g = DMatrix::zeros(k, k);
    let mut idx = 0;
    for i in 0..k {
        for j in 0..=i {
            let v = gram[idx].value();
            g[(i, j)] = v;
            g[(j, i)] = v;
            idx += 1;
        }
    }
    Ok((g, rhs.iter().map(CompensatedSum::value).collect()))
}

fn check_size(ctx: &BasisContext, data: &Dataset) -> Result<()> {
    if data.len() < ctx.size() {
        return Err(Error::Underdetermined { n: data.len(), k: ctx.size() });
    }
    Ok(())
}

/// The truncated weighted least squares fit.
pub fn fit_wls(data: &Dataset, design: &DesignDensity, ctx: &BasisContext) -> Result<WlsFit> {
    fit_wls_with(data, design, ctx, Estimator::Truncated)
}

pub fn fit_wls_with(data: &Dataset, design: &DesignDensity, ctx: &BasisContext, estimator: Estimator) -> Result<WlsFit> {
    check_size(ctx, data)?;
    let n = data.len();
    let (g, v) = weighted_normal_equations(ctx, data, |x| ctx.weight_at(x) / design.pdf(x))?;
    let lambda_min_observed = linalg::smallest_eigenvalue(&(&g / n as f64))?.max(0.0);
    let event_triggered = lambda_min_observed < 0.5 * ctx.lambda_min_q();
    let use_q = match estimator {
        Estimator::Truncated => event_triggered,
        Estimator::KnownQ => true,
        Estimator::Untruncated => false,
    };
    let beta_tilde = if use_q {
        linalg::spd_solve(&(ctx.q() * n as f64), &v)
            .ok_or_else(|| Error::Internal("nQ is not positive definite".into()))?
    } else {
        if lambda_min_observed <= 1e-13 * g.amax() / n as f64 {
            return Err(Error::DegenerateDesign("weighted Gram matrix is singular".into()));
        }
        linalg::spd_solve(&g, &v)
            .ok_or_else(|| Error::DegenerateDesign("weighted Gram matrix is singular".into()))?
    };
    Ok(WlsFit { beta_tilde, event_triggered: event_triggered && estimator == Estimator::Truncated, lambda_min_observed, n })
}

/// Ordinary least squares: unit weights, no fallback.
pub fn fit_ols(data: &Dataset, ctx: &BasisContext) -> Result<WlsFit> {
    check_size(ctx, data)?;
    let n = data.len();
    let (g, v) = weighted_normal_equations(ctx, data, |_| 1.0)?;
    let lambda_min_observed = linalg::smallest_eigenvalue(&(&g / n as f64))?.max(0.0);
    let beta_tilde =
        linalg::spd_solve(&g, &v).ok_or_else(|| Error::DegenerateDesign("Gram matrix is singular".into()))?;
    Ok(WlsFit { beta_tilde, event_triggered: false, lambda_min_observed, n })
}

/// `(β̃ - β)^T Q (β̃ - β)`, the λ-weighted integrated squared error of the fitted approximation.
pub fn integrated_squared_error(fit: &WlsFit, ctx: &BasisContext, beta_true: &CoefficientVector) -> f64 {
    let d: Vec<f64> = fit.beta_tilde.iter().zip(&beta_true.beta).map(|(a, b)| a - b).collect();
    linalg::quadratic_form(ctx.q(), &d)
}
