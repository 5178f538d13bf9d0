//! The approximation space: basis functions on a compact interval, the
//! reference weight density, the moment matrix `Q`, and the weighted
//! leverage function `h(x) = 4 x^T Q^{-1} x λ(x)^2`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::design::DesignDensity;
use crate::error::{Error, Result};
use crate::linalg::{self, MAX_BASIS_SIZE};
use crate::quadrature::GaussLegendre;

pub const DEFAULT_QUADRATURE_NODES: usize = 512;
/// Points in the scan grid used for extrema of `h` and sup-norm searches.
pub const SCAN_GRID: usize = 4096;
/// Points in the uniform grid behind tabulated mean functions.
pub const MEAN_TABLE_POINTS: usize = 4096;
/// Condition number of `Q` above which results should be treated with suspicion.
pub const CONDITION_WARNING: f64 = 1e10;

/// Segment count above which composite integration switches to the short rule.
const SEGMENT_SWITCH: usize = 64;
const SHORT_RULE_NODES: usize = 16;

/// A shareable scalar function of `x`.
#[derive(Clone)]
pub struct ScalarFn(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl ScalarFn {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        ScalarFn(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarFn(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Evenly spaced points including both ends.
    pub fn grid(&self, points: usize) -> impl Iterator<Item = f64> + '_ {
        let step = self.len() / (points - 1) as f64;
        (0..points).map(move |i| {
            if i == points - 1 {
                self.hi
            } else {
                self.lo + step * i as f64
            }
        })
    }
}

impl Default for Interval {
    fn default() -> Self {
        Interval::new(-1.0, 1.0)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Reference density λ weighting the integrated error.
#[derive(Debug, Clone, Default)]
pub enum Weight {
    #[default]
    Uniform,
    /// Normal with the given mean and *variance*, truncated to the support.
    TruncatedNormal { mean: f64, variance: f64 },
    /// A user density; must be positive and integrate to one on the support.
    Custom(ScalarFn),
}

impl Weight {
    fn describe(&self) -> String {
        match self {
            Weight::Uniform => "uniform".into(),
            Weight::TruncatedNormal { mean, variance } => {
                format!("truncated-normal(mean={mean}, variance={variance})")
            }
            Weight::Custom(_) => "custom".into(),
        }
    }
}

/// Density of `N(mean, variance)` truncated to `support`.
pub fn truncated_normal_density(mean: f64, variance: f64, support: Interval) -> Result<ScalarFn> {
    if !(variance > 0.0) {
        return Err(Error::InvalidWeight(format!("variance {variance} must be positive")));
    }
    let sd = variance.sqrt();
    let normal = Normal::new(mean, sd).map_err(|e| Error::InvalidWeight(e.to_string()))?;
    let mass = normal.cdf(support.hi) - normal.cdf(support.lo);
    if !(mass > 0.0) {
        return Err(Error::InvalidWeight("truncated normal has no mass on support".into()));
    }
    let norm = 1.0 / (mass * sd * (2.0 * std::f64::consts::PI).sqrt());
    Ok(ScalarFn::new(move |x| {
        let z = (x - mean) / sd;
        norm * (-0.5 * z * z).exp()
    }))
}

#[derive(Debug, Clone)]
pub struct BasisFunction {
    pub label: String,
    f: ScalarFn,
}

impl BasisFunction {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(label: impl Into<String>, f: F) -> Self {
        BasisFunction { label: label.into(), f: ScalarFn::new(f) }
    }

    /// A polynomial basis function with coefficients in increasing degree.
    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        let label = format_polynomial(&coefficients);
        BasisFunction { label, f: ScalarFn::new(move |x| horner(&coefficients, x)) }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.f.eval(x)
    }
}

#[derive(Debug, Clone)]
pub enum BasisKind {
    /// `(1, x, ..., x^degree)`
    Monomial { degree: usize },
    Functions(Vec<BasisFunction>),
}

impl BasisKind {
    pub fn size(&self) -> usize {
        match self {
            BasisKind::Monomial { degree } => degree + 1,
            BasisKind::Functions(fs) => fs.len(),
        }
    }

    #[inline]
    fn fill(&self, x: f64, out: &mut [f64]) {
        match self {
            BasisKind::Monomial { .. } => {
                let mut p = 1.0;
                for o in out.iter_mut() {
                    *o = p;
                    p *= x;
                }
            }
            BasisKind::Functions(fs) => {
                for (o, f) in out.iter_mut().zip(fs) {
                    *o = f.eval(x);
                }
            }
        }
    }
}

/// Basis, support, weight and everything derived from them.
///
/// Cheap to clone; immutable after construction.
#[derive(Debug, Clone)]
pub struct BasisContext {
    kind: BasisKind,
    support: Interval,
    weight: Weight,
    weight_fn: ScalarFn,
    q: DMatrix<f64>,
    q_inv: DMatrix<f64>,
    lambda_min_q: f64,
    condition: f64,
    quad: Arc<GaussLegendre>,
    short_quad: Arc<GaussLegendre>,
    h_min: f64,
    h_max: f64,
    h_argmin: f64,
}

impl BasisContext {
    pub fn new(kind: BasisKind, support: Interval, weight: Weight, quadrature_nodes: usize) -> Result<Self> {
        if !(support.lo.is_finite() && support.hi.is_finite() && support.lo < support.hi) {
            return Err(Error::Usage(format!("support {support} must be a nonempty finite interval")));
        }
        let k = kind.size();
        if k == 0 {
            return Err(Error::DegenerateBasis("empty basis".into()));
        }
        if k > MAX_BASIS_SIZE {
            return Err(Error::Usage(format!("basis size {k} exceeds the cap of {MAX_BASIS_SIZE}")));
        }
        if quadrature_nodes == 0 {
            return Err(Error::Usage("quadrature_nodes must be positive".into()));
        }
        let quad = Arc::new(GaussLegendre::new(quadrature_nodes));
        let weight_fn = match &weight {
            Weight::Uniform => {
                let d = 1.0 / support.len();
                ScalarFn::new(move |_| d)
            }
            Weight::TruncatedNormal { mean, variance } => truncated_normal_density(*mean, *variance, support)?,
            Weight::Custom(f) => f.clone(),
        };
        for x in support.grid(SCAN_GRID) {
            let w = weight_fn.eval(x);
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidWeight(format!("weight {w} at x = {x} is not positive")));
            }
        }
        let mass = quad.integrate(support.lo, support.hi, |x| weight_fn.eval(x));
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidWeight(format!("weight integrates to {mass}, not 1")));
        }

        let mut q = DMatrix::zeros(k, k);
        let mut feat = vec![0.0; k];
        let half = 0.5 * support.len();
        let mid = support.midpoint();
        for (t, w) in quad.nodes().iter().zip(quad.weights()) {
            let x = mid + half * t;
            kind.fill(x, &mut feat);
            let lw = half * w * weight_fn.eval(x);
            for i in 0..k {
                for j in 0..=i {
                    q[(i, j)] += lw * feat[i] * feat[j];
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                q[(j, i)] = q[(i, j)];
            }
        }
        let eig = linalg::symmetric_eigenvalues(&q)?;
        let (lo, hi) = (eig[0], eig[k - 1]);
        if !(lo > 1e-13 * hi) {
            return Err(Error::DegenerateBasis(format!(
                "moment matrix is not positive definite (eigenvalues {lo:e} .. {hi:e})"
            )));
        }
        let q_inv = linalg::spd_inverse(&q)
            .ok_or_else(|| Error::DegenerateBasis("Cholesky factorization of Q failed".into()))?;

        let mut ctx = BasisContext {
            kind,
            support,
            weight,
            weight_fn,
            q,
            q_inv,
            lambda_min_q: lo,
            condition: hi / lo,
            quad,
            short_quad: Arc::new(GaussLegendre::new(SHORT_RULE_NODES)),
            h_min: 0.0,
            h_max: 0.0,
            h_argmin: 0.0,
        };
        let (h_min, h_argmin, h_max) = ctx.scan_extrema();
        ctx.h_min = h_min;
        ctx.h_argmin = h_argmin;
        ctx.h_max = h_max;
        Ok(ctx)
    }

    /// Monomials of the given degree on [-1, 1] with the uniform weight.
    pub fn monomial(degree: usize) -> Result<Self> {
        Self::new(
            BasisKind::Monomial { degree },
            Interval::default(),
            Weight::Uniform,
            DEFAULT_QUADRATURE_NODES,
        )
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    pub fn size(&self) -> usize {
        self.kind.size()
    }

    pub fn support(&self) -> Interval {
        self.support
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn q_inv(&self) -> &DMatrix<f64> {
        &self.q_inv
    }

    pub fn lambda_min_q(&self) -> f64 {
        self.lambda_min_q
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.condition > CONDITION_WARNING
    }

    pub fn quadrature(&self) -> &GaussLegendre {
        &self.quad
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Location of the minimum of `h`.
    pub fn h_argmin(&self) -> f64 {
        self.h_argmin
    }

    pub fn describe(&self) -> String {
        let basis = match &self.kind {
            BasisKind::Monomial { degree } => format!("monomial(degree={degree})"),
            BasisKind::Functions(fs) => {
                let labels: Vec<&str> = fs.iter().map(|f| f.label.as_str()).collect();
                format!("functions({})", labels.join("; "))
            }
        };
        format!("{basis} on {} weight {}", self.support, self.weight.describe())
    }

    #[inline]
    pub fn features(&self, x: f64, out: &mut [f64]) {
        self.kind.fill(x, out);
    }

    #[inline]
    pub fn weight_at(&self, x: f64) -> f64 {
        self.weight_fn.eval(x)
    }

    pub fn check_domain(&self, x: f64) -> Result<()> {
        if self.support.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain { value: x, lo: self.support.lo, hi: self.support.hi })
        }
    }

    /// `h(x)` without the domain check.
    #[inline]
    pub fn h(&self, x: f64) -> f64 {
        let k = self.size();
        let mut buf = [0.0; MAX_BASIS_SIZE];
        let feat = &mut buf[..k];
        self.kind.fill(x, feat);
        let lam = self.weight_fn.eval(x);
        4.0 * lam * lam * linalg::quadratic_form(&self.q_inv, feat)
    }

    /// The weighted leverage `h(x) = 4 x^T Q^{-1} x λ(x)^2`.
    pub fn evaluate_h(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.h(x))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        self.quad.integrate(a, b, f)
    }

    /// Composite integral over consecutive segments of `breaks`.
    pub fn integrate_segments<F: FnMut(f64) -> f64>(&self, breaks: &[f64], mut f: F) -> f64 {
        let segments = breaks.len().saturating_sub(1);
        let rule = if segments > SEGMENT_SWITCH { &self.short_quad } else { &self.quad };
        breaks.windows(2).map(|w| rule.integrate(w[0], w[1], &mut f)).sum()
    }

    fn integrate_vec_segments<F: FnMut(f64, &mut [f64])>(&self, breaks: &[f64], out: &mut [f64], mut f: F) {
        let segments = breaks.len().saturating_sub(1);
        let rule = if segments > SEGMENT_SWITCH { &self.short_quad } else { &self.quad };
        for w in breaks.windows(2) {
            rule.integrate_vec(w[0], w[1], out, &mut f);
        }
    }

    fn scan_extrema(&self) -> (f64, f64, f64) {
        let grid: Vec<f64> = self.support.grid(SCAN_GRID).collect();
        let vals: Vec<f64> = grid.iter().map(|&x| self.h(x)).collect();
        let refine = |sign: f64| {
            let (i, _) = vals
                .iter()
                .enumerate()
                .min_by(|a, b| (sign * a.1).total_cmp(&(sign * b.1)))
                .expect("nonempty grid");
            let lo = grid[i.saturating_sub(1)];
            let hi = grid[(i + 1).min(grid.len() - 1)];
            let (x, v) = golden_section(lo, hi, |x| sign * self.h(x));
            if sign * vals[i] < v {
                (grid[i], vals[i])
            } else {
                (x, sign * v)
            }
        };
        let (argmin, min) = refine(1.0);
        let (_, max) = refine(-1.0);
        (min, argmin, max)
    }

    /// Moment vector `∫ x g(x) λ(x) dx` over the given breakpoints.
    fn moments<G: Fn(f64) -> f64>(&self, breaks: &[f64], g: G) -> Vec<f64> {
        let k = self.size();
        let mut out = vec![0.0; k];
        self.integrate_vec_segments(breaks, &mut out, |x, buf| {
            self.kind.fill(x, buf);
            let s = g(x) * self.weight_fn.eval(x);
            for b in buf.iter_mut() {
                *b *= s;
            }
        });
        out
    }

    fn breaks_with(&self, extra: &[f64]) -> Vec<f64> {
        merge_breaks(&[self.support.lo, self.support.hi], extra)
    }
}

/// Sorted union of breakpoint lists with near-duplicates removed.
pub(crate) fn merge_breaks(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + y.abs()));
    all
}

/// Minimize a unimodal function on `[lo, hi]`.
pub(crate) fn golden_section<F: Fn(f64) -> f64>(mut lo: f64, mut hi: f64, f: F) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-15 * (1.0 + lo.abs()) {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    [(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("three candidates")
}

fn horner(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn format_polynomial(c: &[f64]) -> String {
    let terms: Vec<String> = c
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| match i {
            0 => format!("{v}"),
            1 => format!("{v}*x"),
            _ => format!("{v}*x^{i}"),
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

#[derive(Debug, Clone)]
enum MeanRepr {
    Polynomial(Vec<f64>),
    /// Values on a uniform grid over `span`, evaluated piecewise linearly.
    Tabulated { span: Interval, values: Vec<f64> },
}

/// The conditional mean `m(x) = E(Y | X = x)`.
#[derive(Debug, Clone)]
pub struct MeanFunction {
    repr: MeanRepr,
    pub description: String,
}

impl MeanFunction {
    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        let description = format!("m(x) = {}", format_polynomial(&coefficients));
        MeanFunction { repr: MeanRepr::Polynomial(coefficients), description }
    }

    /// Tabulate an arbitrary function on a 4096-point grid over `span`.
    pub fn tabulate<F: Fn(f64) -> f64>(description: impl Into<String>, span: Interval, f: F) -> Self {
        let values = span.grid(MEAN_TABLE_POINTS).map(f).collect();
        MeanFunction { repr: MeanRepr::Tabulated { span, values }, description: description.into() }
    }

    pub fn coefficients(&self) -> Option<&[f64]> {
        match &self.repr {
            MeanRepr::Polynomial(c) => Some(c),
            MeanRepr::Tabulated { .. } => None,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.repr {
            MeanRepr::Polynomial(c) => horner(c, x),
            MeanRepr::Tabulated { span, values } => {
                let n = values.len();
                let t = ((x - span.lo) / span.len() * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
                let i = (t.floor() as usize).min(n - 2);
                let frac = t - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        }
    }

    /// Abscissas where the function is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.repr {
            MeanRepr::Polynomial(_) => Vec::new(),
            MeanRepr::Tabulated { span, values } => span.grid(values.len()).collect(),
        }
    }
}

/// Coefficients of a linear approximation in the context's basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    pub beta: Vec<f64>,
}

impl CoefficientVector {
    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    /// `x β`
    pub fn eval(&self, ctx: &BasisContext, x: f64) -> f64 {
        let mut buf = [0.0; MAX_BASIS_SIZE];
        let feat = &mut buf[..ctx.size()];
        ctx.features(x, feat);
        feat.iter().zip(&self.beta).map(|(a, b)| a * b).sum()
    }
}

/// `β = Q^{-1} ∫ x m(x) λ(x) dx`
pub fn best_linear_coefficients(m: &MeanFunction, ctx: &BasisContext) -> CoefficientVector {
    let breaks = ctx.breaks_with(&m.breakpoints());
    let mom = ctx.moments(&breaks, |x| m.eval(x));
    let beta = linalg::spd_solve(ctx.q(), &mom).expect("Q is positive definite");
    CoefficientVector { beta }
}

/// Limit of ordinary least squares when predictors are drawn from `design`:
/// `β_π = Q_π^{-1} ∫ x m(x) π(x) dx` with `Q_π = ∫ x^T x π(x) dx`.
pub fn best_linear_coefficients_under_design(
    m: &MeanFunction,
    design: &DesignDensity,
    ctx: &BasisContext,
) -> Result<CoefficientVector> {
    let k = ctx.size();
    let breaks = merge_breaks(&design.breakpoints(), &m.breakpoints());
    let mut qp = DMatrix::zeros(k, k);
    let mut mom = vec![0.0; k];
    let mut packed = vec![0.0; k * k + k];
    let mut feat = vec![0.0; k];
    ctx.integrate_vec_segments(&breaks, &mut packed, |x, buf| {
        ctx.features(x, &mut feat);
        let p = design.pdf(x);
        let mx = m.eval(x);
        for i in 0..k {
            for j in 0..k {
                buf[i * k + j] = feat[i] * feat[j] * p;
            }
            buf[k * k + i] = feat[i] * mx * p;
        }
    });
    for i in 0..k {
        for j in 0..k {
            qp[(i, j)] = packed[i * k + j];
        }
        mom[i] = packed[k * k + i];
    }
    let beta = linalg::spd_solve(&qp, &mom)
        .ok_or_else(|| Error::DegenerateDesign("design moment matrix is singular".into()))?;
    Ok(CoefficientVector { beta })
}

/// `½ ∫ (m - ℓ)^2 dx`, unweighted, over the support.
pub fn deviation_norm(m: &MeanFunction, ctx: &BasisContext) -> f64 {
    let ell = best_linear_coefficients(m, ctx);
    let breaks = ctx.breaks_with(&m.breakpoints());
    0.5 * ctx.integrate_segments(&breaks, |x| {
        let r = m.eval(x) - ell.eval(ctx, x);
        r * r
    })
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub coefficient: f64,
    pub mean: MeanFunction,
}

/// Choose `c` in `m(x) = base(x) + c x^leading_degree` so that
/// `deviation_norm(m) = target`, taking the nonnegative root.
pub fn calibrate_leading_coefficient(
    base: &[f64],
    leading_degree: usize,
    ctx: &BasisContext,
    target: f64,
) -> Result<Calibration> {
    if !(target >= 0.0) {
        return Err(Error::CalibrationImpossible(format!("target {target} must be nonnegative")));
    }
    let mut lead = vec![0.0; leading_degree + 1];
    lead[leading_degree] = 1.0;
    let (m0, m1) = (MeanFunction::polynomial(base.to_vec()), MeanFunction::polynomial(lead));
    let r0 = residual_fn(&m0, ctx);
    let r1 = residual_fn(&m1, ctx);
    let (lo, hi) = (ctx.support().lo, ctx.support().hi);
    let a = 0.5 * ctx.integrate(lo, hi, |x| r1(x) * r1(x));
    let b = 0.5 * ctx.integrate(lo, hi, |x| r0(x) * r1(x));
    let r = 0.5 * ctx.integrate(lo, hi, |x| r0(x) * r0(x));
    if a <= 1e-14 {
        return Err(Error::CalibrationImpossible(format!(
            "x^{leading_degree} lies in the span of the basis"
        )));
    }
    let mut disc = b * b - a * (r - target);
    let slack = 1e-13 * a * (1.0 + target + r.abs());
    if disc < 0.0 && disc > -slack {
        disc = 0.0;
    }
    if disc < 0.0 {
        return Err(Error::CalibrationImpossible(format!(
            "minimum attainable deviation {} exceeds target {target}",
            r - b * b / a
        )));
    }
    let mut c = (-b + disc.sqrt()) / a;
    if c < 0.0 && c > -1e-12 {
        c = 0.0;
    }
    if c < 0.0 {
        return Err(Error::CalibrationImpossible("no nonnegative coefficient attains the target".into()));
    }
    let mut coefficients = base.to_vec();
    coefficients.resize(coefficients.len().max(leading_degree + 1), 0.0);
    coefficients[leading_degree] += c;
    Ok(Calibration { coefficient: c, mean: MeanFunction::polynomial(coefficients) })
}

fn residual_fn<'a>(m: &'a MeanFunction, ctx: &'a BasisContext) -> impl Fn(f64) -> f64 + 'a {
    let ell = best_linear_coefficients(m, ctx);
    move |x| m.eval(x) - ell.eval(ctx, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_moment_matrix() {
        let ctx = BasisContext::monomial(1).unwrap();
        assert_abs_diff_eq!(ctx.q()[(0, 0)], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ctx.q()[(0, 1)], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ctx.q()[(1, 1)], 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn quadratic_moment_matrix() {
        let ctx = BasisContext::monomial(2).unwrap();
        let want = [[1.0, 0.0, 1.0 / 3.0], [0.0, 1.0 / 3.0, 0.0], [1.0 / 3.0, 0.0, 0.2]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(ctx.q()[(i, j)], want[i][j], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn even_moment_formula() {
        let ctx = BasisContext::monomial(5).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if (i + j) % 2 == 1 { 0.0 } else { 1.0 / (i + j + 1) as f64 };
                assert_abs_diff_eq!(ctx.q()[(i, j)], want, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn duplicated_basis_function_is_degenerate() {
        let kind = BasisKind::Functions(vec![
            BasisFunction::polynomial(vec![1.0]),
            BasisFunction::polynomial(vec![0.0, 1.0]),
            BasisFunction::polynomial(vec![0.0, 1.0]),
        ]);
        let err = BasisContext::new(kind, Interval::default(), Weight::Uniform, 512).unwrap_err();
        assert!(matches!(err, Error::DegenerateBasis(_)), "{err}");
    }

    #[test]
    fn nonpositive_weight_rejected() {
        let w = Weight::Custom(ScalarFn::new(|x| 0.75 * (1.0 - x * x)));
        let err = BasisContext::new(BasisKind::Monomial { degree: 1 }, Interval::default(), w, 512).unwrap_err();
        assert!(matches!(err, Error::InvalidWeight(_)));
    }

    #[test]
    fn unnormalized_weight_rejected() {
        let w = Weight::Custom(ScalarFn::new(|_| 1.0));
        let err = BasisContext::new(BasisKind::Monomial { degree: 1 }, Interval::default(), w, 512).unwrap_err();
        assert!(matches!(err, Error::InvalidWeight(_)));
    }

    #[test]
    fn linear_leverage() {
        let ctx = BasisContext::monomial(1).unwrap();
        for x in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert_abs_diff_eq!(ctx.evaluate_h(x).unwrap(), 1.0 + 3.0 * x * x, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(ctx.h_min(), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(ctx.h_max(), 4.0, epsilon = 1e-13);
        assert!(matches!(ctx.evaluate_h(1.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn quadratic_leverage_minima() {
        let ctx = BasisContext::monomial(2).unwrap();
        assert_abs_diff_eq!(ctx.evaluate_h(0.0).unwrap(), 2.25, epsilon = 1e-12);
        // brute force over a fine grid
        let (mut best, mut arg) = (f64::INFINITY, 0.0);
        for i in 0..=200_000 {
            let x = -1.0 + 2.0 * i as f64 / 200_000.0;
            let v = ctx.h(x);
            if v < best {
                best = v;
                arg = x;
            }
        }
        assert_abs_diff_eq!(best, 1.8, epsilon = 1e-8);
        assert_abs_diff_eq!(arg.abs(), 1.0 / 5f64.sqrt(), epsilon = 1e-4);
        assert_abs_diff_eq!(ctx.h_min(), 1.8, epsilon = 1e-12);
    }

    #[test]
    fn projection_of_quadratic() {
        let ctx = BasisContext::monomial(1).unwrap();
        let m = MeanFunction::polynomial(vec![0.0, 1.0, 3.354]);
        let beta = best_linear_coefficients(&m, &ctx);
        assert_abs_diff_eq!(beta.beta[0], 3.354 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(beta.beta[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(beta.beta[0], 1.118, epsilon = 1e-12);
    }

    #[test]
    fn projection_of_cubic() {
        let ctx = BasisContext::monomial(2).unwrap();
        let m = MeanFunction::polynomial(vec![0.0, 1.0, 0.5, 6.614]);
        let beta = best_linear_coefficients(&m, &ctx);
        assert_abs_diff_eq!(beta.beta[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(beta.beta[1], 4.9684, epsilon = 1e-12);
        assert_abs_diff_eq!(beta.beta[2], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn linear_mean_is_reproduced() {
        for degree in 1..4 {
            let ctx = BasisContext::monomial(degree).unwrap();
            let beta = best_linear_coefficients(&MeanFunction::polynomial(vec![0.3, -1.2]), &ctx);
            assert_abs_diff_eq!(beta.beta[0], 0.3, epsilon = 1e-12);
            assert_abs_diff_eq!(beta.beta[1], -1.2, epsilon = 1e-12);
            for b in &beta.beta[2..] {
                assert_abs_diff_eq!(*b, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn deviation_of_table_means() {
        let ctx1 = BasisContext::monomial(1).unwrap();
        let d1 = deviation_norm(&MeanFunction::polynomial(vec![0.0, 1.0, 3.354]), &ctx1);
        assert_abs_diff_eq!(d1, 1.0, epsilon = 1e-3);
        let ctx2 = BasisContext::monomial(2).unwrap();
        let d2 = deviation_norm(&MeanFunction::polynomial(vec![0.0, 1.0, 0.5, 6.614]), &ctx2);
        assert_abs_diff_eq!(d2, 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(deviation_norm(&MeanFunction::polynomial(vec![1.0, 2.0]), &ctx1), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn calibration_matches_closed_forms() {
        let ctx1 = BasisContext::monomial(1).unwrap();
        let c1 = calibrate_leading_coefficient(&[0.0, 1.0], 2, &ctx1, 1.0).unwrap();
        assert_abs_diff_eq!(c1.coefficient, (45.0f64 / 4.0).sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(c1.coefficient, 3.354, epsilon = 5e-4);

        let ctx2 = BasisContext::monomial(2).unwrap();
        let c2 = calibrate_leading_coefficient(&[0.0, 1.0, 0.5], 3, &ctx2, 1.0).unwrap();
        assert_abs_diff_eq!(c2.coefficient * c2.coefficient, 43.75, epsilon = 1e-9);
        assert_abs_diff_eq!(c2.coefficient, 6.614, epsilon = 5e-4);
        assert_abs_diff_eq!(deviation_norm(&c2.mean, &ctx2), 1.0, epsilon = 1e-12);

        let zero = calibrate_leading_coefficient(&[0.0, 1.0], 2, &ctx1, 0.0).unwrap();
        assert_abs_diff_eq!(zero.coefficient, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn calibration_in_span_fails() {
        let ctx = BasisContext::monomial(2).unwrap();
        let err = calibrate_leading_coefficient(&[0.0, 1.0], 2, &ctx, 1.0).unwrap_err();
        assert!(matches!(err, Error::CalibrationImpossible(_)));
    }

    #[test]
    fn truncated_normal_weight_context() {
        let w = Weight::TruncatedNormal { mean: 0.5, variance: 0.25 };
        let ctx = BasisContext::new(BasisKind::Monomial { degree: 1 }, Interval::default(), w, 512).unwrap();
        // trace identity in its general form: ∫ x^T Q^{-1} x λ dx = k
        let tr = ctx.integrate(-1.0, 1.0, |x| ctx.h(x) / (4.0 * ctx.weight_at(x)));
        assert_abs_diff_eq!(tr, 2.0, epsilon = 1e-10);
        // no longer the uniform leverage
        assert!((ctx.h(0.0) - 1.0).abs() > 1e-3);
    }

    #[test]
    fn tabulated_mean_tracks_polynomial() {
        let ctx = BasisContext::monomial(1).unwrap();
        let poly = MeanFunction::polynomial(vec![0.25, 0.5, 0.25]);
        let tab = MeanFunction::tabulate("tab", Interval::default(), |x| poly.eval(x));
        let a = best_linear_coefficients(&poly, &ctx);
        let b = best_linear_coefficients(&tab, &ctx);
        for (x, y) in a.beta.iter().zip(&b.beta) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-7);
        }
    }
}
