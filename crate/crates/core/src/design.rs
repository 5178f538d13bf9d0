//! Design densities on the support: the minimax-optimal design built from
//! level sets of `h`, and the uniform, proportional-to-`h` and `√h` baselines.
//!
//! The minimax design for noise level `σ²` is
//!
//! ```text
//! π*(x) = c √(h0* h(x))   where h(x) <= h0*   (the set A)
//!         c h(x)          where h(x) >  h0*   (the set B)
//! ```
//!
//! with `h0*` the root of `f(h0) = -2/σ²`, where
//! `f(h0) = ∫_B (h0 - h(x)) dx / h0` is nondecreasing on `[h_min, h_max]`.
//! Below the critical level `σ²_min = -2/f(h_min)` the design is `h/∫h`;
//! as `σ² → ∞` the set `A` grows to the whole support and `π* ∝ √h`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::basis::{merge_breaks, BasisContext, Interval, SCAN_GRID};
use crate::error::{Error, Result};

/// Points in the tabulated CDF.
pub const CDF_TABLE_POINTS: usize = 8192;
/// Relative jump allowed at level-set boundaries of the minimax design.
pub const CONTINUITY_TOL: f64 = 1e-6;
/// Allowed error of the total mass.
pub const MASS_TOL: f64 = 1e-8;

const ROOT_X_TOL: f64 = 1e-15;
const THRESHOLD_TOL: f64 = 1e-12;
const MIN_SEGMENT: f64 = 1e-12;

/// Noise-to-deviation ratio `σ²`, with infinity as an explicit regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma2 {
    Finite(f64),
    Infinite,
}

impl Sigma2 {
    pub fn value(self) -> f64 {
        match self {
            Sigma2::Finite(v) => v,
            Sigma2::Infinite => f64::INFINITY,
        }
    }
}

impl From<f64> for Sigma2 {
    fn from(v: f64) -> Self {
        if v.is_infinite() && v > 0.0 {
            Sigma2::Infinite
        } else {
            Sigma2::Finite(v)
        }
    }
}

impl fmt::Display for Sigma2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma2::Finite(v) => fmt::Display::fmt(v, f),
            Sigma2::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Sigma2 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" | "∞" => Ok(Sigma2::Infinite),
            _ => {
                let v: f64 = t.parse().map_err(|_| Error::Usage(format!("bad sigma2 value '{s}'")))?;
                if v.is_nan() || v < 0.0 {
                    return Err(Error::Usage(format!("sigma2 must be nonnegative, got {s}")));
                }
                Ok(Sigma2::from(v))
            }
        }
    }
}

/// The sets `A = {h <= h0}` and `B = {h > h0}` as interval lists.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetPartition {
    pub h0: f64,
    pub a: Vec<Interval>,
    pub b: Vec<Interval>,
    pub boundary_points: Vec<f64>,
}

impl LevelSetPartition {
    pub fn measure_a(&self) -> f64 {
        self.a.iter().map(Interval::len).sum()
    }

    pub fn measure_b(&self) -> f64 {
        self.b.iter().map(Interval::len).sum()
    }
}

fn check_threshold(ctx: &BasisContext, h0: f64) -> Result<f64> {
    let (lo, hi) = (ctx.h_min(), ctx.h_max());
    let slack = 1e-12 * hi.abs().max(1.0);
    if !(h0 >= lo - slack && h0 <= hi + slack) {
        return Err(Error::Range { h0, h_min: lo, h_max: hi });
    }
    Ok(h0.clamp(lo, hi))
}

pub fn level_partition(ctx: &BasisContext, h0: f64) -> Result<LevelSetPartition> {
    let h0 = check_threshold(ctx, h0)?;
    let support = ctx.support();
    let grid: Vec<f64> = support.grid(SCAN_GRID).collect();
    let above: Vec<bool> = grid.iter().map(|&x| ctx.h(x) > h0).collect();

    let mut breaks = vec![support.lo];
    for i in 0..grid.len() - 1 {
        if above[i] != above[i + 1] {
            let (mut lo, mut hi) = (grid[i], grid[i + 1]);
            let left_above = above[i];
            for _ in 0..200 {
                if hi - lo <= ROOT_X_TOL * (1.0 + lo.abs()) {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if (ctx.h(mid) > h0) == left_above {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            breaks.push(0.5 * (lo + hi));
        }
    }
    breaks.push(support.hi);

    // classify segments, dropping zero-length ones from tangencies
    let mut segments: Vec<(Interval, bool)> = Vec::new();
    for w in breaks.windows(2) {
        let iv = Interval::new(w[0], w[1]);
        if iv.len() <= MIN_SEGMENT {
            continue;
        }
        // a grid node strictly inside the segment avoids tangent midpoints
        let step = support.len() / (SCAN_GRID - 1) as f64;
        let idx = ((iv.midpoint() - support.lo) / step).round() as usize;
        let in_a = match grid.get(idx) {
            Some(&g) if g > iv.lo && g < iv.hi => !above[idx],
            _ => ctx.h(iv.midpoint()) <= h0,
        };
        match segments.last_mut() {
            Some((last, flag)) if *flag == in_a => last.hi = iv.hi,
            _ => segments.push((iv, in_a)),
        }
    }
    if let Some(first) = segments.first_mut() {
        first.0.lo = support.lo;
    }
    if let Some(last) = segments.last_mut() {
        last.0.hi = support.hi;
    }
    for i in 1..segments.len() {
        segments[i].0.lo = segments[i - 1].0.hi;
    }
    let boundary_points = segments.iter().skip(1).map(|(iv, _)| iv.lo).collect();
    let a = segments.iter().filter(|s| s.1).map(|s| s.0).collect();
    let b = segments.iter().filter(|s| !s.1).map(|s| s.0).collect();
    Ok(LevelSetPartition { h0, a, b, boundary_points })
}

fn f_of_partition(ctx: &BasisContext, p: &LevelSetPartition) -> f64 {
    let h0 = p.h0;
    p.b.iter().map(|iv| ctx.integrate(iv.lo, iv.hi, |x| h0 - ctx.h(x))).sum::<f64>() / h0
}

/// `f(h0) = ∫_B (h0 - h) dx / h0`; always <= 0.
pub fn f_value(ctx: &BasisContext, h0: f64) -> Result<f64> {
    let p = level_partition(ctx, h0)?;
    Ok(f_of_partition(ctx, &p))
}

/// Critical noise level `-2/f(h_min)` below which the optimal design is `∝ h`.
///
/// Infinite when `h` is constant.
pub fn sigma2_min(ctx: &BasisContext) -> f64 {
    let f = f_value(ctx, ctx.h_min()).expect("h_min is in range");
    if f < 0.0 {
        -2.0 / f
    } else {
        f64::INFINITY
    }
}

/// `2 / (∫h dx / h_min - |support|)`, the closed form of [`sigma2_min`].
pub fn sigma2_min_closed_form(ctx: &BasisContext) -> f64 {
    let s = ctx.support();
    let int_h = ctx.integrate(s.lo, s.hi, |x| ctx.h(x));
    let denom = int_h / ctx.h_min() - s.len();
    if denom > 0.0 {
        2.0 / denom
    } else {
        f64::INFINITY
    }
}

/// The `σ²` whose optimal threshold is `h0`, i.e. `-2/f(h0)`.
pub fn implied_sigma2(ctx: &BasisContext, h0: f64) -> Result<Sigma2> {
    let f = f_value(ctx, h0)?;
    Ok(if f < 0.0 { Sigma2::Finite(-2.0 / f) } else { Sigma2::Infinite })
}

/// Optimal threshold `h0*` for the given `σ²`.
pub fn solve_threshold(ctx: &BasisContext, sigma2: Sigma2) -> Result<f64> {
    let s = match sigma2 {
        Sigma2::Infinite => return Ok(ctx.h_max()),
        Sigma2::Finite(s) if s.is_nan() || s < 0.0 => {
            return Err(Error::Usage(format!("sigma2 must be nonnegative, got {s}")))
        }
        Sigma2::Finite(s) => s,
    };
    if s <= sigma2_min(ctx) {
        return Ok(ctx.h_min());
    }
    let target = -2.0 / s;
    let (mut lo, mut hi) = (ctx.h_min(), ctx.h_max());
    while hi - lo > THRESHOLD_TOL {
        let mid = 0.5 * (lo + hi);
        if f_value(ctx, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesignFamily {
    Uniform,
    PropH,
    SqrtH,
    Minimax(Sigma2),
    CustomTable,
}

impl DesignFamily {
    /// Parse a family name; `minimax` requires `sigma2`.
    pub fn parse(name: &str, sigma2: Option<Sigma2>) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(DesignFamily::Uniform),
            "prop-h" | "proph" | "h" => Ok(DesignFamily::PropH),
            "sqrt-h" | "sqrt" | "sqrth" => Ok(DesignFamily::SqrtH),
            "minimax" => sigma2
                .map(DesignFamily::Minimax)
                .ok_or_else(|| Error::Usage("minimax family needs sigma2".into())),
            "custom-table" | "custom" => Ok(DesignFamily::CustomTable),
            other => Err(Error::Usage(format!("unknown design family '{other}'"))),
        }
    }
}

impl fmt::Display for DesignFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignFamily::Uniform => f.write_str("uniform"),
            DesignFamily::PropH => f.write_str("prop-h"),
            DesignFamily::SqrtH => f.write_str("sqrt-h"),
            DesignFamily::Minimax(s) => write!(f, "minimax({s})"),
            DesignFamily::CustomTable => f.write_str("custom-table"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PieceForm {
    /// `c`
    Constant,
    /// `c h(x)`
    Leverage,
    /// `c √(h0 h(x))`
    RootLeverage { h0: f64 },
    /// Linear interpolation of the design's table.
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignPiece {
    pub interval: Interval,
    pub form: PieceForm,
}

#[derive(Debug, Clone)]
struct Tabulated {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Tabulated {
    fn eval(&self, x: f64) -> f64 {
        let i = self.xs.partition_point(|&t| t <= x).clamp(1, self.xs.len() - 1) - 1;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let t = (x - x0) / (x1 - x0);
        self.ys[i] * (1.0 - t) + self.ys[i + 1] * t
    }
}

/// A normalized, strictly positive density on the support with a tabulated CDF.
#[derive(Debug, Clone)]
pub struct DesignDensity {
    family: DesignFamily,
    label: String,
    ctx: BasisContext,
    pieces: Vec<DesignPiece>,
    c: f64,
    table: Option<Tabulated>,
    cdf_x: Vec<f64>,
    cdf_f: Vec<f64>,
    h0: Option<f64>,
    partition: Option<LevelSetPartition>,
}

/// Build a design of the given family.
pub fn build_design(ctx: &BasisContext, family: DesignFamily) -> Result<DesignDensity> {
    let support = ctx.support();
    let whole = |form| vec![DesignPiece { interval: support, form }];
    let int = |f: &dyn Fn(f64) -> f64, iv: &Interval| ctx.integrate(iv.lo, iv.hi, f);
    let sqrt_h = |x: f64| ctx.h(x).sqrt();
    let h = |x: f64| ctx.h(x);

    let (pieces, mass, h0, partition) = match family {
        DesignFamily::Uniform => (whole(PieceForm::Constant), support.len(), None, None),
        DesignFamily::PropH => (whole(PieceForm::Leverage), int(&h, &support), None, None),
        DesignFamily::SqrtH => {
            (whole(PieceForm::RootLeverage { h0: 1.0 }), int(&sqrt_h, &support), None, None)
        }
        DesignFamily::Minimax(sigma2) => {
            let h0 = solve_threshold(ctx, sigma2)?;
            if h0 <= ctx.h_min() {
                let p = LevelSetPartition { h0, a: Vec::new(), b: vec![support], boundary_points: Vec::new() };
                (whole(PieceForm::Leverage), int(&h, &support), Some(h0), Some(p))
            } else {
                let p = level_partition(ctx, h0)?;
                let mut pieces: Vec<DesignPiece> = p
                    .a
                    .iter()
                    .map(|&interval| DesignPiece { interval, form: PieceForm::RootLeverage { h0 } })
                    .chain(p.b.iter().map(|&interval| DesignPiece { interval, form: PieceForm::Leverage }))
                    .collect();
                pieces.sort_by(|x, y| x.interval.lo.total_cmp(&y.interval.lo));
                let mass = h0.sqrt() * p.a.iter().map(|iv| int(&sqrt_h, iv)).sum::<f64>()
                    + p.b.iter().map(|iv| int(&h, iv)).sum::<f64>();
                (pieces, mass, Some(h0), Some(p))
            }
        }
        DesignFamily::CustomTable => {
            return Err(Error::Usage("custom-table designs are built from a table".into()))
        }
    };
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Internal(format!("normalization failed: mass {mass}")));
    }
    let label = family.to_string();
    DesignDensity::assemble(ctx, family, label, pieces, 1.0 / mass, None, h0, partition)
}

impl DesignDensity {
    /// A piecewise-linear design from a table of `(x, density)` values.
    ///
    /// The table must span the support; it is rescaled to unit mass.
    pub fn from_table(ctx: &BasisContext, label: impl Into<String>, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let support = ctx.support();
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::Usage("design table needs at least two (x, density) rows".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Usage("design table abscissas must be strictly increasing".into()));
        }
        let tol = 1e-9 * support.len();
        if (xs[0] - support.lo).abs() > tol || (xs[xs.len() - 1] - support.hi).abs() > tol {
            return Err(Error::Usage(format!("design table must span the support {support}")));
        }
        if let Some((x, y)) = xs.iter().zip(&ys).find(|(_, y)| !(**y > 0.0 && y.is_finite())) {
            return Err(Error::DegenerateDesign(format!("density {y} at x = {x} is not positive")));
        }
        let mut xs = xs;
        let n = xs.len();
        xs[0] = support.lo;
        xs[n - 1] = support.hi;
        let mass: f64 = xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum();
        let ys = ys.into_iter().map(|y| y / mass).collect();
        let table = Tabulated { xs, ys };
        let pieces = vec![DesignPiece { interval: support, form: PieceForm::Table }];
        Self::assemble(ctx, DesignFamily::CustomTable, label.into(), pieces, 1.0, Some(table), None, None)
    }

    /// Tabulate a density function on `points` evenly spaced abscissas.
    pub fn from_fn<F: Fn(f64) -> f64>(
        ctx: &BasisContext,
        label: impl Into<String>,
        points: usize,
        f: F,
    ) -> Result<Self> {
        let xs: Vec<f64> = ctx.support().grid(points.max(2)).collect();
        let ys = xs.iter().map(|&x| f(x)).collect();
        Self::from_table(ctx, label, xs, ys)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        ctx: &BasisContext,
        family: DesignFamily,
        label: String,
        pieces: Vec<DesignPiece>,
        c: f64,
        table: Option<Tabulated>,
        h0: Option<f64>,
        partition: Option<LevelSetPartition>,
    ) -> Result<Self> {
        let support = ctx.support();
        let mut design = DesignDensity {
            family,
            label,
            ctx: ctx.clone(),
            pieces,
            c,
            table,
            cdf_x: Vec::new(),
            cdf_f: Vec::new(),
            h0,
            partition,
        };

        let mass = design.total_mass();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Internal(format!("design mass {mass} differs from 1")));
        }
        for x in support.grid(SCAN_GRID) {
            let p = design.pdf(x);
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::DegenerateDesign(format!("density {p} at x = {x} is not positive")));
            }
        }
        if let Some(h0) = design.h0 {
            for &xb in design.boundary_points() {
                let h = ctx.h(xb);
                let root = (h0 * h).sqrt();
                if (root - h).abs() > CONTINUITY_TOL * h {
                    return Err(Error::Internal(format!("density jumps at boundary {xb}: {root} vs {h}")));
                }
            }
        }

        let xs: Vec<f64> = support.grid(CDF_TABLE_POINTS).collect();
        let mut fs = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        let mut prev = design.pdf(xs[0]);
        fs.push(0.0);
        for w in xs.windows(2) {
            let next = design.pdf(w[1]);
            acc += 0.5 * (w[1] - w[0]) * (prev + next);
            fs.push(acc);
            prev = next;
        }
        for f in fs.iter_mut() {
            *f /= acc;
        }
        let last = fs.len() - 1;
        fs[last] = 1.0;
        design.cdf_x = xs;
        design.cdf_f = fs;
        Ok(design)
    }

    pub fn family(&self) -> DesignFamily {
        self.family
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn context(&self) -> &BasisContext {
        &self.ctx
    }

    pub fn support(&self) -> Interval {
        self.ctx.support()
    }

    pub fn pieces(&self) -> &[DesignPiece] {
        &self.pieces
    }

    /// Normalizing constant `c`.
    pub fn normalizer(&self) -> f64 {
        self.c
    }

    pub fn sigma2_used(&self) -> Option<Sigma2> {
        match self.family {
            DesignFamily::Minimax(s) => Some(s),
            _ => None,
        }
    }

    /// Threshold `h0*` of a minimax design.
    pub fn h0(&self) -> Option<f64> {
        self.h0
    }

    pub fn partition(&self) -> Option<&LevelSetPartition> {
        self.partition.as_ref()
    }

    pub fn boundary_points(&self) -> &[f64] {
        self.partition.as_ref().map(|p| p.boundary_points.as_slice()).unwrap_or(&[])
    }

    /// The intervals on which the density is `∝ √h`.
    pub fn sqrt_region(&self) -> Vec<Interval> {
        self.pieces
            .iter()
            .filter(|p| matches!(p.form, PieceForm::RootLeverage { .. }))
            .map(|p| p.interval)
            .collect()
    }

    /// The functional form actually realized, e.g. `prop-h` for a minimax
    /// design below the critical noise level.
    pub fn shape(&self) -> &'static str {
        let leverage = self.pieces.iter().any(|p| p.form == PieceForm::Leverage);
        let root = self.pieces.iter().any(|p| matches!(p.form, PieceForm::RootLeverage { .. }));
        match (self.family, leverage, root) {
            (DesignFamily::Uniform, ..) => "uniform",
            (DesignFamily::CustomTable, ..) => "custom-table",
            (_, true, false) => "prop-h",
            (_, false, true) => "sqrt-h",
            _ => "minimax",
        }
    }

    /// Sorted abscissas where the density may fail to be smooth, including the support ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        let s = self.support();
        match &self.table {
            Some(t) => t.xs.clone(),
            None => {
                let inner: Vec<f64> = self.pieces.iter().skip(1).map(|p| p.interval.lo).collect();
                merge_breaks(&[s.lo, s.hi], &inner)
            }
        }
    }

    fn total_mass(&self) -> f64 {
        if let Some(t) = &self.table {
            return t.xs.windows(2).zip(t.ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum();
        }
        self.pieces
            .iter()
            .map(|p| self.ctx.integrate(p.interval.lo, p.interval.hi, |x| self.eval_form(p.form, x)))
            .sum()
    }

    #[inline]
    fn eval_form(&self, form: PieceForm, x: f64) -> f64 {
        match form {
            PieceForm::Constant => self.c,
            PieceForm::Leverage => self.c * self.ctx.h(x),
            PieceForm::RootLeverage { h0 } => self.c * (h0 * self.ctx.h(x)).sqrt(),
            PieceForm::Table => self.table.as_ref().expect("table piece has a table").eval(x),
        }
    }

    /// Density at `x` without the domain check.
    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        let i = if self.pieces.len() == 1 {
            0
        } else {
            self.pieces.partition_point(|p| p.interval.hi < x).min(self.pieces.len() - 1)
        };
        self.eval_form(self.pieces[i].form, x)
    }

    pub fn density_at(&self, x: f64) -> Result<f64> {
        self.ctx.check_domain(x)?;
        Ok(self.pdf(x))
    }

    pub fn cdf_at(&self, x: f64) -> Result<f64> {
        self.ctx.check_domain(x)?;
        let s = self.support();
        if self.family == DesignFamily::Uniform {
            return Ok((x - s.lo) / s.len());
        }
        let xs = &self.cdf_x;
        let i = self.cdf_index(x);
        let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
        Ok(self.cdf_f[i] * (1.0 - t) + self.cdf_f[i + 1] * t)
    }

    #[inline]
    fn cdf_index(&self, x: f64) -> usize {
        let s = self.support();
        let n = self.cdf_x.len();
        let t = (x - s.lo) / s.len() * (n - 1) as f64;
        let mut i = (t.floor().max(0.0) as usize).min(n - 2);
        // grid rounding
        while i > 0 && self.cdf_x[i] > x {
            i -= 1;
        }
        while i < n - 2 && self.cdf_x[i + 1] < x {
            i += 1;
        }
        i
    }

    /// Inverse CDF without the range check.
    #[inline]
    pub fn quantile_unchecked(&self, u: f64) -> f64 {
        let s = self.support();
        if self.family == DesignFamily::Uniform {
            return s.lo + u * s.len();
        }
        let f = &self.cdf_f;
        let i = f.partition_point(|&v| v <= u).clamp(1, f.len() - 1) - 1;
        let span = f[i + 1] - f[i];
        let t = if span > 0.0 { (u - f[i]) / span } else { 0.0 };
        (self.cdf_x[i] + t * (self.cdf_x[i + 1] - self.cdf_x[i])).clamp(s.lo, s.hi)
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain { value: u, lo: 0.0, hi: 1.0 });
        }
        Ok(self.quantile_unchecked(u))
    }

    /// The tabulated CDF as `(x, F(x))` pairs.
    pub fn cdf_table(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.cdf_x.iter().copied().zip(self.cdf_f.iter().copied())
    }

    pub fn descriptor(&self) -> DesignDescriptor {
        DesignDescriptor {
            family: self.shape().to_string(),
            requested: self.family.to_string(),
            sigma2: self.sigma2_used(),
            sigma2_min: sigma2_min(&self.ctx),
            h0: self.h0,
            normalizer: self.c,
            boundary_points: self.boundary_points().to_vec(),
            sqrt_region: self.sqrt_region(),
            notes: Vec::new(),
        }
    }

    /// Write `x,density,cdf` rows on the CDF grid, preceded by `#` metadata lines.
    pub fn write_csv<W: Write>(&self, mut w: W, metadata: &[(String, String)]) -> Result<()> {
        for (k, v) in metadata {
            writeln!(w, "# {k} = {v}")?;
        }
        writeln!(w, "# design = {}", self.label)?;
        writeln!(w, "x,density,cdf")?;
        for (x, f) in self.cdf_table() {
            writeln!(w, "{x},{},{f}", self.pdf(x))?;
        }
        Ok(())
    }

    /// Read a design CSV (`x,density[,cdf]`, `#` comments allowed) as a custom table.
    pub fn read_csv<R: BufRead>(ctx: &BasisContext, label: impl Into<String>, r: R) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut header_seen = false;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                header_seen = true;
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols.len() < 2 || cols[0] != "x" || cols[1] != "density" {
                    return Err(Error::Config(format!("design CSV header must start with x,density; got '{line}'")));
                }
                continue;
            }
            let mut parts = line.split(',');
            let mut next = |what: &str| -> Result<f64> {
                parts
                    .next()
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Config(format!("line {}: bad {what}", lineno + 1)))
            };
            xs.push(next("x")?);
            ys.push(next("density")?);
        }
        Self::from_table(ctx, label, xs, ys)
    }
}

/// Summary of a constructed design, serialized as `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignDescriptor {
    /// Realized shape: `uniform`, `prop-h`, `sqrt-h`, `minimax` or `custom-table`.
    pub family: String,
    pub requested: String,
    pub sigma2: Option<Sigma2>,
    pub sigma2_min: f64,
    pub h0: Option<f64>,
    pub normalizer: f64,
    pub boundary_points: Vec<f64>,
    /// The set `A` where the density is `∝ √h`.
    pub sqrt_region: Vec<Interval>,
    pub notes: Vec<String>,
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn fmt_intervals(v: &[Interval]) -> String {
    if v.is_empty() {
        return "empty".into();
    }
    v.iter().map(|iv| format!("[{},{}]", iv.lo, iv.hi)).collect::<Vec<_>>().join(" u ")
}

fn parse_intervals(s: &str) -> Result<Vec<Interval>> {
    if s.trim() == "empty" || s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(" u ")
        .map(|part| {
            let inner = part.trim().trim_start_matches('[').trim_end_matches(']');
            let mut it = inner.split(',').map(|t| t.trim().parse::<f64>());
            match (it.next(), it.next()) {
                (Some(Ok(lo)), Some(Ok(hi))) => Ok(Interval::new(lo, hi)),
                _ => Err(Error::Config(format!("bad interval '{part}'"))),
            }
        })
        .collect()
}

impl DesignDescriptor {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        out += &format!("family = {}\n", self.family);
        out += &format!("requested = {}\n", self.requested);
        out += &format!("sigma2 = {}\n", opt(self.sigma2.map(|s| s.to_string())));
        out += &format!("sigma2_min = {}\n", self.sigma2_min);
        out += &format!("h0 = {}\n", opt(self.h0.map(|v| v.to_string())));
        out += &format!("c = {}\n", self.normalizer);
        out += &format!("boundary_points = {}\n", fmt_list(&self.boundary_points));
        out += &format!("sqrt_region = {}\n", fmt_intervals(&self.sqrt_region));
        for n in &self.notes {
            out += &format!("note = {n}\n");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut d = DesignDescriptor {
            family: String::new(),
            requested: String::new(),
            sigma2: None,
            sigma2_min: f64::NAN,
            h0: None,
            normalizer: f64::NAN,
            boundary_points: Vec::new(),
            sqrt_region: Vec::new(),
            notes: Vec::new(),
        };
        let num = |k: &str, v: &str| -> Result<f64> {
            v.parse().map_err(|_| Error::Config(format!("bad number for {k}: '{v}'")))
        };
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key = value, got '{line}'")))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "family" => d.family = v.into(),
                "requested" => d.requested = v.into(),
                "sigma2" => d.sigma2 = if v == "none" { None } else { Some(v.parse()?) },
                "sigma2_min" => d.sigma2_min = num(k, v)?,
                "h0" => d.h0 = if v == "none" { None } else { Some(num(k, v)?) },
                "c" => d.normalizer = num(k, v)?,
                "boundary_points" => {
                    d.boundary_points = v.split_whitespace().map(|t| num(k, t)).collect::<Result<_>>()?
                }
                "sqrt_region" => d.sqrt_region = parse_intervals(v)?,
                "note" => d.notes.push(v.into()),
                other => return Err(Error::Config(format!("unknown descriptor key '{other}'"))),
            }
        }
        Ok(d)
    }

    /// Rebuild the design this descriptor was produced from.
    pub fn rebuild(&self, ctx: &BasisContext) -> Result<DesignDensity> {
        let name = self.requested.split('(').next().unwrap_or("");
        build_design(ctx, DesignFamily::parse(name, self.sigma2)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k1() -> BasisContext {
        BasisContext::monomial(1).unwrap()
    }

    fn k2() -> BasisContext {
        BasisContext::monomial(2).unwrap()
    }

    /// Closed form of f for h = 1 + 3x^2 at boundary x0.
    fn f_linear_closed(x0: f64) -> f64 {
        2.0 * (3.0 * x0 * x0 - 2.0 * x0.powi(3) - 1.0) / (1.0 + 3.0 * x0 * x0)
    }

    #[test]
    fn partition_linear_sigma2_two() {
        let ctx = k1();
        let p = level_partition(&ctx, 1.3975).unwrap();
        assert_eq!(p.a.len(), 1);
        assert_abs_diff_eq!(p.a[0].lo, -0.364, epsilon = 5e-4);
        assert_abs_diff_eq!(p.a[0].hi, 0.364, epsilon = 5e-4);
        assert_eq!(p.b.len(), 2);
        assert_abs_diff_eq!(p.measure_a() + p.measure_b(), 2.0, epsilon = 1e-15);
        for &x in &p.boundary_points {
            assert_abs_diff_eq!(ctx.h(x), 1.3975, epsilon = 1e-10);
        }
    }

    #[test]
    fn partition_at_maximum_is_whole_support() {
        let p = level_partition(&k1(), 4.0).unwrap();
        assert_eq!(p.a, vec![Interval::new(-1.0, 1.0)]);
        assert!(p.b.is_empty());
        assert!(p.boundary_points.is_empty());
    }

    #[test]
    fn partition_quadratic_two_intervals() {
        let ctx = k2();
        let p = level_partition(&ctx, 2.0355).unwrap();
        assert_eq!(p.a.len(), 2);
        assert_abs_diff_eq!(p.a[0].lo, -0.587, epsilon = 5e-4);
        assert_abs_diff_eq!(p.a[0].hi, -0.235, epsilon = 5e-4);
        assert_abs_diff_eq!(p.a[1].lo, 0.235, epsilon = 5e-4);
        assert_abs_diff_eq!(p.a[1].hi, 0.587, epsilon = 5e-4);
        assert_eq!(p.boundary_points.len(), 4);
    }

    #[test]
    fn out_of_range_threshold() {
        assert!(matches!(level_partition(&k1(), 0.5), Err(Error::Range { .. })));
        assert!(matches!(f_value(&k1(), 4.5), Err(Error::Range { .. })));
    }

    #[test]
    fn f_values_linear() {
        let ctx = k1();
        assert_abs_diff_eq!(f_value(&ctx, 4.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f_value(&ctx, 1.0).unwrap(), -2.0, epsilon = 1e-12);
        let x0 = ((1.3975f64 - 1.0) / 3.0).sqrt();
        assert_abs_diff_eq!(f_value(&ctx, 1.3975).unwrap(), f_linear_closed(x0), epsilon = 1e-12);
        assert_abs_diff_eq!(f_value(&ctx, 1.3975).unwrap(), -1.0, epsilon = 2e-3);
    }

    #[test]
    fn critical_levels() {
        assert_abs_diff_eq!(sigma2_min(&k1()), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sigma2_min(&k2()), 1.5, epsilon = 1e-9);
        assert_abs_diff_eq!(sigma2_min_closed_form(&k2()), 1.5, epsilon = 1e-9);
    }

    #[test]
    fn thresholds() {
        let ctx = k1();
        assert_eq!(solve_threshold(&ctx, Sigma2::Finite(1.0)).unwrap(), ctx.h_min());
        assert_eq!(solve_threshold(&ctx, Sigma2::Infinite).unwrap(), ctx.h_max());
        let h2 = solve_threshold(&ctx, Sigma2::Finite(2.0)).unwrap();
        let x2 = ((h2 - 1.0) / 3.0).sqrt();
        assert_abs_diff_eq!(x2, 0.364, epsilon = 5e-4);
        assert_abs_diff_eq!(f_linear_closed(x2), -1.0, epsilon = 1e-10);
        let h3 = solve_threshold(&ctx, Sigma2::Finite(3.0)).unwrap();
        let x3 = ((h3 - 1.0) / 3.0).sqrt();
        assert_abs_diff_eq!(x3, 0.4662, epsilon = 5e-4);
    }

    #[test]
    fn prop_h_linear() {
        let d = build_design(&k1(), DesignFamily::PropH).unwrap();
        assert_abs_diff_eq!(d.density_at(0.0).unwrap(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(d.density_at(1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(d.cdf_at(1.0).unwrap(), 1.0);
        assert_eq!(d.cdf_at(-1.0).unwrap(), 0.0);
    }

    #[test]
    fn sqrt_h_linear() {
        let d = build_design(&k1(), DesignFamily::SqrtH).unwrap();
        let s3 = 3f64.sqrt();
        let mass = 2.0 * (2.0 / 2.0 + s3.asinh() / (2.0 * s3));
        assert_abs_diff_eq!(mass, 2.760346, epsilon = 1e-6);
        assert_abs_diff_eq!(d.density_at(0.0).unwrap(), 1.0 / mass, epsilon = 1e-12);
    }

    #[test]
    fn minimax_below_critical_is_prop_h() {
        let ctx = k1();
        let m = build_design(&ctx, DesignFamily::Minimax(Sigma2::Finite(1.0))).unwrap();
        let p = build_design(&ctx, DesignFamily::PropH).unwrap();
        assert_eq!(m.shape(), "prop-h");
        for x in ctx.support().grid(101) {
            assert_eq!(m.pdf(x), p.pdf(x));
        }
        assert!(m.sqrt_region().is_empty());
    }

    #[test]
    fn uniform_quantiles() {
        let d = build_design(&k1(), DesignFamily::Uniform).unwrap();
        assert_eq!(d.quantile(0.5).unwrap(), 0.0);
        assert_eq!(d.quantile(0.0).unwrap(), -1.0);
        assert!(matches!(d.quantile(1.5), Err(Error::Domain { .. })));
        assert!(matches!(d.density_at(-1.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn sqrt_quantile_matches_dense_cdf() {
        let ctx = k1();
        let d = build_design(&ctx, DesignFamily::SqrtH).unwrap();
        // independent CDF: closed form antiderivative of sqrt(1+3x^2)
        let s3 = 3f64.sqrt();
        let anti = |x: f64| x * (1.0 + 3.0 * x * x).sqrt() / 2.0 + (s3 * x).asinh() / (2.0 * s3);
        let total = anti(1.0) - anti(-1.0);
        let cdf = |x: f64| (anti(x) - anti(-1.0)) / total;
        for u in [0.01, 0.1, 0.25, 0.5, 0.77, 0.99] {
            let (mut lo, mut hi) = (-1.0, 1.0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if cdf(mid) < u {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert_abs_diff_eq!(d.quantile(u).unwrap(), lo, epsilon = 1e-4);
        }
    }

    #[test]
    fn custom_table_normalizes() {
        let ctx = k1();
        let d = DesignDensity::from_fn(&ctx, "ramp", 1001, |x| 2.0 + x).unwrap();
        assert_abs_diff_eq!(d.density_at(0.0).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(d.cdf_at(0.0).unwrap(), (2.0 * 1.0 - 0.5) / 4.0, epsilon = 1e-7);
        let err = DesignDensity::from_fn(&ctx, "bad", 11, |x| x).unwrap_err();
        assert!(matches!(err, Error::DegenerateDesign(_)));
    }

    #[test]
    fn unknown_family() {
        assert!(matches!(DesignFamily::parse("dopt", None), Err(Error::Usage(_))));
        assert!(matches!(DesignFamily::parse("minimax", None), Err(Error::Usage(_))));
        assert_eq!(DesignFamily::parse("sqrt", None).unwrap(), DesignFamily::SqrtH);
    }

    #[test]
    fn sigma2_parsing() {
        assert_eq!("inf".parse::<Sigma2>().unwrap(), Sigma2::Infinite);
        assert_eq!("2.5".parse::<Sigma2>().unwrap(), Sigma2::Finite(2.5));
        assert!("-1".parse::<Sigma2>().is_err());
    }

    #[test]
    fn descriptor_round_trip_and_rebuild() {
        let ctx = k2();
        let d = build_design(&ctx, DesignFamily::Minimax(Sigma2::Finite(2.0))).unwrap();
        let mut desc = d.descriptor();
        desc.notes.push("hello".into());
        let back = DesignDescriptor::from_text(&desc.to_text()).unwrap();
        assert_eq!(back, desc);
        let again = back.rebuild(&ctx).unwrap();
        assert_eq!(again.boundary_points(), d.boundary_points());
    }

    #[test]
    fn csv_round_trip() {
        let ctx = k1();
        let d = build_design(&ctx, DesignFamily::Minimax(Sigma2::Finite(2.0))).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf, &[("seed".into(), "none".into())]).unwrap();
        let back = DesignDensity::read_csv(&ctx, "reloaded", buf.as_slice()).unwrap();
        // table is renormalized by the trapezoid rule
        for x in [-0.9, -0.364, 0.0, 0.5, 1.0] {
            assert_abs_diff_eq!(back.pdf(x), d.pdf(x), epsilon = 1e-4);
        }
    }
}
