//! Plot-ready tables: best linear approximations under two predictor
//! distributions, the two densities, and minimax design curves across `σ²`.

use std::io::Write;

use crate::basis::{best_linear_coefficients, BasisContext, BasisKind, Interval, MeanFunction, Weight, DEFAULT_QUADRATURE_NODES};
use crate::design::{build_design, sigma2_min, DesignDensity, DesignFamily, Sigma2};
use crate::error::{Error, Result};
use crate::risk::csv_field;

/// Mean of the normal that is truncated to `[-1, 1]`.
pub const TILTED_MEAN: f64 = 0.5;
/// Its variance.
pub const TILTED_VARIANCE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct FigureTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: Vec<(String, String)>,
}

impl FigureTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in &self.metadata {
            writeln!(w, "# {k} = {v}")?;
        }
        let header: Vec<String> = self.columns.iter().map(|c| csv_field(c)).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Trapezoid integral of a column against the first column.
    pub fn trapezoid(&self, name: &str) -> Option<f64> {
        let xs = self.column(&self.columns[0])?;
        let ys = self.column(name)?;
        Some(xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum())
    }
}

fn fmt_beta(b: &[f64]) -> String {
    b.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn illustration_mean() -> MeanFunction {
    MeanFunction::polynomial(vec![0.25, 0.5, 0.25])
}

/// Linear basis on `[-1, 1]` weighted by the truncated normal.
pub fn tilted_context() -> Result<BasisContext> {
    BasisContext::new(
        BasisKind::Monomial { degree: 1 },
        Interval::default(),
        Weight::TruncatedNormal { mean: TILTED_MEAN, variance: TILTED_VARIANCE },
        DEFAULT_QUADRATURE_NODES,
    )
}

fn check_points(points: usize) -> Result<()> {
    if points < 2 {
        return Err(Error::Usage("figure tables need at least two points".into()));
    }
    Ok(())
}

/// Columns `x, m, ell_uniform, ell_tilted`.
pub fn best_linear_figure(points: usize) -> Result<FigureTable> {
    check_points(points)?;
    let uniform = BasisContext::monomial(1)?;
    let tilted = tilted_context()?;
    let m = illustration_mean();
    let bu = best_linear_coefficients(&m, &uniform);
    let bt = best_linear_coefficients(&m, &tilted);
    let rows = uniform
        .support()
        .grid(points)
        .map(|x| vec![x, m.eval(x), bu.eval(&uniform, x), bt.eval(&tilted, x)])
        .collect();
    Ok(FigureTable {
        name: "best_linear".into(),
        columns: vec!["x".into(), "m".into(), "ell_uniform".into(), "ell_tilted".into()],
        rows,
        metadata: vec![
            ("mean".into(), m.description.clone()),
            ("beta_uniform".into(), fmt_beta(&bu.beta)),
            ("beta_tilted".into(), fmt_beta(&bt.beta)),
            ("tilted".into(), format!("normal(mean {TILTED_MEAN}, variance {TILTED_VARIANCE}) truncated to [-1,1]")),
        ],
    })
}

/// Columns `x, uniform, tilted`.
pub fn densities_figure(points: usize) -> Result<FigureTable> {
    check_points(points)?;
    let tilted = tilted_context()?;
    let rows = tilted.support().grid(points).map(|x| vec![x, 0.5, tilted.weight_at(x)]).collect();
    Ok(FigureTable {
        name: "densities".into(),
        columns: vec!["x".into(), "uniform".into(), "tilted".into()],
        rows,
        metadata: vec![(
            "tilted".into(),
            format!("normal(mean {TILTED_MEAN}, variance {TILTED_VARIANCE}) truncated to [-1,1]"),
        )],
    })
}

/// The design values plotted for each `σ²`: the critical level, 2, 3 and infinity.
pub fn design_curve_levels(ctx: &BasisContext) -> Vec<(String, Sigma2)> {
    vec![
        ("sigma2_min".into(), Sigma2::Finite(sigma2_min(ctx))),
        ("sigma2_2".into(), Sigma2::Finite(2.0)),
        ("sigma2_3".into(), Sigma2::Finite(3.0)),
        ("sigma2_inf".into(), Sigma2::Infinite),
    ]
}

/// Columns `x, h`, then one density column per design.
pub fn design_curves(ctx: &BasisContext, designs: &[(String, DesignDensity)], points: usize) -> Result<FigureTable> {
    check_points(points)?;
    let mut columns = vec!["x".to_string(), "h".to_string()];
    columns.extend(designs.iter().map(|(name, _)| name.clone()));
    let rows = ctx
        .support()
        .grid(points)
        .map(|x| {
            let mut r = vec![x, ctx.h(x)];
            r.extend(designs.iter().map(|(_, d)| d.pdf(x)));
            r
        })
        .collect();
    let mut metadata = vec![
        ("basis".into(), ctx.describe()),
        ("sigma2_min".into(), sigma2_min(ctx).to_string()),
    ];
    for (name, d) in designs {
        let b: Vec<String> = d.boundary_points().iter().map(|x| format!("{x:.6}")).collect();
        metadata.push((format!("{name}.shape"), d.shape().into()));
        metadata.push((format!("{name}.boundaries"), if b.is_empty() { "none".into() } else { b.join(" ") }));
    }
    Ok(FigureTable { name: "design_curves".into(), columns, rows, metadata })
}

/// Minimax designs of a monomial basis of the given degree at the standard levels.
pub fn minimax_figure(degree: usize, points: usize) -> Result<FigureTable> {
    let ctx = BasisContext::monomial(degree)?;
    let designs = design_curve_levels(&ctx)
        .into_iter()
        .map(|(name, s)| Ok((name, build_design(&ctx, DesignFamily::Minimax(s))?)))
        .collect::<Result<Vec<_>>>()?;
    let mut t = design_curves(&ctx, &designs, points)?;
    t.name = format!("minimax_k{degree}");
    Ok(t)
}

/// Every figure table, in a fixed order.
pub fn all_figures(points: usize) -> Result<Vec<FigureTable>> {
    Ok(vec![best_linear_figure(points)?, densities_figure(points)?, minimax_figure(1, points)?, minimax_figure(2, points)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::best_linear_coefficients_under_design;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_line_closed_form() {
        let t = best_linear_figure(201).unwrap();
        let ctx = BasisContext::monomial(1).unwrap();
        let b = best_linear_coefficients(&illustration_mean(), &ctx);
        assert_abs_diff_eq!(b.beta[0], 1.0 / 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(b.beta[1], 0.5, epsilon = 1e-13);
        let ell = t.column("ell_uniform").unwrap();
        assert_abs_diff_eq!(ell[100], 1.0 / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn tilted_line_has_smaller_intercept_and_larger_slope() {
        let m = illustration_mean();
        let bt = best_linear_coefficients(&m, &tilted_context().unwrap());
        assert!(bt.beta[0] < 1.0 / 3.0 && bt.beta[1] > 0.5, "{:?}", bt.beta);
        // same line via a tabulated design density
        let ctx = BasisContext::monomial(1).unwrap();
        let tilted = tilted_context().unwrap();
        let d = DesignDensity::from_fn(&ctx, "tilted", 4097, |x| tilted.weight_at(x)).unwrap();
        let bd = best_linear_coefficients_under_design(&m, &d, &ctx).unwrap();
        assert_abs_diff_eq!(bd.beta[0], bt.beta[0], epsilon = 1e-6);
        assert_abs_diff_eq!(bd.beta[1], bt.beta[1], epsilon = 1e-6);
    }

    #[test]
    fn densities_integrate_to_one() {
        let t = densities_figure(2001).unwrap();
        assert_abs_diff_eq!(t.trapezoid("uniform").unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.trapezoid("tilted").unwrap(), 1.0, epsilon = 1e-5);
    }

    #[test]
    fn infinite_level_is_sqrt_design() {
        for k in [1, 2] {
            let t = minimax_figure(k, 101).unwrap();
            let ctx = BasisContext::monomial(k).unwrap();
            let sq = build_design(&ctx, DesignFamily::SqrtH).unwrap();
            let xs = t.column("x").unwrap();
            for (x, v) in xs.iter().zip(t.column("sigma2_inf").unwrap()) {
                assert_abs_diff_eq!(v, sq.pdf(*x), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let t = minimax_figure(1, 11).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header, "x,h,sigma2_min,sigma2_2,sigma2_3,sigma2_inf");
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 12);
    }
}
