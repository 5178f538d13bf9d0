//! Monte Carlo experiments on the truncated weighted least squares estimator.
//!
//! Replication `r` draws from stream `r` of the configured seed. With
//! coupling on, every design maps the same uniforms through its own quantile
//! function and shares the same standard normal noise. With coupling off,
//! design `d` of `D` uses stream `r·D + d`. Replications run in parallel and
//! are reduced in replication order, so results do not depend on the number
//! of worker threads.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{best_linear_coefficients, BasisContext, CoefficientVector, MeanFunction};
use crate::config::{config_hash, BasisSpec, DesignSpec, MeanSpec};
use crate::design::DesignDensity;
use crate::error::{Error, Result};
use crate::linalg::CompensatedSum;
use crate::risk::{csv_field, omega_trace, VarianceSpec};
use crate::sampling::{responses_from_normals, RngStream, RNG_ALGORITHM};
use crate::wls::{fit_wls, integrated_squared_error, Dataset};

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub basis: BasisSpec,
    pub mean: MeanSpec,
    /// Each design carries its own design σ², independent of the noise variance.
    pub designs: Vec<DesignSpec>,
    pub noise_variance: f64,
    pub n: usize,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub coupling: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::Config(format!("noise_variance must be finite and nonnegative, got {}", self.noise_variance)));
        }
        if self.designs.is_empty() {
            return Err(Error::Config("at least one design is required".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn hash(&self) -> String {
        config_hash(&self.to_toml())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSummary {
    pub label: String,
    pub shape: String,
    /// Mean of `n·ISE` over replications.
    pub mean: f64,
    pub se: f64,
    pub event_frequency: f64,
    pub trace_risk: f64,
}

/// `first − second` in `n·ISE`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDifference {
    pub first: usize,
    pub second: usize,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub designs: Vec<DesignSummary>,
    pub differences: Vec<PairDifference>,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub noise_variance: f64,
    pub coupling: bool,
    pub config_echo: String,
    pub config_hash: String,
}

impl SimResult {
    pub const CSV_HEADER: &'static str = "design,shape,n,replications,mean_n_ise,se,event_frequency,trace_risk";

    pub fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("seed".into(), self.seed.to_string()),
            ("config_hash".into(), self.config_hash.clone()),
            ("rng".into(), RNG_ALGORITHM.into()),
            (
                "streams".into(),
                if self.coupling { "replication r uses stream r".into() } else { "replication r, design d uses stream r*D+d".into() },
            ),
            ("coupling".into(), self.coupling.to_string()),
            ("noise_variance".into(), self.noise_variance.to_string()),
        ]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in self.metadata() {
            writeln!(w, "# {k} = {v}")?;
        }
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for d in &self.designs {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                csv_field(&d.label),
                d.shape,
                self.n,
                self.replications,
                d.mean,
                d.se,
                d.event_frequency,
                d.trace_risk
            )?;
        }
        Ok(())
    }

    pub fn write_differences_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in self.metadata() {
            writeln!(w, "# {k} = {v}")?;
        }
        writeln!(w, "first,second,mean_difference,se_difference")?;
        for p in &self.differences {
            writeln!(
                w,
                "{},{},{},{}",
                csv_field(&self.designs[p.first].label),
                csv_field(&self.designs[p.second].label),
                p.mean,
                p.se
            )?;
        }
        Ok(())
    }

    pub fn difference(&self, first: usize, second: usize) -> Option<&PairDifference> {
        self.differences.iter().find(|p| p.first == first && p.second == second)
    }

    /// Aligned text table: one column per design, empirical and asymptotic rows.
    pub fn to_table(&self) -> String {
        let width = self.designs.iter().map(|d| d.label.len()).max().unwrap_or(0).max(14);
        let mut s = String::new();
        let _ = writeln!(s, "# seed = {}  config_hash = {}", self.seed, self.config_hash);
        let _ = write!(s, "{:<12}", "");
        for d in &self.designs {
            let _ = write!(s, "{:>width$}", d.label);
        }
        let _ = writeln!(s);
        let _ = write!(s, "{:<12}", format!("n={}", self.n));
        for d in &self.designs {
            let _ = write!(s, "{:>width$}", format!("{:.2} ({:.2})", d.mean, d.se));
        }
        let _ = writeln!(s);
        let _ = write!(s, "{:<12}", "asymptotic");
        for d in &self.designs {
            let _ = write!(s, "{:>width$}", format!("{:.2}", d.trace_risk));
        }
        let _ = writeln!(s);
        for p in &self.differences {
            let _ = writeln!(
                s,
                "{} - {}: {:.3} (se {:.3})",
                self.designs[p.first].label, self.designs[p.second].label, p.mean, p.se
            );
        }
        s
    }
}

/// Everything a replication needs, built once.
struct Prepared {
    ctx: BasisContext,
    mean: MeanFunction,
    beta: CoefficientVector,
    designs: Vec<DesignDensity>,
}

fn prepare(config: &SimConfig) -> Result<Prepared> {
    config.validate()?;
    let ctx = config.basis.build()?;
    if config.n < ctx.size() {
        return Err(Error::Underdetermined { n: config.n, k: ctx.size() });
    }
    let mean = config.mean.build(&ctx)?;
    let beta = best_linear_coefficients(&mean, &ctx);
    let designs = config.designs.iter().map(|d| d.build(&ctx)).collect::<Result<Vec<_>>>()?;
    Ok(Prepared { ctx, mean, beta, designs })
}

/// `n·ISE` and event indicator for each design in one replication.
fn replicate(p: &Prepared, config: &SimConfig, n: usize, r: usize) -> Result<Vec<(f64, bool)>> {
    let sigma2 = config.noise_variance;
    let nd = p.designs.len();
    let draw = |stream: &mut RngStream| {
        let us: Vec<f64> = (0..n).map(|_| stream.next_uniform()).collect();
        let z: Vec<f64> = (0..n).map(|_| stream.next_normal()).collect();
        (us, z)
    };
    let mut shared = if config.coupling {
        let mut s = RngStream::new(config.seed, r as u64);
        Some(draw(&mut s))
    } else {
        None
    };
    let mut out = Vec::with_capacity(nd);
    for (d, design) in p.designs.iter().enumerate() {
        let stream_id = if config.coupling { r as u64 } else { (r * nd + d) as u64 };
        let own;
        let (us, z) = match shared.as_mut() {
            Some(s) => (&s.0, &s.1),
            None => {
                own = draw(&mut RngStream::new(config.seed, stream_id));
                (&own.0, &own.1)
            }
        };
        let xs: Vec<f64> = us.iter().map(|&u| design.quantile_unchecked(u)).collect();
        let ys = responses_from_normals(&xs, &p.mean, sigma2, z)?;
        let fit = fit_wls(&Dataset { xs, ys }, design, &p.ctx)?;
        let v = n as f64 * integrated_squared_error(&fit, &p.ctx, &p.beta);
        if !v.is_finite() {
            return Err(Error::NonFinite { seed: config.seed, stream: stream_id });
        }
        out.push((v, fit.event_triggered));
    }
    Ok(out)
}

fn run_prepared(p: &Prepared, config: &SimConfig, n: usize) -> Result<SimResult> {
    let reps = config.replications;
    let rows: Vec<Vec<(f64, bool)>> =
        (0..reps).into_par_iter().map(|r| replicate(p, config, n, r)).collect::<Result<_>>()?;
    let nd = p.designs.len();
    let mean_se = |col: &dyn Fn(&Vec<(f64, bool)>) -> f64| -> (f64, f64) {
        let mut s = CompensatedSum::default();
        for row in &rows {
            s.add(col(row));
        }
        let m = s.value() / reps as f64;
        if reps < 2 {
            return (m, 0.0);
        }
        let mut ss = CompensatedSum::default();
        for row in &rows {
            let d = col(row) - m;
            ss.add(d * d);
        }
        (m, (ss.value() / (reps - 1) as f64 / reps as f64).sqrt())
    };
    let variance = VarianceSpec::Constant(config.noise_variance);
    let mut designs = Vec::with_capacity(nd);
    for (d, design) in p.designs.iter().enumerate() {
        let (mean, se) = mean_se(&|row| row[d].0);
        let events = rows.iter().filter(|row| row[d].1).count();
        let trace_risk = omega_trace(&p.ctx, design, &p.mean, &variance)?.trace_risk;
        designs.push(DesignSummary {
            label: design.label().to_string(),
            shape: design.shape().to_string(),
            mean,
            se,
            event_frequency: events as f64 / reps as f64,
            trace_risk,
        });
    }
    let mut differences = Vec::new();
    for a in 0..nd {
        for b in a + 1..nd {
            let (mean, se) = mean_se(&|row| row[a].0 - row[b].0);
            differences.push(PairDifference { first: a, second: b, mean, se });
        }
    }
    let mut echo = config.clone();
    echo.n = n;
    Ok(SimResult {
        designs,
        differences,
        n,
        replications: reps,
        seed: config.seed,
        noise_variance: config.noise_variance,
        coupling: config.coupling,
        config_hash: echo.hash(),
        config_echo: echo.to_toml(),
    })
}

pub fn run_experiment(config: &SimConfig) -> Result<SimResult> {
    let p = prepare(config)?;
    run_prepared(&p, config, config.n)
}

/// As [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_on(config: &SimConfig, threads: usize) -> Result<SimResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    pool.install(|| run_experiment(config))
}

/// Fraction of replications on which the fallback to `nQ` fired, per design.
pub fn event_frequency(config: &SimConfig) -> Result<Vec<f64>> {
    Ok(run_experiment(config)?.designs.iter().map(|d| d.event_frequency).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergencePoint {
    pub n: usize,
    pub replications: usize,
    pub mean: f64,
    pub se: f64,
    pub trace_risk: f64,
    /// `|n·mean − trace_risk|`
    pub gap: f64,
    /// `√n · gap`
    pub scaled_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSeries {
    pub label: String,
    pub points: Vec<ConvergencePoint>,
    pub seed: u64,
    pub config_hash: String,
}

impl ConvergenceSeries {
    pub const CSV_HEADER: &'static str = "design,n,replications,mean_n_ise,se,trace_risk,gap,scaled_gap";

    pub fn write_csv<W: Write>(series: &[ConvergenceSeries], mut w: W) -> Result<()> {
        if let Some(first) = series.first() {
            writeln!(w, "# seed = {}", first.seed)?;
            writeln!(w, "# config_hash = {}", first.config_hash)?;
            writeln!(w, "# rng = {RNG_ALGORITHM}")?;
        }
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for s in series {
            for p in &s.points {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    csv_field(&s.label),
                    p.n,
                    p.replications,
                    p.mean,
                    p.se,
                    p.trace_risk,
                    p.gap,
                    p.scaled_gap
                )?;
            }
        }
        Ok(())
    }

    /// Least-squares slope of `log scaled_gap` against `log n`, with a
    /// delta-method standard error from the Monte Carlo errors of the means.
    pub fn log_log_slope(&self) -> (f64, f64) {
        let pts: Vec<&ConvergencePoint> = self.points.iter().filter(|p| p.gap > 0.0).collect();
        if pts.len() < 2 {
            return (0.0, f64::INFINITY);
        }
        let xs: Vec<f64> = pts.iter().map(|p| (p.n as f64).ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.scaled_gap.ln()).collect();
        let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
        let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum::<f64>() / sxx;
        let var: f64 = xs
            .iter()
            .zip(&pts)
            .map(|(x, p)| ((x - xbar) / sxx).powi(2) * (p.se / p.gap).powi(2))
            .sum();
        (slope, var.sqrt())
    }
}

/// One experiment per sample size, each with `config.replications` replications.
pub fn convergence_study(config: &SimConfig, n_grid: &[usize]) -> Result<Vec<ConvergenceSeries>> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage("n_grid must be nonempty and strictly increasing".into()));
    }
    let p = prepare(config)?;
    if n_grid[0] < p.ctx.size() {
        return Err(Error::Underdetermined { n: n_grid[0], k: p.ctx.size() });
    }
    let mut series: Vec<ConvergenceSeries> = p
        .designs
        .iter()
        .map(|d| ConvergenceSeries { label: d.label().to_string(), points: Vec::new(), seed: config.seed, config_hash: config.hash() })
        .collect();
    for &n in n_grid {
        let res = run_prepared(&p, config, n)?;
        for (s, d) in series.iter_mut().zip(&res.designs) {
            let gap = (d.mean - d.trace_risk).abs();
            s.points.push(ConvergencePoint {
                n,
                replications: res.replications,
                mean: d.mean,
                se: d.se,
                trace_risk: d.trace_risk,
                gap,
                scaled_gap: (n as f64).sqrt() * gap,
            });
        }
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Sigma2;

    fn config(mean: Vec<f64>, noise: f64, n: usize, reps: usize) -> SimConfig {
        SimConfig {
            basis: BasisSpec::monomial(1),
            mean: MeanSpec::polynomial(mean),
            designs: vec![
                DesignSpec::new("uniform", None),
                DesignSpec::new("sqrt-h", None),
                DesignSpec::new("minimax", Some(Sigma2::Finite(1.0))),
            ],
            noise_variance: noise,
            n,
            replications: reps,
            seed: 11,
            coupling: true,
        }
    }

    #[test]
    fn noiseless_linear_mean_is_recovered() {
        let r = run_experiment(&config(vec![0.3, -1.2], 0.0, 200, 20)).unwrap();
        for d in &r.designs {
            assert!(d.mean < 1e-20, "{}: {}", d.label, d.mean);
            assert!(d.trace_risk < 1e-20);
        }
    }

    #[test]
    fn deterministic_across_workers() {
        let c = config(vec![0.0, 1.0, 3.354], 1.0, 30, 200);
        let a = run_experiment_on(&c, 1).unwrap();
        let b = run_experiment_on(&c, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uncoupled_differs_from_coupled() {
        let mut c = config(vec![0.0, 1.0, 3.354], 1.0, 30, 200);
        let a = run_experiment(&c).unwrap();
        c.coupling = false;
        let b = run_experiment(&c).unwrap();
        assert_ne!(a.designs[1].mean, b.designs[1].mean);
        assert_eq!(a.designs[0].trace_risk, b.designs[0].trace_risk);
    }

    #[test]
    fn underdetermined_rejected() {
        let mut c = config(vec![0.0, 1.0], 1.0, 1, 10);
        assert!(matches!(run_experiment(&c), Err(Error::Underdetermined { .. })));
        c.n = 10;
        c.replications = 0;
        assert!(run_experiment(&c).unwrap_err().is_config());
    }

    #[test]
    fn convergence_grid_must_increase() {
        let c = config(vec![0.0, 1.0], 1.0, 10, 10);
        assert!(convergence_study(&c, &[50, 20]).is_err());
        let s = convergence_study(&c, &[10, 20]).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].points.len(), 2);
    }

    #[test]
    fn outputs_carry_seed_and_hash() {
        let r = run_experiment(&config(vec![0.0, 1.0, 3.354], 1.0, 20, 20)).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# seed = 11\n"));
        assert!(text.contains(&r.config_hash));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4);
        assert!(r.to_table().contains("asymptotic"));
        let echo: SimConfig = toml::from_str(&r.config_echo).unwrap();
        assert_eq!(echo.n, 20);
    }
}
