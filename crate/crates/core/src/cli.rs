//! Command implementations behind the `minimax-design` binary.
//!
//! Every output file is CSV (or `key = value` text) preceded by `#` lines
//! carrying the command, configuration hash and seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use crate::basis::BasisContext;
use crate::config::{config_hash, BasisSpec, RunConfig};
use crate::design::{build_design, sigma2_min, DesignDensity, DesignFamily, Sigma2};
use crate::error::{Error, Result};
use crate::figures::{all_figures, design_curve_levels, design_curves};
use crate::risk::{omega_trace, RiskReport, VarianceSpec};
use crate::sim::{convergence_study, run_experiment, ConvergenceSeries, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Design,
    Risk,
    Simulate,
    Figures,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Design => "design",
            Command::Risk => "risk",
            Command::Simulate => "simulate",
            Command::Figures => "figures",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliOptions {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub quiet: bool,
}

/// 0 on success, 2 for configuration or I/O problems, 1 for numerical failures.
pub fn exit_code<T>(result: &Result<T>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) if e.is_config() || matches!(e, Error::Io(_)) => 2,
        Err(_) => 1,
    }
}

struct Session {
    command: Command,
    config: RunConfig,
    hash: String,
    seed: u64,
    out: PathBuf,
    quiet: bool,
    written: Vec<PathBuf>,
}

impl Session {
    fn open(command: Command, opts: &CliOptions) -> Result<Self> {
        let (config, text) = match &opts.config {
            Some(path) => RunConfig::load(path)?,
            None => (RunConfig::default(), String::new()),
        };
        let seed = opts
            .seed
            .or_else(|| config.simulation.as_ref().map(|s| s.seed))
            .unwrap_or(0);
        std::fs::create_dir_all(&opts.out)
            .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", opts.out.display())))?;
        Ok(Session {
            command,
            config,
            hash: config_hash(&text),
            seed,
            out: opts.out.clone(),
            quiet: opts.quiet,
            written: Vec::new(),
        })
    }

    fn header(&self) -> Vec<(String, String)> {
        vec![
            ("command".into(), self.command.name().into()),
            ("config_hash".into(), self.hash.clone()),
            ("seed".into(), self.seed.to_string()),
        ]
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(name);
        let file = File::create(&path)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(BufWriter::new(file))
    }

    fn write_with_header<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let header = self.header();
        let mut w = self.create(name)?;
        for (k, v) in header {
            writeln!(w, "# {k} = {v}")?;
        }
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn say(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn basis(&self) -> Result<BasisContext> {
        self.config
            .basis
            .as_ref()
            .ok_or_else(|| Error::Config("missing [basis] section".into()))?
            .build()
    }
}

fn tag(s: Sigma2) -> String {
    format!("sigma2_{s}")
}

pub fn run(command: Command, opts: &CliOptions) -> Result<Vec<PathBuf>> {
    let mut session = Session::open(command, opts)?;
    match command {
        Command::Design => cmd_design(&mut session)?,
        Command::Risk => cmd_risk(&mut session)?,
        Command::Simulate => cmd_simulate(&mut session)?,
        Command::Figures => cmd_figures(&mut session)?,
    }
    for p in &session.written {
        session.say(&format!("wrote {}", p.display()));
    }
    Ok(session.written)
}

fn write_design(session: &mut Session, name: &str, d: &DesignDensity) -> Result<()> {
    let header = session.header();
    let mut w = session.create(&format!("design_{name}.csv"))?;
    d.write_csv(&mut w, &header)?;
    w.flush()?;
    let descriptor = d.descriptor().to_text();
    session.write_with_header(&format!("design_{name}.txt"), |w| Ok(w.write_all(descriptor.as_bytes())?))?;
    Ok(())
}

fn cmd_design(session: &mut Session) -> Result<()> {
    let ctx = session.basis()?;
    let section = session.config.design.clone();
    let levels: Vec<(String, Sigma2)> = match &section {
        Some(s) if !s.sigma2.is_empty() => s.sigma2.iter().map(|&v| (tag(v), v)).collect(),
        _ => design_curve_levels(&ctx),
    };
    let points = section.as_ref().map_or(401, |s| s.curve_points);
    let mut designs = Vec::new();
    for (name, s) in levels {
        let d = build_design(&ctx, DesignFamily::Minimax(s))?;
        let desc = d.descriptor();
        let region: Vec<String> = desc.sqrt_region.iter().map(|iv| format!("[{:.3}, {:.3}]", iv.lo, iv.hi)).collect();
        session.say(&format!(
            "{name}: shape {} h0 {} sqrt region {}",
            desc.family,
            desc.h0.map_or("-".into(), |h| format!("{h:.6}")),
            if region.is_empty() { "empty".into() } else { region.join(" u ") }
        ));
        write_design(session, &name, &d)?;
        designs.push((name, d));
    }
    for fam in section.iter().flat_map(|s| s.families.iter()) {
        let family = DesignFamily::parse(fam, None)?;
        if family == DesignFamily::CustomTable {
            return Err(Error::Usage("custom-table designs are read, not constructed".into()));
        }
        let d = build_design(&ctx, family)?;
        write_design(session, fam, &d)?;
        designs.push((fam.clone(), d));
    }
    let curves = design_curves(&ctx, &designs, points)?;
    session.write_with_header("design_curves.csv", |w| curves.write_csv(w))?;
    session.say(&format!("sigma2_min = {}", sigma2_min(&ctx)));
    Ok(())
}

fn cmd_risk(session: &mut Session) -> Result<()> {
    let ctx = session.basis()?;
    let mean = session
        .config
        .mean
        .as_ref()
        .ok_or_else(|| Error::Config("missing [mean] section".into()))?
        .build(&ctx)?;
    let section = session
        .config
        .risk
        .clone()
        .ok_or_else(|| Error::Config("missing [risk] section".into()))?;
    if section.noise_variance.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Config("risk.noise_variance values must be nonnegative".into()));
    }
    let mut reports: Vec<RiskReport> = Vec::new();
    for spec in &section.designs {
        let d = spec.build(&ctx)?;
        for &v in &section.noise_variance {
            reports.push(omega_trace(&ctx, &d, &mean, &VarianceSpec::Constant(v))?);
        }
    }
    for r in &reports {
        session.say(&format!("{} variance {}: trace {:.4} worst case {:.4}", r.design, r.variance, r.trace_risk, r.worst_case));
    }
    session.write_with_header("risk.csv", |w| {
        writeln!(w, "{}", RiskReport::CSV_HEADER)?;
        for r in &reports {
            writeln!(w, "{}", r.to_csv_row())?;
        }
        Ok(())
    })
}

fn cmd_simulate(session: &mut Session) -> Result<()> {
    let basis: BasisSpec = session
        .config
        .basis
        .clone()
        .ok_or_else(|| Error::Config("missing [basis] section".into()))?;
    let mean = session
        .config
        .mean
        .clone()
        .ok_or_else(|| Error::Config("missing [mean] section".into()))?;
    let sec = session
        .config
        .simulation
        .clone()
        .ok_or_else(|| Error::Config("missing [simulation] section".into()))?;
    let config = SimConfig {
        basis,
        mean,
        designs: sec.designs,
        noise_variance: sec.noise_variance,
        n: sec.n,
        replications: sec.replications,
        seed: session.seed,
        coupling: sec.coupling,
    };
    let result = run_experiment(&config)?;
    session.say(&result.to_table());
    session.write_with_header("simulation.csv", |w| result.write_csv(w))?;
    session.write_with_header("simulation_differences.csv", |w| result.write_differences_csv(w))?;
    let table = result.to_table();
    session.write_with_header("simulation_table.txt", |w| Ok(w.write_all(table.as_bytes())?))?;
    let echo = result.config_echo.clone();
    session.write_with_header("simulation_config.toml", |w| Ok(w.write_all(echo.as_bytes())?))?;
    if !sec.n_grid.is_empty() {
        let series = convergence_study(&config, &sec.n_grid)?;
        session.write_with_header("convergence.csv", |w| ConvergenceSeries::write_csv(&series, w))?;
    }
    Ok(())
}

fn cmd_figures(session: &mut Session) -> Result<()> {
    let points = session.config.design.as_ref().map_or(401, |s| s.curve_points);
    for t in all_figures(points)? {
        session.write_with_header(&format!("{}.csv", t.name), |w| t.write_csv(w))?;
    }
    Ok(())
}

/// Output directory contents are plain files; this lists them in write order.
pub fn written_names(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .filter_map(|p| p.file_name().and_then(|n| n.to_str()).map(str::to_string))
        .collect()
}
