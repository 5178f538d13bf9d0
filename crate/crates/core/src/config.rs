//! Structured text (TOML) configuration. Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::basis::{
    calibrate_leading_coefficient, BasisContext, BasisFunction, BasisKind, Interval, MeanFunction, Weight,
    DEFAULT_QUADRATURE_NODES,
};
use crate::design::{build_design, DesignDensity, DesignFamily, Sigma2};
use crate::error::{Error, Result};

impl Serialize for Sigma2 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Sigma2::Finite(v) => s.serialize_f64(*v),
            Sigma2::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Sigma2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Sigma2;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a nonnegative number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Sigma2, E> {
                if v.is_nan() || v < 0.0 {
                    return Err(E::custom(format!("sigma2 must be nonnegative, got {v}")));
                }
                Ok(Sigma2::from(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Sigma2, E> {
                self.visit_f64(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Sigma2, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Sigma2, E> {
                v.parse().map_err(|e: Error| E::custom(e.to_string()))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    #[default]
    Uniform,
    TruncatedNormal { mean: f64, variance: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKindSpec {
    #[default]
    Monomial,
    /// Each basis function is a polynomial given by its coefficients.
    Polynomials,
}

fn default_support() -> [f64; 2] {
    [-1.0, 1.0]
}

fn default_nodes() -> usize {
    DEFAULT_QUADRATURE_NODES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    #[serde(default)]
    pub kind: BasisKindSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functions: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_support")]
    pub support: [f64; 2],
    #[serde(default)]
    pub weight: WeightSpec,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
}

impl BasisSpec {
    pub fn monomial(degree: usize) -> Self {
        BasisSpec {
            kind: BasisKindSpec::Monomial,
            degree: Some(degree),
            functions: None,
            support: default_support(),
            weight: WeightSpec::Uniform,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
        }
    }

    pub fn build(&self) -> Result<BasisContext> {
        let kind = match self.kind {
            BasisKindSpec::Monomial => {
                if self.functions.is_some() {
                    return Err(Error::Config("basis.functions is only valid with kind = \"polynomials\"".into()));
                }
                let degree = self.degree.ok_or_else(|| Error::Config("basis.degree is required".into()))?;
                BasisKind::Monomial { degree }
            }
            BasisKindSpec::Polynomials => {
                let fs = self
                    .functions
                    .as_ref()
                    .ok_or_else(|| Error::Config("basis.functions is required for kind = \"polynomials\"".into()))?;
                BasisKind::Functions(fs.iter().cloned().map(BasisFunction::polynomial).collect())
            }
        };
        let weight = match &self.weight {
            WeightSpec::Uniform => Weight::Uniform,
            WeightSpec::TruncatedNormal { mean, variance } => Weight::TruncatedNormal { mean: *mean, variance: *variance },
        };
        BasisContext::new(kind, Interval::new(self.support[0], self.support[1]), weight, self.quadrature_nodes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSpec {
    /// Fixed lower-order coefficients.
    pub base: Vec<f64>,
    pub leading_degree: usize,
    #[serde(default = "one")]
    pub target: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<CalibrateSpec>,
}

impl MeanSpec {
    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        MeanSpec { coefficients: Some(coefficients), calibrate: None }
    }

    pub fn build(&self, ctx: &BasisContext) -> Result<MeanFunction> {
        match (&self.coefficients, &self.calibrate) {
            (Some(c), None) => Ok(MeanFunction::polynomial(c.clone())),
            (None, Some(cal)) => Ok(calibrate_leading_coefficient(&cal.base, cal.leading_degree, ctx, cal.target)?.mean),
            _ => Err(Error::Config("mean needs exactly one of `coefficients` or `calibrate`".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<Sigma2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// CSV file (`x,density`) for `custom-table` designs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

impl DesignSpec {
    pub fn new(family: &str, sigma2: Option<Sigma2>) -> Self {
        DesignSpec { family: family.into(), sigma2, label: None, table: None }
    }

    pub fn build(&self, ctx: &BasisContext) -> Result<DesignDensity> {
        let family = DesignFamily::parse(&self.family, self.sigma2)?;
        let design = match family {
            DesignFamily::CustomTable => {
                let path = self
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::Config("custom-table design needs `table`".into()))?;
                let file = std::fs::File::open(path)
                    .map_err(|e| Error::Config(format!("cannot open design table {path}: {e}")))?;
                DesignDensity::read_csv(ctx, path.clone(), std::io::BufReader::new(file))?
            }
            f => build_design(ctx, f)?,
        };
        Ok(match &self.label {
            Some(l) => design.with_label(l.clone()),
            None => design,
        })
    }
}

/// Short SHA-256 fingerprint of configuration text.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}

/// Sections of the command-line configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<MeanSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    /// One minimax design per value; values at or below the critical level give `prop-h`.
    #[serde(default)]
    pub sigma2: Vec<Sigma2>,
    /// Additional baseline families to export.
    #[serde(default)]
    pub families: Vec<String>,
    /// Points in the curve file.
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
}

fn default_curve_points() -> usize {
    401
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSection {
    pub designs: Vec<DesignSpec>,
    /// Noise variances to evaluate.
    pub noise_variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub designs: Vec<DesignSpec>,
    pub noise_variance: f64,
    pub n: usize,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub coupling: bool,
    /// Optional sample sizes for a convergence study.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_grid: Vec<usize>,
}

fn yes() -> bool {
    true
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok((Self::parse(&text)?, text))
    }
}
