//! Experiment configuration files.
//!
//! A config is a JSON object
//!
//! ```json
//! { "kind": "eigen", "seed": 7, "ladder": [129, 257], "payload": { "tol": 1e-6 } }
//! ```
//!
//! where every payload field is optional. Schema violations are reported with
//! the JSON pointer of the offending value.

use std::path::{Path, PathBuf};

use degma_core::barriers::{Suite, DEFAULT_EPS0};
use degma_core::fields::Scheme;
use degma_core::geometry::{ConvexDomain, LevelSetShape};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_path_to_error::Segment;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MaSolve,
    Grushin,
    Eigen,
    Pipeline,
    ExpansionFit,
    Barriers,
    MetricScan,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MaSolve => "ma-solve",
            ExperimentKind::Grushin => "grushin",
            ExperimentKind::Eigen => "eigen",
            ExperimentKind::Pipeline => "pipeline",
            ExperimentKind::ExpansionFit => "expansion-fit",
            ExperimentKind::Barriers => "barriers",
            ExperimentKind::MetricScan => "metric-scan",
        }
    }

    pub fn default_ladder(self) -> Vec<usize> {
        match self {
            ExperimentKind::MaSolve | ExperimentKind::Grushin => vec![33, 65, 129],
            ExperimentKind::Eigen => vec![129, 257],
            ExperimentKind::Pipeline => vec![65, 129, 257],
            ExperimentKind::ExpansionFit => vec![257],
            ExperimentKind::Barriers | ExperimentKind::MetricScan => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum DomainConfig {
    /// `[−w, w]^{n−1} × [0, h]` with the floor `x_n = 0` as boundary.
    Strip {
        half_width: f64,
        height: f64,
    },
    Disk {
        radius: f64,
    },
    Ellipse {
        semi_axes: [f64; 2],
    },
    HalfBall {
        radius: f64,
    },
}

impl DomainConfig {
    pub fn build(&self) -> degma_core::Result<ConvexDomain> {
        match self {
            DomainConfig::Strip { half_width, height } => {
                ConvexDomain::flat_strip(2, *half_width, *height)
            }
            DomainConfig::Disk { radius } => ConvexDomain::disk(*radius),
            DomainConfig::Ellipse { semi_axes } => ConvexDomain::level_set(
                2,
                LevelSetShape::Ellipsoid {
                    center: vec![0.0, 0.0],
                    semi_axes: semi_axes.to_vec(),
                },
            ),
            DomainConfig::HalfBall { radius } => ConvexDomain::half_ball(2, *radius),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryData {
    /// `φ = U_0`.
    Model,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaSolvePayload {
    pub alpha: f64,
    pub domain: DomainConfig,
    pub boundary: BoundaryData,
    pub g: f64,
    pub scheme: Scheme,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for MaSolvePayload {
    fn default() -> Self {
        MaSolvePayload {
            alpha: 1.0,
            domain: DomainConfig::Strip {
                half_width: 1.0,
                height: 1.0,
            },
            boundary: BoundaryData::Model,
            g: 1.0,
            scheme: Scheme::StandardFd,
            tol: 1e-10,
            max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrushinCase {
    /// `w = x₁x_n`.
    X1Xn,
    /// `w = |x'|²x_n`.
    X1sqXn,
    /// Random smooth boundary data drawn from the config seed.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrushinPayload {
    pub alpha: f64,
    pub case: GrushinCase,
    pub fit_radius: f64,
    pub tol: f64,
}

impl Default for GrushinPayload {
    fn default() -> Self {
        GrushinPayload {
            alpha: 1.0,
            case: GrushinCase::X1sqXn,
            fit_radius: 0.5,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenPayload {
    pub radius: f64,
    pub tol: f64,
    pub max_outer: usize,
    /// Also solve on the disk of twice the radius with the same node count.
    pub scaling_check: bool,
    pub identity_radii: Vec<f64>,
    pub identity_points: usize,
    pub identity_phase: f64,
    pub beta: f64,
    pub holder_budget: usize,
    pub factor_band: f64,
}

impl Default for EigenPayload {
    fn default() -> Self {
        EigenPayload {
            radius: 1.0,
            tol: 1e-6,
            max_outer: 300,
            scaling_check: false,
            identity_radii: vec![0.1, 0.2, 0.3],
            identity_points: 8,
            identity_phase: 0.3,
            beta: 0.45,
            holder_budget: 20_000,
            factor_band: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelinePayload {
    pub radius: f64,
    pub z: [f64; 2],
    pub half_width: f64,
    pub height: f64,
    pub margin: usize,
    pub tol: f64,
    pub max_outer: usize,
}

impl Default for PipelinePayload {
    fn default() -> Self {
        PipelinePayload {
            radius: 1.0,
            z: [0.0, -1.0],
            half_width: 0.4,
            height: 0.25,
            margin: 2,
            tol: 1e-6,
            max_outer: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionFitPayload {
    pub alphas: Vec<f64>,
    pub radius: f64,
    pub z: [f64; 2],
    pub tmax: f64,
    pub exponent_bracket: [f64; 2],
    pub radii: Vec<f64>,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ExpansionFitPayload {
    fn default() -> Self {
        ExpansionFitPayload {
            alphas: vec![0.5, 1.0, 2.0],
            radius: 1.0,
            z: [1.0, 0.0],
            tmax: 0.3,
            exponent_bracket: [1.5, 5.0],
            radii: vec![0.1, 0.2, 0.3],
            tol: 1e-10,
            max_iters: 80,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarriersPayload {
    pub suite: Suite,
    pub eps0: f64,
}

impl Default for BarriersPayload {
    fn default() -> Self {
        BarriersPayload {
            suite: Suite::All,
            eps0: DEFAULT_EPS0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricScanPayload {
    pub alphas: Vec<f64>,
    pub samples: usize,
    pub triples: usize,
}

impl Default for MetricScanPayload {
    fn default() -> Self {
        MetricScanPayload {
            alphas: vec![0.5, 1.0, 2.0],
            samples: 10_000,
            triples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Payload {
    MaSolve(MaSolvePayload),
    Grushin(GrushinPayload),
    Eigen(EigenPayload),
    Pipeline(PipelinePayload),
    ExpansionFit(ExpansionFitPayload),
    Barriers(BarriersPayload),
    MetricScan(MetricScanPayload),
}

impl Payload {
    pub fn default_for(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::MaSolve => Payload::MaSolve(Default::default()),
            ExperimentKind::Grushin => Payload::Grushin(Default::default()),
            ExperimentKind::Eigen => Payload::Eigen(Default::default()),
            ExperimentKind::Pipeline => Payload::Pipeline(Default::default()),
            ExperimentKind::ExpansionFit => Payload::ExpansionFit(Default::default()),
            ExperimentKind::Barriers => Payload::Barriers(Default::default()),
            ExperimentKind::MetricScan => Payload::MetricScan(Default::default()),
        }
    }

    fn parse(kind: ExperimentKind, value: serde_json::Value) -> Result<Self> {
        fn typed<T: DeserializeOwned>(value: serde_json::Value) -> Result<T> {
            serde_path_to_error::deserialize(value).map_err(|e| pointer_error("/payload", e))
        }
        Ok(match kind {
            ExperimentKind::MaSolve => Payload::MaSolve(typed(value)?),
            ExperimentKind::Grushin => Payload::Grushin(typed(value)?),
            ExperimentKind::Eigen => Payload::Eigen(typed(value)?),
            ExperimentKind::Pipeline => Payload::Pipeline(typed(value)?),
            ExperimentKind::ExpansionFit => Payload::ExpansionFit(typed(value)?),
            ExperimentKind::Barriers => Payload::Barriers(typed(value)?),
            ExperimentKind::MetricScan => Payload::MetricScan(typed(value)?),
        })
    }
}

/// A validated experiment. Serializes to the normalized form that is hashed
/// into the output directory name; `out` is not part of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub ladder: Vec<usize>,
    pub payload: Payload,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: ExperimentKind,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    ladder: Option<Vec<usize>>,
    #[serde(default)]
    payload: serde_json::Value,
    #[serde(default)]
    out: Option<PathBuf>,
}

fn pointer_error<E: std::fmt::Display>(prefix: &str, e: serde_path_to_error::Error<E>) -> Error {
    let mut pointer = String::from(prefix);
    for seg in e.path().iter() {
        match seg {
            Segment::Seq { index } => pointer.push_str(&format!("/{index}")),
            Segment::Map { key } => {
                pointer.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1")))
            }
            Segment::Enum { variant } => pointer.push_str(&format!("/{variant}")),
            Segment::Unknown => pointer.push_str("/?"),
        }
    }
    if pointer.is_empty() {
        pointer.push('/');
    }
    Error::config(pointer, e.inner().to_string())
}

/// Smallest node count a ladder entry may have.
pub const MIN_NODES: usize = 9;

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            seed: 0,
            ladder: kind.default_ladder(),
            payload: Payload::default_for(kind),
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawConfig =
            serde_path_to_error::deserialize(de).map_err(|e| pointer_error("", e))?;
        let payload = match raw.payload {
            serde_json::Value::Null => serde_json::Value::Object(Default::default()),
            v => v,
        };
        let config = ExperimentConfig {
            kind: raw.kind,
            seed: raw.seed,
            ladder: raw.ladder.unwrap_or_else(|| raw.kind.default_ladder()),
            payload: Payload::parse(raw.kind, payload)?,
            out: raw.out,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &n) in self.ladder.iter().enumerate() {
            if n < MIN_NODES {
                return Err(Error::config(
                    format!("/ladder/{i}"),
                    format!("need at least {MIN_NODES} nodes"),
                ));
            }
        }
        let needs_ladder = !self.kind.default_ladder().is_empty();
        if needs_ladder && self.ladder.is_empty() {
            return Err(Error::config("/ladder", "must not be empty"));
        }
        let positive = |v: f64, field: &str| -> Result<()> {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(
                    format!("/payload/{field}"),
                    "must be positive",
                ))
            }
        };
        match &self.payload {
            Payload::MaSolve(p) => {
                positive(p.tol, "tol")?;
                if p.alpha < 0.0 {
                    return Err(Error::config("/payload/alpha", "must be non-negative"));
                }
            }
            Payload::Grushin(p) => {
                positive(p.fit_radius, "fit_radius")?;
                positive(p.tol, "tol")?;
            }
            Payload::Eigen(p) => {
                positive(p.radius, "radius")?;
                positive(p.tol, "tol")?;
                positive(p.factor_band, "factor_band")?;
            }
            Payload::Pipeline(p) => {
                positive(p.radius, "radius")?;
                positive(p.half_width, "half_width")?;
                positive(p.height, "height")?;
            }
            Payload::ExpansionFit(p) => {
                positive(p.tmax, "tmax")?;
                if p.alphas.is_empty() {
                    return Err(Error::config("/payload/alphas", "must not be empty"));
                }
            }
            Payload::Barriers(p) => positive(p.eps0, "eps0")?,
            Payload::MetricScan(p) => {
                if p.samples == 0 {
                    return Err(Error::config("/payload/samples", "must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the normalized config, truncated to 16 digits.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let c =
            ExperimentConfig::from_json(r#"{"kind": "eigen", "payload": {"tol": 1e-5}}"#).unwrap();
        assert_eq!(c.ladder, vec![129, 257]);
        match c.payload {
            Payload::Eigen(p) => {
                assert_eq!(p.tol, 1e-5);
                assert_eq!(p.max_outer, 300);
            }
            _ => panic!("wrong payload"),
        }
    }

    #[test]
    fn schema_errors_carry_pointer() {
        let e = ExperimentConfig::from_json(r#"{"kind": "ma-solve", "payload": {"alpha": "one"}}"#)
            .unwrap_err();
        assert!(
            matches!(e, Error::Config { ref pointer, .. } if pointer == "/payload/alpha"),
            "{e}"
        );
        let e =
            ExperimentConfig::from_json(r#"{"kind": "ma-solve", "ladder": [33, 4]}"#).unwrap_err();
        assert!(
            matches!(e, Error::Config { ref pointer, .. } if pointer == "/ladder/1"),
            "{e}"
        );
        let e =
            ExperimentConfig::from_json(r#"{"kind": "barriers", "payload": {"suite": "some"}}"#)
                .unwrap_err();
        assert!(
            matches!(e, Error::Config { ref pointer, .. } if pointer == "/payload/suite"),
            "{e}"
        );
        let e = ExperimentConfig::from_json(r#"{"kind": "metric", "seed": 1}"#).unwrap_err();
        assert!(
            matches!(e, Error::Config { ref pointer, .. } if pointer == "/kind"),
            "{e}"
        );
    }

    #[test]
    fn hash_ignores_output_location_and_spelling() {
        let a = ExperimentConfig::from_json(r#"{"kind": "barriers", "out": "x"}"#).unwrap();
        let b = ExperimentConfig::from_json(
            r#"{"kind": "barriers", "payload": {"suite": "all", "eps0": 0.05}}"#,
        )
        .unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::from_json(r#"{"kind": "barriers", "seed": 1}"#).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
