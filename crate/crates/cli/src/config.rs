//! Experiment configuration: TOML schema, validation with key paths, and
//! the canonical config hash that keys the orbit cache.
//!
//! The hash covers only the `[joining]` section, so one enumerated orbit
//! serves every experiment over the same joining. It is computed over a
//! canonical JSON rendering (sorted keys, fixed float formatting) and is
//! therefore stable under key reordering in the source document.

use dirlim::group::{AxisSpec, CapPolicy, SchottkyRep};
use dirlim::hyperbolic::{BoundaryDir, Isometry};
use dirlim::joining::SelfJoining;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid value at {path}: {message}")]
    Invalid { path: String, message: String },
    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),
    #[error("group construction failed for factor {factor}: {message}")]
    Group { factor: usize, message: String },
}

/// Top-level experiment configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema: u32,
    #[serde(default)]
    pub name: String,
    pub joining: JoiningSpec,
    #[serde(default)]
    pub run: RunParams,
    pub experiment: ExperimentSpec,
}

fn default_schema() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JoiningSpec {
    pub generators: usize,
    pub factors: Vec<FactorSpec>,
    #[serde(default)]
    pub caps: CapSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorSpec {
    #[serde(default)]
    pub label: String,
    /// Spatial dimension `n` of the hyperbolic factor `H^n`.
    pub dim: usize,
    pub generators: Vec<GeneratorSpec>,
}

/// One generator: either an axis triple or a raw Lorentz matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_minus: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_plus: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapSpec {
    #[serde(default = "default_margin")]
    pub margin_min: f64,
    /// Fixed common cap radius; auto-tuned when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

fn default_margin() -> f64 {
    dirlim::group::DEFAULT_CAP_MARGIN
}

impl Default for CapSpec {
    fn default() -> Self {
        CapSpec { margin_min: default_margin(), radius: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunParams {
    #[serde(default = "default_depth")]
    pub max_word_length: usize,
    /// 0 means all available cores.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Compute per-factor fixed points during enumeration.
    #[serde(default = "default_true")]
    pub jordan: bool,
}

fn default_depth() -> usize {
    12
}

fn default_seed() -> u64 {
    7
}

fn default_true() -> bool {
    true
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            max_word_length: default_depth(),
            workers: 0,
            seed: default_seed(),
            jordan: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub params: ExperimentParams,
}

/// Experiment-specific knobs; unused fields are ignored by each experiment.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct ExperimentParams {
    /// Primary direction (normalized on load when necessary).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    /// Secondary direction for two-direction experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_second: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow_r: Option<f64>,
    /// Truncation parameter; the depth-coupled default applies when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<usize>,
    /// Randomized-case count for the geometry experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cases: Option<usize>,
    /// Box-counting ladder: largest scale, ratio, count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_count: Option<usize>,
    /// Local-profile parameter range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_hi: Option<f64>,
    /// Conjugacy-dichotomy mode: "generic", "conjugate", or "strict-gap".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dichotomy: Option<String>,
}

pub const EXPERIMENTS: &[&str] = &[
    "geometry",
    "pingpong",
    "theorem-m0",
    "conjugacy",
    "limit-cone",
    "growth-indicator",
    "symmetry",
    "tangent-form",
    "ps-measure",
    "local-scaling",
    "directional-dimension",
    "covering",
    "determinism",
];

/// Parse and validate a configuration file. Validation errors name the
/// offending key path; a non-unit direction is normalized and reported in
/// the returned warnings.
pub fn parse_config(path: &std::path::Path) -> Result<(ExperimentConfig, Vec<String>), ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<(ExperimentConfig, Vec<String>), ConfigError> {
    let mut config: ExperimentConfig = toml::from_str(text)?;
    let warnings = validate(&mut config)?;
    Ok((config, warnings))
}

pub fn validate(config: &mut ExperimentConfig) -> Result<Vec<String>, ConfigError> {
    let mut warnings = Vec::new();
    let invalid = |path: &str, message: &str| ConfigError::Invalid {
        path: path.to_string(),
        message: message.to_string(),
    };
    if config.joining.factors.is_empty() {
        return Err(invalid("joining.factors", "need at least one factor"));
    }
    if config.joining.generators == 0 {
        return Err(invalid("joining.generators", "need at least one generator"));
    }
    for (fi, factor) in config.joining.factors.iter().enumerate() {
        if factor.dim < 2 {
            return Err(invalid(&format!("factors[{fi}].dim"), "factor dimension must be >= 2"));
        }
        if factor.generators.len() != config.joining.generators {
            return Err(invalid(
                &format!("factors[{fi}].generators"),
                &format!(
                    "expected {} generators, found {}",
                    config.joining.generators,
                    factor.generators.len()
                ),
            ));
        }
        for (gi, g) in factor.generators.iter().enumerate() {
            let path = format!("factors[{fi}].generators[{gi}]");
            match (&g.matrix, &g.axis_minus, &g.axis_plus, g.length) {
                (Some(m), None, None, None) => {
                    let d = factor.dim + 1;
                    if m.len() != d || m.iter().any(|row| row.len() != d) {
                        return Err(invalid(
                            &format!("{path}.matrix"),
                            &format!("expected a {d}x{d} matrix"),
                        ));
                    }
                }
                (None, Some(minus), Some(plus), Some(length)) => {
                    if minus.len() != factor.dim {
                        return Err(invalid(
                            &format!("{path}.axis_minus"),
                            &format!("expected {} coordinates", factor.dim),
                        ));
                    }
                    if plus.len() != factor.dim {
                        return Err(invalid(
                            &format!("{path}.axis_plus"),
                            &format!("expected {} coordinates", factor.dim),
                        ));
                    }
                    if length <= 0.0 {
                        return Err(invalid(
                            &format!("{path}.length"),
                            "axis length must be positive",
                        ));
                    }
                }
                (None, _, _, _) => {
                    return Err(invalid(
                        &path,
                        "generator needs either matrix or axis_minus/axis_plus/length",
                    ));
                }
                (Some(_), _, _, _) => {
                    return Err(invalid(&path, "generator has both matrix and axis fields"));
                }
            }
        }
    }
    if config.joining.caps.margin_min <= 0.0 {
        return Err(invalid("joining.caps.margin_min", "margin must be positive"));
    }
    if config.run.max_word_length == 0 {
        return Err(invalid("run.max_word_length", "depth must be >= 1"));
    }
    if !EXPERIMENTS.contains(&config.experiment.name.as_str()) {
        return Err(ConfigError::UnknownExperiment(config.experiment.name.clone()));
    }
    // normalize directions, flagging the adjustment
    let k = config.joining.factors.len();
    for (field, dir) in [
        ("experiment.params.u", &mut config.experiment.params.u),
        ("experiment.params.u_second", &mut config.experiment.params.u_second),
    ] {
        if let Some(u) = dir {
            if u.len() != k {
                return Err(invalid(field, &format!("expected {k} components")));
            }
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= 0.0 {
                return Err(invalid(field, "direction must be nonzero"));
            }
            if (norm - 1.0).abs() > 1e-12 {
                for x in u.iter_mut() {
                    *x /= norm;
                }
                warnings.push(format!("{field}: normalized (input norm {norm:.6})"));
            }
        }
    }
    Ok(warnings)
}

/// Build the self-joining of a validated configuration.
pub fn build_joining(config: &ExperimentConfig) -> Result<SelfJoining, ConfigError> {
    let mut reps = Vec::with_capacity(config.joining.factors.len());
    let mut labels = Vec::new();
    for (fi, factor) in config.joining.factors.iter().enumerate() {
        let policy = match config.joining.caps.radius {
            Some(r) => CapPolicy::Fixed(r),
            None => CapPolicy::Auto { margin_min: config.joining.caps.margin_min },
        };
        let rep = if factor.generators.iter().all(|g| g.matrix.is_some()) {
            let images = factor
                .generators
                .iter()
                .map(|g| {
                    let m = g.matrix.as_ref().expect("validated");
                    let d = factor.dim + 1;
                    let flat: Vec<f64> = m.iter().flatten().copied().collect();
                    Isometry::new(nalgebra_matrix(d, &flat)).map_err(|e| ConfigError::Group {
                        factor: fi,
                        message: e.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            SchottkyRep::new(factor.dim, images, policy)
        } else {
            let axes = factor
                .generators
                .iter()
                .map(|g| {
                    Ok(AxisSpec {
                        minus: BoundaryDir::from_slice(g.axis_minus.as_ref().expect("validated"))
                            .map_err(|e| ConfigError::Group {
                                factor: fi,
                                message: e.to_string(),
                            })?,
                        plus: BoundaryDir::from_slice(g.axis_plus.as_ref().expect("validated"))
                            .map_err(|e| ConfigError::Group {
                                factor: fi,
                                message: e.to_string(),
                            })?,
                        length: g.length.expect("validated"),
                    })
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;
            SchottkyRep::from_axes(factor.dim, &axes, policy)
        }
        .map_err(|e| ConfigError::Group { factor: fi, message: e.to_string() })?;
        reps.push(rep);
        labels.push(if factor.label.is_empty() {
            format!("factor{}", fi + 1)
        } else {
            factor.label.clone()
        });
    }
    SelfJoining::new(reps, labels)
        .map_err(|e| ConfigError::Group { factor: 0, message: e.to_string() })
}

/// Canonical JSON with sorted keys and shortest-roundtrip floats.
fn canonical_json(value: &serde_json::Value, out: &mut String) {
    match value {
        serde_json::Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{key:?}:"));
                canonical_json(&map[*key], out);
            }
            out.push('}');
        }
        serde_json::Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canonical_json(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Hash of the joining subsection only: run parameters and experiment choice
/// do not invalidate a cached orbit. (The orbit depth and Jordan flag are
/// checked separately against the cache header.)
pub fn config_hash(config: &ExperimentConfig) -> String {
    let value = serde_json::to_value(&config.joining).expect("joining serializes");
    let mut canon = String::new();
    canonical_json(&value, &mut canon);
    let digest = Sha256::digest(canon.as_bytes());
    let mut hex = String::with_capacity(16);
    for b in digest.iter().take(8) {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

fn nalgebra_matrix(d: usize, flat: &[f64]) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(d, d, flat)
}
