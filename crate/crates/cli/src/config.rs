//! Run configuration: a single JSON document.

use std::path::{Path, PathBuf};

use g2core::deform::{v7_deform, DeformError};
use g2core::fieldexpr::{parse, Expr, ParseError};
use g2core::fields::{read_snapshot, tabulate_covector, tabulate_scalar, FieldError, GridSpec, StructureField, TensorField};
use g2core::g2algebra::canonical_phi0;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SUITES: [&str; 5] = ["triple_path", "ricci", "consistency", "convergence", "negative_control"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("in {field}: {source}")]
    Expr { field: String, source: ParseError },
    #[error("unknown suite {0:?}; known suites are {SUITES:?}")]
    UnknownSuite(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_axes")]
    pub active_axes: Vec<usize>,
    #[serde(default = "default_points")]
    pub points_per_axis: usize,
    /// One period for all active axes.
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default = "default_order")]
    pub fd_order: usize,
}

fn default_axes() -> Vec<usize> {
    vec![1]
}
fn default_points() -> usize {
    256
}
fn default_period() -> f64 {
    1.0
}
fn default_order() -> usize {
    4
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            active_axes: default_axes(),
            points_per_axis: default_points(),
            period: default_period(),
            fd_order: default_order(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StructureConfig {
    #[default]
    Flat,
    /// φ = f³φ₀.
    Conformal { f: String },
    /// φ_base + v⌟ψ_base with v given by its seven upper components.
    V7 {
        v: [String; 7],
        #[serde(default)]
        base: Box<StructureConfig>,
    },
    /// A rank-3 G2F1 snapshot; its own grid replaces the configured one.
    File { path: PathBuf },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub structure: StructureConfig,
    #[serde(default)]
    pub suites: Vec<String>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError::Json { line: e.line(), column: e.column(), message: e.to_string() })?;
        // relative snapshot paths are taken from the config's directory
        if let Some(dir) = path.parent() {
            cfg.structure.rebase(dir);
        }
        Ok(cfg)
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        let g = &self.grid;
        Ok(GridSpec::new(g.active_axes.clone(), g.points_per_axis, g.period, g.fd_order)?)
    }

    /// Suites to run, all of them when the list is empty.
    pub fn suites(&self) -> Result<Vec<String>, ConfigError> {
        if self.suites.is_empty() {
            return Ok(SUITES.iter().map(|s| s.to_string()).collect());
        }
        for s in &self.suites {
            if !SUITES.contains(&s.as_str()) {
                return Err(ConfigError::UnknownSuite(s.clone()));
            }
        }
        Ok(self.suites.clone())
    }

    /// Parse every expression so errors surface before any computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.suites()?;
        self.structure.exprs("structure")
    }
}

fn expr(field: &str, text: &str) -> Result<Expr, ConfigError> {
    parse(text).map_err(|source| ConfigError::Expr { field: field.into(), source })
}

fn v_exprs(v: &[String; 7], at: &str) -> Result<Vec<Expr>, ConfigError> {
    v.iter().enumerate().map(|(k, s)| expr(&format!("{at}.v[{}]", k + 1), s)).collect()
}

/// What a structure was built from, kept for the checks that have closed forms.
pub enum Origin {
    Flat,
    Conformal { f: TensorField },
    V7 { base: StructureField, v: TensorField },
    File,
}

pub struct Built {
    pub field: StructureField,
    pub origin: Origin,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Deform(#[from] DeformError),
}

impl From<FieldError> for BuildError {
    fn from(e: FieldError) -> Self {
        BuildError::Config(ConfigError::Field(e))
    }
}

impl StructureConfig {
    fn rebase(&mut self, dir: &Path) {
        match self {
            StructureConfig::File { path } if path.is_relative() => *path = dir.join(&*path),
            StructureConfig::V7 { base, .. } => base.rebase(dir),
            _ => {}
        }
    }

    /// Parse every expression, including those of nested bases.
    fn exprs(&self, at: &str) -> Result<(), ConfigError> {
        match self {
            StructureConfig::Conformal { f } => expr(&format!("{at}.f"), f).map(|_| ()),
            StructureConfig::V7 { v, base } => {
                v_exprs(v, at)?;
                base.exprs(&format!("{at}.base"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_file(&self) -> bool {
        matches!(self, StructureConfig::File { .. })
    }

    pub fn build(&self, spec: &GridSpec) -> Result<Built, BuildError> {
        match self {
            StructureConfig::Flat => Ok(Built { field: StructureField::flat(spec), origin: Origin::Flat }),
            StructureConfig::Conformal { f } => {
                let f = tabulate_scalar(spec, &expr("structure.f", f)?)?;
                let phi = TensorField::from_fn(spec, |p, _| canonical_phi0() * f.scalar_at(p).powi(3));
                Ok(Built { field: StructureField::from_phi(phi)?, origin: Origin::Conformal { f } })
            }
            StructureConfig::V7 { v, base } => {
                let es = v_exprs(v, "structure")?;
                let base = base.build(spec)?.field;
                let v = tabulate_covector(spec, &es)?;
                let field = v7_deform(&base, &v).deformed().clone();
                Ok(Built { field, origin: Origin::V7 { base, v } })
            }
            StructureConfig::File { path } => {
                let file = std::fs::File::open(path).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
                let phi = read_snapshot(std::io::BufReader::new(file))?;
                if phi.rank() != 3 {
                    return Err(ConfigError::Invalid(format!("{} holds a rank-{} field, not a 3-form", path.display(), phi.rank())).into());
                }
                Ok(Built { field: StructureField::from_phi(phi)?, origin: Origin::File })
            }
        }
    }
}
