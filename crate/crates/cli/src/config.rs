//! Analysis configuration: a model source plus optional analysis blocks.

use oqho_core::classical::MIN_PATHS;
use oqho_core::cumulants::MAX_RATE_ORDER;
use oqho_core::fixtures;
use oqho_core::matfun::{QuadratureSpec, RMat};
use oqho_core::model::{ModelDocument, OqhoModel};
use oqho_core::quartic::WeightMatrix;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::output::to_json;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsGrid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl EpsGrid {
    /// `steps` evenly spaced points from `min` to `max`.
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.min],
            k => (0..k)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (k - 1) as f64)
                .collect(),
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return Err(CliError::InvalidConfig(format!(
                "eps_grid needs finite min <= max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.steps > 100_000 {
            return Err(CliError::InvalidConfig("eps_grid.steps above 100000".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSettings {
    pub h: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            h: 0.1,
            steps: 10,
            paths: 10_000,
            seed: 0,
        }
    }
}

impl McSettings {
    fn validate(&self) -> Result<(), CliError> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(CliError::InvalidConfig(format!("mc.h must be positive, got {}", self.h)));
        }
        if self.paths < MIN_PATHS {
            return Err(CliError::InvalidConfig(format!(
                "mc.paths must be at least {MIN_PATHS}, got {}",
                self.paths
            )));
        }
        Ok(())
    }
}

fn default_orders() -> Vec<usize> {
    vec![2, 3]
}

/// Raw configuration document.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub fixture: Option<String>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub theta: Option<Vec<Vec<f64>>>,
    #[serde(rename = "R")]
    pub energy: Option<Vec<Vec<f64>>>,
    #[serde(rename = "M")]
    pub coupling: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Pi", alias = "pi")]
    pub weight: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub theta_list: Vec<f64>,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    pub eps_grid: Option<EpsGrid>,
    pub mc: Option<McSettings>,
    pub tol: Option<f64>,
}

impl AnalysisConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::ConfigParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn from_file(path: &str) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.into(),
            source,
        })?;
        Self::from_json(&text)
    }

    fn has_inline_model(&self) -> bool {
        self.n.is_some()
            || self.m.is_some()
            || self.theta.is_some()
            || self.energy.is_some()
            || self.coupling.is_some()
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub fixture: Option<String>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

/// Where the model came from.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Fixture(String),
    Inline,
}

/// A validated configuration with the model built.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub source: ModelSource,
    pub document: ModelDocument,
    pub model: OqhoModel,
    pub weight: WeightMatrix,
    pub theta_list: Vec<f64>,
    pub orders: Vec<usize>,
    pub eps_grid: Option<EpsGrid>,
    pub mc: McSettings,
    pub spec: QuadratureSpec,
}

/// SHA-256 of the canonical JSON form of a named fixture, weight included.
pub fn fixture_digest(name: &str) -> Option<String> {
    let (model, weight) = fixtures::by_name(name)?;
    let text = to_json(&ModelDocument::from_parts(&model, Some(&weight)));
    Some(hex(&Sha256::digest(text.as_bytes())))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl AnalysisConfig {
    pub fn resolve(self, overrides: &Overrides) -> Result<Resolved, CliError> {
        let fixture = overrides.fixture.clone().or(self.fixture.clone());
        let (source, model, document, default_weight) = match fixture {
            Some(name) => {
                if self.has_inline_model() {
                    return Err(CliError::InvalidConfig(
                        "give either a fixture or inline model matrices, not both".into(),
                    ));
                }
                let (model, weight) = fixtures::by_name(&name).ok_or_else(|| {
                    CliError::InvalidConfig(format!(
                        "unknown fixture '{name}' (known: {}, {})",
                        fixtures::PAPER_EXAMPLE,
                        fixtures::TINY
                    ))
                })?;
                let document = ModelDocument::from_parts(&model, Some(&weight));
                (ModelSource::Fixture(name), model, document, weight)
            }
            None => {
                let missing = |field: &str| CliError::InvalidConfig(format!("model field '{field}' missing"));
                let document = ModelDocument {
                    n: self.n.ok_or_else(|| missing("n"))?,
                    m: self.m.ok_or_else(|| missing("m"))?,
                    theta: self.theta.clone().ok_or_else(|| missing("theta"))?,
                    energy: self.energy.clone().ok_or_else(|| missing("R"))?,
                    coupling: self.coupling.clone().ok_or_else(|| missing("M"))?,
                    weight: self.weight.clone(),
                };
                let model = document.build().map_err(CliError::ModelInvalid)?;
                let n = model.n();
                (ModelSource::Inline, model, document, RMat::identity(n, n))
            }
        };
        let n = model.n();
        let weight = match &self.weight {
            Some(rows) => oqho_core::model::matrix_from_rows("Pi", rows, n, n)
                .map_err(CliError::ModelInvalid)?,
            None => default_weight,
        };
        let weight = WeightMatrix::new_psd(weight).map_err(CliError::ModelInvalid)?;

        if let Some(bad) = self.theta_list.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(CliError::InvalidConfig(format!("theta_list entry {bad} must be finite and nonnegative")));
        }
        if let Some(bad) = self.orders.iter().find(|&&r| !(2..=MAX_RATE_ORDER).contains(&r)) {
            return Err(CliError::InvalidConfig(format!(
                "cumulant order {bad} outside 2..={MAX_RATE_ORDER}"
            )));
        }
        if let Some(grid) = &self.eps_grid {
            grid.validate()?;
        }
        let mut mc = self.mc.unwrap_or_default();
        if let Some(seed) = overrides.seed {
            mc.seed = seed;
        }
        mc.validate()?;
        let tol = overrides.tol.or(self.tol).unwrap_or(1e-10);
        let spec = QuadratureSpec::new(tol, tol);
        spec.validate()
            .map_err(|_| CliError::InvalidConfig(format!("tolerance {tol} must lie in (0, 1)")))?;

        Ok(Resolved {
            source,
            document,
            model,
            weight,
            theta_list: self.theta_list,
            orders: self.orders,
            eps_grid: self.eps_grid,
            mc,
            spec,
        })
    }
}
