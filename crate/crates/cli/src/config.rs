use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stiffflex::expand::MAX_ORDER;
use stiffflex::ProblemSource;

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSource,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Values of eps for `solve`; defaults to `[0.01]`.
    pub eps: Option<Vec<f64>>,
    /// Decreasing eps grid for `verify`; defaults to seven points from 1e-2 to 1e-5.
    pub grid: Option<Vec<f64>>,
    pub count: usize,
    pub order: usize,
    pub tol: f64,
    pub slope_tol: f64,
    pub cluster_tol: f64,
    /// Studies run by `verify`; empty means all.
    pub studies: Vec<Study>,
    /// Added to the first expansion coefficient (fault injection).
    pub nu1_offset: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            eps: None,
            grid: None,
            count: 4,
            order: 3,
            tol: stiffflex::perturbed::SOLVER_TOL,
            slope_tol: stiffflex::verify::SLOPE_TOL,
            cluster_tol: stiffflex::limit::DEFAULT_CLUSTER_TOL,
            studies: Vec::new(),
            nu1_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    Order,
    Eigenfunction,
    Angle,
    Projector,
    Bounds,
    H2,
    Containment,
}

pub const ALL_STUDIES: [Study; 7] = [
    Study::Order,
    Study::Eigenfunction,
    Study::Angle,
    Study::Projector,
    Study::Bounds,
    Study::H2,
    Study::Containment,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
    /// Points per side in sampled eigenfunction files; 0 disables them.
    pub samples: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            format: Format::Csv,
            samples: 0,
        }
    }
}

impl RunConfig {
    pub fn demo() -> Self {
        RunConfig {
            problem: stiffflex::ProblemSpec::demo().to_source(),
            run: RunSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| UsageError(format!("config: {e}")).into())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    /// Checks ranges and clamps the order, returning any warnings.
    pub fn validate(&mut self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.run.count == 0 {
            return Err(UsageError("count must be at least 1".into()).into());
        }
        if self.run.order > MAX_ORDER {
            warnings.push(format!("order {} exceeds the cap {MAX_ORDER}; clamped", self.run.order));
            self.run.order = MAX_ORDER;
        }
        if !(self.run.tol > 0.0 && self.run.tol < 1e-3) {
            return Err(UsageError(format!("tol must lie in (0, 1e-3), got {}", self.run.tol)).into());
        }
        for eps in [&self.run.eps, &self.run.grid].into_iter().flatten() {
            if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
                return Err(UsageError("eps values must lie in (0, 1]".into()).into());
            }
        }
        Ok(warnings)
    }

    /// SHA-256 of the canonical TOML form, output directory excluded so
    /// that identical runs written to different places carry the same hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
