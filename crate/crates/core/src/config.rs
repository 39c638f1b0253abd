//! Run configuration: a single JSON document naming a fixture from the
//! built-in registry plus overrides (chart sampling, model parameters,
//! tolerances, seed, output paths).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures::{fixture, Fixture, FixtureParams};
use crate::models::{LieAlgebra, LieConnection, ModelSpace};
use crate::tensor::{tol, Bilinear};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Named field bundle from the built-in registry.
    pub fixture: String,
    /// Chart sampling override (bounds come from the fixture).
    #[serde(default)]
    pub samples: Option<Vec<usize>>,
    /// Scale on the second-fundamental-form data; 1.0 is compatible.
    #[serde(default = "one")]
    pub alpha_scale: f64,
    /// Target-model override; must stay dimensionally consistent.
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub check: CheckConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Max residual allowed by `check` and by the solver's gate.
    #[serde(default = "gate")]
    pub residual_gate: f64,
    /// Frame drift allowed per integration step.
    #[serde(default = "drift")]
    pub frame_drift: f64,
}

fn gate() -> f64 {
    tol::SOLVER_GATE
}

fn drift() -> f64 {
    tol::FRAME_DRIFT
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { residual_gate: gate(), frame_drift: drift() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    /// Start node (multi-index); chart center when absent.
    #[serde(default)]
    pub start: Option<Vec<usize>>,
    /// Integration substeps per grid edge.
    #[serde(default = "one_usize")]
    pub step_refine: usize,
    /// Solve even when the residual gate fails.
    #[serde(default)]
    pub force: bool,
    /// Start from the fixture's exact-matching initial state when it has one.
    #[serde(default = "yes")]
    pub use_fixture_initial_state: bool,
}

fn one_usize() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { start: None, step_refine: 1, force: false, use_fixture_initial_state: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default = "eight")]
    pub random_tuples_per_node: usize,
    #[serde(default = "one_usize")]
    pub node_stride: usize,
}

fn eight() -> usize {
    8
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { random_tuples_per_node: 8, node_stride: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; current directory when absent.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Write the OBJ mesh (3-dimensional targets only).
    #[serde(default = "yes")]
    pub obj: bool,
    /// Write the CSV table.
    #[serde(default = "yes")]
    pub csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, obj: true, csv: true }
    }
}

/// Serializable model selection mirroring the catalog.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    SpaceForm { curvature: f64, dim: usize, index: usize },
    ComplexSpaceForm { curvature: f64, dim: usize, index: usize },
    LieGroup { algebra: NamedAlgebra, #[serde(default)] flat_connection: bool },
    Ekappatau { kappa: f64, tau: f64 },
    Product { factors: Vec<ModelConfig> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedAlgebra {
    Heisenberg,
    So3,
    Abelian(usize),
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpace> {
        Ok(match self {
            ModelConfig::SpaceForm { curvature, dim, index } => {
                ModelSpace::SpaceForm { curvature: *curvature, dim: *dim, index: *index }
            }
            ModelConfig::ComplexSpaceForm { curvature, dim, index } => {
                ModelSpace::ComplexSpaceForm { curvature: *curvature, dim: *dim, index: *index }
            }
            ModelConfig::LieGroup { algebra, flat_connection } => {
                let alg = match algebra {
                    NamedAlgebra::Heisenberg => LieAlgebra::heisenberg(),
                    NamedAlgebra::So3 => LieAlgebra::so3(),
                    NamedAlgebra::Abelian(n) => LieAlgebra::abelian(*n),
                };
                let dim = alg.dim();
                ModelSpace::LieGroupLeftInvariant {
                    algebra: alg,
                    inner: Bilinear::euclidean(dim),
                    connection: if *flat_connection {
                        LieConnection::Flat
                    } else {
                        LieConnection::LeviCivita
                    },
                }
            }
            ModelConfig::Ekappatau { kappa, tau } => {
                ModelSpace::EKappaTau { kappa: *kappa, tau: *tau }
            }
            ModelConfig::Product { factors } => ModelSpace::Product(
                factors.iter().map(|f| f.build()).collect::<Result<Vec<_>>>()?,
            ),
        })
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Materialize the configured fixture, applying overrides and validating
    /// dimensional consistency.
    pub fn build_fixture(&self) -> Result<Fixture> {
        let params = FixtureParams { alpha_scale: self.alpha_scale, samples: self.samples.clone() };
        let mut f = fixture(&self.fixture, &params)?;
        if let Some(mc) = &self.model {
            let model = mc.build()?;
            if model.dim() != f.data.total_rank() {
                return Err(Error::Config(format!(
                    "model dim {} but n + k = {} (fixture '{}')",
                    model.dim(),
                    f.data.total_rank(),
                    f.name
                )));
            }
            // replacing the model invalidates the fixture's exact solution
            f.model = model;
            f.exact = None;
            f.initial_state = None;
        }
        if let Some(s) = &self.samples {
            if s.len() != f.data.grid.dim() {
                return Err(Error::Config("samples length must match chart dimension".into()));
            }
        }
        Ok(f)
    }
}
