//! Experiment description, read from and written to TOML.
//!
//! ```toml
//! name = "sf-fourier"
//! seed = 7
//!
//! [graph]
//! family = "scale_free"
//! n = 1000
//! max_degree = 71
//!
//! [walk]
//! kind = "quantum"
//! coin = "fourier"
//!
//! [run]
//! horizon = 100000
//! transient = 2000
//!
//! [analysis]
//! m = [0.0, 1.0, 2.0, 3.0]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qxe::graphs::{build_periodic_lattice, build_ring, build_scale_free_capped, Graph};
use qxe::operators::CoinSpec;

use crate::error::{Result, RunnerError};
use crate::seeds::derive_seed;

pub const DEFAULT_MASTER_SEED: u64 = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Master seed; every random stream of the run is derived from it.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub graph: GraphSpec,
    pub walk: WalkSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
}

fn default_seed() -> u64 {
    DEFAULT_MASTER_SEED
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Ring {
        n: usize,
    },
    Lattice {
        sides: Vec<usize>,
    },
    ScaleFree {
        n: usize,
        #[serde(default = "default_exponent")]
        exponent: f64,
        #[serde(default = "default_min_degree")]
        min_degree: usize,
        /// Defaults to `floor(sqrt(n))`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_degree: Option<usize>,
        /// Overrides the seed derived from the master seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    EdgeList {
        path: PathBuf,
    },
}

fn default_exponent() -> f64 {
    2.3
}

fn default_min_degree() -> usize {
    2
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coin {
    #[default]
    Fourier,
    Grover,
}

impl Coin {
    pub fn spec(self) -> CoinSpec {
        match self {
            Coin::Fourier => CoinSpec::fourier(),
            Coin::Grover => CoinSpec::Grover,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    /// Equal amplitude on the outgoing arcs of `start`.
    #[default]
    Localized,
    /// Equal amplitude on every arc.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WalkSpec {
    Quantum {
        #[serde(default)]
        coin: Coin,
        #[serde(default)]
        start: usize,
        #[serde(default)]
        initial: Initial,
        /// Random phase on every arc at every step.
        #[serde(default)]
        phase_noise: bool,
    },
    Classical {
        walkers: usize,
        #[serde(default)]
        start: usize,
    },
}

impl WalkSpec {
    pub fn label(&self) -> String {
        match self {
            WalkSpec::Quantum { coin, phase_noise: true, .. } => format!("quantum:{coin:?}+phase-noise").to_lowercase(),
            WalkSpec::Quantum { coin, .. } => format!("quantum:{coin:?}").to_lowercase(),
            WalkSpec::Classical { walkers, .. } => format!("classical:W={walkers}"),
        }
    }

    pub fn start(&self) -> usize {
        match self {
            WalkSpec::Quantum { start, .. } | WalkSpec::Classical { start, .. } => *start,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub horizon: usize,
    pub transient: usize,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec { horizon: 100_000, transient: 2000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    #[default]
    Probability,
    Phase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSpec {
    pub i: usize,
    pub j: usize,
    #[serde(default)]
    pub observable: Observable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default = "default_ms")]
    pub m: Vec<f64>,
    /// Vertices whose series are written out; empty means all.
    #[serde(default)]
    pub vertices: Vec<usize>,
    #[serde(default)]
    pub record_series: bool,
    #[serde(default)]
    pub record_phase: bool,
    #[serde(default)]
    pub correlations: Vec<CorrelationSpec>,
    #[serde(default = "default_tau_max")]
    pub tau_max: usize,
    /// Mean-subtracted, variance-normalised correlations when true.
    #[serde(default = "default_true")]
    pub normalized: bool,
    /// Threshold multiplier for recurrence statistics; off when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recurrence_m: Option<f64>,
    /// Batches for batch-means standard errors; 0 turns them off.
    #[serde(default)]
    pub batches: usize,
    /// Degree profiles and their power-law fits for every m.
    #[serde(default)]
    pub profiles: bool,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            m: default_ms(),
            vertices: Vec::new(),
            record_series: false,
            record_phase: false,
            correlations: Vec::new(),
            tau_max: default_tau_max(),
            normalized: true,
            recurrence_m: None,
            batches: 0,
            profiles: false,
        }
    }
}

fn default_ms() -> Vec<f64> {
    vec![0.0, 1.0, 2.0, 3.0]
}

fn default_tau_max() -> usize {
    200
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| RunnerError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical TOML rendering, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex(&Sha256::digest(self.to_toml()?.as_bytes())))
    }

    /// Checks everything that does not need the graph; all problems are
    /// reported together.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.seed > i64::MAX as u64 {
            bad.push(format!("seed: {} does not fit a signed 64-bit integer", self.seed));
        }
        if self.name.trim().is_empty() {
            bad.push("name: must not be empty".to_string());
        }
        match &self.graph {
            GraphSpec::Ring { n } if *n < 3 => bad.push(format!("graph.n: ring needs at least 3 vertices, got {n}")),
            GraphSpec::Lattice { sides } if sides.is_empty() || sides.iter().any(|&s| s < 3) => {
                bad.push(format!("graph.sides: need at least one side and every side >= 3, got {sides:?}"))
            }
            GraphSpec::ScaleFree { n, exponent, min_degree, max_degree, .. } => {
                if *n < 4 {
                    bad.push(format!("graph.n: need at least 4 vertices, got {n}"));
                }
                if !(*exponent > 2.0) {
                    bad.push(format!("graph.exponent: must exceed 2, got {exponent}"));
                }
                if *min_degree < 2 {
                    bad.push(format!("graph.min_degree: must be at least 2, got {min_degree}"));
                }
                if let Some(cap) = max_degree {
                    if cap < min_degree {
                        bad.push(format!("graph.max_degree: {cap} is below min_degree {min_degree}"));
                    }
                }
            }
            _ => {}
        }
        if let WalkSpec::Classical { walkers: 0, .. } = self.walk {
            bad.push("walk.walkers: need at least one walker".into());
        }
        if self.run.horizon <= self.run.transient {
            bad.push(format!("run.horizon: {} must exceed run.transient {}", self.run.horizon, self.run.transient));
        }
        let a = &self.analysis;
        if a.m.is_empty() {
            bad.push("analysis.m: need at least one threshold multiplier".into());
        }
        for m in a.m.iter().chain(&a.recurrence_m) {
            if !(*m >= 0.0 && m.is_finite()) {
                bad.push(format!("analysis.m: multipliers must be finite and >= 0, got {m}"));
            }
        }
        if a.record_phase && !matches!(self.walk, WalkSpec::Quantum { .. }) {
            bad.push("analysis.record_phase: phases exist only for quantum walks".into());
        }
        if a.correlations.iter().any(|c| c.observable == Observable::Phase) && !matches!(self.walk, WalkSpec::Quantum { .. }) {
            bad.push("analysis.correlations: phase correlations need a quantum walk".into());
        }
        if !a.correlations.is_empty() && 2 * a.tau_max >= self.run.horizon.saturating_sub(self.run.transient) {
            bad.push(format!("analysis.tau_max: {} too long for {} samples", a.tau_max, self.run.horizon.saturating_sub(self.run.transient)));
        }
        if a.batches == 1 || (a.batches > 1 && self.run.horizon.saturating_sub(self.run.transient) < 2 * a.batches) {
            bad.push(format!("analysis.batches: {} batches do not fit the run", a.batches));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(RunnerError::Invalid(bad))
        }
    }

    /// Seed of a generated graph without an explicit seed.
    pub fn graph_seed(&self) -> u64 {
        derive_seed(self.seed, &format!("{}/graph", self.name))
    }

    /// Seed of the walker or phase-noise stream.
    pub fn walk_seed(&self) -> u64 {
        derive_seed(self.seed, &format!("{}/walk", self.name))
    }

    /// Builds the graph and checks the vertex references against it.
    pub fn build_graph(&self) -> Result<Graph> {
        let g = match &self.graph {
            GraphSpec::Ring { n } => build_ring(*n)?,
            GraphSpec::Lattice { sides } => build_periodic_lattice(sides)?,
            GraphSpec::ScaleFree { n, exponent, min_degree, max_degree, seed } => {
                let cap = max_degree.unwrap_or(((*n as f64).sqrt().floor() as usize).max(*min_degree));
                let seed = seed.unwrap_or_else(|| self.graph_seed());
                build_scale_free_capped(*n, *exponent, *min_degree, cap, seed)?
            }
            GraphSpec::EdgeList { path } => Graph::load(path)?,
        };
        let n = g.vertex_count();
        let mut bad = Vec::new();
        if self.walk.start() >= n {
            bad.push(format!("walk.start: vertex {} not in a graph of {n}", self.walk.start()));
        }
        for &v in &self.analysis.vertices {
            if v >= n {
                bad.push(format!("analysis.vertices: vertex {v} not in a graph of {n}"));
            }
        }
        for c in &self.analysis.correlations {
            if c.i >= n || c.j >= n {
                bad.push(format!("analysis.correlations: pair ({}, {}) not in a graph of {n}", c.i, c.j));
            }
        }
        if bad.is_empty() {
            Ok(g)
        } else {
            Err(RunnerError::Invalid(bad))
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
