//! Run configuration: a TOML file with flag overrides on top.
//!
//! ```toml
//! [paths]
//! playerdb = "playerdb.json"
//! resultdb = "resultdb.json"
//! manifest = "manifest.json"
//! tags = "tags.json"
//! trusted = "trusted.json"
//! tasks = "tasks.json"
//!
//! [solver]
//! tolerance = 1e-10
//! max_iterations = 50000
//!
//! [detector]
//! theta_accept = 1
//! smoothing = 1e-3
//!
//! [task]
//! n = 3
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use skywatch_core::rating::{DetectorConfig, SolverConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub playerdb: PathBuf,
    pub resultdb: PathBuf,
    pub manifest: PathBuf,
    pub tags: PathBuf,
    pub trusted: PathBuf,
    pub tasks: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            playerdb: "playerdb.json".into(),
            resultdb: "resultdb.json".into(),
            manifest: "manifest.json".into(),
            tags: "tags.json".into(),
            trusted: "trusted.json".into(),
            tasks: "tasks.json".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub theta_accept: usize,
    pub smoothing: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorConfig::default();
        Self {
            theta_accept: d.theta_accept,
            smoothing: d.smoothing,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    /// Task half-size: tasks hold n tagged plus n fresh images.
    pub n: usize,
}

impl Default for TaskSection {
    fn default() -> Self {
        Self { n: 3 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub solver: SolverSection,
    pub detector: DetectorSection,
    pub task: TaskSection,
}

impl RunConfig {
    /// Loads the given config file, or `skywatch.toml` when present, or
    /// the built-in defaults.
    pub fn load(explicit: Option<&Path>) -> anyhow::Result<Self> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => {
                let default = PathBuf::from("skywatch.toml");
                if !default.exists() {
                    return Ok(Self::default());
                }
                default
            }
        };
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.solver.tolerance > 0.0 && self.solver.tolerance.is_finite()) {
            bail!("solver.tolerance must be a positive finite number");
        }
        if self.solver.max_iterations == 0 {
            bail!("solver.max_iterations must be at least 1");
        }
        if !(self.detector.smoothing > 0.0 && self.detector.smoothing.is_finite()) {
            bail!("detector.smoothing must be a positive finite number");
        }
        if self.task.n == 0 {
            bail!("task.n must be at least 1");
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
        }
    }

    pub fn detector_config(&self, theta_override: Option<usize>) -> DetectorConfig {
        DetectorConfig {
            theta_accept: theta_override.unwrap_or(self.detector.theta_accept),
            smoothing: self.detector.smoothing,
            solver: self.solver_config(),
        }
    }
}
