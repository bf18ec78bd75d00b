use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimization::ObjectiveSpec;
use crate::runtime::RuntimeDistribution;
use crate::sim::VariantConfig;

/// Default Monte-Carlo replications for order statistics without a closed form.
pub const DEFAULT_MONTE_CARLO_SAMPLES: usize = 100_000;

/// One self-contained experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
    /// Worker threads for replications; `None` lets the runner decide.
    #[serde(default)]
    pub workers: Option<usize>,
    /// End of the common wallclock grid. Defaults to the shortest run.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Compute time per sample; an `m` sweep sets the shift of a
    /// shifted-exponential law to `m · unit_compute_time`.
    #[serde(default)]
    pub unit_compute_time: Option<f64>,
    #[serde(default = "default_mc")]
    pub monte_carlo_samples: usize,
    #[serde(default)]
    pub distribution: Option<RuntimeDistribution>,
    #[serde(default)]
    pub objective: Option<ObjectiveSpec>,
    #[serde(default)]
    pub variants: Vec<NamedVariant>,
    #[serde(default)]
    pub speedup_table: Option<SpeedupTableSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedVariant {
    pub name: String,
    #[serde(flatten)]
    pub config: VariantConfig,
}

/// Sync-over-async speed-up table across learner counts and laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupTableSpec {
    pub learners: Vec<usize>,
    pub distributions: Vec<RuntimeDistribution>,
    #[serde(default = "default_mc")]
    pub samples: usize,
}

fn one() -> usize {
    1
}

fn default_outputs() -> PathBuf {
    PathBuf::from("out")
}

fn default_grid_points() -> usize {
    200
}

fn default_mc() -> usize {
    DEFAULT_MONTE_CARLO_SAMPLES
}

pub(crate) fn is_filesystem_safe(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(vec![e.message().to_string()]))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| Error::Validation(vec![format!("{}: {e}", path.display())]))?;
        if cfg.outputs.is_relative() && !path.as_os_str().is_empty() {
            // outputs stay relative to the working directory
            cfg.outputs = cfg.outputs.clone();
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every violated constraint, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !is_filesystem_safe(&self.name) {
            v.push(format!("name {:?} is not filesystem-safe (use [A-Za-z0-9_.-])", self.name));
        }
        if self.replications == 0 {
            v.push("replications must be >= 1".into());
        }
        if self.grid_points < 2 {
            v.push("grid_points must be >= 2".into());
        }
        if self.workers == Some(0) {
            v.push("workers must be >= 1".into());
        }
        if let Some(h) = self.horizon {
            if !(h.is_finite() && h > 0.0) {
                v.push(format!("horizon must be > 0, got {h}"));
            }
        }
        if let Some(u) = self.unit_compute_time {
            if !(u.is_finite() && u > 0.0) {
                v.push(format!("unit_compute_time must be > 0, got {u}"));
            }
        }
        if self.monte_carlo_samples == 0 {
            v.push("monte_carlo_samples must be >= 1".into());
        }
        if self.variants.is_empty() && self.speedup_table.is_none() {
            v.push("nothing to run: no variants and no speedup_table".into());
        }
        if !self.variants.is_empty() {
            if self.distribution.is_none() {
                v.push("variants need a [distribution]".into());
            }
            if self.objective.is_none() {
                v.push("variants need an [objective]".into());
            }
        }
        let mut seen = HashSet::new();
        for nv in &self.variants {
            if !is_filesystem_safe(&nv.name) {
                v.push(format!("variant name {:?} is not filesystem-safe", nv.name));
            }
            if !seen.insert(nv.name.as_str()) {
                v.push(format!("duplicate variant name {:?}", nv.name));
            }
            if nv.name == "summary" || nv.name == "speedup" || nv.name == "sweep" {
                v.push(format!("variant name {:?} is reserved", nv.name));
            }
            for msg in nv.config.violations() {
                v.push(format!("variant {}: {msg}", nv.name));
            }
            if self.burn_in >= nv.config.iterations {
                v.push(format!(
                    "variant {}: burn_in {} must be below iterations {}",
                    nv.name, self.burn_in, nv.config.iterations
                ));
            }
        }
        if let Some(t) = &self.speedup_table {
            if t.learners.is_empty() || t.learners.contains(&0) {
                v.push("speedup_table.learners must be nonempty and >= 1".into());
            }
            if t.distributions.is_empty() {
                v.push("speedup_table.distributions must be nonempty".into());
            }
            if t.samples == 0 {
                v.push("speedup_table.samples must be >= 1".into());
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "demo"
replications = 2

[distribution]
kind = "exponential"
rate = 1.0

[objective]
objective = "quadratic"
dim = 2
eigenvalues = [1.0, 4.0]
sigma = 1.0

[[variants]]
name = "sync"
protocol = "k-sync"
learners = 4
wait_for = 4
iterations = 200
schedule = { kind = "fixed", eta = 0.05 }
"#;

    #[test]
    fn parses_minimal() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.variants[0].config.batch_size, 1);
        assert_eq!(cfg.grid_points, 200);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn lists_every_violation() {
        let text = MINIMAL
            .replace("name = \"demo\"", "name = \"bad/name\"")
            .replace("replications = 2", "replications = 0")
            .replace("wait_for = 4", "wait_for = 9");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        let v = cfg.violations();
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn invalid_distribution_is_a_validation_error() {
        let text = MINIMAL.replace("rate = 1.0", "rate = -1.0");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Validation(_))));
    }
}
