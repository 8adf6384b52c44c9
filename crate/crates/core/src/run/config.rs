//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleSpec;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::solvers::SolverConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Corrector,
    ExcessDecay,
    Sublinearity,
    Caccioppoli,
    TwoScale,
    Qualitative,
    Liouville,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Corrector => "corrector",
            Self::ExcessDecay => "excess-decay",
            Self::Sublinearity => "sublinearity",
            Self::Caccioppoli => "caccioppoli",
            Self::TwoScale => "two-scale",
            Self::Qualitative => "qualitative",
            Self::Liouville => "liouville",
        }
    }
}

/// The torus: `n` points per axis over `length`, `n_t` steps of `h_ratio · h²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    pub n: usize,
    pub n_t: usize,
    #[serde(default = "one")]
    pub h_ratio: f64,
    #[serde(default = "one")]
    pub length: f64,
}

fn one() -> f64 {
    1.0
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid<f64>> {
        if !(self.h_ratio > 0.0 && self.length > 0.0) {
            return Err(Error::Config("h_ratio and length must be positive".into()));
        }
        Grid::parabolic(self.d, self.n, self.n_t, self.length, self.h_ratio)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: Experiment,
    /// Cylinder radii; the meaning of an empty list depends on the experiment.
    #[serde(default)]
    pub radii: Vec<f64>,
    #[serde(default)]
    pub eps_list: Vec<f64>,
    /// Shell width as a fraction of the radius (two-scale and Caccioppoli).
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Dyadic levels below the largest radius (excess decay).
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Degree of the random trigonometric boundary data.
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Random inputs per seed (Caccioppoli and Liouville).
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Horizon of the qualitative march.
    #[serde(default = "default_final_time")]
    pub final_time: f64,
    /// Coefficient time period in cell units (qualitative).
    #[serde(default = "one")]
    pub cell_period: f64,
}

fn default_rho() -> f64 {
    0.1
}

fn default_levels() -> usize {
    4
}

fn default_degree() -> usize {
    2
}

fn default_samples() -> usize {
    1
}

fn default_final_time() -> f64 {
    0.02
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Seeds to run; each replaces `ensemble.seed`. Empty means `[ensemble.seed]`.
    #[serde(default)]
    pub seeds: Vec<u64>,
    pub grid: GridConfig,
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    pub experiment: ExperimentConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("parahom-out")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.ensemble.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn ensemble_for(&self, seed: u64) -> EnsembleSpec {
        EnsembleSpec { seed, ..self.ensemble.clone() }
    }

    /// Every check that can fail before any solve starts.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        self.ensemble.validate(&grid)?;
        self.solver.validate()?;
        let e = &self.experiment;
        if e.radii.iter().any(|r| !(*r > 0.0)) || e.eps_list.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("radii and eps_list must be positive".into()));
        }
        if !(e.rho > 0.0) || e.samples == 0 || e.levels < 2 {
            return Err(Error::Config("need rho > 0, samples >= 1 and levels >= 2".into()));
        }
        let seeds = self.seeds();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(Error::Config("duplicate seeds".into()));
        }
        if matches!(e.name, Experiment::TwoScale | Experiment::Qualitative) && e.eps_list.is_empty() {
            return Err(Error::Config(format!("{} needs eps_list", e.name.name())));
        }
        Ok(())
    }

    /// The configuration as `key = value` lines with dotted keys.
    pub fn echo(&self) -> Vec<String> {
        let value = toml::Value::try_from(self).expect("config serializes");
        let mut out = Vec::new();
        flatten(&value, "config", &mut out);
        out
    }
}

fn flatten(v: &toml::Value, prefix: &str, out: &mut Vec<String>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                flatten(v, &format!("{prefix}.{k}"), out);
            }
        }
        other => out.push(format!("{prefix} = {other}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [grid]
        d = 2
        n = 16
        n_t = 16

        [ensemble]
        kind = "checkerboard"
        lambda = 0.25
        cells = 4
        values = [0.25, 1.0]

        [experiment]
        name = "corrector"
    "#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.seeds(), vec![0]);
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.experiment.name, Experiment::Corrector);
        assert!(cfg.echo().contains(&"config.grid.n = 16".to_string()));
    }

    #[test]
    fn zero_lambda_is_rejected() {
        let text = MINIMAL.replace("lambda = 0.25", "lambda = 0.0");
        assert!(matches!(RunConfig::parse(&text), Err(Error::InvalidEnsemble(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("n_t = 16", "n_t = 16\nspacing = 2");
        assert!(matches!(RunConfig::parse(&text), Err(Error::Config(_))));
    }
}
