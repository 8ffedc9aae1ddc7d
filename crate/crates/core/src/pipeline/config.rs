//! Study configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::imputation::{DistanceMode, DistanceOrder, ImputationConfig, DEFAULT_FOLDS as IMPUTATION_FOLDS};
use crate::preference::{DEFAULT_DAMPING, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::regression::{ModelKind, DEFAULT_FOLDS as REGRESSION_FOLDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub ratings: PathBuf,
    #[serde(default)]
    pub rankings: Option<PathBuf>,
    /// Falls back to the `aspect_rank` rows of the profiles.
    #[serde(default)]
    pub aspect_rankings: Option<PathBuf>,
    #[serde(default)]
    pub profiles: Option<PathBuf>,
    #[serde(default)]
    pub comments: Option<PathBuf>,
    /// Falls back to the builtin lexicon.
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub external_scores: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImputationSettings {
    pub folds: usize,
    pub orders: Vec<DistanceOrder>,
    pub modes: Vec<DistanceMode>,
    /// The blend weights a, b range over multiples of 1/lattice.
    pub lattice: usize,
    pub seed: Option<u64>,
}

impl Default for ImputationSettings {
    fn default() -> Self {
        Self {
            folds: IMPUTATION_FOLDS,
            orders: DistanceOrder::ALL.to_vec(),
            modes: DistanceMode::ALL.to_vec(),
            lattice: 10,
            seed: None,
        }
    }
}

impl ImputationSettings {
    /// Grid with a + b ≤ 1 and b ≥ a; `with_rank` false pins a to 0.
    pub fn grid(&self, with_rank: bool) -> Result<Vec<ImputationConfig<f64>>> {
        if self.lattice == 0 || self.orders.is_empty() || self.modes.is_empty() {
            return Err(Error::invalid("imputation grid is empty"));
        }
        let k = self.lattice;
        let mut grid = Vec::new();
        for &p in &self.orders {
            for &mode in &self.modes {
                for ia in 0..=k / 2 {
                    if ia > 0 && !with_rank {
                        break;
                    }
                    for ib in ia..=k - ia {
                        grid.push(ImputationConfig::new(p, mode, ia as f64 / k as f64, ib as f64 / k as f64)?);
                    }
                }
            }
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressionSettings {
    pub folds: usize,
    pub roster: Vec<ModelKind>,
    pub seed: Option<u64>,
}

impl Default for RegressionSettings {
    fn default() -> Self {
        Self { folds: REGRESSION_FOLDS, roster: ModelKind::ROSTER.to_vec(), seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PageRankSettings {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankSettings {
    fn default() -> Self {
        Self { damping: DEFAULT_DAMPING, tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

fn default_alpha() -> f64 {
    0.05
}

/// Everything one `run` needs. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
    pub inputs: Inputs,
    #[serde(default)]
    pub imputation: ImputationSettings,
    #[serde(default)]
    pub regression: RegressionSettings,
    #[serde(default)]
    pub pagerank: PageRankSettings,
    /// Significance level for the demographics table.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl StudyConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c: StudyConfig = toml::from_str(text)?;
        c.base_dir = base_dir.to_path_buf();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::schema(path.display().to_string(), e.to_string()))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.pagerank.damping >= 0.0 && self.pagerank.damping < 1.0) {
            return Err(Error::invalid(format!("damping must lie in [0, 1), got {}", self.pagerank.damping)));
        }
        if self.regression.roster.is_empty() {
            return Err(Error::invalid("regression roster is empty"));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out_dir)
    }

    pub fn imputation_seed(&self) -> u64 {
        self.imputation.seed.unwrap_or(self.seed)
    }

    pub fn regression_seed(&self) -> u64 {
        self.regression.seed.unwrap_or(self.seed.wrapping_add(1))
    }

    /// Replaces the base seed; stage seeds that were set explicitly stay.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// sha256 of the canonical JSON form, paths as written.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = StudyConfig::from_toml("out_dir = \"o\"\n[inputs]\nratings = \"r.csv\"\n", Path::new("/data")).unwrap();
        assert_eq!(c.resolve(&c.inputs.ratings), PathBuf::from("/data/r.csv"));
        assert_eq!(c.imputation.folds, 20);
        assert_eq!(c.imputation.grid(true).unwrap().len(), 36 * 8);
        assert_eq!(c.imputation.grid(false).unwrap().len(), 11 * 8);
        assert_eq!(c.regression_seed(), 1);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(
            StudyConfig::from_toml("out_dir = \"o\"\nbogus = 1\n[inputs]\nratings = \"r\"\n", Path::new(".")).is_err()
        );
    }

    #[test]
    fn parses_enums() {
        let text = "out_dir = \"o\"\n[inputs]\nratings = \"r\"\n[imputation]\norders = [\"1\", \"inf\"]\nmodes = [\"bayesian\"]\n[regression]\nroster = [\"ols\", \"mean\"]\n";
        let c = StudyConfig::from_toml(text, Path::new(".")).unwrap();
        assert_eq!(c.imputation.orders, vec![DistanceOrder::One, DistanceOrder::Inf]);
        assert_eq!(c.regression.roster, vec![ModelKind::Ols, ModelKind::Mean]);
        assert_ne!(c.hash(), c.clone().with_seed(9).hash());
    }
}
