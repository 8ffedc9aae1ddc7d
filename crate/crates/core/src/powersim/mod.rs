//! Monte Carlo power simulation for choosing the number of pairwise reviews.
//!
//! Two tools are rated by `m` participants each; ratings are drawn from two
//! pmfs over {1, …, 5} and a battery of tests decides whether the tools
//! differ. The table reports, per `m`, the fraction of trials in which each
//! test rejected.

mod dist;
pub mod hypothesis;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dist::{fit_discrete_dist, DiscretePmf};
pub use hypothesis::{
    binarize, binomial_exact, binomial_pair_test, chi2_yates_test, two_prop_z_test, welch_t_test, TestResult,
};

use crate::error::{Error, Result};

/// Inputs of one simulated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub dist_a: DiscretePmf,
    pub dist_b: DiscretePmf,
    pub review_counts: Vec<usize>,
    pub n_trials: usize,
    pub alpha: f64,
    pub thresholds: Vec<f64>,
    pub seed: u64,
}

impl ScenarioConfig {
    pub const DEFAULT_TRIALS: usize = 1000;

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if let Some(t) = self.thresholds.iter().find(|&&t| !(t > 1.0 && t < 5.0)) {
            return Err(Error::invalid(format!("threshold {t} outside (1, 5)")));
        }
        if let Some(m) = self.review_counts.iter().find(|&&m| m < 2) {
            return Err(Error::invalid(format!("review count {m} is below 2")));
        }
        Ok(())
    }
}

/// Which test a power-table row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Welch,
    ZTest,
    ChiSquaredYates,
    /// Either directional binomial test rejects.
    Binomial,
    /// `b` tested against `a`'s success rate.
    BinomialAb,
    /// `a` tested against `b`'s success rate.
    BinomialBa,
}

impl TestKind {
    pub fn label(self) -> &'static str {
        match self {
            TestKind::Welch => "t_test",
            TestKind::ZTest => "z_test",
            TestKind::ChiSquaredYates => "chi2_yates",
            TestKind::Binomial => "binomial",
            TestKind::BinomialAb => "binomial_ab",
            TestKind::BinomialBa => "binomial_ba",
        }
    }

    const THRESHOLDED: [TestKind; 5] =
        [TestKind::ZTest, TestKind::ChiSquaredYates, TestKind::Binomial, TestKind::BinomialAb, TestKind::BinomialBa];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub test: TestKind,
    pub threshold: Option<f64>,
    /// Rejection fraction for each entry of `review_counts`.
    pub fractions: Vec<f64>,
}

/// Rejection fractions, rows = test × threshold, columns = review counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub review_counts: Vec<usize>,
    pub n_trials: usize,
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    pub fn row(&self, test: TestKind, threshold: Option<f64>) -> Option<&PowerRow> {
        self.rows.iter().find(|r| r.test == test && r.threshold == threshold)
    }

    /// Rejection fraction for one cell.
    pub fn fraction(&self, test: TestKind, threshold: Option<f64>, m: usize) -> Option<f64> {
        let col = self.review_counts.iter().position(|&c| c == m)?;
        self.row(test, threshold).map(|r| r.fractions[col])
    }

    /// Writes `scenario,test,threshold,<m>…` rows.
    pub fn write_csv<W: Write>(&self, wtr: &mut csv::Writer<W>, scenario: &str, header: bool) -> Result<()> {
        if header {
            let mut h = vec!["scenario".to_string(), "test".to_string(), "threshold".to_string()];
            h.extend(self.review_counts.iter().map(|m| m.to_string()));
            wtr.write_record(&h)?;
        }
        for row in &self.rows {
            let mut rec = vec![
                scenario.to_string(),
                row.test.label().to_string(),
                row.threshold.map_or_else(String::new, |t| t.to_string()),
            ];
            rec.extend(row.fractions.iter().map(|f| f.to_string()));
            wtr.write_record(&rec)?;
        }
        Ok(())
    }
}

/// Row layout shared by the table and the per-trial decision vectors.
fn row_layout(thresholds: &[f64]) -> Vec<(TestKind, Option<f64>)> {
    let mut rows = vec![(TestKind::Welch, None)];
    for kind in TestKind::THRESHOLDED {
        for &t in thresholds {
            rows.push((kind, Some(t)));
        }
    }
    rows
}

fn trial_rng(seed: u64, column: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((column as u64) << 32) | trial as u64);
    rng
}

/// Decisions of every row for one simulated trial.
fn run_trial(
    config: &ScenarioConfig,
    layout: &[(TestKind, Option<f64>)],
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<bool>> {
    let a = config.dist_a.sample_n(rng, m);
    let b = config.dist_b.sample_n(rng, m);
    let af: Vec<f64> = a.iter().map(|&x| x as f64).collect();
    let bf: Vec<f64> = b.iter().map(|&x| x as f64).collect();
    let alpha = config.alpha;
    let mut out = Vec::with_capacity(layout.len());
    let mut binom_cache: Option<(f64, (TestResult, TestResult))> = None;
    for &(kind, threshold) in layout {
        let reject = match (kind, threshold) {
            (TestKind::Welch, _) => welch_t_test(&af, &bf, alpha)?.reject,
            (_, Some(t)) => {
                let ba: Vec<u8> = a.iter().map(|&x| binarize(x, t)).collect();
                let bb: Vec<u8> = b.iter().map(|&x| binarize(x, t)).collect();
                match kind {
                    TestKind::ZTest => two_prop_z_test(&ba, &bb, alpha)?.reject,
                    TestKind::ChiSquaredYates => chi2_yates_test(&ba, &bb, alpha)?.reject,
                    _ => {
                        let pair = match binom_cache {
                            Some((ct, pair)) if ct == t => pair,
                            _ => {
                                let pair = binomial_pair_test(&ba, &bb, alpha)?;
                                binom_cache = Some((t, pair));
                                pair
                            }
                        };
                        match kind {
                            TestKind::Binomial => pair.0.reject || pair.1.reject,
                            TestKind::BinomialAb => pair.0.reject,
                            _ => pair.1.reject,
                        }
                    }
                }
            }
            (_, None) => unreachable!("thresholded tests always carry a threshold"),
        };
        out.push(reject);
    }
    Ok(out)
}

/// Runs the scenario. Each trial draws from its own ChaCha stream derived
/// from `(seed, column, trial)`, so the table does not depend on how trials
/// are scheduled across threads.
pub fn run_power_simulation(config: &ScenarioConfig) -> Result<PowerTable> {
    config.validate()?;
    let layout = row_layout(&config.thresholds);
    let mut fractions = vec![Vec::with_capacity(config.review_counts.len()); layout.len()];
    for (col, &m) in config.review_counts.iter().enumerate() {
        let decisions: Vec<Vec<bool>> = (0..config.n_trials)
            .into_par_iter()
            .map(|trial| run_trial(config, &layout, m, &mut trial_rng(config.seed, col, trial)))
            .collect::<Result<_>>()?;
        for (r, frac) in fractions.iter_mut().enumerate() {
            let hits = decisions.iter().filter(|d| d[r]).count();
            frac.push(hits as f64 / config.n_trials as f64);
        }
    }
    let rows = layout
        .into_iter()
        .zip(fractions)
        .map(|((test, threshold), fractions)| PowerRow { test, threshold, fractions })
        .collect();
    Ok(PowerTable { review_counts: config.review_counts.clone(), n_trials: config.n_trials, rows })
}

/// Binomial coefficient, exact.
pub fn choose(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Participants needed so that `desired_pair_reviews` pairwise comparisons
/// are collected when each reviews `per_participant` tools.
pub fn participant_target(n_tools: u64, per_participant: u64, desired_pair_reviews: u64) -> Result<u64> {
    if per_participant > n_tools {
        return Err(Error::invalid(format!("{per_participant} reviews per participant exceeds {n_tools} tools")));
    }
    let pairs = choose(per_participant, 2);
    if pairs == 0 {
        return Err(Error::invalid("each participant must review at least two tools"));
    }
    Ok((desired_pair_reviews as u128).div_ceil(pairs) as u64)
}
