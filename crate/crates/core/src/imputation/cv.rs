//! Cross-validated grid search over imputation configs.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{aligned_rankings, blend, predict_entry, DistanceMode, DistanceOrder, ImputationConfig, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::likert::{AspectRankings, RatingsTensor};
use crate::num::Scalar;

pub const DEFAULT_FOLDS: usize = 20;

/// a, b on a 0.1 lattice with a + b ≤ 1 and b ≥ a, for every p and mode.
pub fn default_grid<T: Scalar>() -> Vec<ImputationConfig<T>> {
    let mut grid = Vec::new();
    for p in DistanceOrder::ALL {
        for mode in DistanceMode::ALL {
            for ia in 0..=10usize {
                for ib in ia..=10 - ia {
                    let tenth = |k: usize| T::from_usize_lossy(k) / T::lit(10.0);
                    grid.push(ImputationConfig { p, mode, a: tenth(ia), b: tenth(ib) });
                }
            }
        }
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation<T> {
    pub config: ImputationConfig<T>,
    /// MAE macro-averaged over folds.
    pub error: T,
}

#[derive(Debug, Clone)]
pub struct CvOutcome<T> {
    pub best: ImputationConfig<T>,
    pub cv_error: T,
    /// Every grid point, in tie-break order.
    pub evaluations: Vec<Evaluation<T>>,
    pub folds: usize,
}

fn tie_order<T: Scalar>(x: &ImputationConfig<T>, y: &ImputationConfig<T>) -> Ordering {
    x.a.partial_cmp(&y.a)
        .unwrap_or(Ordering::Equal)
        .then(x.b.partial_cmp(&y.b).unwrap_or(Ordering::Equal))
        .then(x.p.cmp(&y.p))
        .then(x.mode.cmp(&y.mode))
}

/// Hides each fold of the known entries in turn, imputes it with every
/// config, and picks the config with the lowest fold-averaged MAE.
pub fn grid_search_cv<T: Scalar>(
    tensor: &RatingsTensor<T>,
    rankings: &AspectRankings,
    grid: &[ImputationConfig<T>],
    folds: usize,
    seed: u64,
) -> Result<CvOutcome<T>> {
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    if grid.is_empty() {
        return Err(Error::invalid("empty imputation grid"));
    }
    for c in grid {
        c.validate()?;
    }
    let mut known: Vec<(usize, usize, usize)> = tensor.known_entries().map(|(u, t, s, _)| (u, t, s)).collect();
    if known.len() < folds {
        return Err(Error::invalid(format!("{} known entries cannot fill {folds} folds", known.len())));
    }
    known.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_targets: Vec<Vec<(usize, usize, usize)>> =
        (0..folds).map(|f| known.iter().skip(f).step_by(folds).copied().collect()).collect();

    let ranks = if grid.iter().any(|c| c.needs_rankings()) {
        Some(SimilarityMatrix::ranks(&aligned_rankings(tensor, rankings)?))
    } else {
        None
    };

    let mut groups: Vec<(DistanceOrder, DistanceMode)> = grid.iter().map(|c| (c.p, c.mode)).collect();
    groups.sort();
    groups.dedup();

    // fold_errors[f][g] = per-config MAE for configs of group g on fold f
    let jobs: Vec<(usize, usize)> = (0..folds).flat_map(|f| (0..groups.len()).map(move |g| (f, g))).collect();
    let results: Vec<Vec<(usize, T)>> = jobs
        .par_iter()
        .map(|&(f, g)| {
            let (p, mode) = groups[g];
            let targets = &fold_targets[f];
            let mut hidden = tensor.clone();
            for &(u, t, s) in targets {
                hidden.clear(u, t, s);
            }
            let members: Vec<usize> = (0..grid.len()).filter(|&i| grid[i].p == p && grid[i].mode == mode).collect();
            let need_user = members.iter().any(|&i| grid[i].weights().0 > T::zero());
            let need_item = members.iter().any(|&i| grid[i].weights().1 > T::zero());
            let users = need_user.then(|| SimilarityMatrix::users(&hidden, p, mode)).transpose()?;
            let tools = need_item.then(|| SimilarityMatrix::tools(&hidden, p, mode)).transpose()?;
            let component = |m: &Option<SimilarityMatrix<T>>, target| {
                m.as_ref().map(|m| predict_entry(&hidden, target, m)).transpose()
            };
            let mut sums = vec![T::zero(); members.len()];
            for &target in targets {
                let (u, t, s) = target;
                let truth = tensor.get(u, t, s).expect("target is a known entry");
                let pu = component(&users, target)?;
                let pi = component(&tools, target)?;
                let pr = component(&ranks, target)?;
                for (k, &i) in members.iter().enumerate() {
                    let pred = blend(&grid[i], pu, pi, pr);
                    sums[k] = sums[k] + (pred.value - truth).abs();
                }
            }
            let n = T::from_usize_lossy(targets.len());
            Ok(members.into_iter().zip(sums).map(|(i, s)| (i, s / n)).collect())
        })
        .collect::<Result<_>>()?;

    let mut totals = vec![T::zero(); grid.len()];
    for fold in &results {
        for &(i, e) in fold {
            totals[i] = totals[i] + e;
        }
    }
    let nf = T::from_usize_lossy(folds);
    let mut evaluations: Vec<Evaluation<T>> =
        grid.iter().zip(totals).map(|(&config, total)| Evaluation { config, error: total / nf }).collect();
    evaluations.sort_by(|x, y| tie_order(&x.config, &y.config));
    let best = evaluations
        .iter()
        .fold(None::<&Evaluation<T>>, |best, e| match best {
            Some(b) if !(e.error < b.error) => Some(b),
            _ => Some(e),
        })
        .expect("grid is non-empty");
    Ok(CvOutcome { best: best.config, cv_error: best.error, evaluations: evaluations.clone(), folds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_size() {
        // 36 (a, b) pairs × 4 orders × 2 modes
        let g = default_grid::<f64>();
        assert_eq!(g.len(), 36 * 8);
        assert!(g.iter().all(|c| c.b >= c.a && c.a + c.b <= 1.0 + 1e-12));
    }

    #[test]
    fn constant_users_are_recovered() {
        let mut t = RatingsTensor::<f64>::with_dims(6, 4);
        for u in 0..6 {
            for tool in 0..4 {
                for s in 0..8 {
                    if (u + tool + s) % 7 != 0 {
                        t.set(u, tool, s, 1.0 + (u % 5) as f64).unwrap();
                    }
                }
            }
        }
        let grid = vec![ImputationConfig::new(DistanceOrder::One, DistanceMode::Naive, 0.0, 1.0).unwrap()];
        let out = grid_search_cv(&t, &AspectRankings::new(), &grid, 5, 3).unwrap();
        assert!(out.cv_error < 1e-12, "{}", out.cv_error);
        assert_eq!(out.best, grid[0]);
    }
}
