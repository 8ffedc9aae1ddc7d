//! Balanced assignment of tool subsets to participants.
//!
//! Each participant reviews an `l`-subset of `n` tools. A good plan makes
//! every tool pair co-occur in close to μ = m·C(l,2)/C(n,2) subsets. Plans
//! are built greedily: at each step every candidate subset is scored by the
//! sum of its pairs' current tallies, and one minimal-score subset is drawn
//! uniformly at random.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::powersim::choose;

/// Default ceiling on the number of candidate subsets.
pub const DEFAULT_TUPLE_CAP: usize = 1_000_000;

/// Index of the unordered pair `{i, j}` (i ≠ j) in row-major upper-triangular order.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    a * (2 * n - a - 1) / 2 + (b - a - 1)
}

fn n_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// All sorted `l`-subsets of `0..n` in lexicographic order.
pub fn enumerate_tuples(n: usize, l: usize) -> Result<Vec<Vec<usize>>> {
    enumerate_tuples_capped(n, l, DEFAULT_TUPLE_CAP)
}

pub fn enumerate_tuples_capped(n: usize, l: usize, cap: usize) -> Result<Vec<Vec<usize>>> {
    if l == 0 || l > n {
        return Err(Error::invalid(format!("subset size {l} must lie in 1..={n}")));
    }
    let count = choose(n as u64, l as u64);
    if count > cap as u128 {
        return Err(Error::CapExceeded { n, l, count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut cur: Vec<usize> = (0..l).collect();
    loop {
        out.push(cur.clone());
        // rightmost position that can still advance
        let Some(i) = (0..l).rev().find(|&i| cur[i] < n - l + i) else {
            break;
        };
        cur[i] += 1;
        for j in i + 1..l {
            cur[j] = cur[j - 1] + 1;
        }
    }
    Ok(out)
}

/// A list of per-participant tool subsets with its pair tallies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentPlan {
    n_tools: usize,
    l_per_participant: usize,
    tuples: Vec<Vec<usize>>,
    pair_counts: Vec<u32>,
}

impl AssignmentPlan {
    /// Builds a plan from explicit subsets, validating each one.
    pub fn from_tuples(n_tools: usize, l: usize, tuples: Vec<Vec<usize>>) -> Result<Self> {
        if l == 0 || l > n_tools {
            return Err(Error::invalid(format!("subset size {l} must lie in 1..={n_tools}")));
        }
        let mut pair_counts = vec![0u32; n_pairs(n_tools)];
        for tuple in &tuples {
            if tuple.len() != l {
                return Err(Error::invalid(format!("subset {tuple:?} does not have {l} tools")));
            }
            if tuple.windows(2).any(|w| w[0] >= w[1]) || tuple.iter().any(|&t| t >= n_tools) {
                return Err(Error::invalid(format!("subset {tuple:?} is not a sorted set of tools in 0..{n_tools}")));
            }
            for (x, &i) in tuple.iter().enumerate() {
                for &j in &tuple[x + 1..] {
                    pair_counts[pair_index(n_tools, i, j)] += 1;
                }
            }
        }
        Ok(Self { n_tools, l_per_participant: l, tuples, pair_counts })
    }

    pub fn n_tools(&self) -> usize {
        self.n_tools
    }

    pub fn m_participants(&self) -> usize {
        self.tuples.len()
    }

    pub fn l_per_participant(&self) -> usize {
        self.l_per_participant
    }

    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }

    pub fn pair_count(&self, i: usize, j: usize) -> u32 {
        self.pair_counts[pair_index(self.n_tools, i, j)]
    }

    pub fn pair_counts(&self) -> &[u32] {
        &self.pair_counts
    }

    /// Target co-occurrences per pair, m·C(l,2)/C(n,2).
    pub fn mu(&self) -> f64 {
        mu(self.n_tools, self.tuples.len(), self.l_per_participant)
    }

    /// Mean absolute deviation of the pair counts from μ.
    pub fn assignment_error(&self) -> f64 {
        if self.pair_counts.is_empty() {
            return 0.0;
        }
        let mu = self.mu();
        self.pair_counts.iter().map(|&c| (c as f64 - mu).abs()).sum::<f64>() / self.pair_counts.len() as f64
    }

    /// `(count, number of pairs)` sorted by count.
    pub fn count_histogram(&self) -> Vec<(u32, usize)> {
        let mut hist: Vec<(u32, usize)> = Vec::new();
        let mut counts = self.pair_counts.clone();
        counts.sort_unstable();
        for c in counts {
            match hist.last_mut() {
                Some((v, k)) if *v == c => *k += 1,
                _ => hist.push((c, 1)),
            }
        }
        hist
    }

    /// Keeps the first `m_actual` subsets.
    pub fn truncate(&self, m_actual: usize) -> Result<Self> {
        if m_actual > self.tuples.len() {
            return Err(Error::invalid(format!(
                "cannot truncate a plan of {} participants to {m_actual}",
                self.tuples.len()
            )));
        }
        Self::from_tuples(self.n_tools, self.l_per_participant, self.tuples[..m_actual].to_vec())
    }

    /// Writes `participant_index,tool_id` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["participant_index", "tool_id"])?;
        for (p, tuple) in self.tuples.iter().enumerate() {
            for t in tuple {
                wtr.write_record([p.to_string(), t.to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Replays the plan and checks that every subset had minimal score when picked.
    pub fn is_greedy_replayable(&self) -> Result<bool> {
        let candidates = enumerate_tuples(self.n_tools, self.l_per_participant)?;
        let mut tallies = vec![0u32; n_pairs(self.n_tools)];
        let score = |t: &[usize], tallies: &[u32]| -> u32 {
            let mut s = 0;
            for (x, &i) in t.iter().enumerate() {
                for &j in &t[x + 1..] {
                    s += tallies[pair_index(self.n_tools, i, j)];
                }
            }
            s
        };
        for tuple in &self.tuples {
            let min = candidates.iter().map(|c| score(c, &tallies)).min().unwrap_or(0);
            if score(tuple, &tallies) != min {
                return Ok(false);
            }
            for (x, &i) in tuple.iter().enumerate() {
                for &j in &tuple[x + 1..] {
                    tallies[pair_index(self.n_tools, i, j)] += 1;
                }
            }
        }
        Ok(true)
    }
}

pub fn mu(n: usize, m: usize, l: usize) -> f64 {
    let pairs = n_pairs(n);
    if pairs == 0 {
        return 0.0;
    }
    m as f64 * n_pairs(l) as f64 / pairs as f64
}

/// Smallest achievable assignment error for integer pair counts summing to
/// m·C(l,2): every count is ⌊μ⌋ or ⌈μ⌉.
pub fn integrality_lower_bound(n: usize, m: usize, l: usize) -> f64 {
    let pairs = n_pairs(n);
    if pairs == 0 {
        return 0.0;
    }
    let total = m * n_pairs(l);
    let floor = total / pairs;
    let n_ceil = total - floor * pairs;
    let mu = mu(n, m, l);
    (n_ceil as f64 * (floor as f64 + 1.0 - mu) + (pairs - n_ceil) as f64 * (mu - floor as f64)) / pairs as f64
}

fn greedy_with_rng(n: usize, m: usize, l: usize, rng: &mut ChaCha8Rng) -> Result<AssignmentPlan> {
    let candidates = enumerate_tuples(n, l)?;
    // pair -> candidates containing it, so a pick updates scores in O(C(l,2)·fanout)
    let mut containing: Vec<Vec<usize>> = vec![Vec::new(); n_pairs(n)];
    for (c, tuple) in candidates.iter().enumerate() {
        for (x, &i) in tuple.iter().enumerate() {
            for &j in &tuple[x + 1..] {
                containing[pair_index(n, i, j)].push(c);
            }
        }
    }
    let mut scores = vec![0u64; candidates.len()];
    let mut picked = Vec::with_capacity(m);
    let mut best = Vec::with_capacity(candidates.len());
    for _ in 0..m {
        let min = *scores.iter().min().expect("at least one candidate");
        best.clear();
        best.extend(scores.iter().enumerate().filter(|(_, &s)| s == min).map(|(c, _)| c));
        let choice = best[rng.random_range(0..best.len())];
        let tuple = &candidates[choice];
        for (x, &i) in tuple.iter().enumerate() {
            for &j in &tuple[x + 1..] {
                for &c in &containing[pair_index(n, i, j)] {
                    scores[c] += 1;
                }
            }
        }
        picked.push(tuple.clone());
    }
    AssignmentPlan::from_tuples(n, l, picked)
}

fn restart_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

/// One greedy construction, deterministic in `seed`.
pub fn greedy_assign(n: usize, m: usize, l: usize, seed: u64) -> Result<AssignmentPlan> {
    greedy_with_rng(n, m, l, &mut restart_rng(seed, 0))
}

/// Best of `k` greedy restarts; restart `r` draws tie-breaks from stream `r`
/// of `seed`, so `k = 1` reproduces [`greedy_assign`]. Ties go to the
/// earliest restart.
pub fn best_of_k(n: usize, m: usize, l: usize, k: usize, seed: u64) -> Result<AssignmentPlan> {
    if k == 0 {
        return Err(Error::invalid("best_of_k needs at least one restart"));
    }
    let plans: Vec<AssignmentPlan> =
        (0..k).into_par_iter().map(|r| greedy_with_rng(n, m, l, &mut restart_rng(seed, r))).collect::<Result<_>>()?;
    let mut best = 0;
    let mut best_err = f64::INFINITY;
    for (r, p) in plans.iter().enumerate() {
        let e = p.assignment_error();
        if e < best_err {
            best = r;
            best_err = e;
        }
    }
    Ok(plans.into_iter().nth(best).expect("k >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_lexicographically() {
        assert_eq!(enumerate_tuples(3, 2).unwrap(), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(enumerate_tuples(11, 8).unwrap().len(), 165);
        assert_eq!(enumerate_tuples(4, 4).unwrap(), vec![vec![0, 1, 2, 3]]);
        let all = enumerate_tuples(7, 3).unwrap();
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn enumeration_errors() {
        assert!(enumerate_tuples(3, 0).is_err());
        assert!(enumerate_tuples(3, 4).is_err());
        assert!(matches!(enumerate_tuples_capped(30, 15, 1000), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn pair_index_is_a_bijection() {
        let n = 6;
        let mut seen = vec![false; n_pairs(n)];
        for i in 0..n {
            for j in i + 1..n {
                let k = pair_index(n, i, j);
                assert!(!seen[k]);
                seen[k] = true;
                assert_eq!(k, pair_index(n, j, i));
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn single_candidate_plan() {
        let plan = greedy_assign(3, 5, 3, 9).unwrap();
        assert!(plan.tuples().iter().all(|t| t == &[0, 1, 2]));
        assert!(plan.pair_counts().iter().all(|&c| c == 5));
        assert_eq!(plan.mu(), 5.0);
        assert_eq!(plan.assignment_error(), 0.0);
    }

    #[test]
    fn pairs_form_a_perfect_round() {
        for seed in 0..10 {
            let plan = greedy_assign(4, 6, 2, seed).unwrap();
            assert!(plan.pair_counts().iter().all(|&c| c == 1), "seed {seed}");
            assert_eq!(plan.assignment_error(), 0.0);
        }
    }

    #[test]
    fn identical_tuples_error() {
        let plan = AssignmentPlan::from_tuples(4, 2, vec![vec![0, 1]; 6]).unwrap();
        assert!((plan.assignment_error() - 10.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn reconstructed_study_plan_error() {
        // 6 pairs at 29, 41 at 30, 8 at 31 over 55 pairs, mu = 59*28/55
        let mu: f64 = 59.0 * 28.0 / 55.0;
        let err = (6.0 * (mu - 29.0) + 41.0 * (mu - 30.0) + 8.0 * (31.0 - mu)) / 55.0;
        assert!((err - 0.2803).abs() < 1e-4);
        assert!((mu - 30.036363).abs() < 1e-5);
    }

    #[test]
    fn sums_and_tallies_consistent() {
        let plan = greedy_assign(11, 59, 8, 3).unwrap();
        assert_eq!(plan.pair_counts().iter().map(|&c| c as usize).sum::<usize>(), 59 * 28);
        assert!(plan.is_greedy_replayable().unwrap());
        let again = AssignmentPlan::from_tuples(11, 8, plan.tuples().to_vec()).unwrap();
        assert_eq!(again, plan);
        assert!(plan.assignment_error() >= integrality_lower_bound(11, 59, 8) - 1e-12);
    }

    #[test]
    fn best_of_one_is_greedy() {
        assert_eq!(best_of_k(11, 20, 8, 1, 42).unwrap(), greedy_assign(11, 20, 8, 42).unwrap());
        assert_eq!(best_of_k(3, 5, 3, 4, 1).unwrap().assignment_error(), 0.0);
        assert!(best_of_k(3, 5, 3, 0, 1).is_err());
    }

    #[test]
    fn truncation() {
        let plan = best_of_k(11, 59, 8, 5, 7).unwrap();
        assert_eq!(plan.truncate(59).unwrap(), plan);
        let short = plan.truncate(19).unwrap();
        assert!((short.mu() - 19.0 * 28.0 / 55.0).abs() < 1e-12);
        assert_eq!(short.tuples(), &plan.tuples()[..19]);
        let empty = plan.truncate(0).unwrap();
        assert_eq!(empty.mu(), 0.0);
        assert_eq!(empty.assignment_error(), 0.0);
        assert!(plan.truncate(60).is_err());
    }

    #[test]
    fn integrality_bound_values() {
        assert_eq!(integrality_lower_bound(4, 6, 2), 0.0);
        let b = integrality_lower_bound(11, 59, 8);
        // 2 pairs at 31, 53 at 30
        let mu: f64 = 59.0 * 28.0 / 55.0;
        assert!((b - (2.0 * (31.0 - mu) + 53.0 * (mu - 30.0)) / 55.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_tuples() {
        assert!(AssignmentPlan::from_tuples(4, 2, vec![vec![1, 0]]).is_err());
        assert!(AssignmentPlan::from_tuples(4, 2, vec![vec![0, 4]]).is_err());
        assert!(AssignmentPlan::from_tuples(4, 2, vec![vec![0, 1, 2]]).is_err());
    }
}
