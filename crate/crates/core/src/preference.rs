//! Tool-preference graph and PageRank aggregation.
//!
//! Each user contributes an edge from every tool to each tool they scored
//! higher. Opposite edges cancel, and PageRank over the surviving edges
//! orders the tools.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::likert::{Aspect, RatingsTensor, ToolRanking};
use crate::num::Scalar;

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;

/// Directed pairs `from → to` where `to` is preferred, for one user.
///
/// Equal scores produce no edge unless `tie_break` ranks both tools; the
/// tool ranked lower then points to the one ranked higher.
pub fn edges_from_user<T: Scalar>(
    scores: &[(String, T)],
    tie_break: Option<&ToolRanking>,
) -> Result<Vec<(String, String)>> {
    if let Some(r) = tie_break {
        if let Some(stray) = r.tools().iter().find(|t| !scores.iter().any(|(s, _)| s == *t)) {
            return Err(Error::invalid(format!("tie-break ranking of `{}` lists unscored tool `{stray}`", r.user_id)));
        }
    }
    let mut edges = Vec::new();
    for (i, (x, sx)) in scores.iter().enumerate() {
        for (y, sy) in &scores[i + 1..] {
            if x == y {
                return Err(Error::DuplicateKey(format!("tool `{x}` scored twice")));
            }
            if sx < sy {
                edges.push((x.clone(), y.clone()));
            } else if sy < sx {
                edges.push((y.clone(), x.clone()));
            } else if let Some(r) = tie_break {
                match (r.position(x), r.position(y)) {
                    (Some(px), Some(py)) if px < py => edges.push((y.clone(), x.clone())),
                    (Some(_), Some(_)) => edges.push((x.clone(), y.clone())),
                    _ => {}
                }
            }
        }
    }
    Ok(edges)
}

/// Ranking positions turned into scores: the top tool scores highest.
pub fn ranking_scores<T: Scalar>(ranking: &ToolRanking) -> Vec<(String, T)> {
    let n = ranking.len();
    ranking.tools().iter().enumerate().map(|(i, t)| (t.clone(), T::from_usize_lossy(n - i))).collect()
}

/// Net edge counts between tools.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceGraph {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    /// Keyed by (i, j) with i < j; positive means i → j.
    net: BTreeMap<(usize, usize), i64>,
}

impl PreferenceGraph {
    pub fn new(nodes: Vec<String>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::DuplicateKey(format!("tool `{n}` listed twice")));
            }
        }
        Ok(Self { nodes, index, net: BTreeMap::new() })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    fn idx(&self, tool: &str) -> Result<usize> {
        self.index.get(tool).copied().ok_or_else(|| Error::invalid(format!("edge references unknown tool `{tool}`")))
    }

    /// Adds one `from → to` vote, cancelling one opposite vote if present.
    pub fn add_edge(&mut self, from: &str, to: &str) -> Result<()> {
        let (a, b) = (self.idx(from)?, self.idx(to)?);
        if a == b {
            return Err(Error::invalid(format!("self-loop on `{from}`")));
        }
        let (key, delta) = if a < b { ((a, b), 1) } else { ((b, a), -1) };
        *self.net.entry(key).or_insert(0) += delta;
        Ok(())
    }

    /// Net `from → to` votes; antisymmetric in its arguments.
    pub fn net(&self, from: &str, to: &str) -> Result<i64> {
        let (a, b) = (self.idx(from)?, self.idx(to)?);
        Ok(if a < b {
            self.net.get(&(a, b)).copied().unwrap_or(0)
        } else {
            -self.net.get(&(b, a)).copied().unwrap_or(0)
        })
    }

    /// Positive-weight directed edges `(from, to, weight)` by node index.
    pub fn resolved(&self) -> Vec<(usize, usize, u64)> {
        self.net
            .iter()
            .filter(|(_, &w)| w != 0)
            .map(|(&(a, b), &w)| if w > 0 { (a, b, w as u64) } else { (b, a, w.unsigned_abs()) })
            .collect()
    }

    /// `from,to,weight` rows of the resolved graph.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["from", "to", "weight"])?;
        for (a, b, weight) in self.resolved() {
            wtr.write_record([self.nodes[a].as_str(), self.nodes[b].as_str(), &weight.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn build_graph(nodes: Vec<String>, edge_lists: &[Vec<(String, String)>]) -> Result<PreferenceGraph> {
    let mut g = PreferenceGraph::new(nodes)?;
    for list in edge_lists {
        for (from, to) in list {
            g.add_edge(from, to)?;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageRankScores<T> {
    pub tools: Vec<String>,
    pub scores: Vec<T>,
    pub damping: T,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Scalar> PageRankScores<T> {
    pub fn get(&self, tool: &str) -> Option<T> {
        self.tools.iter().position(|t| t == tool).map(|i| self.scores[i])
    }

    /// Tools by descending score, ties by id.
    pub fn order(&self) -> Vec<String> {
        let mut idx: Vec<usize> = (0..self.tools.len()).collect();
        idx.sort_by(|&a, &b| {
            self.scores[b]
                .partial_cmp(&self.scores[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| self.tools[a].cmp(&self.tools[b]))
        });
        idx.into_iter().map(|i| self.tools[i].clone()).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["tool_id", "score"])?;
        for (t, s) in self.tools.iter().zip(&self.scores) {
            wtr.write_record([t.clone(), s.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Weighted PageRank by power iteration. Dangling mass and teleports are
/// spread uniformly; stops once the ℓ¹ change drops below `tol`.
pub fn pagerank<T: Scalar>(graph: &PreferenceGraph, damping: T, tol: T, max_iter: usize) -> Result<PageRankScores<T>> {
    let n = graph.nodes.len();
    if n == 0 {
        return Err(Error::invalid("PageRank of an empty graph"));
    }
    if !(damping >= T::zero() && damping < T::one()) {
        return Err(Error::invalid(format!("damping must lie in [0, 1), got {damping}")));
    }
    let edges = graph.resolved();
    let mut out_weight = vec![T::zero(); n];
    for &(a, _, w) in &edges {
        out_weight[a] = out_weight[a] + T::lit(w as f64);
    }
    let nf = T::from_usize_lossy(n);
    let mut rank = vec![T::one() / nf; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let dangling: T = (0..n).filter(|&i| out_weight[i] == T::zero()).map(|i| rank[i]).sum();
        let base = (T::one() - damping) / nf + damping * dangling / nf;
        let mut next = vec![base; n];
        for &(a, b, w) in &edges {
            next[b] = next[b] + damping * rank[a] * T::lit(w as f64) / out_weight[a];
        }
        let total: T = next.iter().copied().sum();
        next.iter_mut().for_each(|v| *v = *v / total);
        let change: T = next.iter().zip(&rank).map(|(x, y)| (*x - *y).abs()).sum();
        rank = next;
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(PageRankScores { tools: graph.nodes.clone(), scores: rank, damping, iterations, converged })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankParams<T> {
    pub damping: T,
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for PageRankParams<T> {
    fn default() -> Self {
        Self { damping: T::lit(DEFAULT_DAMPING), tol: T::lit(DEFAULT_TOL), max_iter: DEFAULT_MAX_ITER }
    }
}

#[derive(Debug, Clone)]
pub struct Aggregation<T> {
    pub raw_graph: PreferenceGraph,
    pub raw: PageRankScores<T>,
    pub populated_graph: PreferenceGraph,
    pub populated: PageRankScores<T>,
}

/// Graph nodes: tensor tools, then any tool only seen in a ranking.
fn union_tools<T: Scalar>(tensor: &RatingsTensor<T>, rankings: &[ToolRanking]) -> Vec<String> {
    let mut nodes = tensor.tools().to_vec();
    for r in rankings {
        for t in r.tools() {
            if !nodes.contains(t) {
                nodes.push(t.clone());
            }
        }
    }
    nodes
}

/// PageRank on the user-given rankings and on the populated overall
/// ratings, the latter breaking ties by each user's ranking.
pub fn aggregate_rankings<T: Scalar>(
    populated: &RatingsTensor<T>,
    rankings: &[ToolRanking],
    params: &PageRankParams<T>,
) -> Result<Aggregation<T>> {
    let nodes = union_tools(populated, rankings);
    let raw_edges: Vec<Vec<(String, String)>> =
        rankings.iter().map(|r| edges_from_user(&ranking_scores::<T>(r), None)).collect::<Result<_>>()?;
    let raw_graph = build_graph(nodes.clone(), &raw_edges)?;

    let by_user: HashMap<&str, &ToolRanking> = rankings.iter().map(|r| (r.user_id.as_str(), r)).collect();
    let overall = Aspect::Overall.index();
    let mut populated_edges = Vec::with_capacity(populated.n_users());
    for (u, user) in populated.users().iter().enumerate() {
        let scores: Vec<(String, T)> = (0..populated.n_tools())
            .filter_map(|t| populated.get(u, t, overall).map(|s| (populated.tools()[t].clone(), s)))
            .collect();
        // a ranking that mentions unscored tools cannot break ties
        let tie = by_user
            .get(user.as_str())
            .copied()
            .filter(|r| r.tools().iter().all(|t| scores.iter().any(|(s, _)| s == t)));
        populated_edges.push(edges_from_user(&scores, tie)?);
    }
    let populated_graph = build_graph(nodes, &populated_edges)?;

    let raw = pagerank(&raw_graph, params.damping, params.tol, params.max_iter)?;
    let populated = pagerank(&populated_graph, params.damping, params.tol, params.max_iter)?;
    Ok(Aggregation { raw_graph, raw, populated_graph, populated })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[(&str, f64)]) -> Vec<(String, f64)> {
        v.iter().map(|(t, x)| (t.to_string(), *x)).collect()
    }

    fn e(v: &[(&str, &str)]) -> Vec<(String, String)> {
        v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn worked_example_edges() {
        let mut got = edges_from_user(&s(&[("A", 5.0), ("B", 3.0), ("C", 1.0)]), None).unwrap();
        got.sort();
        assert_eq!(got, e(&[("B", "A"), ("C", "A"), ("C", "B")]));
    }

    #[test]
    fn ties() {
        let scores = s(&[("A", 4.0), ("B", 4.0)]);
        assert!(edges_from_user(&scores, None).unwrap().is_empty());
        let r = ToolRanking::new("u", vec!["A".into(), "B".into()]).unwrap();
        assert_eq!(edges_from_user(&scores, Some(&r)).unwrap(), e(&[("B", "A")]));
        let stray = ToolRanking::new("u", vec!["Z".into()]).unwrap();
        assert!(edges_from_user(&scores, Some(&stray)).is_err());
    }

    #[test]
    fn net_weights() {
        let nodes = vec!["A".to_string(), "B".to_string()];
        let g = build_graph(nodes.clone(), &[e(&[("B", "A")]), e(&[("B", "A")]), e(&[("B", "A")]), e(&[("A", "B")])])
            .unwrap();
        assert_eq!(g.resolved(), vec![(1, 0, 2)]);
        assert_eq!(g.net("A", "B").unwrap(), -2);
        let g = build_graph(nodes, &[e(&[("B", "A"), ("A", "B")])]).unwrap();
        assert!(g.resolved().is_empty());
    }

    #[test]
    fn pagerank_small_cases() {
        let one = PreferenceGraph::new(vec!["A".into()]).unwrap();
        assert_eq!(pagerank(&one, 0.85, 1e-8, 100).unwrap().scores, vec![1.0]);
        let two = PreferenceGraph::new(vec!["A".into(), "B".into()]).unwrap();
        let pr = pagerank(&two, 0.85, 1e-8, 100).unwrap();
        assert!(pr.scores.iter().all(|&x: &f64| (x - 0.5).abs() < 1e-12));

        let chain =
            build_graph(vec!["A".into(), "B".into(), "C".into()], &[e(&[("C", "B"), ("B", "A"), ("C", "A")])]).unwrap();
        let pr = pagerank(&chain, 0.85, 1e-8, 100).unwrap();
        assert!(pr.converged);
        assert_eq!(pr.order(), ["A", "B", "C"]);
        assert!((pr.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
