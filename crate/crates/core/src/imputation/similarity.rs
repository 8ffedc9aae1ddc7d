//! Similarity matrices and the weighted-average predictor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distance::{rating_distance, DistanceMode, DistanceOrder};
use crate::error::{Error, Result};
use crate::likert::{AspectRanking, RatingsTensor, LIKERT_MAX, LIKERT_MIN, N_CAPABILITIES};
use crate::num::Scalar;

/// Which index of the tensor a similarity matrix relates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Users,
    Tools,
}

/// Symmetric similarity matrix stored as natural logs, so that very distant
/// pairs keep their relative weight instead of underflowing to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T> {
    axis: Axis,
    n: usize,
    log: Vec<T>,
    approximate_pairs: usize,
}

impl<T: Scalar> SimilarityMatrix<T> {
    /// Builds from a log-similarity function evaluated on `i < j`.
    fn build<F>(axis: Axis, n: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<(T, bool)> + Sync,
    {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let values: Vec<(T, bool)> = pairs.par_iter().map(|&(i, j)| f(i, j)).collect::<Result<_>>()?;
        let mut log = vec![T::zero(); n * n];
        let mut approximate_pairs = 0;
        for (&(i, j), &(v, approx)) in pairs.iter().zip(&values) {
            log[i * n + j] = v;
            log[j * n + i] = v;
            approximate_pairs += approx as usize;
        }
        Ok(Self { axis, n, log, approximate_pairs })
    }

    /// exp(-distance) between flattened user slices.
    pub fn users(tensor: &RatingsTensor<T>, p: DistanceOrder, mode: DistanceMode) -> Result<Self> {
        Self::build(Axis::Users, tensor.n_users(), |u, v| {
            let d = rating_distance(tensor.user_slice(u), tensor.user_slice(v), p, mode)?;
            Ok((-d.value, d.approximate))
        })
    }

    /// exp(-distance) between flattened tool slices.
    pub fn tools(tensor: &RatingsTensor<T>, p: DistanceOrder, mode: DistanceMode) -> Result<Self> {
        let slices: Vec<Vec<Option<T>>> = (0..tensor.n_tools()).map(|t| tensor.tool_slice(t)).collect();
        Self::build(Axis::Tools, tensor.n_tools(), |s, t| {
            let d = rating_distance(&slices[s], &slices[t], p, mode)?;
            Ok((-d.value, d.approximate))
        })
    }

    /// Kendall-tau similarity between users' aspect rankings, in tensor user order.
    pub fn ranks(rankings: &[AspectRanking]) -> Self {
        Self::build(Axis::Users, rankings.len(), |u, v| {
            Ok((rank_similarity::<T>(&rankings[u], &rankings[v]).ln(), false))
        })
        .expect("rank similarity is infallible")
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.log[i * self.n + j].exp()
    }

    pub fn log_get(&self, i: usize, j: usize) -> T {
        self.log[i * self.n + j]
    }

    /// Pairs whose distance used the ℓ² approximation.
    pub fn approximate_pairs(&self) -> usize {
        self.approximate_pairs
    }
}

/// exp(-distance) between two users' flattened slices.
pub fn user_similarity<T: Scalar>(
    tensor: &RatingsTensor<T>,
    u: usize,
    v: usize,
    p: DistanceOrder,
    mode: DistanceMode,
) -> Result<T> {
    Ok((-rating_distance(tensor.user_slice(u), tensor.user_slice(v), p, mode)?.value).exp())
}

/// exp(-distance) between two tools' flattened slices.
pub fn item_similarity<T: Scalar>(
    tensor: &RatingsTensor<T>,
    s: usize,
    t: usize,
    p: DistanceOrder,
    mode: DistanceMode,
) -> Result<T> {
    Ok((-rating_distance(&tensor.tool_slice(s), &tensor.tool_slice(t), p, mode)?.value).exp())
}

/// Kendall tau-a between two rankings of the capability aspects.
pub fn kendall_tau<T: Scalar>(a: &AspectRanking, b: &AspectRanking) -> T {
    let (pa, pb) = (a.positions(), b.positions());
    let mut score = 0i32;
    for i in 0..N_CAPABILITIES {
        for j in i + 1..N_CAPABILITIES {
            let s = (pa[i] as i32 - pa[j] as i32).signum() * (pb[i] as i32 - pb[j] as i32).signum();
            score += s;
        }
    }
    let pairs = N_CAPABILITIES * (N_CAPABILITIES - 1) / 2;
    T::lit(score as f64) / T::from_usize_lossy(pairs)
}

/// (1 + τ) / 2, in [0, 1].
pub fn rank_similarity<T: Scalar>(a: &AspectRanking, b: &AspectRanking) -> T {
    (T::one() + kendall_tau::<T>(a, b)) / T::lit(2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<T> {
    pub value: T,
    /// No donor carried weight; `value` is the slot mean.
    pub fallback: bool,
}

/// Mean of the known values in `slot`, or the scale midpoint if there are none.
pub fn fallback_value<T: Scalar>(tensor: &RatingsTensor<T>, slot: usize) -> T {
    tensor.slot_mean(slot).unwrap_or_else(|| T::lit(3.0))
}

pub fn clamp_likert<T: Scalar>(v: T) -> T {
    v.max(T::lit(LIKERT_MIN)).min(T::lit(LIKERT_MAX))
}

/// Similarity-weighted average of the donors that know `slot` for the target.
///
/// Donors are other users rating the same tool (user axis) or other tools
/// rated by the same user (tool axis).
pub fn predict_entry<T: Scalar>(
    tensor: &RatingsTensor<T>,
    target: (usize, usize, usize),
    sim: &SimilarityMatrix<T>,
) -> Result<Prediction<T>> {
    let (u, t, slot) = target;
    if tensor.get(u, t, slot).is_some() {
        return Err(Error::invalid(format!("entry ({u}, {t}, {slot}) is already known")));
    }
    let (own, expected) = match sim.axis() {
        Axis::Users => (u, tensor.n_users()),
        Axis::Tools => (t, tensor.n_tools()),
    };
    if sim.len() != expected {
        return Err(Error::LengthMismatch { left: sim.len(), right: expected });
    }
    let donors: Vec<(T, T)> = (0..expected)
        .filter(|&d| d != own)
        .filter_map(|d| {
            let value = match sim.axis() {
                Axis::Users => tensor.get(d, t, slot),
                Axis::Tools => tensor.get(u, d, slot),
            }?;
            Some((sim.log_get(own, d), value))
        })
        .collect();

    let weighted = |shift: T| {
        donors.iter().fold((T::zero(), T::zero()), |(num, den), &(log, r)| {
            let w = (log - shift).exp();
            (num + w * r, den + w)
        })
    };
    let (mut num, mut den) = weighted(T::zero());
    if !(den > T::zero()) || !den.is_finite() {
        // every weight underflowed; rescale by the largest log-weight
        let top = donors.iter().map(|d| d.0).fold(T::neg_infinity(), T::max);
        if top.is_finite() {
            (num, den) = weighted(top);
        }
    }
    if den > T::zero() && den.is_finite() {
        Ok(Prediction { value: clamp_likert(num / den), fallback: false })
    } else {
        Ok(Prediction { value: fallback_value(tensor, slot), fallback: true })
    }
}
