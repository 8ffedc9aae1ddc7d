//! Missing-rating imputation by similarity-weighted donor averages.
//!
//! Three predictors are blended convexly: user similarity over rating
//! slices, item similarity over tool slices, and user similarity over the
//! aspect-importance rankings.

mod cv;
mod distance;
mod similarity;

pub use cv::{default_grid, grid_search_cv, CvOutcome, Evaluation, DEFAULT_FOLDS};
pub use distance::{rating_distance, Distance, DistanceMode, DistanceOrder, MAX_ENUMERATED};
pub use similarity::{
    clamp_likert, fallback_value, item_similarity, kendall_tau, predict_entry, rank_similarity, user_similarity, Axis,
    Prediction, SimilarityMatrix,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likert::{AspectRanking, AspectRankings, CellSource, Provenance, RatingsTensor};
use crate::num::Scalar;

/// Distance choice plus blend weights: `a` for rank similarity, `b` for item
/// similarity, the remainder for user similarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputationConfig<T> {
    pub p: DistanceOrder,
    pub mode: DistanceMode,
    pub a: T,
    pub b: T,
}

impl<T: Scalar> ImputationConfig<T> {
    pub fn new(p: DistanceOrder, mode: DistanceMode, a: T, b: T) -> Result<Self> {
        let c = Self { p, mode, a, b };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let tol = T::lit(1e-9);
        if !(self.a >= T::zero() && self.b >= T::zero() && self.a + self.b <= T::one() + tol) {
            return Err(Error::invalid(format!(
                "blend weights a={} b={} must be non-negative with a + b <= 1",
                self.a, self.b
            )));
        }
        Ok(())
    }

    /// (user, item, rank) weights; a user weight within rounding of zero is zero.
    pub fn weights(&self) -> (T, T, T) {
        let w = T::one() - self.a - self.b;
        let w = if w.abs() < T::lit(1e-9) { T::zero() } else { w };
        (w, self.b, self.a)
    }

    pub fn needs_rankings(&self) -> bool {
        self.a > T::zero()
    }
}

/// Result of [`populate`].
#[derive(Debug, Clone)]
pub struct Populated<T> {
    pub tensor: RatingsTensor<T>,
    pub provenance: Provenance,
    pub fallbacks: usize,
    /// Similarity pairs that used the ℓ² approximation.
    pub approximate_pairs: usize,
}

/// Rankings aligned with the tensor's user order.
pub fn aligned_rankings<T: Scalar>(tensor: &RatingsTensor<T>, rankings: &AspectRankings) -> Result<Vec<AspectRanking>> {
    tensor
        .users()
        .iter()
        .map(|u| rankings.get(u).copied().ok_or_else(|| Error::invalid(format!("user `{u}` has no aspect ranking"))))
        .collect()
}

/// The three similarity matrices a config needs, built on one tensor.
pub(crate) struct Similarities<T> {
    pub users: Option<SimilarityMatrix<T>>,
    pub tools: Option<SimilarityMatrix<T>>,
    pub ranks: Option<SimilarityMatrix<T>>,
}

impl<T: Scalar> Similarities<T> {
    pub fn build(
        tensor: &RatingsTensor<T>,
        config: &ImputationConfig<T>,
        ranks: Option<&SimilarityMatrix<T>>,
        rankings: &AspectRankings,
    ) -> Result<Self> {
        let (wu, wi, wr) = config.weights();
        let users = if wu > T::zero() { Some(SimilarityMatrix::users(tensor, config.p, config.mode)?) } else { None };
        let tools = if wi > T::zero() { Some(SimilarityMatrix::tools(tensor, config.p, config.mode)?) } else { None };
        let ranks = match (wr > T::zero(), ranks) {
            (false, _) => None,
            (true, Some(r)) => Some(r.clone()),
            (true, None) => Some(SimilarityMatrix::ranks(&aligned_rankings(tensor, rankings)?)),
        };
        Ok(Self { users, tools, ranks })
    }

    fn approximate_pairs(&self) -> usize {
        [&self.users, &self.tools].iter().filter_map(|m| m.as_ref()).map(|m| m.approximate_pairs()).sum()
    }

    pub fn predict(
        &self,
        tensor: &RatingsTensor<T>,
        config: &ImputationConfig<T>,
        target: (usize, usize, usize),
    ) -> Result<Prediction<T>> {
        let component =
            |m: &Option<SimilarityMatrix<T>>| m.as_ref().map(|m| predict_entry(tensor, target, m)).transpose();
        Ok(blend(config, component(&self.users)?, component(&self.tools)?, component(&self.ranks)?))
    }
}

/// Convex combination of the component predictions; zero-weight components are ignored.
pub(crate) fn blend<T: Scalar>(
    config: &ImputationConfig<T>,
    user: Option<Prediction<T>>,
    item: Option<Prediction<T>>,
    rank: Option<Prediction<T>>,
) -> Prediction<T> {
    let (wu, wi, wr) = config.weights();
    let mut value = T::zero();
    let mut fallback = false;
    for (w, p) in [(wu, user), (wi, item), (wr, rank)] {
        if w > T::zero() {
            let p = p.expect("component computed for every positive weight");
            value = value + w * p.value;
            fallback |= p.fallback;
        }
    }
    Prediction { value: clamp_likert(value), fallback }
}

/// Fills every missing cell of `tensor`. `rankings` may be empty when `a = 0`.
pub fn populate<T: Scalar>(
    tensor: &RatingsTensor<T>,
    config: &ImputationConfig<T>,
    rankings: &AspectRankings,
) -> Result<Populated<T>> {
    populate_with(tensor, Provenance::from_tensor(tensor), config, rankings)
}

/// As [`populate`], extending an existing provenance map.
pub fn populate_with<T: Scalar>(
    tensor: &RatingsTensor<T>,
    mut provenance: Provenance,
    config: &ImputationConfig<T>,
    rankings: &AspectRankings,
) -> Result<Populated<T>> {
    config.validate()?;
    let missing: Vec<_> = tensor.missing_entries().collect();
    let mut out = tensor.clone();
    if missing.is_empty() {
        return Ok(Populated { tensor: out, provenance, fallbacks: 0, approximate_pairs: 0 });
    }
    let sims = Similarities::build(tensor, config, None, rankings)?;
    let mut fallbacks = 0;
    for &(u, t, slot) in &missing {
        let p = sims.predict(tensor, config, (u, t, slot))?;
        out.set(u, t, slot, p.value)?;
        provenance.set(u, t, slot, if p.fallback { CellSource::Fallback } else { CellSource::Imputed });
        fallbacks += p.fallback as usize;
    }
    Ok(Populated { tensor: out, provenance, fallbacks, approximate_pairs: sims.approximate_pairs() })
}

/// Predicts `targets` as if they were unknown: they are hidden first, then
/// imputed from what remains.
pub fn predict_hidden<T: Scalar>(
    tensor: &RatingsTensor<T>,
    config: &ImputationConfig<T>,
    rankings: &AspectRankings,
    targets: &[(usize, usize, usize)],
) -> Result<Vec<Prediction<T>>> {
    config.validate()?;
    let mut hidden = tensor.clone();
    for &(u, t, slot) in targets {
        hidden.clear(u, t, slot);
    }
    let sims = Similarities::build(&hidden, config, None, rankings)?;
    targets.iter().map(|&target| sims.predict(&hidden, config, target)).collect()
}
