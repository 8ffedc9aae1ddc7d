//! Shared survey domain types: Likert values, rating aspects, the ratings
//! tensor, participant profiles and rankings.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

pub const LIKERT_MIN: f64 = 1.0;
pub const LIKERT_MAX: f64 = 5.0;

/// Number of rating slots per (user, tool): six capabilities, sentiment, overall.
pub const N_SLOTS: usize = 8;
/// Number of capability aspects a participant ranks by importance.
pub const N_CAPABILITIES: usize = 6;

/// An integer rating on the 1..=5 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LikertValue(u8);

impl LikertValue {
    pub fn new(value: u8) -> Result<Self> {
        if (1..=5).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::OutOfRange(value as f64))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = LikertValue> {
        (1..=5).map(LikertValue)
    }
}

impl TryFrom<u8> for LikertValue {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LikertValue> for u8 {
    fn from(v: LikertValue) -> u8 {
        v.0
    }
}

/// The eight rating slots of a tool review.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aspect {
    Ranking,
    Ingestion,
    Playbooks,
    Ticketing,
    Collaboration,
    Automation,
    Sentiment,
    Overall,
}

impl Aspect {
    pub const ALL: [Aspect; N_SLOTS] = [
        Aspect::Ranking,
        Aspect::Ingestion,
        Aspect::Playbooks,
        Aspect::Ticketing,
        Aspect::Collaboration,
        Aspect::Automation,
        Aspect::Sentiment,
        Aspect::Overall,
    ];

    pub const CAPABILITIES: [Aspect; N_CAPABILITIES] = [
        Aspect::Ranking,
        Aspect::Ingestion,
        Aspect::Playbooks,
        Aspect::Ticketing,
        Aspect::Collaboration,
        Aspect::Automation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Aspect::Ranking => "ranking",
            Aspect::Ingestion => "ingestion",
            Aspect::Playbooks => "playbooks",
            Aspect::Ticketing => "ticketing",
            Aspect::Collaboration => "collaboration",
            Aspect::Automation => "automation",
            Aspect::Sentiment => "sentiment",
            Aspect::Overall => "overall",
        }
    }

    pub fn is_capability(self) -> bool {
        self.index() < N_CAPABILITIES
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Aspect {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| Error::invalid(format!("unknown aspect label `{s}`")))
    }
}

/// Checks that `v` is a finite value inside [1, 5].
pub fn check_rating<T: Scalar>(v: T) -> Result<T> {
    if v.is_finite() && v >= T::lit(LIKERT_MIN) && v <= T::lit(LIKERT_MAX) {
        Ok(v)
    } else {
        Err(Error::OutOfRange(v.to_f64_lossy()))
    }
}

/// Users × tools × 8 ratings with explicit missing cells.
///
/// Raw survey entries are integers; imputed and predicted entries are reals
/// in [1, 5]. Every write is range-checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsTensor<T> {
    users: Vec<String>,
    tools: Vec<String>,
    cells: Vec<Option<T>>,
}

impl<T: Scalar> RatingsTensor<T> {
    /// Empty (all-missing) tensor over the given ids.
    pub fn new(users: Vec<String>, tools: Vec<String>) -> Result<Self> {
        for (kind, ids) in [("user", &users), ("tool", &tools)] {
            let mut seen = HashSet::new();
            if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
                return Err(Error::DuplicateKey(format!("{kind} id `{dup}`")));
            }
        }
        let cells = vec![None; users.len() * tools.len() * N_SLOTS];
        Ok(Self { users, tools, cells })
    }

    /// Empty tensor with ids `u0..`, `t0..`.
    pub fn with_dims(n_users: usize, n_tools: usize) -> Self {
        let users = (0..n_users).map(|u| format!("u{u}")).collect();
        let tools = (0..n_tools).map(|t| format!("t{t}")).collect();
        Self::new(users, tools).expect("generated ids are unique")
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_tools(&self) -> usize {
        self.tools.len()
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn tools(&self) -> &[String] {
        &self.tools
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.users.iter().position(|u| u == id)
    }

    pub fn tool_index(&self, id: &str) -> Option<usize> {
        self.tools.iter().position(|t| t == id)
    }

    fn offset(&self, u: usize, t: usize, slot: usize) -> usize {
        assert!(u < self.users.len() && t < self.tools.len() && slot < N_SLOTS, "index out of bounds");
        (u * self.tools.len() + t) * N_SLOTS + slot
    }

    pub fn get(&self, u: usize, t: usize, slot: usize) -> Option<T> {
        self.cells[self.offset(u, t, slot)]
    }

    pub fn is_missing(&self, u: usize, t: usize, slot: usize) -> bool {
        self.get(u, t, slot).is_none()
    }

    pub fn set(&mut self, u: usize, t: usize, slot: usize, value: T) -> Result<()> {
        let v = check_rating(value)?;
        let off = self.offset(u, t, slot);
        self.cells[off] = Some(v);
        Ok(())
    }

    pub fn clear(&mut self, u: usize, t: usize, slot: usize) {
        let off = self.offset(u, t, slot);
        self.cells[off] = None;
    }

    /// The eight slots of one review.
    pub fn review(&self, u: usize, t: usize) -> &[Option<T>] {
        let off = self.offset(u, t, 0);
        &self.cells[off..off + N_SLOTS]
    }

    /// All of a user's ratings flattened tool-major (`n_tools * 8` long).
    pub fn user_slice(&self, u: usize) -> &[Option<T>] {
        let off = self.offset(u, 0, 0);
        &self.cells[off..off + self.tools.len() * N_SLOTS]
    }

    /// All ratings of a tool flattened user-major (`n_users * 8` long).
    pub fn tool_slice(&self, t: usize) -> Vec<Option<T>> {
        (0..self.users.len()).flat_map(|u| self.review(u, t).iter().copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    /// Fraction of missing cells; 0 for a zero-sized tensor.
    pub fn missing_fraction(&self) -> f64 {
        if self.cells.is_empty() {
            return 0.0;
        }
        self.missing_count() as f64 / self.cells.len() as f64
    }

    /// `(user, tool, slot, value)` for every present cell, in storage order.
    pub fn known_entries(&self) -> impl Iterator<Item = (usize, usize, usize, T)> + '_ {
        let nt = self.tools.len();
        self.cells
            .iter()
            .enumerate()
            .filter_map(move |(off, c)| c.map(|v| (off / (nt * N_SLOTS), (off / N_SLOTS) % nt, off % N_SLOTS, v)))
    }

    /// `(user, tool, slot)` for every missing cell, in storage order.
    pub fn missing_entries(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let nt = self.tools.len();
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_none())
            .map(move |(off, _)| (off / (nt * N_SLOTS), (off / N_SLOTS) % nt, off % N_SLOTS))
    }

    /// Mean of the known values in one slot across all reviews.
    pub fn slot_mean(&self, slot: usize) -> Option<T> {
        let vals: Vec<T> = self.cells.iter().skip(slot).step_by(N_SLOTS).filter_map(|c| *c).collect();
        (!vals.is_empty()).then(|| crate::num::mean(&vals))
    }

    /// True when every present entry is an integer.
    pub fn is_integral(&self) -> bool {
        self.cells.iter().flatten().all(|v| v.fract() == T::zero())
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> RatingsTensor<U> {
        RatingsTensor {
            users: self.users.clone(),
            tools: self.tools.clone(),
            cells: self.cells.iter().map(|c| c.map(|v| U::lit(v.to_f64_lossy()))).collect(),
        }
    }
}

/// Prior familiarity with a tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Familiarity {
    CurrentlyUseOften,
    UsedOnce,
    UsedOftenPast,
    HeardOf,
    NeverHeard,
}

impl Familiarity {
    pub const ALL: [Familiarity; 5] = [
        Familiarity::CurrentlyUseOften,
        Familiarity::UsedOnce,
        Familiarity::UsedOftenPast,
        Familiarity::HeardOf,
        Familiarity::NeverHeard,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Familiarity::CurrentlyUseOften => "currently-use-often",
            Familiarity::UsedOnce => "used-once",
            Familiarity::UsedOftenPast => "used-often-past",
            Familiarity::HeardOf => "heard-of",
            Familiarity::NeverHeard => "never-heard",
        }
    }
}

impl FromStr for Familiarity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|f| f.label() == s)
            .ok_or_else(|| Error::invalid(format!("unknown familiarity `{s}`")))
    }
}

/// Perceived quality of a vendor video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VideoQuality {
    Great,
    Okay,
    Terrible,
}

impl VideoQuality {
    pub const ALL: [VideoQuality; 3] = [VideoQuality::Great, VideoQuality::Okay, VideoQuality::Terrible];

    pub fn label(self) -> &'static str {
        match self {
            VideoQuality::Great => "great",
            VideoQuality::Okay => "okay",
            VideoQuality::Terrible => "terrible",
        }
    }
}

impl FromStr for VideoQuality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|q| q.label() == s)
            .ok_or_else(|| Error::invalid(format!("unknown video quality `{s}`")))
    }
}

/// A participant's importance ranking of the six capability aspects.
///
/// `positions[a]` is the rank (1 = most important) given to capability `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AspectRanking {
    positions: [u8; N_CAPABILITIES],
}

impl AspectRanking {
    pub fn from_positions(positions: [u8; N_CAPABILITIES]) -> Result<Self> {
        let mut seen = [false; N_CAPABILITIES];
        for &p in &positions {
            let idx = (p as usize).wrapping_sub(1);
            if idx >= N_CAPABILITIES || seen[idx] {
                return Err(Error::invalid(format!("aspect ranking {positions:?} is not a permutation of 1..=6")));
            }
            seen[idx] = true;
        }
        Ok(Self { positions })
    }

    /// Builds from capabilities listed most important first.
    pub fn from_order(order: &[Aspect]) -> Result<Self> {
        if order.len() != N_CAPABILITIES {
            return Err(Error::invalid(format!("aspect order must list {N_CAPABILITIES} aspects")));
        }
        let mut positions = [0u8; N_CAPABILITIES];
        for (rank, a) in order.iter().enumerate() {
            if !a.is_capability() {
                return Err(Error::invalid(format!("`{a}` is not a capability aspect")));
            }
            positions[a.index()] = rank as u8 + 1;
        }
        Self::from_positions(positions)
    }

    pub fn position(&self, aspect: Aspect) -> Option<u8> {
        self.positions.get(aspect.index()).copied()
    }

    pub fn positions(&self) -> &[u8; N_CAPABILITIES] {
        &self.positions
    }

    /// Capabilities from most to least important.
    pub fn order(&self) -> Vec<Aspect> {
        let mut order = Aspect::CAPABILITIES.to_vec();
        order.sort_by_key(|a| self.positions[a.index()]);
        order
    }
}

/// A participant's preference order over the tools they reviewed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolRanking {
    pub user_id: String,
    tools: Vec<String>,
}

impl ToolRanking {
    /// `tools[0]` is the most preferred.
    pub fn new(user_id: impl Into<String>, tools: Vec<String>) -> Result<Self> {
        let user_id = user_id.into();
        let mut seen = HashSet::new();
        if let Some(dup) = tools.iter().find(|t| !seen.insert(t.as_str())) {
            return Err(Error::DuplicateKey(format!("tool `{dup}` ranked twice by `{user_id}`")));
        }
        Ok(Self { user_id, tools })
    }

    pub fn tools(&self) -> &[String] {
        &self.tools
    }

    /// 1-based position of a tool, if ranked.
    pub fn position(&self, tool: &str) -> Option<usize> {
        self.tools.iter().position(|t| t == tool).map(|p| p + 1)
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }
}

/// Demographic answers for one participant.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub years_experience: Option<f64>,
    pub occupation: Option<String>,
    pub aspect_ranking: Option<AspectRanking>,
    /// Recorded only for assigned tools.
    pub familiarity: BTreeMap<String, Familiarity>,
    /// Recorded only for assigned tools.
    pub video_quality: BTreeMap<String, VideoQuality>,
}

impl UserProfile {
    pub fn new(user_id: impl Into<String>) -> Self {
        Self { user_id: user_id.into(), ..Default::default() }
    }
}

/// Where a tensor cell's value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellSource {
    Missing,
    Observed,
    /// Scored from the user's review comment.
    Sentiment,
    /// Filled by similarity-weighted imputation.
    Imputed,
    /// Imputation had no donors and fell back to the slot mean.
    Fallback,
    /// Overall rating predicted by the regression model.
    Predicted,
}

impl CellSource {
    pub fn label(self) -> &'static str {
        match self {
            CellSource::Missing => "missing",
            CellSource::Observed => "observed",
            CellSource::Sentiment => "sentiment",
            CellSource::Imputed => "imputed",
            CellSource::Fallback => "fallback",
            CellSource::Predicted => "predicted",
        }
    }

    pub fn is_synthetic(self) -> bool {
        matches!(self, CellSource::Imputed | CellSource::Fallback | CellSource::Predicted)
    }
}

impl FromStr for CellSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "missing" => Ok(CellSource::Missing),
            "observed" => Ok(CellSource::Observed),
            "sentiment" => Ok(CellSource::Sentiment),
            "imputed" => Ok(CellSource::Imputed),
            "fallback" => Ok(CellSource::Fallback),
            "predicted" => Ok(CellSource::Predicted),
            other => Err(Error::invalid(format!("unknown provenance `{other}`"))),
        }
    }
}

/// Per-cell provenance, laid out like the tensor it describes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    n_tools: usize,
    sources: Vec<CellSource>,
}

impl Provenance {
    /// Observed for present cells, missing otherwise.
    pub fn from_tensor<T: Scalar>(tensor: &RatingsTensor<T>) -> Self {
        let sources =
            tensor.cells.iter().map(|c| if c.is_some() { CellSource::Observed } else { CellSource::Missing }).collect();
        Self { n_tools: tensor.n_tools(), sources }
    }

    fn offset(&self, u: usize, t: usize, slot: usize) -> usize {
        (u * self.n_tools + t) * N_SLOTS + slot
    }

    pub fn get(&self, u: usize, t: usize, slot: usize) -> CellSource {
        self.sources[self.offset(u, t, slot)]
    }

    pub fn set(&mut self, u: usize, t: usize, slot: usize, source: CellSource) {
        let off = self.offset(u, t, slot);
        self.sources[off] = source;
    }

    pub fn count(&self, source: CellSource) -> usize {
        self.sources.iter().filter(|&&s| s == source).count()
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

/// Aspect rankings keyed by user id.
pub type AspectRankings = HashMap<String, AspectRanking>;
