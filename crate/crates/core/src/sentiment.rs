//! Free-text comments to the sentiment rating slot.
//!
//! Two polarity scorers are averaged and the mean polarity is mapped
//! affinely onto [1, 5]. Scores that disagree by more than 0.5 are flagged
//! for manual review but still produce a rating.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Comment;
use crate::num::Scalar;

/// Polarity disagreement above which a record is flagged.
pub const DIVERGENCE_THRESHOLD: f64 = 0.5;
/// Normalisation constant of the lexicon squash x / √(x² + α).
pub const SQUASH_ALPHA: f64 = 15.0;
pub const LEXICON_SCORER: &str = "lexicon";

const NEGATORS: [&str; 3] = ["not", "no", "never"];

/// A polarity in [-1, 1] tagged with the scorer that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityScore<T> {
    value: T,
    pub scorer_id: String,
}

impl<T: Scalar> PolarityScore<T> {
    pub fn new(value: T, scorer_id: impl Into<String>) -> Result<Self> {
        if !(value >= -T::one() && value <= T::one()) {
            return Err(Error::invalid(format!("polarity {value} outside [-1, 1]")));
        }
        Ok(Self { value, scorer_id: scorer_id.into() })
    }

    pub fn value(&self) -> T {
        self.value
    }
}

/// Affine map 3 + 2p from polarity to the Likert range.
pub fn polarity_to_likert<T: Scalar>(p: T) -> Result<T> {
    if !(p >= -T::one() && p <= T::one()) {
        return Err(Error::invalid(format!("polarity {p} outside [-1, 1]")));
    }
    Ok(T::lit(3.0) + T::lit(2.0) * p)
}

/// Averaged polarity and the flag for one pair of scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Combined<T> {
    pub polarity: T,
    pub likert: T,
    pub divergent: bool,
}

pub fn combine_scores<T: Scalar>(a: &PolarityScore<T>, b: &PolarityScore<T>) -> Combined<T> {
    let polarity = (a.value + b.value) / T::lit(2.0);
    let likert = polarity_to_likert(polarity).expect("mean of two valid polarities is valid");
    Combined { polarity, likert, divergent: (a.value - b.value).abs() > T::lit(DIVERGENCE_THRESHOLD) }
}

/// A scored comment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentRecord<T> {
    pub user_id: String,
    pub tool_id: String,
    pub text: String,
    pub score_a: PolarityScore<T>,
    pub score_b: PolarityScore<T>,
    pub combined_likert: T,
    pub divergence_flag: bool,
}

/// Word valences for the built-in scorer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon<T> {
    valences: HashMap<String, T>,
}

impl<T: Scalar> Lexicon<T> {
    pub fn new() -> Self {
        Self { valences: HashMap::new() }
    }

    pub fn insert(&mut self, word: &str, valence: T) {
        self.valences.insert(word.to_lowercase(), valence);
    }

    pub fn get(&self, word: &str) -> Option<T> {
        self.valences.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.valences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valences.is_empty()
    }

    /// Reads a `word,valence` CSV.
    pub fn from_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let hdr: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if hdr != ["word", "valence"] {
            return Err(Error::schema("lexicon", format!("expected header [word, valence], found {hdr:?}")));
        }
        let mut lex = Self::new();
        for rec in rdr.records() {
            let rec = rec?;
            let word = rec.get(0).unwrap_or("");
            let v: f64 = rec
                .get(1)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::schema("lexicon", format!("bad valence for `{word}`")))?;
            if word.is_empty() || !v.is_finite() {
                return Err(Error::schema("lexicon", format!("invalid entry `{word}`")));
            }
            lex.insert(word, T::lit(v));
        }
        Ok(lex)
    }

    /// A small general-purpose English lexicon on a −4..4 valence scale.
    pub fn builtin() -> Self {
        const WORDS: &[(&str, f64)] = &[
            ("good", 1.9),
            ("great", 3.1),
            ("excellent", 2.7),
            ("amazing", 2.8),
            ("awesome", 3.1),
            ("love", 3.2),
            ("like", 1.5),
            ("nice", 1.8),
            ("easy", 1.9),
            ("intuitive", 1.8),
            ("useful", 1.9),
            ("helpful", 1.8),
            ("powerful", 1.9),
            ("impressive", 2.1),
            ("clean", 1.7),
            ("fast", 1.3),
            ("simple", 1.2),
            ("best", 3.2),
            ("better", 1.9),
            ("flexible", 1.4),
            ("solid", 1.5),
            ("promising", 1.6),
            ("efficient", 1.8),
            ("clear", 1.6),
            ("happy", 2.7),
            ("bad", -2.5),
            ("poor", -2.1),
            ("terrible", -2.1),
            ("awful", -2.0),
            ("hate", -2.7),
            ("slow", -1.1),
            ("confusing", -1.3),
            ("difficult", -1.5),
            ("hard", -0.4),
            ("clunky", -1.4),
            ("buggy", -1.8),
            ("broken", -2.1),
            ("worse", -2.1),
            ("worst", -3.1),
            ("complicated", -1.2),
            ("outdated", -1.2),
            ("limited", -0.9),
            ("lacking", -1.3),
            ("missing", -1.2),
            ("frustrating", -2.2),
            ("unclear", -1.0),
            ("disappointing", -2.2),
            ("expensive", -0.9),
            ("cluttered", -1.2),
            ("boring", -1.3),
        ];
        let mut lex = Self::new();
        for &(w, v) in WORDS {
            lex.insert(w, T::lit(v));
        }
        lex
    }
}

/// Lowercased tokens split on anything except letters, digits and apostrophes.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\'').to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

fn is_negator(token: &str) -> bool {
    NEGATORS.contains(&token) || token.ends_with("n't")
}

/// Lexicon polarity: summed valences, sign-flipped after a negator, squashed
/// by x / √(x² + 15).
pub fn lexicon_score<T: Scalar>(text: &str, lexicon: &Lexicon<T>) -> PolarityScore<T> {
    let tokens = tokenize(text);
    let mut total = T::zero();
    for (i, tok) in tokens.iter().enumerate() {
        if let Some(v) = lexicon.get(tok) {
            let negated = i > 0 && is_negator(&tokens[i - 1]);
            total = total + if negated { -v } else { v };
        }
    }
    let value = if total == T::zero() { T::zero() } else { total / (total * total + T::lit(SQUASH_ALPHA)).sqrt() };
    PolarityScore::new(value, LEXICON_SCORER).expect("squashed polarity lies in (-1, 1)")
}

/// Externally computed scores keyed by (user, tool), at most two scorers each,
/// ordered by scorer id.
pub type ExternalScores<T> = BTreeMap<(String, String), Vec<PolarityScore<T>>>;

/// Reads `user_id,tool_id,scorer_id,polarity`.
///
/// A repeated (user, tool, scorer) triple or a third scorer for one review
/// is a duplicate-key error.
pub fn ingest_external_scores<T: Scalar, R: Read>(r: R) -> Result<ExternalScores<T>> {
    const FILE: &str = "external scores";
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let hdr: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if hdr != ["user_id", "tool_id", "scorer_id", "polarity"] {
        return Err(Error::schema(
            FILE,
            format!("expected header [user_id, tool_id, scorer_id, polarity], found {hdr:?}"),
        ));
    }
    let mut out: ExternalScores<T> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or("").to_string();
        let (user, tool, scorer) = (get(0), get(1), get(2));
        if user.is_empty() || tool.is_empty() || scorer.is_empty() {
            return Err(Error::schema(FILE, "empty key field"));
        }
        let p: f64 = get(3).parse().map_err(|_| Error::schema(FILE, format!("bad polarity for ({user}, {tool})")))?;
        let score = PolarityScore::new(T::lit(p), scorer.clone())?;
        let entry = out.entry((user.clone(), tool.clone())).or_default();
        if entry.iter().any(|s| s.scorer_id == scorer) {
            return Err(Error::DuplicateKey(format!("score ({user}, {tool}, {scorer})")));
        }
        if entry.len() == 2 {
            return Err(Error::DuplicateKey(format!("more than two scorers for ({user}, {tool})")));
        }
        entry.push(score);
        entry.sort_by(|a, b| a.scorer_id.cmp(&b.scorer_id));
    }
    Ok(out)
}

/// Scores each non-empty comment.
///
/// Slot assignment: two external scores use both; one external score is
/// paired with the lexicon; otherwise the lexicon fills both slots. Empty
/// comments produce no record, leaving the sentiment slot missing.
pub fn score_comments<T: Scalar>(
    comments: &[Comment],
    lexicon: &Lexicon<T>,
    external: Option<&ExternalScores<T>>,
) -> Vec<SentimentRecord<T>> {
    comments
        .iter()
        .filter(|c| !c.text.trim().is_empty())
        .map(|c| {
            let ext = external.and_then(|e| e.get(&(c.user_id.clone(), c.tool_id.clone())));
            let (a, b) = match ext.map(Vec::as_slice) {
                Some([x, y]) => (x.clone(), y.clone()),
                Some([x]) => (x.clone(), lexicon_score(&c.text, lexicon)),
                _ => {
                    let s = lexicon_score(&c.text, lexicon);
                    (s.clone(), s)
                }
            };
            let combined = combine_scores(&a, &b);
            SentimentRecord {
                user_id: c.user_id.clone(),
                tool_id: c.tool_id.clone(),
                text: c.text.clone(),
                score_a: a,
                score_b: b,
                combined_likert: combined.likert,
                divergence_flag: combined.divergent,
            }
        })
        .collect()
}

/// Writes the full records, including both scores and the flag.
pub fn write_records<T: Scalar, W: std::io::Write>(w: W, records: &[SentimentRecord<T>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["user_id", "tool_id", "scorer_a", "score_a", "scorer_b", "score_b", "likert", "divergent"])?;
    for r in records {
        wtr.write_record([
            r.user_id.clone(),
            r.tool_id.clone(),
            r.score_a.scorer_id.clone(),
            r.score_a.value.to_string(),
            r.score_b.scorer_id.clone(),
            r.score_b.value.to_string(),
            r.combined_likert.to_string(),
            r.divergence_flag.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
