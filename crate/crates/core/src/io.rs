//! CSV ingestion and emission for the survey exports.
//!
//! Ratings use a long format, `user_id,tool_id,aspect_label,value`, with an
//! empty `value` marking a missing cell. Emitted tensors carry a fifth
//! `provenance` column; readers accept either width.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::likert::{
    Aspect, AspectRanking, AspectRankings, CellSource, Provenance, RatingsTensor, ToolRanking, UserProfile,
    N_CAPABILITIES,
};
use crate::num::Scalar;

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(r)
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::schema(path.display().to_string(), e.to_string()))
}

fn check_header(file: &str, hdr: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = hdr.iter().collect();
    if got.len() < expected.len() || got[..expected.len()] != *expected {
        return Err(Error::schema(file, format!("expected header {expected:?}, found {got:?}")));
    }
    Ok(())
}

fn field<'a>(file: &str, rec: &'a csv::StringRecord, i: usize) -> Result<&'a str> {
    rec.get(i).ok_or_else(|| {
        let line = rec.position().map_or(0, |p| p.line());
        Error::schema(file, format!("line {line}: missing column {i}"))
    })
}

fn parse_num(file: &str, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::schema(file, format!("`{s}` is not a number")))
}

/// Appends ids not yet present, keeping first-appearance order.
fn push_unique(order: &mut Vec<String>, seen: &mut HashSet<String>, id: &str) {
    if seen.insert(id.to_string()) {
        order.push(id.to_string());
    }
}

/// A parsed ratings file.
#[derive(Debug, Clone)]
pub struct RatingsFile<T> {
    pub tensor: RatingsTensor<T>,
    /// Present only when the file had a provenance column.
    pub provenance: Option<Provenance>,
}

/// Reads a long-format ratings CSV.
///
/// With `integral` set, present values must be whole numbers (raw survey
/// exports). Users and tools are indexed in order of first appearance.
pub fn read_ratings<T: Scalar, R: Read>(r: R, integral: bool) -> Result<RatingsFile<T>> {
    read_ratings_with_ids(r, integral, &[], &[])
}

/// Like [`read_ratings`] but seeds the user/tool order, so ids that appear
/// only in other inputs still get (all-missing) rows.
pub fn read_ratings_with_ids<T: Scalar, R: Read>(
    r: R,
    integral: bool,
    extra_users: &[String],
    extra_tools: &[String],
) -> Result<RatingsFile<T>> {
    const FILE: &str = "ratings";
    let mut rdr = reader(r);
    check_header(FILE, rdr.headers()?, &["user_id", "tool_id", "aspect_label", "value"])?;
    let has_prov = rdr.headers()?.get(4) == Some("provenance");
    let mut rows = Vec::new();
    let (mut users, mut tools) = (Vec::new(), Vec::new());
    let (mut seen_u, mut seen_t) = (HashSet::new(), HashSet::new());
    for rec in rdr.records() {
        let rec = rec?;
        let user = field(FILE, &rec, 0)?.to_string();
        let tool = field(FILE, &rec, 1)?.to_string();
        let aspect: Aspect = field(FILE, &rec, 2)?.parse()?;
        let raw = field(FILE, &rec, 3)?;
        let value = if raw.is_empty() { None } else { Some(parse_num(FILE, raw)?) };
        if let Some(v) = value {
            if integral && v.fract() != 0.0 {
                return Err(Error::schema(
                    FILE,
                    format!("raw rating {v} for ({user}, {tool}, {aspect}) is not an integer"),
                ));
            }
        }
        let source = match (has_prov, rec.get(4)) {
            (true, Some(s)) if !s.is_empty() => Some(s.parse::<CellSource>()?),
            _ => None,
        };
        push_unique(&mut users, &mut seen_u, &user);
        push_unique(&mut tools, &mut seen_t, &tool);
        rows.push((user, tool, aspect, value, source));
    }
    for u in extra_users {
        push_unique(&mut users, &mut seen_u, u);
    }
    for t in extra_tools {
        push_unique(&mut tools, &mut seen_t, t);
    }
    let u_idx: HashMap<String, usize> = users.iter().cloned().enumerate().map(|(i, u)| (u, i)).collect();
    let t_idx: HashMap<String, usize> = tools.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
    let mut tensor = RatingsTensor::new(users, tools)?;
    let mut written = HashSet::new();
    let mut sources = Vec::new();
    for (user, tool, aspect, value, source) in rows {
        let (u, t, s) = (u_idx[&user], t_idx[&tool], aspect.index());
        if !written.insert((u, t, s)) {
            return Err(Error::DuplicateKey(format!("rating ({user}, {tool}, {aspect})")));
        }
        if let Some(v) = value {
            tensor.set(u, t, s, T::lit(v))?;
        }
        sources.push(((u, t, s), source));
    }
    let provenance = has_prov.then(|| {
        let mut p = Provenance::from_tensor(&tensor);
        for ((u, t, s), src) in sources {
            if let Some(src) = src {
                p.set(u, t, s, src);
            }
        }
        p
    });
    Ok(RatingsFile { tensor, provenance })
}

pub fn read_ratings_path<T: Scalar>(path: &Path, integral: bool) -> Result<RatingsFile<T>> {
    read_ratings(open(path)?, integral)
}

/// Writes every cell of the tensor, missing ones with an empty value.
pub fn write_ratings<T: Scalar, W: Write>(
    w: W,
    tensor: &RatingsTensor<T>,
    provenance: Option<&Provenance>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if provenance.is_some() {
        wtr.write_record(["user_id", "tool_id", "aspect_label", "value", "provenance"])?;
    } else {
        wtr.write_record(["user_id", "tool_id", "aspect_label", "value"])?;
    }
    for (u, user) in tensor.users().iter().enumerate() {
        for (t, tool) in tensor.tools().iter().enumerate() {
            for (s, aspect) in Aspect::ALL.iter().enumerate() {
                let value = tensor.get(u, t, s).map_or_else(String::new, |v| v.to_string());
                match provenance {
                    Some(p) => wtr.write_record([user, tool, aspect.label(), &value, p.get(u, t, s).label()])?,
                    None => wtr.write_record([user, tool, aspect.label(), &value])?,
                }
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `user_id,tool_id,rank_position`; position 1 is most preferred.
pub fn read_tool_rankings<R: Read>(r: R) -> Result<Vec<ToolRanking>> {
    const FILE: &str = "rankings";
    let mut rdr = reader(r);
    check_header(FILE, rdr.headers()?, &["user_id", "tool_id", "rank_position"])?;
    let mut per_user: Vec<(String, Vec<(usize, String)>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let user = field(FILE, &rec, 0)?;
        let tool = field(FILE, &rec, 1)?.to_string();
        let pos: usize = field(FILE, &rec, 2)?
            .parse()
            .map_err(|_| Error::schema(FILE, format!("bad rank position for ({user}, {tool})")))?;
        match per_user.iter_mut().find(|(u, _)| u == user) {
            Some((_, list)) => list.push((pos, tool)),
            None => per_user.push((user.to_string(), vec![(pos, tool)])),
        }
    }
    per_user
        .into_iter()
        .map(|(user, mut list)| {
            list.sort();
            if list.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::DuplicateKey(format!("rank position repeated for `{user}`")));
            }
            ToolRanking::new(user, list.into_iter().map(|(_, t)| t).collect())
        })
        .collect()
}

pub fn write_tool_rankings<W: Write>(w: W, rankings: &[ToolRanking]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["user_id", "tool_id", "rank_position"])?;
    for r in rankings {
        for (i, t) in r.tools().iter().enumerate() {
            wtr.write_record([r.user_id.as_str(), t, &(i + 1).to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `user_id,aspect_label,rank_position` capability-importance ranks.
pub fn read_aspect_rankings<R: Read>(r: R) -> Result<AspectRankings> {
    const FILE: &str = "aspect rankings";
    let mut rdr = reader(r);
    check_header(FILE, rdr.headers()?, &["user_id", "aspect_label", "rank_position"])?;
    let mut partial: BTreeMap<String, [u8; N_CAPABILITIES]> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let user = field(FILE, &rec, 0)?.to_string();
        let aspect: Aspect = field(FILE, &rec, 1)?.parse()?;
        if !aspect.is_capability() {
            return Err(Error::schema(FILE, format!("`{aspect}` is not a rankable capability")));
        }
        let pos: u8 = field(FILE, &rec, 2)?
            .parse()
            .map_err(|_| Error::schema(FILE, format!("bad rank position for `{user}`")))?;
        let slots = partial.entry(user.clone()).or_insert([0; N_CAPABILITIES]);
        if slots[aspect.index()] != 0 {
            return Err(Error::DuplicateKey(format!("aspect `{aspect}` ranked twice by `{user}`")));
        }
        slots[aspect.index()] = pos;
    }
    partial
        .into_iter()
        .map(|(user, pos)| {
            AspectRanking::from_positions(pos)
                .map(|r| (user.clone(), r))
                .map_err(|_| Error::schema(FILE, format!("incomplete or invalid aspect ranking for `{user}`")))
        })
        .collect()
}

pub fn write_aspect_rankings<W: Write>(w: W, users: &[String], rankings: &AspectRankings) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["user_id", "aspect_label", "rank_position"])?;
    for u in users {
        if let Some(r) = rankings.get(u) {
            for a in Aspect::CAPABILITIES {
                wtr.write_record([u.as_str(), a.label(), &r.position(a).unwrap_or(0).to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads participant profiles in long form: `user_id,field,key,value`.
///
/// Fields are `years_experience` and `occupation` (empty key),
/// `familiarity` and `video_quality` (key = tool id), and `aspect_rank`
/// (key = aspect label, value = 1..6). Profiles come back in order of first
/// appearance.
pub fn read_profiles<R: Read>(r: R) -> Result<Vec<UserProfile>> {
    const FILE: &str = "profiles";
    let mut rdr = reader(r);
    check_header(FILE, rdr.headers()?, &["user_id", "field", "key", "value"])?;
    let mut profiles: Vec<UserProfile> = Vec::new();
    let mut ranks: HashMap<String, [u8; N_CAPABILITIES]> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let user = field(FILE, &rec, 0)?;
        let kind = field(FILE, &rec, 1)?;
        let key = field(FILE, &rec, 2)?;
        let value = field(FILE, &rec, 3)?;
        let idx = match profiles.iter().position(|p| p.user_id == user) {
            Some(i) => i,
            None => {
                profiles.push(UserProfile::new(user));
                profiles.len() - 1
            }
        };
        let p = &mut profiles[idx];
        match kind {
            "years_experience" => {
                let y = parse_num(FILE, value)?;
                if !(y >= 0.0 && y.is_finite()) {
                    return Err(Error::schema(FILE, format!("negative experience for `{user}`")));
                }
                p.years_experience = Some(y);
            }
            "occupation" => p.occupation = Some(value.to_string()),
            "familiarity" => {
                if p.familiarity.insert(key.to_string(), value.parse()?).is_some() {
                    return Err(Error::DuplicateKey(format!("familiarity ({user}, {key})")));
                }
            }
            "video_quality" => {
                if p.video_quality.insert(key.to_string(), value.parse()?).is_some() {
                    return Err(Error::DuplicateKey(format!("video quality ({user}, {key})")));
                }
            }
            "aspect_rank" => {
                let aspect: Aspect = key.parse()?;
                if !aspect.is_capability() {
                    return Err(Error::schema(FILE, format!("`{aspect}` is not a rankable capability")));
                }
                let pos: u8 =
                    value.parse().map_err(|_| Error::schema(FILE, format!("bad aspect rank for `{user}`")))?;
                ranks.entry(user.to_string()).or_insert([0; N_CAPABILITIES])[aspect.index()] = pos;
            }
            other => return Err(Error::schema(FILE, format!("unknown profile field `{other}`"))),
        }
    }
    for p in &mut profiles {
        if let Some(pos) = ranks.remove(&p.user_id) {
            p.aspect_ranking = Some(AspectRanking::from_positions(pos).map_err(|_| {
                Error::schema(FILE, format!("incomplete or invalid aspect ranking for `{}`", p.user_id))
            })?);
        }
    }
    Ok(profiles)
}

pub fn write_profiles<W: Write>(w: W, profiles: &[UserProfile]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["user_id", "field", "key", "value"])?;
    for p in profiles {
        let u = p.user_id.as_str();
        if let Some(y) = p.years_experience {
            wtr.write_record([u, "years_experience", "", &y.to_string()])?;
        }
        if let Some(o) = &p.occupation {
            wtr.write_record([u, "occupation", "", o])?;
        }
        for (tool, f) in &p.familiarity {
            wtr.write_record([u, "familiarity", tool, f.label()])?;
        }
        for (tool, q) in &p.video_quality {
            wtr.write_record([u, "video_quality", tool, q.label()])?;
        }
        if let Some(r) = &p.aspect_ranking {
            for a in Aspect::CAPABILITIES {
                wtr.write_record([u, "aspect_rank", a.label(), &r.position(a).unwrap_or(0).to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// A free-text survey response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comment {
    pub user_id: String,
    pub tool_id: String,
    pub text: String,
}

/// Reads `user_id,tool_id,text`.
pub fn read_comments<R: Read>(r: R) -> Result<Vec<Comment>> {
    const FILE: &str = "comments";
    let mut rdr = reader(r);
    check_header(FILE, rdr.headers()?, &["user_id", "tool_id", "text"])?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let c = Comment {
            user_id: field(FILE, &rec, 0)?.to_string(),
            tool_id: field(FILE, &rec, 1)?.to_string(),
            text: rec.get(2).unwrap_or("").to_string(),
        };
        if !seen.insert((c.user_id.clone(), c.tool_id.clone())) {
            return Err(Error::DuplicateKey(format!("comment ({}, {})", c.user_id, c.tool_id)));
        }
        out.push(c);
    }
    Ok(out)
}

pub fn write_comments<W: Write>(w: W, comments: &[Comment]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["user_id", "tool_id", "text"])?;
    for c in comments {
        wtr.write_record([&c.user_id, &c.tool_id, &c.text])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likert::{Familiarity, VideoQuality};

    #[test]
    fn ratings_roundtrip_preserves_missing_and_bits() {
        let mut t = RatingsTensor::<f64>::with_dims(2, 2);
        t.set(0, 0, 0, 3.0).unwrap();
        t.set(1, 1, 7, 3.123456789012345).unwrap();
        t.set(0, 1, 6, 1.0 + f64::EPSILON).unwrap();
        let mut p = Provenance::from_tensor(&t);
        p.set(1, 1, 7, CellSource::Predicted);
        let mut buf = Vec::new();
        write_ratings(&mut buf, &t, Some(&p)).unwrap();
        let back = read_ratings::<f64, _>(&buf[..], false).unwrap();
        assert_eq!(back.tensor, t);
        assert_eq!(back.provenance.unwrap(), p);
    }

    #[test]
    fn integral_mode_rejects_fractions() {
        let csv = "user_id,tool_id,aspect_label,value\nu,t,overall,3.5\n";
        assert!(read_ratings::<f64, _>(csv.as_bytes(), true).is_err());
        assert!(read_ratings::<f64, _>(csv.as_bytes(), false).is_ok());
    }

    #[test]
    fn out_of_range_and_duplicates_rejected() {
        let csv = "user_id,tool_id,aspect_label,value\nu,t,overall,6\n";
        assert!(matches!(read_ratings::<f64, _>(csv.as_bytes(), true), Err(Error::OutOfRange(_))));
        let dup = "user_id,tool_id,aspect_label,value\nu,t,overall,3\nu,t,overall,4\n";
        assert!(matches!(read_ratings::<f64, _>(dup.as_bytes(), true), Err(Error::DuplicateKey(_))));
    }

    #[test]
    fn empty_value_is_missing() {
        let csv = "user_id,tool_id,aspect_label,value\nu,t,overall,\nu,s,playbooks,4\n";
        let f = read_ratings::<f64, _>(csv.as_bytes(), true).unwrap();
        assert_eq!(f.tensor.tools(), ["t", "s"]);
        assert!(f.tensor.get(0, 0, 7).is_none());
        assert_eq!(f.tensor.get(0, 1, Aspect::Playbooks.index()), Some(4.0));
    }

    #[test]
    fn rankings_sorted_by_position() {
        let csv = "user_id,tool_id,rank_position\nu,b,2\nu,a,1\nv,c,1\n";
        let r = read_tool_rankings(csv.as_bytes()).unwrap();
        assert_eq!(r[0].tools(), ["a", "b"]);
        assert_eq!(r[1].user_id, "v");
        let dup = "user_id,tool_id,rank_position\nu,b,1\nu,a,1\n";
        assert!(read_tool_rankings(dup.as_bytes()).is_err());
    }

    #[test]
    fn incomplete_aspect_ranking_rejected() {
        let csv = "user_id,aspect_label,rank_position\nu,playbooks,1\n";
        assert!(read_aspect_rankings(csv.as_bytes()).is_err());
    }

    #[test]
    fn profiles_roundtrip() {
        let mut p = UserProfile::new("u1");
        p.years_experience = Some(4.5);
        p.occupation = Some("security operator".into());
        p.familiarity.insert("t0".into(), Familiarity::HeardOf);
        p.video_quality.insert("t0".into(), VideoQuality::Great);
        p.aspect_ranking = Some(AspectRanking::from_positions([6, 5, 4, 3, 2, 1]).unwrap());
        let mut buf = Vec::new();
        write_profiles(&mut buf, std::slice::from_ref(&p)).unwrap();
        assert_eq!(read_profiles(&buf[..]).unwrap(), vec![p]);
    }
}
