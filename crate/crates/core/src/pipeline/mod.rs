//! End-to-end run: sentiment, imputation, regression, aggregation and
//! demographics, with every artifact written to one output directory.

mod config;

pub use config::{ImputationSettings, Inputs, PageRankSettings, RegressionSettings, StudyConfig};

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::demostats::{run_demographic_suite, DemographicsReport};
use crate::error::{Error, Result};
use crate::imputation::{
    grid_search_cv, populate_with, predict_hidden, CvOutcome, DistanceMode, DistanceOrder, ImputationConfig,
};
use crate::io::{self, Comment};
use crate::likert::{
    Aspect, AspectRanking, AspectRankings, CellSource, Provenance, RatingsTensor, ToolRanking, UserProfile,
    N_CAPABILITIES,
};
use crate::preference::{aggregate_rankings, Aggregation, PageRankParams, PageRankScores};
use crate::regression::{
    ak_baseline, predict_overall, select_model, write_reports, ModelReport, RegressionDataset, Selection,
};
use crate::sentiment::{ingest_external_scores, score_comments, write_records, Lexicon, SentimentRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RawMean,
    PrRaw,
    MlMean,
    MlPr,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::RawMean, Method::PrRaw, Method::MlMean, Method::MlPr];

    pub fn label(self) -> &'static str {
        match self {
            Method::RawMean => "raw_mean",
            Method::PrRaw => "pr_raw",
            Method::MlMean => "ml_mean",
            Method::MlPr => "ml_pr",
        }
    }
}

/// Tools by descending score, ties by id; unscored tools trail with `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Leaderboard {
    pub method: Method,
    pub entries: Vec<(String, Option<f64>)>,
}

impl Leaderboard {
    pub fn new(method: Method, scores: Vec<(String, Option<f64>)>) -> Self {
        let mut entries = scores;
        entries.sort_by(|(ta, a), (tb, b)| match (a, b) {
            (Some(x), Some(y)) => y.total_cmp(x).then_with(|| ta.cmp(tb)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => ta.cmp(tb),
        });
        Self { method, entries }
    }

    pub fn order(&self) -> Vec<&str> {
        self.entries.iter().map(|(t, _)| t.as_str()).collect()
    }
}

/// Per-tool mean of the overall slot over cells accepted by `keep`.
fn overall_means(
    tensor: &RatingsTensor<f64>,
    provenance: &Provenance,
    keep: impl Fn(CellSource) -> bool,
) -> Vec<(String, Option<f64>)> {
    let overall = Aspect::Overall.index();
    tensor
        .tools()
        .iter()
        .enumerate()
        .map(|(t, tool)| {
            let vals: Vec<f64> = (0..tensor.n_users())
                .filter(|&u| keep(provenance.get(u, t, overall)))
                .filter_map(|u| tensor.get(u, t, overall))
                .collect();
            let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
            (tool.clone(), mean)
        })
        .collect()
}

fn pagerank_entries(tools: &[String], pr: &PageRankScores<f64>) -> Vec<(String, Option<f64>)> {
    tools.iter().map(|t| (t.clone(), pr.get(t))).collect()
}

/// The four leaderboards from the emitted tensor and both PageRank runs.
/// `raw_mean` averages only user-given overall ratings.
pub fn build_leaderboards(
    populated: &RatingsTensor<f64>,
    provenance: &Provenance,
    pr_raw: &PageRankScores<f64>,
    ml_pr: &PageRankScores<f64>,
) -> Vec<Leaderboard> {
    let mut tools: Vec<String> = populated.tools().to_vec();
    for t in pr_raw.tools.iter().chain(&ml_pr.tools) {
        if !tools.contains(t) {
            tools.push(t.clone());
        }
    }
    let pad = |mut v: Vec<(String, Option<f64>)>| {
        for t in &tools {
            if !v.iter().any(|(x, _)| x == t) {
                v.push((t.clone(), None));
            }
        }
        v
    };
    vec![
        Leaderboard::new(Method::RawMean, pad(overall_means(populated, provenance, |s| s == CellSource::Observed))),
        Leaderboard::new(Method::PrRaw, pad(pagerank_entries(&tools, pr_raw))),
        Leaderboard::new(Method::MlMean, pad(overall_means(populated, provenance, |_| true))),
        Leaderboard::new(Method::MlPr, pad(pagerank_entries(&tools, ml_pr))),
    ]
}

/// `method,rank,tool_id,score`.
pub fn write_leaderboards<W: Write>(w: W, boards: &[Leaderboard]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["method", "rank", "tool_id", "score"])?;
    for b in boards {
        for (i, (tool, score)) in b.entries.iter().enumerate() {
            let score = score.map(|s| s.to_string()).unwrap_or_default();
            wtr.write_record([b.method.label(), &(i + 1).to_string(), tool, &score])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `counts[aspect][position - 1]`: how many users put each capability at each rank.
pub fn aspect_importance_summary<'a>(
    rankings: impl IntoIterator<Item = &'a AspectRanking>,
) -> [[usize; N_CAPABILITIES]; N_CAPABILITIES] {
    let mut counts = [[0; N_CAPABILITIES]; N_CAPABILITIES];
    for r in rankings {
        for (a, &pos) in r.positions().iter().enumerate() {
            counts[a][pos as usize - 1] += 1;
        }
    }
    counts
}

pub fn write_aspect_importance<W: Write>(w: W, counts: &[[usize; N_CAPABILITIES]; N_CAPABILITIES]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["aspect", "position", "count"])?;
    for a in Aspect::CAPABILITIES {
        for (p, c) in counts[a.index()].iter().enumerate() {
            wtr.write_record([a.label(), &(p + 1).to_string(), &c.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// PageRank scores of both graphs side by side: `tool_id,pr_raw,ml_pr`.
pub fn write_pagerank<W: Write>(w: W, agg: &Aggregation<f64>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["tool_id", "pr_raw", "ml_pr"])?;
    for (i, tool) in agg.raw.tools.iter().enumerate() {
        let ml = agg.populated.get(tool).map(|s| s.to_string()).unwrap_or_default();
        wtr.write_record([tool.clone(), agg.raw.scores[i].to_string(), ml])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a `tool_id,pr_raw,ml_pr` file back into the two score maps.
pub fn read_pagerank<R: std::io::Read>(r: R) -> Result<(PageRankScores<f64>, PageRankScores<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let (mut tools, mut raw, mut ml) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i).unwrap_or("").parse().map_err(|_| {
                Error::schema("pagerank", format!("bad score on line {}", rec.position().map_or(0, |p| p.line())))
            })
        };
        tools.push(rec.get(0).unwrap_or("").to_string());
        raw.push(num(1)?);
        ml.push(num(2)?);
    }
    let mk =
        |scores| PageRankScores { tools: tools.clone(), scores, damping: f64::NAN, iterations: 0, converged: true };
    Ok((mk(raw), mk(ml)))
}

/// Loaded inputs with users and tools unioned across files.
#[derive(Debug, Clone)]
pub struct StudyData {
    pub ratings: RatingsTensor<f64>,
    pub provenance: Provenance,
    pub rankings: Vec<ToolRanking>,
    pub aspect_rankings: AspectRankings,
    pub profiles: Vec<UserProfile>,
    pub comments: Vec<Comment>,
    pub lexicon: Lexicon<f64>,
    pub external: Option<crate::sentiment::ExternalScores<f64>>,
}

fn open_opt(config: &StudyConfig, p: &Option<PathBuf>) -> Result<Option<File>> {
    p.as_ref().map(|p| io::open(&config.resolve(p))).transpose()
}

pub fn load_inputs(config: &StudyConfig) -> Result<StudyData> {
    let inputs = &config.inputs;
    let rankings = open_opt(config, &inputs.rankings)?.map(io::read_tool_rankings).transpose()?.unwrap_or_default();
    let profiles = open_opt(config, &inputs.profiles)?.map(io::read_profiles).transpose()?.unwrap_or_default();
    let comments = open_opt(config, &inputs.comments)?.map(io::read_comments).transpose()?.unwrap_or_default();
    let mut aspect_rankings: AspectRankings =
        open_opt(config, &inputs.aspect_rankings)?.map(io::read_aspect_rankings).transpose()?.unwrap_or_default();
    for p in &profiles {
        if let Some(r) = p.aspect_ranking {
            aspect_rankings.entry(p.user_id.clone()).or_insert(r);
        }
    }
    let lexicon = match open_opt(config, &inputs.lexicon)? {
        Some(f) => Lexicon::from_csv(f)?,
        None => Lexicon::builtin(),
    };
    let external = open_opt(config, &inputs.external_scores)?.map(ingest_external_scores).transpose()?;

    let mut users = Vec::new();
    let mut tools = Vec::new();
    for r in &rankings {
        users.push(r.user_id.clone());
        tools.extend(r.tools().iter().cloned());
    }
    for p in &profiles {
        users.push(p.user_id.clone());
        tools.extend(p.familiarity.keys().chain(p.video_quality.keys()).cloned());
    }
    for c in &comments {
        users.push(c.user_id.clone());
        tools.push(c.tool_id.clone());
    }
    let file = io::read_ratings_with_ids(io::open(&config.resolve(&inputs.ratings))?, true, &users, &tools)?;
    let provenance = file.provenance.unwrap_or_else(|| Provenance::from_tensor(&file.tensor));
    Ok(StudyData { ratings: file.tensor, provenance, rankings, aspect_rankings, profiles, comments, lexicon, external })
}

/// Fills empty sentiment cells from the scored comments.
pub fn apply_sentiment(
    tensor: &mut RatingsTensor<f64>,
    provenance: &mut Provenance,
    records: &[SentimentRecord<f64>],
) -> Result<usize> {
    let slot = Aspect::Sentiment.index();
    let mut filled = 0;
    for r in records {
        let (Some(u), Some(t)) = (tensor.user_index(&r.user_id), tensor.tool_index(&r.tool_id)) else { continue };
        if tensor.get(u, t, slot).is_none() {
            tensor.set(u, t, slot, r.combined_likert)?;
            provenance.set(u, t, slot, CellSource::Sentiment);
            filled += 1;
        }
    }
    Ok(filled)
}

/// Imputation result of the pipeline.
#[derive(Debug, Clone)]
pub struct ImputationStage {
    pub outcome: CvOutcome<f64>,
    pub populated: RatingsTensor<f64>,
    pub provenance: Provenance,
    pub fallbacks: usize,
    pub approximate_pairs: usize,
    /// Rank similarity was left out because some users lack aspect rankings.
    pub rank_disabled: bool,
}

pub fn impute_stage(
    tensor: &RatingsTensor<f64>,
    provenance: &Provenance,
    aspect_rankings: &AspectRankings,
    settings: &ImputationSettings,
    seed: u64,
) -> Result<ImputationStage> {
    let rank_disabled = tensor.users().iter().any(|u| !aspect_rankings.contains_key(u));
    let grid = settings.grid(!rank_disabled)?;
    let outcome = grid_search_cv(tensor, aspect_rankings, &grid, settings.folds, seed)?;
    let p = populate_with(tensor, provenance.clone(), &outcome.best, aspect_rankings)?;
    Ok(ImputationStage {
        outcome,
        populated: p.tensor,
        provenance: p.provenance,
        fallbacks: p.fallbacks,
        approximate_pairs: p.approximate_pairs,
        rank_disabled,
    })
}

/// Regression result of the pipeline.
#[derive(Debug, Clone)]
pub struct RegressionStage {
    pub selection: Selection<f64>,
    /// Roster reports followed by the recommender baseline.
    pub reports: Vec<ModelReport<f64>>,
    pub populated: RatingsTensor<f64>,
    pub provenance: Provenance,
}

/// Selects the overall-rating model and fills the overall slot. The
/// baseline re-imputes each fold's hidden overall ratings from `unpopulated`.
pub fn regression_stage(
    unpopulated: &RatingsTensor<f64>,
    populated: &RatingsTensor<f64>,
    provenance: &Provenance,
    config: &ImputationConfig<f64>,
    aspect_rankings: &AspectRankings,
    settings: &RegressionSettings,
    seed: u64,
) -> Result<RegressionStage> {
    let data = RegressionDataset::from_populated(populated, provenance)?;
    let selection = select_model(&data, &settings.roster, settings.folds, seed)?;
    let overall = Aspect::Overall.index();
    let mut ak = vec![0.0; data.len()];
    for f in 0..selection.partition.folds() {
        let rows = selection.partition.test_rows(f);
        let targets: Vec<(usize, usize, usize)> =
            rows.iter().map(|&i| (data.keys[i].0, data.keys[i].1, overall)).collect();
        let preds = predict_hidden(unpopulated, config, aspect_rankings, &targets)?;
        for (&i, p) in rows.iter().zip(preds) {
            ak[i] = p.value;
        }
    }
    let mut reports = selection.reports.clone();
    reports.push(ak_baseline(&data.targets, &ak, &selection.partition)?);
    let (populated, provenance) = predict_overall(&selection.model, populated, provenance)?;
    Ok(RegressionStage { selection, reports, populated, provenance })
}

/// What a run produced, in memory.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub imputation: ImputationStage,
    pub regression: RegressionStage,
    pub aggregation: Aggregation<f64>,
    pub leaderboards: Vec<Leaderboard>,
    pub demographics: DemographicsReport,
    pub sentiment_filled: usize,
    pub out_dir: PathBuf,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage { stage: name, source: Box::new(e) })
}

/// Writes one output file and remembers its digest for the manifest.
struct Outputs {
    dir: PathBuf,
    written: BTreeMap<String, String>,
}

impl Outputs {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        {
            let mut w = BufWriter::new(File::create(&path)?);
            f(&mut w)?;
            w.flush()?;
        }
        let digest = hex::encode(Sha256::digest(std::fs::read(&path)?));
        self.written.insert(name.to_string(), digest);
        Ok(())
    }
}

/// Contents of `config.json`: the chosen imputation config and its CV error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputationParams {
    pub a: f64,
    pub b: f64,
    pub p: DistanceOrder,
    pub mode: DistanceMode,
    pub cv_error: f64,
    pub folds: usize,
}

impl ImputationParams {
    pub fn from_outcome(outcome: &CvOutcome<f64>) -> Self {
        let best = outcome.best;
        Self { a: best.a, b: best.b, p: best.p, mode: best.mode, cv_error: outcome.cv_error, folds: outcome.folds }
    }

    pub fn config(&self) -> Result<ImputationConfig<f64>> {
        ImputationConfig::new(self.p, self.mode, self.a, self.b)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        Ok(writeln!(w)?)
    }

    pub fn read<R: std::io::Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_hash: String,
    seed: u64,
    imputation_seed: u64,
    regression_seed: u64,
    config: &'a StudyConfig,
    users: usize,
    tools: usize,
    cells_missing_before: usize,
    sentiment_filled: usize,
    imputed: usize,
    fallbacks: usize,
    approximate_distance_pairs: usize,
    rank_similarity_disabled: bool,
    predicted_overall: usize,
    best_model: &'a str,
    ols_regularized: bool,
    pagerank_converged: [bool; 2],
    outputs: &'a BTreeMap<String, String>,
}

/// Runs every stage. Outputs are written as each stage finishes, so a
/// failure leaves the earlier stages' files in place.
pub fn run_pipeline(config: &StudyConfig) -> Result<RunArtifacts> {
    let out_dir = config.out_dir();
    std::fs::create_dir_all(&out_dir)?;
    let mut out = Outputs { dir: out_dir.clone(), written: BTreeMap::new() };

    let data = stage("ingest", load_inputs(config))?;
    let missing_before = data.ratings.missing_count();

    let mut tensor = data.ratings.clone();
    let mut provenance = data.provenance.clone();
    let sentiment_filled = stage(
        "sentiment",
        (|| {
            let records = score_comments(&data.comments, &data.lexicon, data.external.as_ref());
            out.write("sentiment.csv", |w| write_records(w, &records))?;
            apply_sentiment(&mut tensor, &mut provenance, &records)
        })(),
    )?;

    let imputation = stage(
        "imputation",
        (|| {
            let s = impute_stage(
                &tensor,
                &provenance,
                &data.aspect_rankings,
                &config.imputation,
                config.imputation_seed(),
            )?;
            out.write("populated.csv", |w| io::write_ratings(w, &s.populated, Some(&s.provenance)))?;
            out.write("config.json", |w| ImputationParams::from_outcome(&s.outcome).write(w))?;
            out.write("cv_grid.csv", |w| write_cv_grid(w, &s.outcome))?;
            Ok(s)
        })(),
    )?;

    let regression = stage(
        "regression",
        (|| {
            let r = regression_stage(
                &tensor,
                &imputation.populated,
                &imputation.provenance,
                &imputation.outcome.best,
                &data.aspect_rankings,
                &config.regression,
                config.regression_seed(),
            )?;
            out.write("models.csv", |w| write_reports(w, &r.reports))?;
            out.write("populated_overall.csv", |w| io::write_ratings(w, &r.populated, Some(&r.provenance)))?;
            Ok(r)
        })(),
    )?;

    let params = PageRankParams {
        damping: config.pagerank.damping,
        tol: config.pagerank.tol,
        max_iter: config.pagerank.max_iter,
    };
    let aggregation = stage(
        "aggregation",
        (|| {
            let agg = aggregate_rankings(&regression.populated, &data.rankings, &params)?;
            out.write("pagerank.csv", |w| write_pagerank(w, &agg))?;
            out.write("graph_raw.csv", |w| agg.raw_graph.write_csv(w))?;
            out.write("graph_populated.csv", |w| agg.populated_graph.write_csv(w))?;
            Ok(agg)
        })(),
    )?;

    let demographics = stage(
        "stats",
        (|| {
            let report = run_demographic_suite(&regression.populated, &data.profiles);
            out.write("demographics.csv", |w| report.write_csv(w, config.alpha))?;
            Ok(report)
        })(),
    )?;

    let leaderboards = stage(
        "report",
        (|| {
            let boards = build_leaderboards(
                &regression.populated,
                &regression.provenance,
                &aggregation.raw,
                &aggregation.populated,
            );
            out.write("leaderboards.csv", |w| write_leaderboards(w, &boards))?;
            let in_study: BTreeSet<&String> = regression.populated.users().iter().collect();
            let ranks: Vec<&AspectRanking> = in_study.iter().filter_map(|u| data.aspect_rankings.get(*u)).collect();
            out.write("aspect_importance.csv", |w| write_aspect_importance(w, &aspect_importance_summary(ranks)))?;
            Ok(boards)
        })(),
    )?;

    let manifest = Manifest {
        config_hash: config.hash(),
        seed: config.seed,
        imputation_seed: config.imputation_seed(),
        regression_seed: config.regression_seed(),
        config,
        users: tensor.n_users(),
        tools: tensor.n_tools(),
        cells_missing_before: missing_before,
        sentiment_filled,
        imputed: imputation.provenance.count(CellSource::Imputed),
        fallbacks: imputation.fallbacks,
        approximate_distance_pairs: imputation.approximate_pairs,
        rank_similarity_disabled: imputation.rank_disabled,
        predicted_overall: regression.provenance.count(CellSource::Predicted),
        best_model: regression.selection.best.label(),
        ols_regularized: regression.selection.model.is_regularized_fallback(),
        pagerank_converged: [aggregation.raw.converged, aggregation.populated.converged],
        outputs: &out.written,
    };
    let mut w = BufWriter::new(File::create(out_dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    w.flush()?;

    Ok(RunArtifacts { imputation, regression, aggregation, leaderboards, demographics, sentiment_filled, out_dir })
}

/// `p,mode,a,b,cv_error` for every grid point.
pub fn write_cv_grid<W: Write>(w: W, outcome: &CvOutcome<f64>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["p", "mode", "a", "b", "cv_error"])?;
    for e in &outcome.evaluations {
        let c = e.config;
        wtr.write_record([c.p.label(), c.mode.label(), &c.a.to_string(), &c.b.to_string(), &e.error.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Convenience for callers holding a path.
pub fn run_config_file(path: &Path, seed: Option<u64>) -> Result<RunArtifacts> {
    let mut config = StudyConfig::load(path)?;
    if let Some(s) = seed {
        config = config.with_seed(s);
    }
    run_pipeline(&config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaderboard_order() {
        let b = Leaderboard::new(
            Method::RawMean,
            vec![("b".into(), Some(3.0)), ("c".into(), None), ("a".into(), Some(3.0)), ("d".into(), Some(4.0))],
        );
        assert_eq!(b.order(), ["d", "a", "b", "c"]);
    }

    #[test]
    fn aspect_histogram() {
        let r = AspectRanking::from_order(&[
            Aspect::Playbooks,
            Aspect::Ranking,
            Aspect::Ingestion,
            Aspect::Ticketing,
            Aspect::Collaboration,
            Aspect::Automation,
        ])
        .unwrap();
        let h = aspect_importance_summary([&r]);
        assert_eq!(h[Aspect::Playbooks.index()][0], 1);
        assert_eq!(h.iter().map(|row| row.iter().sum::<usize>()).sum::<usize>(), 6);
    }
}
