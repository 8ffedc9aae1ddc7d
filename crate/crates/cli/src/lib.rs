//! Command-line front end over `downselect_core`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use downselect_core::assignment::best_of_k;
use downselect_core::demostats::run_demographic_suite;
use downselect_core::imputation::{grid_search_cv, DistanceMode, DistanceOrder};
use downselect_core::io::{
    read_aspect_rankings, read_comments, read_profiles, read_ratings, read_tool_rankings, write_ratings,
};
use downselect_core::likert::{Aspect, Provenance, RatingsTensor};
use downselect_core::pipeline::{
    apply_sentiment, aspect_importance_summary, build_leaderboards, read_pagerank, regression_stage, run_pipeline,
    write_aspect_importance, write_leaderboards, write_pagerank, ImputationParams, ImputationSettings,
    RegressionSettings, StudyConfig,
};
use downselect_core::powersim::{fit_discrete_dist, run_power_simulation, ScenarioConfig};
use downselect_core::preference::{aggregate_rankings, PageRankParams, DEFAULT_MAX_ITER, DEFAULT_TOL};
use downselect_core::regression::{predict_overall, select_model, write_reports, ModelKind, RegressionDataset};
use downselect_core::sentiment::{ingest_external_scores, score_comments, write_records, Lexicon};
use downselect_core::synthetic::{generate, write_study, SyntheticSpec};

#[derive(Parser)]
#[command(name = "downselect", version, about = "Rank candidate tools from a small multi-criteria user study")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo power of the two-tool comparison tests.
    PowerSim(PowerSimArgs),
    /// Assign tool subsets to participants with balanced pair coverage.
    Assign(AssignArgs),
    /// Score review comments and map them to the Likert scale.
    Sentiment(SentimentArgs),
    /// Grid-search the imputation config and fill missing ratings.
    Impute(ImputeArgs),
    /// Select the overall-rating regressor and fill the overall slot.
    Predict(PredictArgs),
    /// PageRank over the raw and populated preference graphs.
    Aggregate(AggregateArgs),
    /// Demographic regression, Kruskal-Wallis and MANOVA tests.
    Stats(StatsArgs),
    /// Build the four leaderboards from stage outputs.
    Report(ReportArgs),
    /// Run every stage from a study config file.
    Run(RunArgs),
    /// Write a seeded synthetic study with a config pointing at it.
    Synth(SynthArgs),
}

#[derive(Args)]
struct PowerSimArgs {
    #[arg(long)]
    mean_a: f64,
    #[arg(long)]
    var_a: f64,
    /// Defaults to tool A's distribution (a size check).
    #[arg(long)]
    mean_b: Option<f64>,
    #[arg(long)]
    var_b: Option<f64>,
    /// Reviews per tool, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10,15,20,25,30,35,40")]
    m: Vec<usize>,
    #[arg(long, default_value_t = ScenarioConfig::DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Binarization thresholds for the proportion tests.
    #[arg(long, value_delimiter = ',', default_value = "3.5")]
    thresholds: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "scenario")]
    scenario: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AssignArgs {
    /// Number of tools.
    #[arg(long)]
    tools: usize,
    #[arg(long)]
    participants: usize,
    /// Tools per participant.
    #[arg(long)]
    per: usize,
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SentimentArgs {
    #[arg(long)]
    comments: PathBuf,
    /// `word,valence` CSV; the builtin lexicon otherwise.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// `user_id,tool_id,scorer_id,polarity` CSV.
    #[arg(long)]
    external: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ImputeArgs {
    #[arg(long)]
    ratings: PathBuf,
    /// Aspect importance ranks; without them rank similarity is off.
    #[arg(long)]
    rankings: Option<PathBuf>,
    /// Scores these comments into the sentiment slot before imputing.
    #[arg(long)]
    comments: Option<PathBuf>,
    #[arg(long, requires = "comments")]
    lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = DistanceOrder::ALL.map(|p| p.label().to_string()))]
    orders: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = DistanceMode::ALL.map(|m| m.label().to_string()))]
    modes: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    params_out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Output of `impute`, with its provenance column.
    #[arg(long)]
    populated: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, value_delimiter = ',')]
    roster: Option<Vec<String>>,
    /// Also score the recommender baseline: unpopulated ratings ...
    #[arg(long, requires = "params")]
    baseline_ratings: Option<PathBuf>,
    /// ... the `config.json` written by `impute` ...
    #[arg(long)]
    params: Option<PathBuf>,
    /// ... and aspect ranks if the config uses rank similarity.
    #[arg(long)]
    rankings: Option<PathBuf>,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    populated: PathBuf,
    /// User-given tool rankings.
    #[arg(long)]
    rankings: PathBuf,
    #[arg(long, default_value_t = 0.85)]
    damping: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Writes the populated graph's edges; the raw graph goes to a `_raw` sibling.
    #[arg(long)]
    graph_out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    populated: PathBuf,
    #[arg(long)]
    profiles: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Output of `predict`, with its provenance column.
    #[arg(long)]
    populated: PathBuf,
    /// Output of `aggregate`.
    #[arg(long)]
    pagerank: PathBuf,
    /// Adds the aspect-importance histogram from the profiles' aspect ranks.
    #[arg(long)]
    profiles: Option<PathBuf>,
    #[arg(long)]
    aspect_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value_t = 19)]
    users: usize,
    #[arg(long, default_value_t = 11)]
    tools: usize,
    #[arg(long, default_value_t = 0.33)]
    missing: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn read_populated(path: &Path) -> Result<(RatingsTensor<f64>, Provenance)> {
    let file = read_ratings::<f64, _>(open(path)?, false)?;
    let prov = match file.provenance {
        Some(p) => p,
        None => Provenance::from_tensor(&file.tensor),
    };
    Ok((file.tensor, prov))
}

fn power_sim(a: PowerSimArgs) -> Result<()> {
    let dist_a = fit_discrete_dist(a.mean_a, a.var_a)?;
    let dist_b = fit_discrete_dist(a.mean_b.unwrap_or(a.mean_a), a.var_b.unwrap_or(a.var_a))?;
    let config = ScenarioConfig {
        dist_a,
        dist_b,
        review_counts: a.m,
        n_trials: a.trials,
        alpha: a.alpha,
        thresholds: a.thresholds,
        seed: a.seed,
    };
    let table = run_power_simulation(&config)?;
    let mut wtr = csv::Writer::from_writer(output(a.out.as_deref())?);
    table.write_csv(&mut wtr, &a.scenario, true)?;
    wtr.flush()?;
    Ok(())
}

fn assign(a: AssignArgs) -> Result<()> {
    let plan = best_of_k(a.tools, a.participants, a.per, a.restarts, a.seed)?;
    eprintln!("assignment error {:.4} (mu {:.4})", plan.assignment_error(), plan.mu());
    for (count, pairs) in plan.count_histogram() {
        eprintln!("  {pairs} pairs reviewed together {count} times");
    }
    plan.write_csv(output(a.out.as_deref())?)?;
    Ok(())
}

fn sentiment(a: SentimentArgs) -> Result<()> {
    let comments = read_comments(open(&a.comments)?)?;
    let lexicon = match &a.lexicon {
        Some(p) => Lexicon::from_csv(open(p)?)?,
        None => Lexicon::<f64>::builtin(),
    };
    let external = a.external.as_deref().map(|p| anyhow::Ok(ingest_external_scores(open(p)?)?)).transpose()?;
    let records = score_comments(&comments, &lexicon, external.as_ref());
    let flagged = records.iter().filter(|r| r.divergence_flag).count();
    eprintln!("{} comments scored, {flagged} with divergent scorers", records.len());
    write_records(output(a.out.as_deref())?, &records)?;
    Ok(())
}

fn parse_all<T: std::str::FromStr<Err = downselect_core::Error>>(items: &[String]) -> Result<Vec<T>> {
    Ok(items.iter().map(|s| s.parse()).collect::<std::result::Result<_, _>>()?)
}

fn impute(a: ImputeArgs) -> Result<()> {
    let (mut tensor, mut provenance) = read_populated(&a.ratings)?;
    if let Some(path) = &a.comments {
        let lexicon = match &a.lexicon {
            Some(p) => Lexicon::from_csv(open(p)?)?,
            None => Lexicon::<f64>::builtin(),
        };
        let records = score_comments(&read_comments(open(path)?)?, &lexicon, None);
        let filled = apply_sentiment(&mut tensor, &mut provenance, &records)?;
        eprintln!("{filled} sentiment cells filled from comments");
    }
    let rankings = match &a.rankings {
        Some(p) => read_aspect_rankings(open(p)?)?,
        None => Default::default(),
    };
    let with_rank = tensor.users().iter().all(|u| rankings.contains_key(u));
    if !with_rank {
        eprintln!("some users lack aspect ranks; rank similarity disabled");
    }
    let settings = ImputationSettings {
        folds: a.folds,
        orders: parse_all(&a.orders)?,
        modes: parse_all(&a.modes)?,
        ..Default::default()
    };
    let outcome = grid_search_cv(&tensor, &rankings, &settings.grid(with_rank)?, a.folds, a.seed)?;
    let best = outcome.best;
    eprintln!("best p={} mode={} a={} b={} cv_error={:.4}", best.p, best.mode, best.a, best.b, outcome.cv_error);
    let populated = downselect_core::imputation::populate_with(&tensor, provenance, &best, &rankings)?;
    if populated.fallbacks > 0 {
        eprintln!("{} cells fell back to the slot mean", populated.fallbacks);
    }
    write_ratings(output(Some(&a.out))?, &populated.tensor, Some(&populated.provenance))?;
    if let Some(p) = &a.params_out {
        ImputationParams::from_outcome(&outcome).write(output(Some(p))?)?;
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let (tensor, provenance) = read_populated(&a.populated)?;
    let roster = match &a.roster {
        Some(r) => parse_all::<ModelKind>(r)?,
        None => ModelKind::ROSTER.to_vec(),
    };
    let (reports, populated, prov, best) = match (&a.baseline_ratings, &a.params) {
        (Some(raw), Some(params)) => {
            let raw = read_ratings::<f64, _>(open(raw)?, false)?.tensor;
            let config = ImputationParams::read(open(params)?)?.config()?;
            let rankings = match &a.rankings {
                Some(p) => read_aspect_rankings(open(p)?)?,
                None => Default::default(),
            };
            if raw.users() != tensor.users() || raw.tools() != tensor.tools() {
                bail!("baseline ratings must list the same users and tools as the populated file");
            }
            let settings = RegressionSettings { folds: a.folds, roster, seed: Some(a.seed) };
            let r = regression_stage(&raw, &tensor, &provenance, &config, &rankings, &settings, a.seed)?;
            (r.reports, r.populated, r.provenance, r.selection.best)
        }
        _ => {
            let data = RegressionDataset::from_populated(&tensor, &provenance)?;
            let sel = select_model(&data, &roster, a.folds, a.seed)?;
            let (populated, prov) = predict_overall(&sel.model, &tensor, &provenance)?;
            (sel.reports, populated, prov, sel.best)
        }
    };
    eprintln!("selected {best}");
    write_reports(output(a.report.as_deref())?, &reports)?;
    write_ratings(output(Some(&a.out))?, &populated, Some(&prov))?;
    Ok(())
}

fn aggregate(a: AggregateArgs) -> Result<()> {
    let (tensor, _) = read_populated(&a.populated)?;
    let rankings = read_tool_rankings(open(&a.rankings)?)?;
    let params = PageRankParams { damping: a.damping, tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER };
    let agg = aggregate_rankings(&tensor, &rankings, &params)?;
    if !agg.raw.converged || !agg.populated.converged {
        eprintln!("warning: PageRank hit the iteration cap");
    }
    write_pagerank(output(a.out.as_deref())?, &agg)?;
    if let Some(p) = &a.graph_out {
        agg.populated_graph.write_csv(output(Some(p))?)?;
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("graph");
        let ext = p.extension().and_then(|s| s.to_str()).unwrap_or("csv");
        agg.raw_graph.write_csv(output(Some(&p.with_file_name(format!("{stem}_raw.{ext}"))))?)?;
    }
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let (tensor, _) = read_populated(&a.populated)?;
    let profiles = read_profiles(open(&a.profiles)?)?;
    let report = run_demographic_suite(&tensor, &profiles);
    report.write_csv(output(a.out.as_deref())?, a.alpha)?;
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let (tensor, provenance) = read_populated(&a.populated)?;
    if tensor.missing_entries().any(|(_, _, s)| s == Aspect::Overall.index()) {
        bail!("{} still has missing overall ratings; run `predict` first", a.populated.display());
    }
    let (raw, ml) = read_pagerank(open(&a.pagerank)?)?;
    let boards = build_leaderboards(&tensor, &provenance, &raw, &ml);
    write_leaderboards(output(a.out.as_deref())?, &boards)?;
    if let Some(p) = &a.profiles {
        let profiles = read_profiles(open(p)?)?;
        let counts = aspect_importance_summary(profiles.iter().filter_map(|p| p.aspect_ranking.as_ref()));
        write_aspect_importance(output(a.aspect_out.as_deref())?, &counts)?;
    }
    Ok(())
}

fn run_study(a: RunArgs) -> Result<()> {
    let mut config = StudyConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        config = config.with_seed(s);
    }
    let art = run_pipeline(&config)?;
    let best = art.imputation.outcome.best;
    eprintln!(
        "imputation p={} mode={} a={} b={} cv_error={:.4}; model {}; outputs in {}",
        best.p,
        best.mode,
        best.a,
        best.b,
        art.imputation.outcome.cv_error,
        art.regression.selection.best,
        art.out_dir.display()
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec { n_users: a.users, n_tools: a.tools, missing: a.missing, seed: a.seed };
    let study = generate(&spec)?;
    let files = write_study(&study, &a.dir, a.seed)?;
    eprintln!("wrote {}", files.config.display());
    Ok(())
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    execute(Cli::try_parse_from(args)?)
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::PowerSim(a) => power_sim(a),
        Command::Assign(a) => assign(a),
        Command::Sentiment(a) => sentiment(a),
        Command::Impute(a) => impute(a),
        Command::Predict(a) => predict(a),
        Command::Aggregate(a) => aggregate(a),
        Command::Stats(a) => stats(a),
        Command::Report(a) => report(a),
        Command::Run(a) => run_study(a),
        Command::Synth(a) => synth(a),
    }
}
