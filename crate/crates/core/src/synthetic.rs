//! Seeded synthetic studies with known structure, for tests and demos.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::io::{write_comments, write_profiles, write_ratings, write_tool_rankings, Comment};
use crate::likert::{
    Aspect, AspectRanking, Familiarity, RatingsTensor, ToolRanking, UserProfile, VideoQuality, N_CAPABILITIES,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_tools: usize,
    /// Probability that any single rating cell is left blank.
    pub missing: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { n_users: 19, n_tools: 11, missing: 0.33, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticStudy {
    /// Integer ratings; the sentiment slot is left for the comments to fill.
    pub ratings: RatingsTensor<f64>,
    pub rankings: Vec<ToolRanking>,
    pub profiles: Vec<UserProfile>,
    pub comments: Vec<Comment>,
    /// Latent per-tool quality the ratings were drawn around.
    pub tool_quality: Vec<f64>,
}

const OCCUPATIONS: [&str; 3] = ["security operator", "analyst", "manager"];
const POSITIVE: [&str; 6] = ["great", "easy", "useful", "intuitive", "powerful", "clean"];
const NEGATIVE: [&str; 6] = ["clunky", "confusing", "slow", "buggy", "limited", "outdated"];

fn likert(x: f64) -> f64 {
    x.round().clamp(1.0, 5.0)
}

/// Generates a study: each tool has a latent quality, each user a bias,
/// and ratings scatter around their sum.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticStudy> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let users: Vec<String> = (0..spec.n_users).map(|i| format!("u{i:02}")).collect();
    let tools: Vec<String> = (0..spec.n_tools).map(|i| format!("tool{i:02}")).collect();
    let tool_quality: Vec<f64> = (0..spec.n_tools).map(|_| rng.random_range(2.0..4.5)).collect();
    let user_bias: Vec<f64> = (0..spec.n_users).map(|_| rng.random_range(-0.5..0.5)).collect();

    let mut ratings = RatingsTensor::new(users.clone(), tools.clone())?;
    let mut rankings = Vec::new();
    let mut comments = Vec::new();
    let mut profiles = Vec::new();
    let overall = Aspect::Overall.index();
    for (u, user) in users.iter().enumerate() {
        let mut latent = Vec::with_capacity(spec.n_tools);
        for t in 0..spec.n_tools {
            let centre = tool_quality[t] + user_bias[u];
            let mut sum = 0.0;
            for a in Aspect::CAPABILITIES {
                let v = likert(centre + rng.random_range(-1.0..1.0));
                sum += v;
                if !rng.random_bool(spec.missing) {
                    ratings.set(u, t, a.index(), v)?;
                }
            }
            let score = sum / N_CAPABILITIES as f64 + rng.random_range(-0.3..0.3);
            latent.push(score);
            if !rng.random_bool(spec.missing) {
                ratings.set(u, t, overall, likert(score))?;
            }
            if !rng.random_bool(spec.missing) {
                let text = if score >= 3.5 {
                    format!("really {} tool", POSITIVE[rng.random_range(0..POSITIVE.len())])
                } else if score <= 2.5 {
                    format!("really {} tool", NEGATIVE[rng.random_range(0..NEGATIVE.len())])
                } else {
                    "it was okay".to_string()
                };
                comments.push(Comment { user_id: user.clone(), tool_id: tools[t].clone(), text });
            }
        }
        // users rank the tools they gave an overall rating
        let mut ranked: Vec<usize> = (0..spec.n_tools).filter(|&t| ratings.get(u, t, overall).is_some()).collect();
        ranked.sort_by(|&a, &b| latent[b].total_cmp(&latent[a]).then(a.cmp(&b)));
        if !ranked.is_empty() {
            rankings.push(ToolRanking::new(user.clone(), ranked.iter().map(|&t| tools[t].clone()).collect())?);
        }

        let mut order = Aspect::CAPABILITIES.to_vec();
        order.shuffle(&mut rng);
        let mut profile = UserProfile::new(user.clone());
        profile.years_experience = Some(rng.random_range(0..=20) as f64);
        profile.occupation = Some(OCCUPATIONS[rng.random_range(0..OCCUPATIONS.len())].to_string());
        profile.aspect_ranking = Some(AspectRanking::from_order(&order)?);
        for tool in &tools {
            profile.familiarity.insert(tool.clone(), Familiarity::ALL[rng.random_range(0..Familiarity::ALL.len())]);
            profile.video_quality.insert(tool.clone(), VideoQuality::ALL[rng.random_range(0..VideoQuality::ALL.len())]);
        }
        profiles.push(profile);
    }
    Ok(SyntheticStudy { ratings, rankings, profiles, comments, tool_quality })
}

/// Input files of a written study.
#[derive(Debug, Clone)]
pub struct StudyFiles {
    pub ratings: PathBuf,
    pub rankings: PathBuf,
    pub profiles: PathBuf,
    pub comments: PathBuf,
    pub config: PathBuf,
}

/// Writes the study's CSVs plus a `study.toml` that points at them.
pub fn write_study(study: &SyntheticStudy, dir: &Path, seed: u64) -> Result<StudyFiles> {
    std::fs::create_dir_all(dir)?;
    let files = StudyFiles {
        ratings: dir.join("ratings.csv"),
        rankings: dir.join("rankings.csv"),
        profiles: dir.join("profiles.csv"),
        comments: dir.join("comments.csv"),
        config: dir.join("study.toml"),
    };
    write_ratings(BufWriter::new(File::create(&files.ratings)?), &study.ratings, None)?;
    write_tool_rankings(BufWriter::new(File::create(&files.rankings)?), &study.rankings)?;
    write_profiles(BufWriter::new(File::create(&files.profiles)?), &study.profiles)?;
    write_comments(BufWriter::new(File::create(&files.comments)?), &study.comments)?;
    let config = format!(
        "seed = {seed}\nout_dir = \"out\"\n\n[inputs]\nratings = \"ratings.csv\"\nrankings = \"rankings.csv\"\n\
         profiles = \"profiles.csv\"\ncomments = \"comments.csv\"\n"
    );
    std::fs::write(&files.config, config)?;
    Ok(files)
}
