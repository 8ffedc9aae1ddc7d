//! Toolkit for downselecting security tools from a small user study:
//! sample-size simulation, review assignment, multi-criteria rating
//! imputation, overall-rating regression, PageRank aggregation and
//! demographic tests.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common case.

// NaN must fail these guards, so `!(x > 0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod demostats;
pub mod error;
pub mod imputation;
pub mod io;
pub mod likert;
pub mod linalg;
pub mod num;
pub mod pipeline;
pub mod powersim;
pub mod preference;
pub mod pvalue;
pub mod regression;
pub mod sentiment;
pub mod synthetic;

pub use error::{Error, Result};
pub use likert::{Aspect, AspectRanking, CellSource, Provenance, ToolRanking, UserProfile};
pub use num::Scalar;

pub type RatingsTensor = likert::RatingsTensor<f64>;
pub type RatingsTensorF32 = likert::RatingsTensor<f32>;
pub type ImputationConfig = imputation::ImputationConfig<f64>;
pub type SimilarityMatrix = imputation::SimilarityMatrix<f64>;
pub type Model = regression::Model<f64>;
pub type ModelReport = regression::ModelReport<f64>;
pub type RegressionDataset = regression::RegressionDataset<f64>;
pub type PageRankScores = preference::PageRankScores<f64>;
pub type WaldRegressionResult = demostats::WaldRegressionResult<f64>;
pub type KruskalResult = demostats::KruskalResult<f64>;
pub type ManovaResult = demostats::ManovaResult<f64>;
pub type PolarityScore = sentiment::PolarityScore<f64>;
pub type Lexicon = sentiment::Lexicon<f64>;
