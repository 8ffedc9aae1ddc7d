//! Overall-rating regression: model roster, cross-validated selection and
//! filling of the overall slot.

mod models;

pub use models::{
    gradient_check_at, train, train_elastic_net, train_kernel_ridge, train_mean, train_ols, train_ridge,
    train_ridge_loo, train_sgd_linear, Model, ModelKind, Objective, ENET_ALPHA, ENET_L1_RATIO, KERNEL_GAMMA,
    KERNEL_LAMBDA, OLS_FALLBACK_LAMBDA, RIDGE_LAMBDAS, SGD_EPOCHS, SGD_LEARNING_RATE,
};

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::imputation::clamp_likert;
use crate::likert::{Aspect, CellSource, Provenance, RatingsTensor, N_SLOTS};
use crate::num::Scalar;

pub const DEFAULT_FOLDS: usize = 5;
/// Features are the six capabilities plus sentiment.
pub const N_FEATURES: usize = N_SLOTS - 1;
/// Report id of the recommender baseline.
pub const AK_BASELINE_ID: &str = "ak_baseline";

/// Rows with a user-given overall rating, keyed by (user, tool) index.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset<T> {
    pub features: Vec<Vec<T>>,
    pub targets: Vec<T>,
    pub keys: Vec<(usize, usize)>,
}

impl<T: Scalar> RegressionDataset<T> {
    pub fn new(features: Vec<Vec<T>>, targets: Vec<T>, keys: Vec<(usize, usize)>) -> Result<Self> {
        if features.len() != targets.len() || keys.len() != targets.len() {
            return Err(Error::LengthMismatch { left: features.len(), right: targets.len() });
        }
        if let Some(r) = features.iter().find(|r| r.len() != N_FEATURES) {
            return Err(Error::LengthMismatch { left: N_FEATURES, right: r.len() });
        }
        Ok(Self { features, targets, keys })
    }

    /// Training rows of a populated tensor: every review whose overall
    /// rating was observed. All seven feature slots must be filled.
    pub fn from_populated(tensor: &RatingsTensor<T>, provenance: &Provenance) -> Result<Self> {
        let overall = Aspect::Overall.index();
        let (mut features, mut targets, mut keys) = (Vec::new(), Vec::new(), Vec::new());
        for u in 0..tensor.n_users() {
            for t in 0..tensor.n_tools() {
                if provenance.get(u, t, overall) != CellSource::Observed {
                    continue;
                }
                let Some(y) = tensor.get(u, t, overall) else { continue };
                features.push(feature_row(tensor, u, t)?);
                targets.push(y);
                keys.push((u, t));
            }
        }
        Self::new(features, targets, keys)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn subset(&self, rows: &[usize]) -> (Vec<Vec<T>>, Vec<T>) {
        (rows.iter().map(|&i| self.features[i].clone()).collect(), rows.iter().map(|&i| self.targets[i]).collect())
    }
}

fn feature_row<T: Scalar>(tensor: &RatingsTensor<T>, u: usize, t: usize) -> Result<Vec<T>> {
    tensor.review(u, t)[..N_FEATURES]
        .iter()
        .copied()
        .collect::<Option<Vec<T>>>()
        .ok_or_else(|| Error::invalid(format!("review ({u}, {t}) has unpopulated aspect slots")))
}

/// Seeded assignment of dataset rows to folds, shared by every model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPartition {
    fold_of: Vec<usize>,
    folds: usize,
}

impl FoldPartition {
    pub fn new(n_rows: usize, folds: usize, seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::invalid("cross-validation needs at least 2 folds"));
        }
        if n_rows < folds {
            return Err(Error::invalid(format!("{n_rows} labeled rows cannot fill {folds} folds")));
        }
        let mut order: Vec<usize> = (0..n_rows).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut fold_of = vec![0; n_rows];
        for (pos, &row) in order.iter().enumerate() {
            fold_of[row] = pos % folds;
        }
        Ok(Self { fold_of, folds })
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn fold_of(&self, row: usize) -> usize {
        self.fold_of[row]
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport<T> {
    pub model_id: String,
    pub fold_mse: Vec<T>,
    pub mean_mse: T,
}

impl<T: Scalar> ModelReport<T> {
    pub fn from_folds(model_id: impl Into<String>, fold_mse: Vec<T>) -> Self {
        let mean_mse = fold_mse.iter().copied().sum::<T>() / T::from_usize_lossy(fold_mse.len());
        Self { model_id: model_id.into(), fold_mse, mean_mse }
    }
}

fn mse<T: Scalar>(pred: impl Iterator<Item = T>, truth: &[T]) -> T {
    let total: T = pred.zip(truth).map(|(p, &y)| (p - y) * (p - y)).sum();
    total / T::from_usize_lossy(truth.len())
}

/// Cross-validated MSE of one model kind. Predictions are clamped to the
/// Likert range, as they are when deployed.
pub fn cross_validate<T: Scalar>(
    data: &RegressionDataset<T>,
    kind: ModelKind,
    partition: &FoldPartition,
    seed: u64,
) -> Result<ModelReport<T>> {
    let fold_mse = (0..partition.folds())
        .map(|f| {
            let (xtr, ytr) = data.subset(&partition.train_rows(f));
            let (xte, yte) = data.subset(&partition.test_rows(f));
            let model = train(kind, &xtr, &ytr, seed)?;
            Ok(mse(xte.iter().map(|r| clamp_likert(model.predict(r))), &yte))
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(ModelReport::from_folds(kind.label(), fold_mse))
}

/// Scores out-of-fold predictions made elsewhere (the recommender's own
/// overall-slot predictions) under the same partition.
pub fn ak_baseline<T: Scalar>(targets: &[T], predictions: &[T], partition: &FoldPartition) -> Result<ModelReport<T>> {
    if targets.len() != predictions.len() {
        return Err(Error::LengthMismatch { left: targets.len(), right: predictions.len() });
    }
    let fold_mse = (0..partition.folds())
        .map(|f| {
            let rows = partition.test_rows(f);
            let truth: Vec<T> = rows.iter().map(|&i| targets[i]).collect();
            mse(rows.iter().map(|&i| clamp_likert(predictions[i])), &truth)
        })
        .collect();
    Ok(ModelReport::from_folds(AK_BASELINE_ID, fold_mse))
}

#[derive(Debug, Clone)]
pub struct Selection<T> {
    pub best: ModelKind,
    /// Winner retrained on every labeled row.
    pub model: Model<T>,
    /// One report per roster entry, in roster order.
    pub reports: Vec<ModelReport<T>>,
    pub partition: FoldPartition,
}

/// Picks the roster entry with the lowest mean CV MSE (earlier entries
/// win ties) and retrains it on all rows.
pub fn select_model<T: Scalar>(
    data: &RegressionDataset<T>,
    roster: &[ModelKind],
    folds: usize,
    seed: u64,
) -> Result<Selection<T>> {
    if roster.is_empty() {
        return Err(Error::invalid("empty model roster"));
    }
    let partition = FoldPartition::new(data.len(), folds, seed)?;
    let reports: Vec<ModelReport<T>> =
        roster.par_iter().map(|&k| cross_validate(data, k, &partition, seed)).collect::<Result<_>>()?;
    let mut best = 0;
    for (i, r) in reports.iter().enumerate() {
        if r.mean_mse < reports[best].mean_mse {
            best = i;
        }
    }
    let model = train(roster[best], &data.features, &data.targets, seed)?;
    Ok(Selection { best: roster[best], model, reports, partition })
}

/// Replaces every overall rating not given by the user with the clamped
/// model prediction. Observed overall ratings are kept.
pub fn predict_overall<T: Scalar>(
    model: &Model<T>,
    tensor: &RatingsTensor<T>,
    provenance: &Provenance,
) -> Result<(RatingsTensor<T>, Provenance)> {
    let overall = Aspect::Overall.index();
    let mut out = tensor.clone();
    let mut prov = provenance.clone();
    for u in 0..tensor.n_users() {
        for t in 0..tensor.n_tools() {
            if provenance.get(u, t, overall) == CellSource::Observed && tensor.get(u, t, overall).is_some() {
                continue;
            }
            let x = feature_row(tensor, u, t)?;
            out.set(u, t, overall, clamp_likert(model.predict(&x)))?;
            prov.set(u, t, overall, CellSource::Predicted);
        }
    }
    Ok((out, prov))
}

/// `model,cv_mse`, one row per report.
pub fn write_reports<T: Scalar, W: Write>(w: W, reports: &[ModelReport<T>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["model", "cv_mse"])?;
    for r in reports {
        wtr.write_record([r.model_id.clone(), format!("{}", r.mean_mse)])?;
    }
    wtr.flush()?;
    Ok(())
}
