//! Regressors for the overall rating and their training objectives.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::num::Scalar;

pub const RIDGE_LAMBDAS: [f64; 5] = [1e-3, 1e-2, 1e-1, 1.0, 10.0];
/// Regularizer used when the OLS normal equations are singular.
pub const OLS_FALLBACK_LAMBDA: f64 = 1e-8;
pub const ENET_ALPHA: f64 = 1.0;
pub const ENET_L1_RATIO: f64 = 0.5;
pub const ENET_TOL: f64 = 1e-8;
pub const ENET_MAX_ITER: usize = 100_000;
pub const SGD_LEARNING_RATE: f64 = 0.01;
pub const SGD_EPOCHS: usize = 500;
pub const KERNEL_LAMBDA: f64 = 1.0;
/// RBF width 1/d for d = 7 features.
pub const KERNEL_GAMMA: f64 = 1.0 / 7.0;
/// Minimum rows before OLS is attempted without regularization.
pub const OLS_MIN_ROWS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ols,
    Ridge,
    ElasticNet,
    Sgd,
    KernelRidge,
    Mean,
}

impl ModelKind {
    pub const ROSTER: [ModelKind; 6] = [
        ModelKind::Ols,
        ModelKind::Ridge,
        ModelKind::ElasticNet,
        ModelKind::Sgd,
        ModelKind::KernelRidge,
        ModelKind::Mean,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Ridge => "ridge",
            ModelKind::ElasticNet => "elastic_net",
            ModelKind::Sgd => "sgd",
            ModelKind::KernelRidge => "kernel_ridge",
            ModelKind::Mean => "mean",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ROSTER
            .into_iter()
            .find(|k| k.label() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown model `{s}`")))
    }
}

/// Fitted model. Linear variants share one representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Model<T> {
    Linear {
        kind: ModelKind,
        weights: Vec<T>,
        intercept: T,
        /// Regularization strength of the fitted objective (0 for OLS and SGD).
        lambda: T,
        /// OLS fell back to a tiny ridge penalty.
        regularized: bool,
    },
    ElasticNet {
        weights: Vec<T>,
        intercept: T,
        alpha: T,
        l1_ratio: T,
    },
    Kernel {
        support: Vec<Vec<T>>,
        dual: Vec<T>,
        offset: T,
        gamma: T,
        lambda: T,
    },
    Mean(T),
}

fn rbf<T: Scalar>(a: &[T], b: &[T], gamma: T) -> T {
    let d2: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

impl<T: Scalar> Model<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Linear { kind, .. } => *kind,
            Model::ElasticNet { .. } => ModelKind::ElasticNet,
            Model::Kernel { .. } => ModelKind::KernelRidge,
            Model::Mean(_) => ModelKind::Mean,
        }
    }

    /// Unclamped prediction for one feature row.
    pub fn predict(&self, x: &[T]) -> T {
        match self {
            Model::Linear { weights, intercept, .. } | Model::ElasticNet { weights, intercept, .. } => {
                *intercept + dot(weights, x)
            }
            Model::Kernel { support, dual, offset, gamma, .. } => {
                *offset + support.iter().zip(dual).map(|(s, &a)| a * rbf(s, x, *gamma)).sum::<T>()
            }
            Model::Mean(c) => *c,
        }
    }

    /// Linear weights and intercept, if the model is linear.
    pub fn coefficients(&self) -> Option<(&[T], T)> {
        match self {
            Model::Linear { weights, intercept, .. } | Model::ElasticNet { weights, intercept, .. } => {
                Some((weights, *intercept))
            }
            _ => None,
        }
    }

    pub fn is_regularized_fallback(&self) -> bool {
        matches!(self, Model::Linear { regularized: true, .. })
    }
}

pub fn train<T: Scalar>(kind: ModelKind, x: &[Vec<T>], y: &[T], seed: u64) -> Result<Model<T>> {
    match kind {
        ModelKind::Ols => train_ols(x, y),
        ModelKind::Ridge => train_ridge_loo(x, y),
        ModelKind::ElasticNet => train_elastic_net(x, y, T::lit(ENET_ALPHA), T::lit(ENET_L1_RATIO)),
        ModelKind::Sgd => train_sgd_linear(x, y, T::lit(SGD_LEARNING_RATE), SGD_EPOCHS, seed),
        ModelKind::KernelRidge => train_kernel_ridge(x, y, T::lit(KERNEL_LAMBDA), T::lit(KERNEL_GAMMA)),
        ModelKind::Mean => train_mean(y),
    }
}

fn check_shape<T>(x: &[Vec<T>], y: &[T]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.is_empty() {
        return Err(Error::invalid("cannot train on zero rows"));
    }
    let d = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != d) {
        return Err(Error::LengthMismatch { left: d, right: r.len() });
    }
    Ok(d)
}

/// Column means and the centered design.
struct Centered<T> {
    x_mean: Vec<T>,
    y_mean: T,
    xc: Vec<Vec<T>>,
    yc: Vec<T>,
}

fn center<T: Scalar>(x: &[Vec<T>], y: &[T]) -> Centered<T> {
    let n = T::from_usize_lossy(x.len());
    let d = x[0].len();
    let x_mean: Vec<T> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<T>() / n).collect();
    let y_mean = y.iter().copied().sum::<T>() / n;
    let xc = x.iter().map(|r| r.iter().zip(&x_mean).map(|(&v, &m)| v - m).collect()).collect();
    let yc = y.iter().map(|&v| v - y_mean).collect();
    Centered { x_mean, y_mean, xc, yc }
}

fn gram<T: Scalar>(xc: &[Vec<T>], d: usize) -> Matrix<T> {
    let mut g = Matrix::zeros(d, d);
    for r in xc {
        for i in 0..d {
            for j in 0..d {
                g[(i, j)] = g[(i, j)] + r[i] * r[j];
            }
        }
    }
    g
}

fn xty<T: Scalar>(xc: &[Vec<T>], yc: &[T], d: usize) -> Vec<T> {
    (0..d).map(|j| xc.iter().zip(yc).map(|(r, &v)| r[j] * v).sum()).collect()
}

/// Minimizer of Σ r² + λ‖w‖² with an unpenalized intercept.
fn ridge_solve<T: Scalar>(c: &Centered<T>, d: usize, lambda: T) -> Result<(Vec<T>, T)> {
    let mut g = gram(&c.xc, d);
    g.add_diagonal(lambda);
    let w = g.solve(&xty(&c.xc, &c.yc, d))?;
    let b = c.y_mean - dot(&w, &c.x_mean);
    Ok((w, b))
}

pub fn train_ols<T: Scalar>(x: &[Vec<T>], y: &[T]) -> Result<Model<T>> {
    let d = check_shape(x, y)?;
    let c = center(x, y);
    let exact = if x.len() >= OLS_MIN_ROWS { ridge_solve(&c, d, T::zero()).ok() } else { None };
    let (weights, intercept, lambda, regularized) = match exact {
        Some((w, b)) => (w, b, T::zero(), false),
        None => {
            let lambda = T::lit(OLS_FALLBACK_LAMBDA);
            let (w, b) = ridge_solve(&c, d, lambda)?;
            (w, b, lambda, true)
        }
    };
    Ok(Model::Linear { kind: ModelKind::Ols, weights, intercept, lambda, regularized })
}

pub fn train_ridge<T: Scalar>(x: &[Vec<T>], y: &[T], lambda: T) -> Result<Model<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::invalid(format!("ridge penalty must be positive, got {lambda}")));
    }
    let d = check_shape(x, y)?;
    let (weights, intercept) = ridge_solve(&center(x, y), d, lambda)?;
    Ok(Model::Linear { kind: ModelKind::Ridge, weights, intercept, lambda, regularized: false })
}

/// Leave-one-out MSE of ridge from the hat-matrix diagonal.
fn ridge_loo_mse<T: Scalar>(c: &Centered<T>, d: usize, lambda: T) -> Result<T> {
    let n = T::from_usize_lossy(c.xc.len());
    let mut g = gram(&c.xc, d);
    g.add_diagonal(lambda);
    let inv = g.lu()?.inverse()?;
    let w = inv.matvec(&xty(&c.xc, &c.yc, d))?;
    let mut total = T::zero();
    for (r, &yc) in c.xc.iter().zip(&c.yc) {
        let h = T::one() / n + dot(r, &inv.matvec(r)?);
        let resid = (yc - dot(r, &w)) / (T::one() - h);
        total = total + resid * resid;
    }
    Ok(total / n)
}

/// Ridge with λ picked from [`RIDGE_LAMBDAS`] by leave-one-out error; the
/// first λ wins ties.
pub fn train_ridge_loo<T: Scalar>(x: &[Vec<T>], y: &[T]) -> Result<Model<T>> {
    let d = check_shape(x, y)?;
    let c = center(x, y);
    let mut best: Option<(T, T)> = None;
    for &l in &RIDGE_LAMBDAS {
        let lambda = T::lit(l);
        let Ok(mse) = ridge_loo_mse(&c, d, lambda) else { continue };
        if mse.is_finite() && best.is_none_or(|(_, m)| mse < m) {
            best = Some((lambda, mse));
        }
    }
    let lambda = best.map_or(T::lit(RIDGE_LAMBDAS[RIDGE_LAMBDAS.len() - 1]), |b| b.0);
    train_ridge(x, y, lambda)
}

fn soft_threshold<T: Scalar>(v: T, t: T) -> T {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        T::zero()
    }
}

/// Coordinate descent on
/// (1/2n)‖y − Xw − b‖² + α·ρ‖w‖₁ + α(1−ρ)/2·‖w‖².
pub fn train_elastic_net<T: Scalar>(x: &[Vec<T>], y: &[T], alpha: T, l1_ratio: T) -> Result<Model<T>> {
    if !(alpha > T::zero()) || !(l1_ratio >= T::zero() && l1_ratio <= T::one()) {
        return Err(Error::invalid(format!(
            "elastic net needs alpha > 0 and l1_ratio in [0, 1], got {alpha}, {l1_ratio}"
        )));
    }
    let d = check_shape(x, y)?;
    let c = center(x, y);
    let n = T::from_usize_lossy(x.len());
    let col_sq: Vec<T> = (0..d).map(|j| c.xc.iter().map(|r| r[j] * r[j]).sum::<T>() / n).collect();
    let l1 = alpha * l1_ratio;
    let l2 = alpha * (T::one() - l1_ratio);
    let mut w = vec![T::zero(); d];
    let mut resid = c.yc.clone();
    let tol = T::lit(ENET_TOL);
    let mut delta = T::infinity();
    for _ in 0..ENET_MAX_ITER {
        delta = T::zero();
        for j in 0..d {
            if col_sq[j] == T::zero() {
                continue;
            }
            let rho = c.xc.iter().zip(&resid).map(|(r, &e)| r[j] * e).sum::<T>() / n + col_sq[j] * w[j];
            let new = soft_threshold(rho, l1) / (col_sq[j] + l2);
            let step = new - w[j];
            if step != T::zero() {
                for (r, e) in c.xc.iter().zip(resid.iter_mut()) {
                    *e = *e - step * r[j];
                }
                w[j] = new;
            }
            delta = delta.max(step.abs());
        }
        if delta < tol {
            let intercept = c.y_mean - dot(&w, &c.x_mean);
            return Ok(Model::ElasticNet { weights: w, intercept, alpha, l1_ratio });
        }
    }
    Err(Error::NonConvergence { iterations: ENET_MAX_ITER, residual: delta.to_f64_lossy() })
}

/// Per-sample gradient steps on ½(w·x + b − y)², one seeded shuffle per
/// epoch. Features are standardized during training and the fitted weights
/// mapped back to the raw scale.
pub fn train_sgd_linear<T: Scalar>(x: &[Vec<T>], y: &[T], lr: T, epochs: usize, seed: u64) -> Result<Model<T>> {
    if !(lr > T::zero()) || epochs == 0 {
        return Err(Error::invalid("SGD needs a positive learning rate and at least one epoch"));
    }
    let d = check_shape(x, y)?;
    let n = T::from_usize_lossy(x.len());
    let c = center(x, y);
    let scale: Vec<T> = (0..d)
        .map(|j| {
            let sd = (c.xc.iter().map(|r| r[j] * r[j]).sum::<T>() / n).sqrt();
            if sd > T::zero() {
                sd
            } else {
                T::one()
            }
        })
        .collect();
    let z: Vec<Vec<T>> = c.xc.iter().map(|r| r.iter().zip(&scale).map(|(&v, &s)| v / s).collect()).collect();
    let mut w = vec![T::zero(); d];
    let mut b = T::zero();
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let err = b + dot(&w, &z[i]) - c.yc[i];
            for (wj, &zj) in w.iter_mut().zip(&z[i]) {
                *wj = *wj - lr * err * zj;
            }
            b = b - lr * err;
        }
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonConvergence { iterations: epoch + 1, residual: f64::INFINITY });
        }
    }
    let weights: Vec<T> = w.iter().zip(&scale).map(|(&v, &s)| v / s).collect();
    let intercept = c.y_mean + b - dot(&weights, &c.x_mean);
    Ok(Model::Linear { kind: ModelKind::Sgd, weights, intercept, lambda: T::zero(), regularized: false })
}

/// Dual solution (K + λI)α = y − ȳ with an RBF kernel.
pub fn train_kernel_ridge<T: Scalar>(x: &[Vec<T>], y: &[T], lambda: T, gamma: T) -> Result<Model<T>> {
    if !(lambda > T::zero()) || !(gamma > T::zero()) {
        return Err(Error::invalid("kernel ridge needs positive lambda and gamma"));
    }
    check_shape(x, y)?;
    let n = x.len();
    let offset = y.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let mut k = kernel_matrix(x, gamma);
    k.add_diagonal(lambda);
    let yc: Vec<T> = y.iter().map(|&v| v - offset).collect();
    let dual = k.solve(&yc)?;
    Ok(Model::Kernel { support: x.to_vec(), dual, offset, gamma, lambda })
}

fn kernel_matrix<T: Scalar>(x: &[Vec<T>], gamma: T) -> Matrix<T> {
    let n = x.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = rbf(&x[i], &x[j], gamma);
        }
    }
    k
}

pub fn train_mean<T: Scalar>(y: &[T]) -> Result<Model<T>> {
    if y.is_empty() {
        return Err(Error::invalid("cannot train on zero rows"));
    }
    Ok(Model::Mean(y.iter().copied().sum::<T>() / T::from_usize_lossy(y.len())))
}

/// Training objective of a fitted model as a function of its parameters,
/// for gradient checking. Elastic net is smooth only away from zero
/// weights; its L1 term is omitted for zero coordinates.
pub struct Objective<'a, T> {
    model: &'a Model<T>,
    x: &'a [Vec<T>],
    y: &'a [T],
}

impl<'a, T: Scalar> Objective<'a, T> {
    pub fn new(model: &'a Model<T>, x: &'a [Vec<T>], y: &'a [T]) -> Self {
        Self { model, x, y }
    }

    /// The fitted parameter vector.
    pub fn params(&self) -> Vec<T> {
        match self.model {
            Model::Linear { weights, intercept, .. } | Model::ElasticNet { weights, intercept, .. } => {
                let mut p = weights.clone();
                p.push(*intercept);
                p
            }
            Model::Kernel { dual, .. } => dual.clone(),
            Model::Mean(c) => vec![*c],
        }
    }

    fn n(&self) -> T {
        T::from_usize_lossy(self.x.len())
    }

    fn linear_residuals(&self, p: &[T]) -> Vec<T> {
        let (w, b) = p.split_at(p.len() - 1);
        self.x.iter().zip(self.y).map(|(r, &y)| b[0] + dot(w, r) - y).collect()
    }

    pub fn loss(&self, p: &[T]) -> T {
        let half = T::lit(0.5);
        match self.model {
            Model::Linear { lambda, .. } => {
                let r = self.linear_residuals(p);
                let w = &p[..p.len() - 1];
                half * (dot(&r, &r) + *lambda * dot(w, w)) / self.n()
            }
            Model::ElasticNet { alpha, l1_ratio, .. } => {
                let r = self.linear_residuals(p);
                let w = &p[..p.len() - 1];
                let l1: T = w.iter().map(|v| v.abs()).sum();
                half * dot(&r, &r) / self.n()
                    + *alpha * *l1_ratio * l1
                    + half * *alpha * (T::one() - *l1_ratio) * dot(w, w)
            }
            Model::Kernel { offset, gamma, lambda, .. } => {
                let k = kernel_matrix(self.x, *gamma);
                let ka = k.matvec(p).expect("square kernel");
                let r: Vec<T> = ka.iter().zip(self.y).map(|(&f, &y)| y - *offset - f).collect();
                half * dot(&r, &r) + half * *lambda * dot(p, &ka)
            }
            Model::Mean(_) => {
                let r: Vec<T> = self.y.iter().map(|&y| p[0] - y).collect();
                half * dot(&r, &r) / self.n()
            }
        }
    }

    pub fn gradient(&self, p: &[T]) -> Vec<T> {
        match self.model {
            Model::Linear { lambda, .. } => {
                let r = self.linear_residuals(p);
                let mut g = self.linear_data_gradient(&r);
                for (gj, &wj) in g.iter_mut().zip(&p[..p.len() - 1]) {
                    *gj = *gj + *lambda * wj / self.n();
                }
                g
            }
            Model::ElasticNet { alpha, l1_ratio, .. } => {
                let r = self.linear_residuals(p);
                let mut g = self.linear_data_gradient(&r);
                for (gj, &wj) in g.iter_mut().zip(&p[..p.len() - 1]) {
                    let sign = if wj > T::zero() {
                        T::one()
                    } else if wj < T::zero() {
                        -T::one()
                    } else {
                        T::zero()
                    };
                    *gj = *gj + *alpha * *l1_ratio * sign + *alpha * (T::one() - *l1_ratio) * wj;
                }
                g
            }
            Model::Kernel { offset, gamma, lambda, .. } => {
                // K((K + λI)α − (y − ȳ))
                let k = kernel_matrix(self.x, *gamma);
                let ka = k.matvec(p).expect("square kernel");
                let inner: Vec<T> =
                    ka.iter().zip(p).zip(self.y).map(|((&f, &a), &y)| f + *lambda * a - (y - *offset)).collect();
                k.matvec(&inner).expect("square kernel")
            }
            Model::Mean(_) => vec![self.y.iter().map(|&y| p[0] - y).sum::<T>() / self.n()],
        }
    }

    fn linear_data_gradient(&self, r: &[T]) -> Vec<T> {
        let d = self.x[0].len();
        let n = self.n();
        let mut g: Vec<T> = (0..d).map(|j| self.x.iter().zip(r).map(|(row, &e)| row[j] * e).sum::<T>() / n).collect();
        g.push(r.iter().copied().sum::<T>() / n);
        g
    }
}

/// Largest |analytic − central difference| / max(1, |analytic|, |numeric|)
/// over all coordinates at `p`.
pub fn gradient_check_at<T: Scalar>(obj: &Objective<'_, T>, p: &[T]) -> T {
    let g = obj.gradient(p);
    let mut worst = T::zero();
    for j in 0..p.len() {
        let h = T::lit(1e-5) * T::one().max(p[j].abs());
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[j] = p[j] + h;
        minus[j] = p[j] - h;
        let fd = (obj.loss(&plus) - obj.loss(&minus)) / (h + h);
        let rel = (g[j] - fd).abs() / T::one().max(g[j].abs()).max(fd.abs());
        worst = worst.max(rel);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> =
            (0..n).map(|i| (0..7).map(|j| 1.0 + ((i * 7 + j * 3 + i * j) % 17) as f64 / 4.0).collect()).collect();
        let y = x.iter().map(|r| 0.5 + r.iter().map(|v| 0.3 * v).sum::<f64>()).collect();
        (x, y)
    }

    #[test]
    fn ols_recovers_planted_coefficients() {
        let (x, y) = planted(40);
        let m = train_ols(&x, &y).unwrap();
        let (w, b) = m.coefficients().unwrap();
        assert!(!m.is_regularized_fallback());
        assert!((b - 0.5).abs() < 1e-6);
        assert!(w.iter().all(|v| (v - 0.3).abs() < 1e-6));
    }

    #[test]
    fn constant_targets() {
        let (x, _) = planted(20);
        let y = vec![3.0; 20];
        let m = train_ols(&x, &y).unwrap();
        let (w, b) = m.coefficients().unwrap();
        assert!(w.iter().all(|v| v.abs() < 1e-9));
        assert!((b - 3.0).abs() < 1e-9);
    }

    #[test]
    fn singular_design_falls_back() {
        let x = vec![vec![1.0, 1.0]; 12];
        let y = vec![2.0; 12];
        assert!(train_ols(&x, &y).unwrap().is_regularized_fallback());
    }

    #[test]
    fn ridge_limit_is_ols() {
        let (x, mut y) = planted(30);
        y.iter_mut().enumerate().for_each(|(i, v)| *v += ((i * 13) % 7) as f64 * 0.05);
        let ols = train_ols(&x, &y).unwrap();
        let ridge = train_ridge(&x, &y, 1e-9).unwrap();
        for (a, b) in ols.coefficients().unwrap().0.iter().zip(ridge.coefficients().unwrap().0) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn elastic_net_without_l1_is_ridge() {
        let (x, y) = planted(30);
        let alpha = 0.1;
        let enet = train_elastic_net(&x, &y, alpha, 0.0).unwrap();
        // the sklearn objective scales the ridge penalty by n
        let ridge = train_ridge(&x, &y, alpha * 30.0).unwrap();
        for (a, b) in enet.coefficients().unwrap().0.iter().zip(ridge.coefficients().unwrap().0) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn kernel_ridge_interpolates_small_systems() {
        let x = vec![vec![1.0], vec![2.0], vec![4.0]];
        let y: Vec<f64> = vec![1.0, 3.0, 2.0];
        let m = train_kernel_ridge(&x, &y, 1e-9, 1.0 / 7.0).unwrap();
        for (r, t) in x.iter().zip(&y) {
            assert!((m.predict(r) - t).abs() < 1e-3);
        }
    }

    #[test]
    fn sgd_approaches_least_squares() {
        let (x, y) = planted(40);
        let m = train_sgd_linear(&x, &y, 0.01, 500, 1).unwrap();
        let mse: f64 = x.iter().zip(&y).map(|(r, t)| (m.predict(r) - t).powi(2)).sum::<f64>() / 40.0;
        assert!(mse < 1e-6, "{mse}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (x, mut y) = planted(25);
        y.iter_mut().enumerate().for_each(|(i, v)| *v += ((i * 5) % 3) as f64 * 0.1);
        for kind in ModelKind::ROSTER {
            let m = train(kind, &x, &y, 7).unwrap();
            let obj = Objective::new(&m, &x, &y);
            let p = obj.params();
            assert!(gradient_check_at(&obj, &p) <= 1e-5, "{kind}");
        }
    }
}
