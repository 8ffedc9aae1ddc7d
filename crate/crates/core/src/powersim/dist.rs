//! Discrete distributions on the Likert support {1, …, 5}.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUPPORT: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];
const MOMENT_TOL: f64 = 1e-12;
const NEWTON_RESIDUAL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 2000;

/// Probability mass function over {1, …, 5}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePmf {
    probs: [f64; 5],
}

impl DiscretePmf {
    pub fn new(probs: [f64; 5]) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid(format!("pmf {probs:?} has negative or non-finite mass")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("pmf {probs:?} sums to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform() -> Self {
        Self { probs: [0.2; 5] }
    }

    pub fn probs(&self) -> &[f64; 5] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().zip(SUPPORT).map(|(p, k)| p * k).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probs.iter().zip(SUPPORT).map(|(p, k)| p * (k - m) * (k - m)).sum()
    }

    /// Draws one Likert value by inverting the CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i as u8 + 1;
            }
        }
        // u landed in the rounding gap above the last cumulative sum
        self.probs.iter().rposition(|&p| p > 0.0).map_or(5, |i| i as u8 + 1)
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<u8> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Maximum-entropy pmf on {1, …, 5} with the given mean and variance.
///
/// The solution has the form p(k) ∝ exp(λ₁k + λ₂k²); the natural parameters
/// are found by damped Newton on the convex dual. Moment pairs on the
/// boundary of the feasible region have two-point solutions, returned in
/// closed form.
pub fn fit_discrete_dist(mean: f64, variance: f64) -> Result<DiscretePmf> {
    let infeasible = || Error::InfeasibleMoments { mean, variance };
    if !(1.0..=5.0).contains(&mean) || !(variance >= 0.0) || !variance.is_finite() {
        return Err(infeasible());
    }
    let upper = (mean - 1.0) * (5.0 - mean);
    let lo_k = mean.floor().clamp(1.0, 5.0);
    let frac = mean - lo_k;
    let lower = frac * (1.0 - frac);
    if variance > upper + MOMENT_TOL || variance < lower - MOMENT_TOL {
        return Err(infeasible());
    }

    let mut probs = [0.0; 5];
    if variance <= lower + MOMENT_TOL {
        let i = lo_k as usize - 1;
        probs[i] = 1.0 - frac;
        if frac > 0.0 {
            probs[i + 1] = frac;
        }
        return DiscretePmf::new(probs);
    }
    if variance >= upper - MOMENT_TOL {
        probs[4] = (mean - 1.0) / 4.0;
        probs[0] = 1.0 - probs[4];
        return DiscretePmf::new(probs);
    }

    // Work on the centred support c = k - 3 for conditioning.
    let c: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let target = [mean - 3.0, variance + (mean - 3.0).powi(2)];

    let dual = |lam: [f64; 2]| -> (f64, [f64; 5]) {
        let logits: Vec<f64> = c.iter().map(|&x| lam[0] * x + lam[1] * x * x).collect();
        let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
        let z: f64 = w.iter().sum();
        let mut p = [0.0; 5];
        for i in 0..5 {
            p[i] = w[i] / z;
        }
        (mx + z.ln() - lam[0] * target[0] - lam[1] * target[1], p)
    };

    let mut lam = [0.0, 0.0];
    let (mut g, mut p) = dual(lam);
    let mut residual = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let e1: f64 = (0..5).map(|i| p[i] * c[i]).sum();
        let e2: f64 = (0..5).map(|i| p[i] * c[i] * c[i]).sum();
        let e3: f64 = (0..5).map(|i| p[i] * c[i].powi(3)).sum();
        let e4: f64 = (0..5).map(|i| p[i] * c[i].powi(4)).sum();
        let grad = [e1 - target[0], e2 - target[1]];
        residual = grad[0].abs().max(grad[1].abs());
        if residual < NEWTON_RESIDUAL {
            return DiscretePmf::new(p);
        }
        let h = [[e2 - e1 * e1, e3 - e1 * e2], [e3 - e1 * e2, e4 - e2 * e2]];
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let step = if det.abs() > 1e-300 {
            [-(h[1][1] * grad[0] - h[0][1] * grad[1]) / det, -(-h[1][0] * grad[0] + h[0][0] * grad[1]) / det]
        } else {
            [-grad[0], -grad[1]]
        };
        let slope = grad[0] * step[0] + grad[1] * step[1];
        let mut t = 1.0;
        loop {
            let cand = [lam[0] + t * step[0], lam[1] + t * step[1]];
            let (gc, pc) = dual(cand);
            if gc <= g + 1e-4 * t * slope || t < 1e-12 {
                lam = cand;
                g = gc;
                p = pc;
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::NonConvergence { iterations: NEWTON_MAX_ITER, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn direct_moments(p: &DiscretePmf) -> (f64, f64) {
        let m: f64 = (1..=5).map(|k| k as f64 * p.probs()[k - 1]).sum();
        let s2: f64 = (1..=5).map(|k| (k as f64).powi(2) * p.probs()[k - 1]).sum();
        (m, s2 - m * m)
    }

    #[test]
    fn uniform_from_moments() {
        let p = fit_discrete_dist(3.0, 2.0).unwrap();
        for &x in p.probs() {
            assert!((x - 0.2).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_variance_is_point_mass() {
        let p = fit_discrete_dist(3.0, 0.0).unwrap();
        assert_eq!(p.probs(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn study_moments_are_matched() {
        for (m, v) in [(3.65, 1.17), (2.93, 0.923), (1.2, 0.3), (4.9, 0.09), (3.0, 3.9)] {
            let p = fit_discrete_dist(m, v).unwrap();
            let (dm, dv) = direct_moments(&p);
            assert!((dm - m).abs() < 1e-6, "mean {dm} vs {m}");
            assert!((dv - v).abs() < 1e-6, "variance {dv} vs {v}");
            assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn boundary_moments_have_two_point_solutions() {
        let p = fit_discrete_dist(3.0, 4.0).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.0, 0.0, 0.0, 0.5]);
        let p = fit_discrete_dist(2.5, 0.25).unwrap();
        assert_eq!(p.probs(), &[0.0, 0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn infeasible_moments_rejected() {
        assert!(matches!(fit_discrete_dist(3.0, 4.5), Err(Error::InfeasibleMoments { .. })));
        assert!(matches!(fit_discrete_dist(0.5, 0.1), Err(Error::InfeasibleMoments { .. })));
        assert!(matches!(fit_discrete_dist(2.5, 0.1), Err(Error::InfeasibleMoments { .. })));
        assert!(fit_discrete_dist(3.0, -1.0).is_err());
    }

    #[test]
    fn sampling_follows_pmf() {
        let p = fit_discrete_dist(3.65, 1.17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mut counts = [0usize; 5];
        for x in p.sample_n(&mut rng, n) {
            counts[x as usize - 1] += 1;
        }
        for (c, q) in counts.iter().zip(p.probs()) {
            assert!((*c as f64 / n as f64 - q).abs() < 0.005);
        }
    }
}
