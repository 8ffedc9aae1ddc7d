//! Two-sample tests used by the power simulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pvalue;

/// Outcome of one hypothesis test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    /// `None` for exact tests.
    pub df: Option<f64>,
    pub p_value: f64,
    pub reject: bool,
    /// The statistic was undefined for this input and a conventional value was reported.
    pub degenerate: bool,
}

impl TestResult {
    fn new(statistic: f64, df: Option<f64>, p_value: f64, alpha: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self { statistic, df, p_value, reject: p_value < alpha, degenerate: false }
    }

    fn degenerate(statistic: f64, df: Option<f64>, p_value: f64, alpha: f64) -> Self {
        Self { degenerate: true, ..Self::new(statistic, df, p_value, alpha) }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")))
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Two-sided Welch t-test with Welch–Satterthwaite degrees of freedom.
///
/// Two constant samples give a degenerate result: p = 1 when their values
/// agree, p = 0 otherwise.
pub fn welch_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("Welch t-test needs at least two observations per sample"));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Ok(if ma == mb {
            TestResult::degenerate(0.0, None, 1.0, alpha)
        } else {
            TestResult::degenerate((ma - mb).signum() * f64::INFINITY, None, 0.0, alpha)
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TestResult::new(t, Some(df), pvalue::t_two_sided(t, df), alpha))
}

fn proportion(xs: &[u8]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::invalid("binary sample is empty"));
    }
    if xs.iter().any(|&x| x > 1) {
        return Err(Error::invalid("binary sample contains values other than 0/1"));
    }
    let ones = xs.iter().map(|&x| x as f64).sum::<f64>();
    Ok((ones, xs.len() as f64))
}

/// Pooled two-proportion z-test, two-sided.
pub fn two_prop_z_test(a: &[u8], b: &[u8], alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    let (xa, na) = proportion(a)?;
    let (xb, nb) = proportion(b)?;
    let pooled = (xa + xb) / (na + nb);
    if pooled == 0.0 || pooled == 1.0 {
        return Ok(TestResult::degenerate(0.0, None, 1.0, alpha));
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
    let z = (xa / na - xb / nb) / se;
    Ok(TestResult::new(z, None, pvalue::normal_two_sided(z), alpha))
}

/// χ² test of a 2×2 contingency table with Yates' continuity correction.
///
/// The correction never moves an observed count past its expectation, so
/// tables with |ad − bc| < N/2 score zero.
pub fn chi2_yates_test(a: &[u8], b: &[u8], alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    let (a1, na) = proportion(a)?;
    let (b1, nb) = proportion(b)?;
    let (a0, b0) = (na - a1, nb - b1);
    let n = na + nb;
    let (ones, zeros) = (a1 + b1, a0 + b0);
    if ones == 0.0 || zeros == 0.0 {
        return Ok(TestResult::degenerate(0.0, Some(1.0), 1.0, alpha));
    }
    let cross = (a1 * b0 - a0 * b1).abs();
    let corrected = (cross - n / 2.0).max(0.0);
    let stat = n * corrected * corrected / (na * nb * ones * zeros);
    Ok(TestResult::new(stat, Some(1.0), pvalue::chi2_sf(stat, 1.0), alpha))
}

fn binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (statrs::function::factorial::ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

/// Exact two-sided binomial test of `k` successes in `n` trials against `p`.
///
/// Sums the probabilities of every outcome no more likely than the observed
/// one (with a 1e-7 relative slack for rounding).
pub fn binomial_exact(k: u64, n: u64, p: f64) -> f64 {
    let observed = binomial_pmf(k, n, p);
    let cutoff = observed * (1.0 + 1e-7);
    let total: f64 = (0..=n).map(|i| binomial_pmf(i, n, p)).filter(|&q| q <= cutoff).sum();
    total.clamp(0.0, 1.0)
}

/// The two directional exact binomial tests: `b` against `a`'s success
/// rate, then `a` against `b`'s.
pub fn binomial_pair_test(a: &[u8], b: &[u8], alpha: f64) -> Result<(TestResult, TestResult)> {
    check_alpha(alpha)?;
    let (xa, na) = proportion(a)?;
    let (xb, nb) = proportion(b)?;
    let ab = binomial_exact(xb as u64, nb as u64, xa / na);
    let ba = binomial_exact(xa as u64, na as u64, xb / nb);
    Ok((TestResult::new(xb, None, ab, alpha), TestResult::new(xa, None, ba, alpha)))
}

/// 1 iff `value > threshold`.
pub fn binarize(value: u8, threshold: f64) -> u8 {
    u8::from(value as f64 > threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(k: usize, n: usize) -> Vec<u8> {
        (0..n).map(|i| u8::from(i < k)).collect()
    }

    #[test]
    fn binarize_thresholds() {
        assert_eq!(binarize(3, 2.5), 1);
        assert_eq!(binarize(3, 3.5), 0);
        assert_eq!(binarize(1, 2.5), 0);
        assert_eq!(binarize(4, 3.5), 1);
    }

    #[test]
    fn welch_identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = welch_t_test(&a, &a, 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert!(!r.reject);
    }

    #[test]
    fn welch_max_separation() {
        let a = [1.0, 1.0 + 1e-6, 1.0, 1.0 - 1e-6];
        let b = [5.0, 5.0 + 1e-6, 5.0, 5.0 - 1e-6];
        assert!(welch_t_test(&a, &b, 0.05).unwrap().reject);
    }

    #[test]
    fn welch_constant_samples_are_flagged() {
        let r = welch_t_test(&[3.0; 4], &[3.0; 4], 0.05).unwrap();
        assert!(r.degenerate && r.p_value == 1.0 && !r.reject);
        let r = welch_t_test(&[3.0; 4], &[4.0; 4], 0.05).unwrap();
        assert!(r.degenerate && r.reject);
        assert!(welch_t_test(&[1.0], &[1.0, 2.0], 0.05).is_err());
    }

    #[test]
    fn welch_matches_closed_form() {
        // statistic and df written out by hand for a = {1,2,3,4}, b = {2,4,6,8,10}
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0, 10.0];
        let (va, vb) = (5.0 / 3.0, 10.0);
        let se2: f64 = va / 4.0 + vb / 5.0;
        let t = (2.5 - 6.0) / se2.sqrt();
        let df = se2.powi(2) / ((va / 4.0f64).powi(2) / 3.0 + (vb / 5.0f64).powi(2) / 4.0);
        let r = welch_t_test(&a, &b, 0.05).unwrap();
        assert!((r.statistic - t).abs() < 1e-12);
        assert!((r.df.unwrap() - df).abs() < 1e-12);
    }

    #[test]
    fn z_test_cases() {
        let a = ones(18, 30);
        assert!((two_prop_z_test(&a, &a, 0.05).unwrap().p_value - 1.0).abs() < 1e-12);
        assert!(two_prop_z_test(&ones(0, 30), &ones(30, 30), 0.05).unwrap().reject);

        let r = two_prop_z_test(&ones(18, 30), &ones(9, 30), 0.05).unwrap();
        let (p1, p2, p): (f64, f64, f64) = (0.6, 0.3, 27.0 / 60.0);
        let z = (p1 - p2) / (p * (1.0 - p) * (2.0 / 30.0)).sqrt();
        assert!((r.statistic - z).abs() < 1e-12);
        assert!((r.statistic - 2.335496832).abs() < 1e-8);
        assert!((r.p_value - 0.019518).abs() < 1e-5);

        let r = two_prop_z_test(&ones(0, 10), &ones(0, 10), 0.05).unwrap();
        assert!(r.degenerate && r.p_value == 1.0);
    }

    #[test]
    fn chi2_yates_cases() {
        let a = ones(12, 30);
        let r = chi2_yates_test(&a, &a, 0.05).unwrap();
        assert!(r.statistic.abs() < 1e-12 && !r.reject);

        // table (20, 10 / 5, 25)
        let r = chi2_yates_test(&ones(20, 30), &ones(5, 30), 0.05).unwrap();
        let expected = 60.0 * (450.0f64 - 30.0).powi(2) / (30.0 * 30.0 * 25.0 * 35.0);
        assert!((r.statistic - expected).abs() < 1e-12);
        assert_eq!(r.df, Some(1.0));
        assert!(r.reject);

        let r = chi2_yates_test(&ones(0, 10), &ones(0, 10), 0.05).unwrap();
        assert!(r.degenerate && r.p_value == 1.0);
    }

    #[test]
    fn binomial_cases() {
        let a = ones(12, 30);
        let (x, y) = binomial_pair_test(&a, &a, 0.05).unwrap();
        assert!(x.p_value >= 0.05 && y.p_value >= 0.05);

        let all = ones(30, 30);
        let (x, y) = binomial_pair_test(&all, &all, 0.05).unwrap();
        assert_eq!((x.p_value, y.p_value), (1.0, 1.0));

        // b: 25 of 30 against p = 0.5; symmetric pmf so p = 2 P(X >= 25)
        let mut tail = 0.0;
        let mut c = 1.0f64;
        for k in 0..=30u32 {
            if k >= 25 {
                tail += c;
            }
            c = c * (30 - k) as f64 / (k + 1) as f64;
        }
        let expected = 2.0 * tail / 2f64.powi(30);
        let (ab, _) = binomial_pair_test(&ones(15, 30), &ones(25, 30), 0.05).unwrap();
        assert!((ab.p_value - expected).abs() < 1e-12);
        assert!(ab.reject);
    }

    #[test]
    fn binomial_degenerate_reference() {
        // reference rate 0: any success in b is impossible under H0
        let (ab, ba) = binomial_pair_test(&ones(0, 10), &ones(3, 10), 0.05).unwrap();
        assert_eq!(ab.p_value, 0.0);
        assert!(ba.p_value < 0.05);
    }
}
