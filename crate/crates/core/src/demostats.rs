//! Demographic analyses: rating vs. experience regression, Kruskal-Wallis
//! on familiarity and video quality, and MANOVA on occupation.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::likert::{Aspect, Familiarity, RatingsTensor, UserProfile, VideoQuality};
use crate::linalg::Matrix;
use crate::num::Scalar;
use crate::pvalue::{chi2_sf, f_sf};

/// Occupation label that forms its own MANOVA group; all others are pooled.
pub const SECURITY_OPERATOR: &str = "security operator";
pub const KW_MIN_OBSERVATIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaldRegressionResult<T> {
    pub slope: T,
    pub intercept: T,
    pub slope_std_err: T,
    pub wald_statistic: T,
    pub p_value: T,
    pub n: usize,
}

/// Simple OLS of rating on years with a df-1 Wald χ² test of zero slope.
pub fn regress_rating_on_experience<T: Scalar>(pairs: &[(T, T)]) -> Result<WaldRegressionResult<T>> {
    let n = pairs.len();
    if n < 3 {
        return Err(Error::invalid(format!("regression needs at least 3 points, got {n}")));
    }
    let nf = T::from_usize_lossy(n);
    let mx = pairs.iter().map(|p| p.0).sum::<T>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<T>() / nf;
    let sxx: T = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if !(sxx > T::zero()) {
        return Err(Error::Degenerate("years of experience are constant".into()));
    }
    let sxy: T = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: T = pairs.iter().map(|&(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let s2 = sse / T::from_usize_lossy(n - 2);
    let se = (s2 / sxx).sqrt();
    let wald = if slope == T::zero() {
        T::zero()
    } else if se == T::zero() {
        T::infinity()
    } else {
        (slope / se).powi(2)
    };
    let p_value = T::lit(chi2_sf(wald.to_f64_lossy(), 1.0));
    Ok(WaldRegressionResult { slope, intercept, slope_std_err: se, wald_statistic: wald, p_value, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KruskalResult<T> {
    pub h: T,
    pub df: usize,
    pub p_value: T,
    /// Every observation tied; H is reported as 0.
    pub degenerate: bool,
    pub n: usize,
}

/// Mid-ranks (1-based) of the pooled sample, and Σ(t³ − t) over tie groups.
fn mid_ranks<T: Scalar>(values: &[T]) -> (Vec<T>, T) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite sample"));
    let mut ranks = vec![T::zero(); values.len()];
    let mut ties = T::zero();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = T::from_usize_lossy(i + j + 2) / T::lit(2.0);
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        let t = T::from_usize_lossy(j - i + 1);
        ties = ties + t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

/// Tie-corrected Kruskal-Wallis H with a χ² p-value. Empty groups are ignored.
pub fn kruskal_wallis<T: Scalar>(groups: &[Vec<T>]) -> Result<KruskalResult<T>> {
    let groups: Vec<&Vec<T>> = groups.iter().filter(|g| !g.is_empty()).collect();
    if groups.len() < 2 {
        return Err(Error::invalid("Kruskal-Wallis needs at least 2 non-empty groups"));
    }
    let pooled: Vec<T> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let n = pooled.len();
    if n < KW_MIN_OBSERVATIONS {
        return Err(Error::invalid(format!(
            "Kruskal-Wallis needs at least {KW_MIN_OBSERVATIONS} observations, got {n}"
        )));
    }
    let df = groups.len() - 1;
    let (ranks, ties) = mid_ranks(&pooled);
    let nf = T::from_usize_lossy(n);
    let correction = T::one() - ties / (nf * nf * nf - nf);
    if !(correction > T::zero()) {
        return Ok(KruskalResult { h: T::zero(), df, p_value: T::one(), degenerate: true, n });
    }
    let mut start = 0;
    let mut sum = T::zero();
    for g in &groups {
        let r: T = ranks[start..start + g.len()].iter().copied().sum();
        sum = sum + r * r / T::from_usize_lossy(g.len());
        start += g.len();
    }
    let h = (T::lit(12.0) / (nf * (nf + T::one())) * sum - T::lit(3.0) * (nf + T::one())) / correction;
    let h = h.max(T::zero());
    let p_value = T::lit(chi2_sf(h.to_f64_lossy(), df as f64));
    Ok(KruskalResult { h, df, p_value, degenerate: false, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ManovaResult<T> {
    pub wilks_lambda: T,
    pub approx_f: T,
    pub df1: T,
    pub df2: T,
    pub p_value: T,
    pub n: usize,
}

/// Within- and between-group scatter matrices.
fn scatter<T: Scalar>(groups: &[&Vec<Vec<T>>], d: usize) -> (Matrix<T>, Matrix<T>) {
    let n = T::from_usize_lossy(groups.iter().map(|g| g.len()).sum());
    let mean_of = |rows: &mut dyn Iterator<Item = &Vec<T>>, count: T| {
        let mut m = vec![T::zero(); d];
        for r in rows {
            for (mj, &v) in m.iter_mut().zip(r) {
                *mj = *mj + v;
            }
        }
        m.iter_mut().for_each(|v| *v = *v / count);
        m
    };
    let grand = mean_of(&mut groups.iter().flat_map(|g| g.iter()), n);
    let mut w = Matrix::zeros(d, d);
    let mut b = Matrix::zeros(d, d);
    for g in groups {
        let m = mean_of(&mut g.iter(), T::from_usize_lossy(g.len()));
        let ng = T::from_usize_lossy(g.len());
        for i in 0..d {
            for j in 0..d {
                b[(i, j)] = b[(i, j)] + ng * (m[i] - grand[i]) * (m[j] - grand[j]);
            }
        }
        for r in g.iter() {
            for i in 0..d {
                for j in 0..d {
                    w[(i, j)] = w[(i, j)] + (r[i] - m[i]) * (r[j] - m[j]);
                }
            }
        }
    }
    (w, b)
}

/// One-way MANOVA: Wilks' Λ with Rao's F approximation.
pub fn manova_one_way<T: Scalar>(groups: &[Vec<Vec<T>>]) -> Result<ManovaResult<T>> {
    let groups: Vec<&Vec<Vec<T>>> = groups.iter().filter(|g| !g.is_empty()).collect();
    let k = groups.len();
    if k < 2 {
        return Err(Error::invalid("MANOVA needs at least 2 non-empty groups"));
    }
    let d = groups[0][0].len();
    if d == 0 || groups.iter().flat_map(|g| g.iter()).any(|r| r.len() != d) {
        return Err(Error::invalid("MANOVA responses must share one positive dimension"));
    }
    let n: usize = groups.iter().map(|g| g.len()).sum();
    if n <= d + k {
        return Err(Error::invalid(format!(
            "MANOVA with {d} responses and {k} groups needs more than {} rows, got {n}",
            d + k
        )));
    }
    let (w, b) = scatter(&groups, d);
    let det_w = match w.lu() {
        Ok(lu) => lu.determinant(),
        Err(Error::Singular(_)) => {
            return Err(Error::Singular(format!(
                "within-group scatter of {d} responses is singular; reduce the number of dependent variables"
            )))
        }
        Err(e) => return Err(e),
    };
    let det_t = w.add(&b)?.determinant()?;
    let lambda = (det_w / det_t).min(T::one()).max(T::zero());

    let p = T::from_usize_lossy(d);
    let vh = T::from_usize_lossy(k - 1);
    let ve = T::from_usize_lossy(n - k);
    let two = T::lit(2.0);
    let denom = p * p + vh * vh - T::lit(5.0);
    let t = if denom > T::zero() { ((p * p * vh * vh - T::lit(4.0)) / denom).sqrt() } else { T::one() };
    let df1 = p * vh;
    let wdf = ve + vh - (p + vh + T::one()) / two;
    let df2 = wdf * t - (p * vh - two) / two;
    let root = lambda.powf(T::one() / t);
    let approx_f = if root == T::zero() { T::infinity() } else { (T::one() - root) / root * df2 / df1 };
    let p_value = T::lit(f_sf(approx_f.to_f64_lossy(), df1.to_f64_lossy(), df2.to_f64_lossy()));
    Ok(ManovaResult { wilks_lambda: lambda, approx_f, df1, df2, p_value, n })
}

/// One row of the consolidated demographics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    pub analysis: &'static str,
    /// Tool id, or `pooled` / `all`.
    pub subject: String,
    pub n: usize,
    pub statistic: Option<f64>,
    pub df1: Option<f64>,
    pub df2: Option<f64>,
    pub p_value: Option<f64>,
    /// Empty when the analysis ran.
    pub skipped: String,
}

impl SuiteRow {
    fn skipped(analysis: &'static str, subject: impl Into<String>, n: usize, reason: impl Into<String>) -> Self {
        Self {
            analysis,
            subject: subject.into(),
            n,
            statistic: None,
            df1: None,
            df2: None,
            p_value: None,
            skipped: reason.into(),
        }
    }

    pub fn ran(&self) -> bool {
        self.skipped.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DemographicsReport {
    pub rows: Vec<SuiteRow>,
}

impl DemographicsReport {
    /// One row per analysis; `significant` compares the p-value with `alpha`.
    pub fn write_csv<W: Write>(&self, w: W, alpha: f64) -> Result<()> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["analysis", "subject", "n", "statistic", "df1", "df2", "p_value", "significant", "skipped"])?;
        for r in &self.rows {
            wtr.write_record([
                r.analysis.to_string(),
                r.subject.clone(),
                r.n.to_string(),
                opt(r.statistic),
                opt(r.df1),
                opt(r.df2),
                opt(r.p_value),
                r.p_value.filter(|_| r.ran()).map(|p| (p < alpha).to_string()).unwrap_or_default(),
                r.skipped.clone(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn find(&self, analysis: &str, subject: &str) -> Option<&SuiteRow> {
        self.rows.iter().find(|r| r.analysis == analysis && r.subject == subject)
    }
}

fn wald_row<T: Scalar>(subject: &str, pairs: &[(T, T)]) -> SuiteRow {
    const NAME: &str = "experience_regression";
    match regress_rating_on_experience(pairs) {
        Ok(r) => SuiteRow {
            analysis: NAME,
            subject: subject.to_string(),
            n: r.n,
            statistic: Some(r.wald_statistic.to_f64_lossy()),
            df1: Some(1.0),
            df2: None,
            p_value: Some(r.p_value.to_f64_lossy()),
            skipped: String::new(),
        },
        Err(e) => SuiteRow::skipped(NAME, subject, pairs.len(), e.to_string()),
    }
}

fn kruskal_row<T: Scalar>(analysis: &'static str, groups: &[Vec<T>]) -> SuiteRow {
    let n = groups.iter().map(Vec::len).sum();
    match kruskal_wallis(groups) {
        Ok(r) => SuiteRow {
            analysis,
            subject: "all".into(),
            n,
            statistic: Some(r.h.to_f64_lossy()),
            df1: Some(r.df as f64),
            df2: None,
            p_value: Some(r.p_value.to_f64_lossy()),
            skipped: if r.degenerate { "all observations tied".into() } else { String::new() },
        },
        Err(e) => SuiteRow::skipped(analysis, "all", n, e.to_string()),
    }
}

/// Runs every analysis on the overall ratings present in `tensor`.
/// Analyses that cannot run are kept as rows with a reason.
pub fn run_demographic_suite<T: Scalar>(tensor: &RatingsTensor<T>, profiles: &[UserProfile]) -> DemographicsReport {
    let overall = Aspect::Overall.index();
    let profile_of = |user: &str| profiles.iter().find(|p| p.user_id == user);
    let mut rows = Vec::new();

    // rating vs. years, per tool and pooled
    let mut pooled = Vec::new();
    for (t, tool) in tensor.tools().iter().enumerate() {
        let pairs: Vec<(T, T)> = tensor
            .users()
            .iter()
            .enumerate()
            .filter_map(|(u, id)| {
                let years = profile_of(id)?.years_experience?;
                Some((T::lit(years), tensor.get(u, t, overall)?))
            })
            .collect();
        pooled.extend_from_slice(&pairs);
        rows.push(wald_row(tool, &pairs));
    }
    rows.push(wald_row("pooled", &pooled));

    // occupation: per-user vector of overall ratings across tools
    let mut groups: Vec<Vec<Vec<T>>> = vec![Vec::new(), Vec::new()];
    for (u, id) in tensor.users().iter().enumerate() {
        let Some(occ) = profile_of(id).and_then(|p| p.occupation.as_deref()) else { continue };
        let Some(v) = (0..tensor.n_tools()).map(|t| tensor.get(u, t, overall)).collect::<Option<Vec<T>>>() else {
            continue;
        };
        let g = if occ.trim().eq_ignore_ascii_case(SECURITY_OPERATOR) { 0 } else { 1 };
        groups[g].push(v);
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    rows.push(match manova_one_way(&groups) {
        Ok(r) => SuiteRow {
            analysis: "occupation_manova",
            subject: "all".into(),
            n,
            statistic: Some(r.approx_f.to_f64_lossy()),
            df1: Some(r.df1.to_f64_lossy()),
            df2: Some(r.df2.to_f64_lossy()),
            p_value: Some(r.p_value.to_f64_lossy()),
            skipped: String::new(),
        },
        Err(e) => SuiteRow::skipped("occupation_manova", "all", n, e.to_string()),
    });

    let grouped = |level_of: &dyn Fn(&UserProfile, &str) -> Option<usize>, levels: usize| {
        let mut groups: Vec<Vec<T>> = vec![Vec::new(); levels];
        for (u, id) in tensor.users().iter().enumerate() {
            let Some(p) = profile_of(id) else { continue };
            for (t, tool) in tensor.tools().iter().enumerate() {
                if let (Some(level), Some(r)) = (level_of(p, tool), tensor.get(u, t, overall)) {
                    groups[level].push(r);
                }
            }
        }
        groups
    };
    let familiarity = grouped(
        &|p, tool| p.familiarity.get(tool).and_then(|f| Familiarity::ALL.iter().position(|x| x == f)),
        Familiarity::ALL.len(),
    );
    rows.push(kruskal_row("familiarity_kruskal", &familiarity));
    let video = grouped(
        &|p, tool| p.video_quality.get(tool).and_then(|q| VideoQuality::ALL.iter().position(|x| x == q)),
        VideoQuality::ALL.len(),
    );
    rows.push(kruskal_row("video_quality_kruskal", &video));

    DemographicsReport { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kruskal_two_separated_groups() {
        let r = kruskal_wallis::<f64>(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert!((r.h - 27.0 / 7.0).abs() < 1e-12);
        assert_eq!(r.df, 1);
        let same = kruskal_wallis::<f64>(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(same.h.abs() < 1e-12);
        let flat = kruskal_wallis::<f64>(&[vec![2.0; 3], vec![2.0; 3]]).unwrap();
        assert!(flat.degenerate);
        assert!(kruskal_wallis::<f64>(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn wald_boundaries() {
        let flat: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0)).collect();
        let r = regress_rating_on_experience(&flat).unwrap();
        assert_eq!((r.slope, r.wald_statistic, r.p_value), (0.0, 0.0, 1.0));
        let exact: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 + 0.5 * i as f64)).collect();
        let r = regress_rating_on_experience(&exact).unwrap();
        assert!((r.slope - 0.5).abs() < 1e-12);
        assert!(r.p_value < 1e-12);
        assert!(regress_rating_on_experience(&[(1.0, 2.0), (1.0, 3.0), (1.0, 4.0)]).is_err());
    }

    #[test]
    fn manova_identical_means() {
        let g1 = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![2.0, 1.0]];
        let g2 = vec![vec![3.0, 1.0], vec![1.0, 4.0], vec![2.0, 2.0]];
        let r = manova_one_way::<f64>(&[g1, g2]).unwrap();
        assert!((r.wilks_lambda - 1.0).abs() < 1e-12);
        assert!(r.p_value > 0.999);
    }
}
