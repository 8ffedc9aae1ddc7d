//! Distances between rating vectors with missing coordinates.
//!
//! The naive distance uses only coordinates present in both vectors. The
//! Bayesian distance is the expectation of the distance when every missing
//! coordinate is drawn independently and uniformly from {1, …, 5}.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Order of the ℓᵖ distance. `Zero` counts unequal coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DistanceOrder {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "inf")]
    Inf,
}

impl DistanceOrder {
    pub const ALL: [DistanceOrder; 4] =
        [DistanceOrder::Zero, DistanceOrder::One, DistanceOrder::Two, DistanceOrder::Inf];

    pub fn label(self) -> &'static str {
        match self {
            DistanceOrder::Zero => "0",
            DistanceOrder::One => "1",
            DistanceOrder::Two => "2",
            DistanceOrder::Inf => "inf",
        }
    }
}

impl fmt::Display for DistanceOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DistanceOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "0" => Ok(DistanceOrder::Zero),
            "1" => Ok(DistanceOrder::One),
            "2" => Ok(DistanceOrder::Two),
            "inf" | "infinity" => Ok(DistanceOrder::Inf),
            other => Err(Error::invalid(format!("unknown distance order `{other}`"))),
        }
    }
}

/// How missing coordinates are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    Naive,
    Bayesian,
}

impl DistanceMode {
    pub const ALL: [DistanceMode; 2] = [DistanceMode::Naive, DistanceMode::Bayesian];

    pub fn label(self) -> &'static str {
        match self {
            DistanceMode::Naive => "naive",
            DistanceMode::Bayesian => "bayesian",
        }
    }
}

impl fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DistanceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "naive" => Ok(DistanceMode::Naive),
            "bayesian" => Ok(DistanceMode::Bayesian),
            other => Err(Error::invalid(format!("unknown distance mode `{other}`"))),
        }
    }
}

/// A distance value; `approximate` marks the ℓ² Bayesian fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distance<T> {
    pub value: T,
    pub approximate: bool,
}

impl<T> Distance<T> {
    fn exact(value: T) -> Self {
        Self { value, approximate: false }
    }
}

/// Largest per-coordinate gap on the Likert range.
const MAX_GAP: f64 = 4.0;
/// ℓ² completions with non-integer partners are enumerated up to this many coordinates.
pub const MAX_ENUMERATED: usize = 6;

/// Naive distance of a vector pair with no co-rated coordinate.
fn max_distance<T: Scalar>(len: usize, p: DistanceOrder) -> T {
    let len = T::from_usize_lossy(len);
    let gap = T::lit(MAX_GAP);
    match p {
        DistanceOrder::Zero => len,
        DistanceOrder::One => gap * len,
        DistanceOrder::Two => gap * len.sqrt(),
        DistanceOrder::Inf => gap,
    }
}

pub fn rating_distance<T: Scalar>(
    a: &[Option<T>],
    b: &[Option<T>],
    p: DistanceOrder,
    mode: DistanceMode,
) -> Result<Distance<T>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(match mode {
        DistanceMode::Naive => Distance::exact(naive(a, b, p)),
        DistanceMode::Bayesian => bayesian(a, b, p),
    })
}

fn naive<T: Scalar>(a: &[Option<T>], b: &[Option<T>], p: DistanceOrder) -> T {
    let gaps: Vec<T> = a.iter().zip(b).filter_map(|(x, y)| Some((*x.as_ref()? - *y.as_ref()?).abs())).collect();
    if gaps.is_empty() {
        return if a.is_empty() { T::zero() } else { max_distance(a.len(), p) };
    }
    match p {
        DistanceOrder::Zero => T::from_usize_lossy(gaps.iter().filter(|g| **g != T::zero()).count()),
        DistanceOrder::One => gaps.iter().copied().sum(),
        DistanceOrder::Two => gaps.iter().map(|g| *g * *g).sum::<T>().sqrt(),
        DistanceOrder::Inf => gaps.iter().copied().fold(T::zero(), T::max),
    }
}

/// Distribution of one coordinate's absolute gap: `(gap, probability)`.
#[derive(Debug, Clone)]
enum Gap<T> {
    Fixed(T),
    /// One side missing; the other holds `y`.
    OneMissing(T),
    BothMissing,
}

impl<T: Scalar> Gap<T> {
    fn outcomes(&self) -> Vec<(T, T)> {
        let fifth = T::lit(0.2);
        match *self {
            Gap::Fixed(d) => vec![(d, T::one())],
            Gap::OneMissing(y) => (1..=5).map(|x| ((T::from_usize_lossy(x) - y).abs(), fifth)).collect(),
            Gap::BothMissing => {
                // |X - Y| for independent uniform X, Y: 5, 8, 6, 4, 2 of 25
                [5.0, 8.0, 6.0, 4.0, 2.0]
                    .iter()
                    .enumerate()
                    .map(|(d, w)| (T::from_usize_lossy(d), T::lit(w / 25.0)))
                    .collect()
            }
        }
    }

    /// True when every outcome is a whole number.
    fn integral(&self) -> bool {
        match *self {
            Gap::Fixed(_) | Gap::BothMissing => true,
            Gap::OneMissing(y) => y.fract() == T::zero(),
        }
    }
}

fn gaps<T: Scalar>(a: &[Option<T>], b: &[Option<T>]) -> Vec<Gap<T>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => Gap::Fixed((*x - *y).abs()),
            (Some(v), None) | (None, Some(v)) => Gap::OneMissing(*v),
            (None, None) => Gap::BothMissing,
        })
        .collect()
}

fn bayesian<T: Scalar>(a: &[Option<T>], b: &[Option<T>], p: DistanceOrder) -> Distance<T> {
    let gaps = gaps(a, b);
    match p {
        // linear in the coordinates: sum of per-coordinate expectations
        DistanceOrder::Zero => Distance::exact(
            gaps.iter()
                .map(|g| g.outcomes().into_iter().filter(|(d, _)| *d != T::zero()).map(|(_, w)| w).sum::<T>())
                .sum(),
        ),
        DistanceOrder::One => {
            Distance::exact(gaps.iter().map(|g| g.outcomes().into_iter().map(|(d, w)| d * w).sum::<T>()).sum())
        }
        DistanceOrder::Inf => Distance::exact(expected_max(&gaps)),
        DistanceOrder::Two => expected_l2(&gaps),
    }
}

/// E[max_j D_j] from the product of the coordinate CDFs.
fn expected_max<T: Scalar>(gaps: &[Gap<T>]) -> T {
    if gaps.is_empty() {
        return T::zero();
    }
    let dists: Vec<Vec<(T, T)>> = gaps.iter().map(Gap::outcomes).collect();
    let mut support: Vec<T> = dists.iter().flatten().map(|(d, _)| *d).collect();
    support.sort_by(|x, y| x.partial_cmp(y).expect("finite gaps"));
    support.dedup();
    let mut expected = T::zero();
    let mut prev_cdf = T::zero();
    for v in support {
        let cdf: T = dists
            .iter()
            .map(|d| d.iter().filter(|(g, _)| *g <= v).map(|(_, w)| *w).sum::<T>())
            .fold(T::one(), |acc, c| acc * c);
        expected = expected + v * (cdf - prev_cdf);
        prev_cdf = cdf;
    }
    expected
}

/// E[√(Σ D_j²)]. Integer-valued squared gaps are convolved exactly; up to
/// [`MAX_ENUMERATED`] non-integer coordinates are enumerated on top. Past
/// that the result is √(E[Σ D_j²]), an upper bound by Jensen, and flagged.
fn expected_l2<T: Scalar>(gaps: &[Gap<T>]) -> Distance<T> {
    let mut base = T::zero();
    let mut integral: Vec<Vec<(usize, T)>> = Vec::new();
    let mut real: Vec<Vec<(T, T)>> = Vec::new();
    for g in gaps {
        match g {
            Gap::Fixed(d) => base = base + *d * *d,
            g if g.integral() => integral.push(
                g.outcomes().into_iter().map(|(d, w)| ((d * d).to_usize().expect("integral squared gap"), w)).collect(),
            ),
            g => real.push(g.outcomes().into_iter().map(|(d, w)| (d * d, w)).collect()),
        }
    }
    if real.len() > MAX_ENUMERATED {
        let mean_sq: T = integral
            .iter()
            .map(|d| d.iter().map(|(s, w)| T::from_usize_lossy(*s) * *w).sum::<T>())
            .chain(real.iter().map(|d| d.iter().map(|(s, w)| *s * *w).sum::<T>()))
            .sum();
        return Distance { value: (base + mean_sq).sqrt(), approximate: true };
    }

    // distribution of the integer part of the squared norm
    let mut conv: Vec<T> = vec![T::one()];
    for d in &integral {
        let top = d.iter().map(|(s, _)| *s).max().unwrap_or(0);
        let mut next = vec![T::zero(); conv.len() + top];
        for (i, &pi) in conv.iter().enumerate() {
            if pi == T::zero() {
                continue;
            }
            for &(s, w) in d {
                next[i + s] = next[i + s] + pi * w;
            }
        }
        conv = next;
    }

    // enumerate the non-integer coordinates jointly
    let mut combos: Vec<(T, T)> = vec![(T::zero(), T::one())];
    for d in &real {
        combos = combos.iter().flat_map(|&(s, w)| d.iter().map(move |&(x, v)| (s + x, w * v))).collect();
    }

    let mut expected = T::zero();
    for &(extra, wr) in &combos {
        for (s, &pi) in conv.iter().enumerate() {
            if pi != T::zero() {
                expected = expected + wr * pi * (base + extra + T::from_usize_lossy(s)).sqrt();
            }
        }
    }
    Distance::exact(expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ORDERS: [DistanceOrder; 4] = DistanceOrder::ALL;

    #[test]
    fn identical_vectors_are_zero() {
        let v = [Some(1.0), Some(3.0), Some(5.0)];
        for p in ORDERS {
            for mode in DistanceMode::ALL {
                assert_eq!(rating_distance(&v, &v, p, mode).unwrap().value, 0.0);
            }
        }
    }

    #[test]
    fn naive_norms() {
        let a = [Some(1.0), Some(2.0), Some(5.0), None];
        let b = [Some(2.0), Some(2.0), Some(2.0), Some(4.0)];
        let d = |p| rating_distance(&a, &b, p, DistanceMode::Naive).unwrap().value;
        assert_eq!(d(DistanceOrder::Zero), 2.0);
        assert_eq!(d(DistanceOrder::One), 4.0);
        assert!((d(DistanceOrder::Two) - 10f64.sqrt()).abs() < 1e-15);
        assert_eq!(d(DistanceOrder::Inf), 3.0);
    }

    #[test]
    fn naive_without_overlap_is_maximal() {
        let a = [Some(1.0), None, None, None];
        let b = [None, Some(2.0), None, None];
        let d = |p| rating_distance(&a, &b, p, DistanceMode::Naive).unwrap().value;
        assert_eq!(d(DistanceOrder::Zero), 4.0);
        assert_eq!(d(DistanceOrder::One), 16.0);
        assert_eq!(d(DistanceOrder::Two), 8.0);
        assert_eq!(d(DistanceOrder::Inf), 4.0);
    }

    #[test]
    fn single_coordinate_expectations() {
        let one =
            |p, a: Option<f64>, b: Option<f64>| rating_distance(&[a], &[b], p, DistanceMode::Bayesian).unwrap().value;
        assert!((one(DistanceOrder::One, None, Some(3.0)) - 1.2).abs() < 1e-15);
        assert!((one(DistanceOrder::Zero, None, Some(3.0)) - 0.8).abs() < 1e-15);
        assert!((one(DistanceOrder::Zero, None, None) - 0.8).abs() < 1e-15);
        // E|X - Y| = (8*1 + 6*2 + 4*3 + 2*4) / 25
        assert!((one(DistanceOrder::One, None, None) - 1.6).abs() < 1e-15);
        assert!((one(DistanceOrder::Inf, None, Some(1.0)) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch() {
        assert!(rating_distance::<f64>(&[None], &[None, None], DistanceOrder::One, DistanceMode::Naive).is_err());
    }

    #[test]
    fn l2_falls_back_for_many_real_partners() {
        let a: Vec<Option<f64>> = (0..8).map(|i| Some(1.5 + 0.1 * i as f64)).collect();
        let b = vec![None; 8];
        let d = rating_distance(&a, &b, DistanceOrder::Two, DistanceMode::Bayesian).unwrap();
        assert!(d.approximate);
        let few = rating_distance(&a[..3], &b[..3], DistanceOrder::Two, DistanceMode::Bayesian).unwrap();
        assert!(!few.approximate);
    }

    #[test]
    fn works_in_f32() {
        let d = rating_distance::<f32>(&[None], &[Some(3.0)], DistanceOrder::One, DistanceMode::Bayesian).unwrap();
        assert!((d.value - 1.2).abs() < 1e-6);
    }
}
