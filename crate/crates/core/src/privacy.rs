//! Empirical privacy: how well an adversary holding the clean embeddings can
//! recognise a word from its perturbed vector.
//!
//! The prediction probability of word `x` is approximated by the Jaccard
//! overlap between `S_m(x)` (clean neighbours) and `S_m(M(x))` (clean words
//! nearest to the perturbed vector). The distribution of these values over
//! the vocabulary is summarised by its adjusted Fisher-Pearson skewness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::neighbours::{jaccard, knn, nearest_to};
use crate::scalar::Scalar;

/// Default neighbourhood size for privacy evaluation.
pub const DEFAULT_PRIVACY_M: usize = 10;
/// Histogram bins on `[0, 1]`.
pub const HISTOGRAM_BINS: usize = 20;

/// Whether the queried word may appear among the neighbours of its own
/// perturbed vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfMatch {
    /// `x` is excluded from both neighbour sets, so an unperturbed vector
    /// scores exactly 1.
    #[default]
    Exclude,
    /// The perturbed vector is ranked against the whole vocabulary,
    /// including `x` itself.
    Include,
}

/// Overlap between the clean neighbourhood of word `word` and the clean
/// words nearest to `perturbed`.
pub fn prediction_probability<T: Scalar>(
    original: &EmbeddingSet<T>,
    perturbed: &[T],
    word: usize,
    m: usize,
    mode: SelfMatch,
) -> Result<f64> {
    check_query(original, perturbed, word, m)?;
    let k = m.min(original.len() - 1);
    let clean: Vec<usize> = nearest_to(original, original.row(word), k, Some(word))
        .into_iter()
        .map(|(j, _)| j)
        .collect();
    overlap_with_query(original, &clean, perturbed, word, k, mode)
}

fn check_query<T: Scalar>(original: &EmbeddingSet<T>, perturbed: &[T], word: usize, m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::param("m must be >= 1"));
    }
    if original.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 words".into()));
    }
    if word >= original.len() {
        return Err(Error::param(format!("word index {word} out of range")));
    }
    if perturbed.len() != original.dim() {
        return Err(Error::Mismatch(format!(
            "perturbed vector has {} coordinates, embeddings have {}",
            perturbed.len(),
            original.dim()
        )));
    }
    Ok(())
}

fn overlap_with_query<T: Scalar>(
    original: &EmbeddingSet<T>,
    clean: &[usize],
    perturbed: &[T],
    word: usize,
    k: usize,
    mode: SelfMatch,
) -> Result<f64> {
    let exclude = match mode {
        SelfMatch::Exclude => Some(word),
        SelfMatch::Include => None,
    };
    let query: Vec<usize> = nearest_to(original, perturbed, k, exclude)
        .into_iter()
        .map(|(j, _)| j)
        .collect();
    jaccard(clean, &query)
}

/// Sample skewness with its degenerate-distribution flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Skewness {
    pub value: f64,
    /// All values identical; `value` is 0 by convention.
    pub degenerate: bool,
}

/// Adjusted Fisher-Pearson skewness
/// `n / ((n-1)(n-2)) · Σ ((p_i - p̄) / s)³` with `s` the sample standard
/// deviation.
pub fn skewness(values: &[f64]) -> Result<Skewness> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("skewness needs n >= 3, got {n}")));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let s = (ss / (nf - 1.0)).sqrt();
    if s == 0.0 {
        return Ok(Skewness {
            value: 0.0,
            degenerate: true,
        });
    }
    let cubes = values.iter().map(|v| ((v - mean) / s).powi(3)).sum::<f64>();
    Ok(Skewness {
        value: nf / ((nf - 1.0) * (nf - 2.0)) * cubes,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Fixed-width histogram over `[0, 1]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = ((v * bins as f64).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lo: i as f64 / bins as f64,
            hi: (i + 1) as f64 / bins as f64,
            count,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub m: usize,
    pub self_match: SelfMatch,
    pub n: usize,
    pub probabilities: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub degenerate: bool,
    /// Identification uncertainty that remains even at full overlap (`1/m`).
    pub residual_uncertainty: f64,
    pub histogram: Vec<HistogramBin>,
}

impl PrivacyReport {
    /// Histogram as CSV (`lo,hi,count`).
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("lo,hi,count\n");
        for b in &self.histogram {
            s.push_str(&format!("{},{},{}\n", b.lo, b.hi, b.count));
        }
        s
    }
}

/// Prediction probabilities for every word plus summary statistics.
pub fn privacy_report<T: Scalar>(
    original: &EmbeddingSet<T>,
    perturbed: &EmbeddingSet<T>,
    m: usize,
    mode: SelfMatch,
) -> Result<PrivacyReport> {
    if !original.same_vocabulary(perturbed) {
        return Err(Error::Mismatch(
            "original and perturbed embeddings must share tokens, order and dimensionality".into(),
        ));
    }
    if original.len() < 3 {
        return Err(Error::InsufficientData("privacy report needs at least 3 words".into()));
    }
    if m == 0 {
        return Err(Error::param("m must be >= 1"));
    }
    let clean = knn(original, m)?;
    let k = m.min(original.len() - 1);
    let probabilities = (0..original.len())
        .into_par_iter()
        .map(|i| overlap_with_query(original, clean.neighbours(i), perturbed.row(i), i, k, mode))
        .collect::<Result<Vec<f64>>>()?;

    let n = probabilities.len() as f64;
    let mean = probabilities.iter().sum::<f64>() / n;
    let std = (probabilities.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sk = skewness(&probabilities)?;
    Ok(PrivacyReport {
        m,
        self_match: mode,
        n: probabilities.len(),
        histogram: histogram(&probabilities, HISTOGRAM_BINS),
        probabilities,
        mean,
        std,
        skewness: sk.value,
        degenerate: sk.degenerate,
        residual_uncertainty: 1.0 / m as f64,
    })
}
