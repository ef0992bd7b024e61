use serde::{Deserialize, Serialize};

use crate::calibration::PrivacyParams;
use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::neighbours::NeighbourSets;
use crate::scalar::Scalar;

use super::{add_gaussian_noise, classic_sigma, MechanismKind, NoiseGroup, PerturbationReport, ScaleKind};

/// Density threshold and per-category constants of the two-category
/// density mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JaccardParams {
    pub eta0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Default for JaccardParams {
    fn default() -> Self {
        Self {
            eta0: super::DEFAULT_ETA0,
            alpha1: super::DEFAULT_ALPHA1,
            alpha2: super::DEFAULT_ALPHA2,
        }
    }
}

/// `η(x)`: mean distance from `x` to its neighbours.
pub fn density<T: Scalar>(sets: &NeighbourSets<T>) -> Vec<f64> {
    (0..sets.len())
        .map(|i| {
            let ds = sets.distances(i);
            ds.iter().map(|d| d.as_f64()).sum::<f64>() / ds.len() as f64
        })
        .collect()
}

/// Two-category density mechanism.
///
/// Words with `η(x) < η₀` are dense (category 1), the rest sparse
/// (category 2). Category `i` gets isotropic Gaussian noise with
/// `σ_i = Δ α_i √(2 ln(1.25/δ)) / ε`, where `Δ` is the mean distance from a
/// word to its furthest neighbour in `sets`.
pub fn jaccard_mechanism_perturb<T: Scalar>(
    set: &EmbeddingSet<T>,
    params: &PrivacyParams,
    sets: &NeighbourSets<T>,
    jp: &JaccardParams,
    extrapolate: bool,
    seed: u64,
) -> Result<(EmbeddingSet<T>, PerturbationReport)> {
    if sets.len() != set.len() {
        return Err(Error::Mismatch(format!(
            "{} neighbour sets for {} words",
            sets.len(),
            set.len()
        )));
    }
    if !(jp.eta0 > 0.0 && jp.alpha1 > 0.0 && jp.alpha2 > 0.0) {
        return Err(Error::param("eta0, alpha1 and alpha2 must be > 0"));
    }
    let eta = density(sets);
    let sensitivity = (0..sets.len())
        .map(|i| sets.distances(i).last().map_or(0.0, |d| d.as_f64()))
        .sum::<f64>()
        / sets.len() as f64;
    let (base, note) = classic_sigma(params, sensitivity, extrapolate)?;
    let sigma = [base * jp.alpha1, base * jp.alpha2];

    let dense: Vec<bool> = eta.iter().map(|&e| e < jp.eta0).collect();
    let per_word: Vec<f64> = dense.iter().map(|&d| if d { sigma[0] } else { sigma[1] }).collect();
    let out = add_gaussian_noise(set, &per_word, seed)?;

    let n_dense = dense.iter().filter(|&&d| d).count();
    let report = PerturbationReport {
        mechanism: MechanismKind::Jaccard,
        seed,
        n: set.len(),
        d: set.dim(),
        epsilon: params.epsilon,
        delta: Some(params.delta),
        u_star: None,
        global_sensitivity: Some(sensitivity),
        scale_kind: ScaleKind::GaussianSigma,
        groups: vec![
            NoiseGroup {
                id: 1,
                label: "dense".into(),
                size: n_dense,
                sensitivity: Some(sensitivity),
                scale: sigma[0],
            },
            NoiseGroup {
                id: 2,
                label: "sparse".into(),
                size: set.len() - n_dense,
                sensitivity: Some(sensitivity),
                scale: sigma[1],
            },
        ],
        zero_noise_words: per_word.iter().filter(|&&s| s == 0.0).count(),
        lambda: None,
        jaccard: Some(*jp),
        m_density: Some(sets.m()),
        non_normative: false,
        notes: note.into_iter().collect(),
    };
    Ok((out, report))
}
