use crate::calibration::PrivacyParams;
use crate::embeddings::EmbeddingSet;
use crate::error::Result;
use crate::scalar::Scalar;

use super::{add_gaussian_noise, classic_sigma, MechanismKind, NoiseGroup, PerturbationReport, ScaleKind};

/// Classic Gaussian mechanism: one `σ = Δ √(2 ln(1.25/δ)) / ε` for every
/// word. Requires `ε, δ ∈ (0, 1)` unless `extrapolate` is set.
pub fn gaussian_perturb<T: Scalar>(
    set: &EmbeddingSet<T>,
    params: &PrivacyParams,
    sensitivity: f64,
    extrapolate: bool,
    seed: u64,
) -> Result<(EmbeddingSet<T>, PerturbationReport)> {
    let (sigma, note) = classic_sigma(params, sensitivity, extrapolate)?;
    let out = add_gaussian_noise(set, &vec![sigma; set.len()], seed)?;
    let report = PerturbationReport {
        mechanism: MechanismKind::Gaussian,
        seed,
        n: set.len(),
        d: set.dim(),
        epsilon: params.epsilon,
        delta: Some(params.delta),
        u_star: None,
        global_sensitivity: Some(sensitivity),
        scale_kind: ScaleKind::GaussianSigma,
        groups: vec![NoiseGroup {
            id: 0,
            label: "all words".into(),
            size: set.len(),
            sensitivity: Some(sensitivity),
            scale: sigma,
        }],
        zero_noise_words: if sigma == 0.0 { set.len() } else { 0 },
        lambda: None,
        jaccard: None,
        m_density: None,
        non_normative: false,
        notes: note.into_iter().collect(),
    };
    Ok((out, report))
}
