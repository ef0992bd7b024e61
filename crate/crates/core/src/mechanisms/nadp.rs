use crate::calibration::{calibrate, PrivacyParams};
use crate::components::ComponentPartition;
use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{add_gaussian_noise, MechanismKind, NoiseGroup, PerturbationReport, ScaleKind};

/// Neighbourhood-aware perturbation.
///
/// One `u*` is solved for `(ε, δ)`; word `x` then receives isotropic Gaussian
/// noise with `σ = u* · Δ_{i(x)}`, the local sensitivity of its component.
/// Singleton components have `Δ = 0` and pass through unchanged.
pub fn nadp_perturb<T: Scalar>(
    set: &EmbeddingSet<T>,
    partition: &ComponentPartition,
    params: &PrivacyParams,
    seed: u64,
) -> Result<(EmbeddingSet<T>, PerturbationReport)> {
    if partition.num_words() != set.len() {
        return Err(Error::Mismatch(format!(
            "partition covers {} words, embedding set has {}",
            partition.num_words(),
            set.len()
        )));
    }
    let cal = calibrate(params, &partition.local_sensitivities)?;
    let sigmas: Vec<f64> = partition
        .assignment
        .iter()
        .map(|&c| cal.sigma_per_component[c])
        .collect();
    let out = add_gaussian_noise(set, &sigmas, seed)?;

    let groups = partition
        .components
        .iter()
        .enumerate()
        .map(|(id, members)| NoiseGroup {
            id,
            label: format!("component {id}"),
            size: members.len(),
            sensitivity: Some(partition.local_sensitivities[id]),
            scale: cal.sigma_per_component[id],
        })
        .collect();
    let mut notes = Vec::new();
    if !partition.degenerate_components.is_empty() {
        notes.push(format!(
            "{} multi-word components have zero sensitivity (duplicate vectors) and received no noise",
            partition.degenerate_components.len()
        ));
    }
    let singletons = partition.components.iter().filter(|c| c.len() == 1).count();
    if singletons > 0 {
        notes.push(format!(
            "{singletons} words have no neighbour in the graph (zero local sensitivity) and were left unchanged"
        ));
    }
    let report = PerturbationReport {
        mechanism: MechanismKind::Nadp,
        seed,
        n: set.len(),
        d: set.dim(),
        epsilon: params.epsilon,
        delta: Some(params.delta),
        u_star: Some(cal.u_star),
        global_sensitivity: Some(partition.global_sensitivity),
        scale_kind: ScaleKind::GaussianSigma,
        groups,
        zero_noise_words: sigmas.iter().filter(|&&s| s == 0.0).count(),
        lambda: None,
        jaccard: None,
        m_density: None,
        non_normative: false,
        notes,
    };
    Ok((out, report))
}
