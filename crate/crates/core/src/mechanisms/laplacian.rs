use rand::Rng;
use rand_distr::Open01;

use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{map_rows, MechanismKind, NoiseGroup, PerturbationReport, ScaleKind};

/// Independent zero-location Laplace noise on every coordinate with scale
/// `b = Δ / ε`.
pub fn laplacian_perturb<T: Scalar>(
    set: &EmbeddingSet<T>,
    epsilon: f64,
    sensitivity: f64,
    seed: u64,
) -> Result<(EmbeddingSet<T>, PerturbationReport)> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param(format!("Laplace noise needs epsilon > 0, got {epsilon}")));
    }
    if !(sensitivity >= 0.0 && sensitivity.is_finite()) {
        return Err(Error::param(format!("sensitivity must be >= 0, got {sensitivity}")));
    }
    let b = sensitivity / epsilon;
    let out = map_rows(set, seed, |_, rng, row| {
        if b == 0.0 {
            return;
        }
        for v in row.iter_mut() {
            let u: f64 = rng.sample(Open01);
            // Inverse CDF of Laplace(0, b).
            let z = if u < 0.5 { b * (2.0 * u).ln() } else { -b * (2.0 * (1.0 - u)).ln() };
            *v = T::of(v.as_f64() + z);
        }
    })?;
    let report = PerturbationReport {
        mechanism: MechanismKind::Laplacian,
        seed,
        n: set.len(),
        d: set.dim(),
        epsilon,
        delta: None,
        u_star: None,
        global_sensitivity: Some(sensitivity),
        scale_kind: ScaleKind::LaplaceScale,
        groups: vec![NoiseGroup {
            id: 0,
            label: "all words".into(),
            size: set.len(),
            sensitivity: Some(sensitivity),
            scale: b,
        }],
        zero_noise_words: if b == 0.0 { set.len() } else { 0 },
        lambda: None,
        jaccard: None,
        m_density: None,
        non_normative: false,
        notes: vec!["independent per-coordinate Laplace noise".into()],
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::test_support::variance;

    #[test]
    fn empirical_variance_is_two_b_squared() {
        let s = EmbeddingSet::from_anonymous_rows(vec![vec![1.0f64; 1000]; 1000]).unwrap();
        let (eps, delta_s) = (2.0, 0.8);
        let (out, rep) = laplacian_perturb(&s, eps, delta_s, 5).unwrap();
        let b: f64 = delta_s / eps;
        assert_eq!(rep.groups[0].scale, b);
        let z: Vec<f64> = out.as_flat().iter().map(|v| v - 1.0).collect();
        let v = variance(&z);
        assert!((v / (2.0 * b * b) - 1.0).abs() < 0.02, "{v}");
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        assert!(mean.abs() < 5.0 * (2.0f64).sqrt() * b / 1000.0);
    }

    #[test]
    fn zero_sensitivity_identity_and_determinism() {
        let s = EmbeddingSet::from_anonymous_rows(vec![vec![0.25f64, 3.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(laplacian_perturb(&s, 1.0, 0.0, 1).unwrap().0, s);
        let a = laplacian_perturb(&s, 1.0, 1.0, 8).unwrap().0;
        let b = laplacian_perturb(&s, 1.0, 1.0, 8).unwrap().0;
        assert_eq!(a, b);
        assert!(laplacian_perturb(&s, 0.0, 1.0, 8).is_err());
        assert!(laplacian_perturb(&s, -1.0, 1.0, 8).is_err());
    }
}
