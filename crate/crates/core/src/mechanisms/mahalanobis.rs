use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Gamma, StandardNormal};

use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{map_rows, MechanismKind, NoiseGroup, PerturbationReport, ScaleKind};

/// Sample covariance of the embeddings rescaled to trace `d`.
///
/// A set whose rows are all identical has no covariance structure; the
/// identity is returned in that case.
pub fn normalised_covariance<T: Scalar>(set: &EmbeddingSet<T>) -> Result<DMatrix<f64>> {
    let (n, d) = (set.len(), set.dim());
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "sample covariance needs at least 2 words, got {n}"
        )));
    }
    let x = DMatrix::from_row_iterator(n, d, set.as_flat().iter().map(|v| v.as_f64()));
    let mean = x.row_mean();
    let mut centred = x;
    for mut row in centred.row_iter_mut() {
        row -= &mean;
    }
    let cov = centred.tr_mul(&centred) / (n as f64 - 1.0);
    let trace = cov.trace();
    if !(trace > 0.0) {
        return Ok(DMatrix::identity(d, d));
    }
    Ok(cov * (d as f64 / trace))
}

/// `λ Σ_norm + (1 - λ) I`; trace is `d` for every `λ`.
pub fn regularised_covariance<T: Scalar>(set: &EmbeddingSet<T>, lambda: f64) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::param(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let d = set.dim();
    Ok(normalised_covariance(set)? * lambda + DMatrix::identity(d, d) * (1.0 - lambda))
}

/// Symmetric square root with negative eigenvalues clamped to 0.
fn sqrt_psd(m: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&roots) * v.transpose()
}

/// Elliptical noise shaped by the embedding covariance.
///
/// `z = r · Σ̃^{1/2} · v` with `v` uniform on the unit sphere and
/// `r ~ Gamma(shape d, scale 1/ε)`. `λ = 0` gives spherical noise.
pub fn mahalanobis_perturb<T: Scalar>(
    set: &EmbeddingSet<T>,
    epsilon: f64,
    lambda: f64,
    seed: u64,
) -> Result<(EmbeddingSet<T>, PerturbationReport)> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param(format!("Mahalanobis noise needs epsilon > 0, got {epsilon}")));
    }
    let d = set.dim();
    let root = sqrt_psd(regularised_covariance(set, lambda)?);
    let radius = Gamma::new(d as f64, 1.0 / epsilon)
        .map_err(|e| Error::param(format!("gamma radius: {e}")))?;

    let out = map_rows(set, seed, |_, rng, row| {
        let mut dir = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
        let norm = dir.norm();
        if norm == 0.0 {
            return;
        }
        dir /= norm;
        let r: f64 = rng.sample(radius);
        let z = &root * dir * r;
        for (v, dz) in row.iter_mut().zip(z.iter()) {
            *v = T::of(v.as_f64() + dz);
        }
    })?;

    let report = PerturbationReport {
        mechanism: MechanismKind::Mahalanobis,
        seed,
        n: set.len(),
        d,
        epsilon,
        delta: None,
        u_star: None,
        global_sensitivity: None,
        scale_kind: ScaleKind::GammaScale,
        groups: vec![NoiseGroup {
            id: 0,
            label: "all words".into(),
            size: set.len(),
            sensitivity: None,
            scale: 1.0 / epsilon,
        }],
        zero_noise_words: 0,
        lambda: Some(lambda),
        jaccard: None,
        m_density: None,
        non_normative: true,
        notes: vec![
            "radius ~ Gamma(d, 1/epsilon), direction uniform on the sphere, shaped by the \
             trace-normalised covariance blended with the identity"
                .into(),
        ],
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn anisotropic(n: usize) -> EmbeddingSet<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rows = (0..n)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                let c: f64 = rng.sample(StandardNormal);
                vec![3.0 * a, a + 0.5 * b, 0.2 * c]
            })
            .collect();
        EmbeddingSet::from_anonymous_rows(rows).unwrap()
    }

    #[test]
    fn trace_is_d_for_any_lambda() {
        let s = anisotropic(500);
        for &l in &[0.0, 0.3, 1.0] {
            assert!((regularised_covariance(&s, l).unwrap().trace() - 3.0).abs() < 1e-12);
        }
        assert!(regularised_covariance(&s, 1.1).is_err());
    }

    #[test]
    fn degenerate_inputs() {
        let one = EmbeddingSet::from_anonymous_rows(vec![vec![1.0f64, 2.0]]).unwrap();
        assert!(mahalanobis_perturb(&one, 1.0, 1.0, 1).is_err());
        let same = EmbeddingSet::from_anonymous_rows(vec![vec![1.0f64, 2.0]; 4]).unwrap();
        assert_eq!(normalised_covariance(&same).unwrap(), DMatrix::identity(2, 2));
        assert!(mahalanobis_perturb(&same, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn spherical_radius_mean() {
        let n = 1_000_000;
        let s = EmbeddingSet::from_anonymous_rows(
            (0..n).map(|i| vec![(i % 7) as f64, (i % 3) as f64]).collect(),
        )
        .unwrap();
        let eps = 4.0;
        let (out, rep) = mahalanobis_perturb(&s, eps, 0.0, 99).unwrap();
        assert!(rep.non_normative);
        let mean_norm = out
            .rows()
            .zip(s.rows())
            .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
            .sum::<f64>()
            / n as f64;
        let want = 2.0 / eps;
        assert!((mean_norm / want - 1.0).abs() < 0.02, "{mean_norm} vs {want}");
    }

    #[test]
    fn noise_covariance_follows_data_covariance() {
        let s = anisotropic(200_000);
        let eps = 2.0;
        let (out, _) = mahalanobis_perturb(&s, eps, 1.0, 5).unwrap();
        let sigma = regularised_covariance(&s, 1.0).unwrap();
        let d = 3usize;
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for (a, b) in out.rows().zip(s.rows()) {
            let z = DVector::from_iterator(d, a.iter().zip(b).map(|(x, y)| x - y));
            cov += &z * z.transpose();
        }
        cov /= s.len() as f64;
        // E[z zᵀ] = E[r²]/d · Σ̃ = (d + 1)/ε² · Σ̃.
        let expected = sigma * ((d as f64 + 1.0) / (eps * eps));
        let rel = (&cov - &expected).norm() / expected.norm();
        assert!(rel < 0.05, "relative Frobenius error {rel}");
    }
}
