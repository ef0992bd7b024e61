//! Perturbation mechanisms for word embeddings.
//!
//! All mechanisms add independent noise to every word vector. Noise for word
//! `i` is drawn from [`crate::rng::word_stream`]`(seed, i)`, which makes the
//! output a pure function of `(input, configuration, seed)`.

mod gaussian;
mod jaccard;
mod laplacian;
mod mahalanobis;
mod nadp;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{classic_gaussian_sigma, classic_gaussian_sigma_extrapolated, PrivacyParams};
use crate::components::{partition, ComponentPartition};
use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::neighbours::{build_graph, knn, GraphParams, NeighbourSets, DEFAULT_M, DEFAULT_TAU};
use crate::rng::word_stream;
use crate::scalar::Scalar;

pub use gaussian::gaussian_perturb;
pub use jaccard::{density, jaccard_mechanism_perturb, JaccardParams};
pub use laplacian::laplacian_perturb;
pub use mahalanobis::{mahalanobis_perturb, normalised_covariance, regularised_covariance};
pub use nadp::nadp_perturb;

pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_ETA0: f64 = 6.0;
pub const DEFAULT_ALPHA1: f64 = 1.835;
pub const DEFAULT_ALPHA2: f64 = 1.276;
pub const DEFAULT_M_DENSITY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    Nadp,
    Gaussian,
    Laplacian,
    Mahalanobis,
    Jaccard,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 5] = [
        MechanismKind::Nadp,
        MechanismKind::Gaussian,
        MechanismKind::Laplacian,
        MechanismKind::Mahalanobis,
        MechanismKind::Jaccard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Nadp => "nadp",
            MechanismKind::Gaussian => "gaussian",
            MechanismKind::Laplacian => "laplacian",
            MechanismKind::Mahalanobis => "mahalanobis",
            MechanismKind::Jaccard => "jaccard",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MechanismKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param(format!("unknown mechanism {s:?}")))
    }
}

/// Everything needed to run one mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub kind: MechanismKind,
    pub params: PrivacyParams,
    pub seed: u64,
    /// Mahalanobis regulariser in `[0, 1]`.
    pub lambda: f64,
    pub eta0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Neighbourhood size for the density of the Jaccard mechanism.
    pub m_density: usize,
    /// Let the classic single-scale calibration (Gaussian and Jaccard
    /// mechanisms) run at `ε >= 1`, where it gives no guarantee.
    #[serde(default)]
    pub extrapolate_classic: bool,
}

impl MechanismConfig {
    pub fn new(kind: MechanismKind, params: PrivacyParams, seed: u64) -> Self {
        Self {
            kind,
            params,
            seed,
            lambda: DEFAULT_LAMBDA,
            eta0: DEFAULT_ETA0,
            alpha1: DEFAULT_ALPHA1,
            alpha2: DEFAULT_ALPHA2,
            m_density: DEFAULT_M_DENSITY,
            extrapolate_classic: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::param(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::param(format!("eta0 must be > 0, got {}", self.eta0)));
        }
        if !(self.alpha1 > 0.0 && self.alpha2 > 0.0) {
            return Err(Error::param("alpha1 and alpha2 must be > 0"));
        }
        if self.m_density == 0 {
            return Err(Error::param("m_density must be >= 1"));
        }
        Ok(())
    }

    pub fn jaccard_params(&self) -> JaccardParams {
        JaccardParams {
            eta0: self.eta0,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
        }
    }
}

/// What a group's `scale` means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleKind {
    /// Standard deviation of isotropic Gaussian noise.
    GaussianSigma,
    /// Scale `b` of per-coordinate Laplace noise.
    LaplaceScale,
    /// Scale of the Gamma-distributed radius of elliptical noise.
    GammaScale,
}

/// Words sharing one noise scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseGroup {
    pub id: usize,
    pub label: String,
    pub size: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sensitivity: Option<f64>,
    pub scale: f64,
}

/// Exact noise scales used by one perturbation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub mechanism: MechanismKind,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub u_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub global_sensitivity: Option<f64>,
    pub scale_kind: ScaleKind,
    pub groups: Vec<NoiseGroup>,
    pub zero_noise_words: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub jaccard: Option<JaccardParams>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub m_density: Option<usize>,
    /// Set when the construction follows outside literature rather than a
    /// fixed formula.
    pub non_normative: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

/// Adds isotropic Gaussian noise, `sigmas[i]` for word `i`. Words with a
/// zero scale are copied bit for bit.
pub fn add_gaussian_noise<T: Scalar>(set: &EmbeddingSet<T>, sigmas: &[f64], seed: u64) -> Result<EmbeddingSet<T>> {
    if sigmas.len() != set.len() {
        return Err(Error::Mismatch(format!(
            "{} noise scales for {} words",
            sigmas.len(),
            set.len()
        )));
    }
    if let Some(bad) = sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::param(format!("noise scale must be finite and >= 0, got {bad}")));
    }
    map_rows(set, seed, |i, rng, row| {
        let sigma = sigmas[i];
        if sigma > 0.0 {
            for v in row.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v = T::of(v.as_f64() + sigma * z);
            }
        }
    })
}

/// Runs `f(word index, word stream, row)` over a copy of every row.
pub(crate) fn map_rows<T, F>(set: &EmbeddingSet<T>, seed: u64, f: F) -> Result<EmbeddingSet<T>>
where
    T: Scalar,
    F: Fn(usize, &mut rand_chacha::ChaCha8Rng, &mut [T]) + Sync,
{
    let mut data = set.as_flat().to_vec();
    data.par_chunks_mut(set.dim())
        .enumerate()
        .for_each(|(i, row)| {
            let mut rng = word_stream(seed, i);
            f(i, &mut rng, row);
        });
    set.with_data(data)
}

/// Lazily computed structures shared by several mechanism runs on one set.
pub struct PerturbationContext<'a, T: Scalar> {
    set: &'a EmbeddingSet<T>,
    graph: GraphParams,
    partition: OnceLock<ComponentPartition>,
    density: OnceLock<NeighbourSets<T>>,
    density_m: OnceLock<usize>,
}

impl<'a, T: Scalar> PerturbationContext<'a, T> {
    pub fn new(set: &'a EmbeddingSet<T>, graph: GraphParams) -> Self {
        Self {
            set,
            graph,
            partition: OnceLock::new(),
            density: OnceLock::new(),
            density_m: OnceLock::new(),
        }
    }

    pub fn with_defaults(set: &'a EmbeddingSet<T>) -> Self {
        Self::new(
            set,
            GraphParams {
                m: DEFAULT_M,
                tau: DEFAULT_TAU,
            },
        )
    }

    pub fn set(&self) -> &EmbeddingSet<T> {
        self.set
    }

    pub fn graph_params(&self) -> GraphParams {
        self.graph
    }

    /// Supplies a partition computed elsewhere.
    pub fn with_partition(self, p: ComponentPartition) -> Result<Self> {
        if p.num_words() != self.set.len() {
            return Err(Error::Mismatch("partition does not match the embedding set".into()));
        }
        let _ = self.partition.set(p);
        Ok(self)
    }

    pub fn partition(&self) -> Result<&ComponentPartition> {
        if let Some(p) = self.partition.get() {
            return Ok(p);
        }
        let graph = build_graph(self.set, self.graph.m, self.graph.tau)?;
        let p = partition(&graph, self.set)?;
        Ok(self.partition.get_or_init(|| p))
    }

    /// Global sensitivity: the longest neighbour-graph edge.
    pub fn global_sensitivity(&self) -> Result<f64> {
        Ok(self.partition()?.global_sensitivity)
    }

    pub fn density_neighbours(&self, m_density: usize) -> Result<&NeighbourSets<T>> {
        if let (Some(sets), Some(&m)) = (self.density.get(), self.density_m.get()) {
            if m == m_density {
                return Ok(sets);
            }
            return Err(Error::param(format!(
                "context already holds density neighbours for m = {m}, not {m_density}"
            )));
        }
        let sets = knn(self.set, m_density)?;
        let _ = self.density_m.set(m_density);
        Ok(self.density.get_or_init(|| sets))
    }
}

/// Dispatches to the mechanism named in `config`.
pub fn perturb<T: Scalar>(
    ctx: &PerturbationContext<'_, T>,
    config: &MechanismConfig,
) -> Result<(EmbeddingSet<T>, PerturbationReport)> {
    config.validate()?;
    let set = ctx.set();
    match config.kind {
        MechanismKind::Nadp => nadp_perturb(set, ctx.partition()?, &config.params, config.seed),
        MechanismKind::Gaussian => {
            gaussian_perturb(
            set,
            &config.params,
            ctx.global_sensitivity()?,
            config.extrapolate_classic,
            config.seed,
        )
        }
        MechanismKind::Laplacian => laplacian_perturb(
            set,
            config.params.epsilon,
            ctx.global_sensitivity()?,
            config.seed,
        ),
        MechanismKind::Mahalanobis => {
            mahalanobis_perturb(set, config.params.epsilon, config.lambda, config.seed)
        }
        MechanismKind::Jaccard => jaccard_mechanism_perturb(
            set,
            &config.params,
            ctx.density_neighbours(config.m_density)?,
            &config.jaccard_params(),
            config.extrapolate_classic,
            config.seed,
        ),
    }
}

/// Classic σ plus a report note when it was extrapolated past `ε < 1`.
pub(crate) fn classic_sigma(
    params: &PrivacyParams,
    sensitivity: f64,
    extrapolate: bool,
) -> Result<(f64, Option<String>)> {
    if extrapolate && params.epsilon >= 1.0 {
        let s = classic_gaussian_sigma_extrapolated(params.epsilon, params.delta, sensitivity)?;
        let note = format!(
            "classic calibration extrapolated to epsilon = {}; no (epsilon, delta) guarantee holds",
            params.epsilon
        );
        Ok((s, Some(note)))
    } else {
        Ok((classic_gaussian_sigma(params.epsilon, params.delta, sensitivity)?, None))
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_parsing() {
        assert_eq!("NADP".parse::<MechanismKind>().unwrap(), MechanismKind::Nadp);
        assert_eq!("jaccard".parse::<MechanismKind>().unwrap(), MechanismKind::Jaccard);
        assert!("laplace-ish".parse::<MechanismKind>().is_err());
        let json = serde_json::to_string(&MechanismKind::Mahalanobis).unwrap();
        assert_eq!(json, "\"mahalanobis\"");
    }

    #[test]
    fn config_validation() {
        let p = PrivacyParams::new(1.0, 0.01).unwrap();
        let mut c = MechanismConfig::new(MechanismKind::Mahalanobis, p, 1);
        assert!(c.validate().is_ok());
        c.lambda = 1.5;
        assert!(c.validate().is_err());
        c.lambda = 0.5;
        c.eta0 = 0.0;
        assert!(c.validate().is_err());
        c.eta0 = 6.0;
        c.alpha2 = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_scale_is_bitwise_identity() {
        let s = EmbeddingSet::from_anonymous_rows(vec![vec![0.1f64, 0.2], vec![0.3, 0.4]]).unwrap();
        let out = add_gaussian_noise(&s, &[0.0, 0.0], 5).unwrap();
        assert_eq!(out, s);
        assert!(add_gaussian_noise(&s, &[0.0], 5).is_err());
        assert!(add_gaussian_noise(&s, &[0.0, -1.0], 5).is_err());
    }

    #[test]
    fn noise_is_independent_of_thread_count() {
        let rows: Vec<Vec<f64>> = (0..300).map(|i| vec![i as f64; 4]).collect();
        let s = EmbeddingSet::from_anonymous_rows(rows).unwrap();
        let sig = vec![0.5; 300];
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = single.install(|| add_gaussian_noise(&s, &sig, 9).unwrap());
        let b = many.install(|| add_gaussian_noise(&s, &sig, 9).unwrap());
        assert_eq!(a, b);
    }
}
