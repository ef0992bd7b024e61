use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nadp::calibration::{classic_gaussian_sigma, g};
use nadp::embeddings::read_vocabulary;
use nadp::mechanisms::{perturb, PerturbationContext};
use nadp::neighbours::{build_graph, nearest_to, GraphParams};
use nadp::privacy::{privacy_report, SelfMatch};
use nadp::utility::{utility_suite, OddManDataset, SentencePairDataset, SimilarityDataset, SuiteConfig, UtilityDatasets};
use nadp::{calibrate, partition, Embeddings, LoadOptions, MechanismConfig, PrivacyParams};
use serde::{Deserialize, Serialize};

use crate::args::*;

/// Everything needed to re-run a command: written next to its artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub out_dir: PathBuf,
    pub command: Command,
    /// Artifact paths written by the run.
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

pub struct Run {
    pub out_dir: PathBuf,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(out_dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        Ok(Self {
            out_dir,
            outputs: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write(&mut self, path: PathBuf, contents: &[u8]) -> Result<()> {
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path);
        Ok(())
    }

    fn write_json<S: Serialize>(&mut self, path: PathBuf, value: &S) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(path, text.as_bytes())
    }

    fn finish(mut self, command: Command) -> Result<()> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            out_dir: self.out_dir.clone(),
            command,
            outputs: std::mem::take(&mut self.outputs),
        };
        let path = self.path("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

fn absolute(p: &mut PathBuf) -> Result<()> {
    *p = fs::canonicalize(&*p).with_context(|| format!("cannot open {}", p.display()))?;
    Ok(())
}

fn load_input(input: &mut InputArgs) -> Result<Embeddings> {
    absolute(&mut input.embeddings)?;
    let word_filter = match &mut input.vocab_file {
        Some(p) => {
            absolute(p)?;
            Some(read_vocabulary(&*p)?.into_iter().collect::<HashSet<_>>())
        }
        None => None,
    };
    let opts = LoadOptions {
        limit: input.limit,
        word_filter,
    };
    let set = Embeddings::load(&input.embeddings, &opts)?;
    log::info!("loaded {} words x {} dims from {}", set.len(), set.dim(), input.embeddings.display());
    Ok(set)
}

fn graph_params(a: &NeighbourhoodArgs) -> GraphParams {
    GraphParams { m: a.m, tau: a.tau }
}

fn resolve_delta(delta: &mut Option<f64>, n: usize) -> f64 {
    *delta.get_or_insert(1.0 / n as f64)
}

fn mechanism_config(kind: nadp::MechanismKind, params: PrivacyParams, seed: u64, k: &KnobArgs) -> MechanismConfig {
    MechanismConfig {
        lambda: k.lambda,
        eta0: k.eta0,
        alpha1: k.alpha1,
        alpha2: k.alpha2,
        m_density: k.m_density,
        extrapolate_classic: k.extrapolate_classic,
        ..MechanismConfig::new(kind, params, seed)
    }
}

pub fn execute(command: Command, out_dir: PathBuf) -> Result<()> {
    let mut run = Run::new(out_dir)?;
    let resolved = match command {
        Command::Graph(mut a) => {
            let set = load_input(&mut a.input)?;
            let graph = build_graph(&set, a.graph.m, a.graph.tau)?;
            log::info!("{} edges", graph.edges().len());
            run.write_json(run.path("graph.json"), &graph.report(&set))?;
            Command::Graph(a)
        }
        Command::Components(mut a) => {
            let set = load_input(&mut a.input)?;
            let graph = build_graph(&set, a.graph.m, a.graph.tau)?;
            let part = partition(&graph, &set)?;
            let report = part.report(&graph, &set);
            println!(
                "k = {}, global sensitivity = {}, size histogram = {:?}",
                report.k, report.global_sensitivity, report.size_histogram
            );
            run.write_json(run.path("components.json"), &report)?;
            Command::Components(a)
        }
        Command::Calibrate(mut a) => {
            let set = load_input(&mut a.input)?;
            let delta = resolve_delta(&mut a.delta, set.len());
            let params = PrivacyParams::new(a.epsilon, delta)?;
            let ctx = PerturbationContext::new(&set, graph_params(&a.graph));
            let part = ctx.partition()?;
            let report = calibration_report(&params, part)?;
            let text = serde_json::to_string_pretty(&report)?;
            println!("{text}");
            run.write_json(run.path("calibration.json"), &report)?;
            Command::Calibrate(a)
        }
        Command::Perturb(mut a) => {
            let set = load_input(&mut a.input)?;
            let delta = resolve_delta(&mut a.delta, set.len());
            let seed = *a.seed.get_or_insert_with(rand::random);
            let params = PrivacyParams::new(a.epsilon, delta)?;
            let ctx = PerturbationContext::new(&set, graph_params(&a.graph));
            let config = mechanism_config(a.mechanism, params, seed, &a.knobs);
            let (noisy, report) = perturb(&ctx, &config)?;
            let mut buf = Vec::new();
            noisy.write_to(&mut buf, a.precision)?;
            let output = a.output.clone().unwrap_or_else(|| run.path("perturbed.txt"));
            let report_path = a.report.clone().unwrap_or_else(|| run.path("perturbation.json"));
            run.write(output, &buf)?;
            run.write_json(report_path, &report)?;
            log::info!("{} with seed {seed}: {} words without noise", a.mechanism, report.zero_noise_words);
            Command::Perturb(a)
        }
        Command::EvalPrivacy(mut a) => {
            let set = load_input(&mut a.input)?;
            absolute(&mut a.perturbed)?;
            let noisy = aligned(&set, &a.perturbed)?;
            let mode = if a.include_self { SelfMatch::Include } else { SelfMatch::Exclude };
            let report = privacy_report(&set, &noisy, a.m, mode)?;
            println!(
                "mean p = {:.6}, std = {:.6}, skewness = {:.6}{}",
                report.mean,
                report.std,
                report.skewness,
                if report.degenerate { " (degenerate)" } else { "" }
            );
            run.write_json(run.path("privacy.json"), &report)?;
            run.write(run.path("privacy_histogram.csv"), report.histogram_csv().as_bytes())?;
            Command::EvalPrivacy(a)
        }
        Command::EvalUtility(mut a) => {
            let set = load_input(&mut a.input)?;
            let data = load_datasets(&mut a)?;
            if !a.mechanisms.is_empty() && a.epsilons.is_empty() {
                bail!("--epsilons is required when --mechanisms is given");
            }
            let delta = resolve_delta(&mut a.delta, set.len());
            if a.seeds.is_empty() {
                if a.repeats == 0 {
                    bail!("--repeats must be >= 1");
                }
                a.seeds = (0..a.repeats).map(|_| rand::random()).collect();
            }
            let first = *a.epsilons.first().unwrap_or(&1.0);
            let template = mechanism_config(nadp::MechanismKind::Nadp, PrivacyParams::new(first, delta)?, 0, &a.knobs);
            let cfg = SuiteConfig {
                mechanisms: a.mechanisms.clone(),
                epsilons: a.epsilons.clone(),
                delta,
                seeds: a.seeds.clone(),
                template,
            };
            let ctx = PerturbationContext::new(&set, graph_params(&a.graph));
            let table = utility_suite(&ctx, &data, &cfg)?;
            print!("{}", table.to_csv());
            run.write(run.path("utility.csv"), table.to_csv().as_bytes())?;
            run.write_json(run.path("utility.json"), &table)?;
            Command::EvalUtility(a)
        }
        Command::Neighbours(mut a) => {
            let set = load_input(&mut a.input)?;
            absolute(&mut a.perturbed)?;
            let noisy = Embeddings::load(&a.perturbed, &LoadOptions::default())?;
            let mut words = a.words.clone();
            if let Some(p) = &mut a.words_file {
                absolute(p)?;
                words.extend(read_vocabulary(&*p)?);
            }
            let rows = neighbour_rows(&set, &noisy, &words, a.k)?;
            let mut tsv = String::from("word\tno_noise\tperturbed\tleak\n");
            for r in &rows {
                tsv.push_str(&format!("{}\t{}\t{}\t{}\n", r.word, r.no_noise.join(", "), r.perturbed.join(", "), r.leak));
            }
            print!("{tsv}");
            run.write(run.path("neighbours.tsv"), tsv.as_bytes())?;
            run.write_json(run.path("neighbours.json"), &rows)?;
            Command::Neighbours(a)
        }
    };
    run.finish(resolved)
}

/// Perturbed rows reordered to the clean vocabulary.
fn aligned(set: &Embeddings, path: &Path) -> Result<Embeddings> {
    let noisy = Embeddings::load(path, &LoadOptions::default())?;
    let sub = noisy.subset(set.words());
    if !sub.missing.is_empty() {
        bail!(
            "{} words of the clean vocabulary are missing from {} (first: {:?})",
            sub.missing.len(),
            path.display(),
            sub.missing[0]
        );
    }
    if sub.set.dim() != set.dim() {
        bail!("dimension mismatch: {} vs {}", sub.set.dim(), set.dim());
    }
    Ok(sub.set)
}

fn load_datasets(a: &mut EvalUtilityArgs) -> Result<UtilityDatasets> {
    let lower = !a.keep_case;
    let want = |t: TaskSelector| a.task == TaskSelector::All || a.task == t;
    let mut data = UtilityDatasets::default();
    if want(TaskSelector::WordSimilarity) {
        for p in &mut a.word_sim {
            absolute(p)?;
            data.word_similarity.push(SimilarityDataset::load(&*p, lower)?);
        }
    }
    if want(TaskSelector::Sts) {
        for p in &mut a.sts {
            absolute(p)?;
            data.sts.push(SentencePairDataset::load(&*p, lower)?);
        }
    }
    if want(TaskSelector::OddManOut) {
        for p in &mut a.odd_man {
            absolute(p)?;
            data.odd_man_out.push(OddManDataset::load(&*p, lower)?);
        }
    }
    if data.is_empty() {
        bail!("no dataset selected: pass --word-sim, --sts or --odd-man files matching --task");
    }
    Ok(data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCalibration {
    pub id: usize,
    pub size: usize,
    pub local_sensitivity: f64,
    pub sigma: f64,
    /// Classic single-scale σ for the same sensitivity; absent outside ε ∈ (0, 1).
    pub classic_sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub epsilon: f64,
    pub delta: f64,
    pub tol: f64,
    pub u_star: f64,
    pub g_at_u_star: f64,
    pub global_sensitivity: f64,
    pub classic_sigma_global: Option<f64>,
    pub classic_note: Option<String>,
    pub components: Vec<ComponentCalibration>,
}

fn calibration_report(params: &PrivacyParams, part: &nadp::ComponentPartition) -> Result<CalibrationReport> {
    let cal = calibrate(params, &part.local_sensitivities)?;
    let classic = |s: f64| classic_gaussian_sigma(params.epsilon, params.delta, s);
    let classic_note = classic(1.0).err().map(|e| e.to_string());
    Ok(CalibrationReport {
        epsilon: params.epsilon,
        delta: params.delta,
        tol: params.tol,
        u_star: cal.u_star,
        g_at_u_star: g(cal.u_star, params.epsilon)?,
        global_sensitivity: part.global_sensitivity,
        classic_sigma_global: classic(part.global_sensitivity).ok(),
        classic_note,
        components: part
            .components
            .iter()
            .enumerate()
            .map(|(id, c)| ComponentCalibration {
                id,
                size: c.len(),
                local_sensitivity: part.local_sensitivities[id],
                sigma: cal.sigma_per_component[id],
                classic_sigma: classic(part.local_sensitivities[id]).ok(),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighbourRow {
    pub word: String,
    pub no_noise: Vec<String>,
    pub perturbed: Vec<String>,
    /// The word itself is among the neighbours of its perturbed vector.
    pub leak: bool,
}

/// Clean neighbours exclude the word; the perturbed vector is ranked over
/// the whole clean vocabulary, itself included.
pub fn neighbour_rows(set: &Embeddings, noisy: &Embeddings, words: &[String], k: usize) -> Result<Vec<NeighbourRow>> {
    if noisy.dim() != set.dim() {
        bail!("dimension mismatch: {} vs {}", noisy.dim(), set.dim());
    }
    let mut rows = Vec::new();
    for w in words {
        let (Some(i), Some(j)) = (set.index_of(w), noisy.index_of(w)) else {
            log::warn!("{w:?} is missing from the clean or perturbed vocabulary; skipped");
            continue;
        };
        let names = |v: Vec<(usize, f64)>| v.into_iter().map(|(x, _)| set.word(x).to_string()).collect::<Vec<_>>();
        let clean = names(nearest_to(set, set.row(i), k, Some(i)));
        let hits = nearest_to(set, noisy.row(j), k, None);
        let leak = hits.iter().any(|&(x, _)| x == i);
        rows.push(NeighbourRow {
            word: w.clone(),
            no_noise: clean,
            perturbed: names(hits),
            leak,
        });
    }
    Ok(rows)
}
