//! Downstream utility of (perturbed) embeddings: word-pair similarity,
//! sentence similarity through centroid vectors, and odd-man-out.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::PrivacyParams;
use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::mechanisms::{perturb, MechanismConfig, MechanismKind, PerturbationContext};
use crate::scalar::{dot, Scalar};
use crate::stats::{mean_and_stderr, pearson, spearman};

/// Relative slack used to call two odd-man-out scores a tie.
const TIE_RTOL: f64 = 1e-12;

/// Cosine similarity; 0 when either vector is all zeros.
pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    let na = dot(a, a).as_f64().sqrt();
    let nb = dot(b, b).as_f64().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b).as_f64() / (na * nb)
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').to_string()))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .collect())
}

fn fields(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

fn normalise(tok: &str, lowercase: bool) -> String {
    if lowercase {
        tok.to_lowercase()
    } else {
        tok.to_string()
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

/// Parses a rating; a non-numeric rating on the first data line is
/// treated as a header.
fn parse_rating(path: &Path, lineno: usize, first: bool, raw: &str) -> Result<Option<f64>> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ if first => Ok(None),
        _ => Err(Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: format!("rating {raw:?} is not a finite number"),
        }),
    }
}

/// Word pairs with human similarity ratings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityDataset {
    pub name: String,
    pub pairs: Vec<(String, String, f64)>,
}

impl SimilarityDataset {
    /// Reads `word1 <TAB> word2 <TAB> rating` lines (whitespace also accepted).
    pub fn load(path: impl AsRef<Path>, lowercase: bool) -> Result<Self> {
        let path = path.as_ref();
        let mut pairs = Vec::new();
        for (k, (lineno, line)) in read_lines(path)?.into_iter().enumerate() {
            let f = fields(&line);
            if f.len() != 3 || f[0].is_empty() || f[1].is_empty() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    message: "expected: word1, word2, rating".into(),
                });
            }
            if let Some(r) = parse_rating(path, lineno, k == 0, f[2])? {
                pairs.push((normalise(f[0], lowercase), normalise(f[1], lowercase), r));
            }
        }
        Ok(Self {
            name: dataset_name(path),
            pairs,
        })
    }
}

/// Sentence pairs with human similarity ratings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePairDataset {
    pub name: String,
    pub pairs: Vec<(Vec<String>, Vec<String>, f64)>,
}

impl SentencePairDataset {
    /// Reads `sentence1 <TAB> sentence2 <TAB> rating`; sentences are split on
    /// whitespace.
    pub fn load(path: impl AsRef<Path>, lowercase: bool) -> Result<Self> {
        let path = path.as_ref();
        let mut pairs = Vec::new();
        for (k, (lineno, line)) in read_lines(path)?.into_iter().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    message: "expected: sentence1 <TAB> sentence2 <TAB> rating".into(),
                });
            }
            if let Some(r) = parse_rating(path, lineno, k == 0, f[2].trim())? {
                let tok = |s: &str| s.split_whitespace().map(|t| normalise(t, lowercase)).collect();
                pairs.push((tok(f[0]), tok(f[1]), r));
            }
        }
        Ok(Self {
            name: dataset_name(path),
            pairs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddManInstance {
    pub words: Vec<String>,
    pub gold: String,
}

/// Odd-man-out instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddManDataset {
    pub name: String,
    pub instances: Vec<OddManInstance>,
}

impl OddManDataset {
    /// Reads `w1 w2 ... wk <TAB> gold` lines; `gold` must be one of the words
    /// and each set needs at least 5 words.
    pub fn load(path: impl AsRef<Path>, lowercase: bool) -> Result<Self> {
        let path = path.as_ref();
        let mut instances = Vec::new();
        for (lineno, line) in read_lines(path)? {
            let err = |message: &str| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: message.into(),
            };
            let (set, gold) = line.split_once('\t').ok_or_else(|| err("expected: words <TAB> gold"))?;
            let words: Vec<String> = set.split_whitespace().map(|t| normalise(t, lowercase)).collect();
            let gold = normalise(gold.trim(), lowercase);
            if words.len() < 5 {
                return Err(err("an instance needs at least 5 words"));
            }
            if !words.contains(&gold) {
                return Err(err("gold word is not part of the set"));
            }
            instances.push(OddManInstance { words, gold });
        }
        Ok(Self {
            name: dataset_name(path),
            instances,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSimilarityResult {
    pub spearman: f64,
    pub scored: usize,
    pub total: usize,
}

/// Spearman correlation between cosine similarity and human ratings over
/// the pairs whose words are both in the vocabulary.
pub fn word_similarity_eval<T: Scalar>(set: &EmbeddingSet<T>, data: &SimilarityDataset) -> Result<WordSimilarityResult> {
    let mut predicted = Vec::new();
    let mut gold = Vec::new();
    for (a, b, r) in &data.pairs {
        if let (Some(i), Some(j)) = (set.index_of(a), set.index_of(b)) {
            predicted.push(cosine(set.row(i), set.row(j)));
            gold.push(*r);
        }
    }
    if predicted.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{}: only {} of {} pairs are in the vocabulary",
            data.name,
            predicted.len(),
            data.pairs.len()
        )));
    }
    Ok(WordSimilarityResult {
        spearman: spearman(&predicted, &gold)?,
        scored: predicted.len(),
        total: data.pairs.len(),
    })
}

/// Mean of the in-vocabulary word vectors; `None` if no word is known.
pub fn centroid<T: Scalar, S: AsRef<str>>(set: &EmbeddingSet<T>, tokens: &[S]) -> Option<Vec<f64>> {
    let mut acc = vec![0.0f64; set.dim()];
    let mut count = 0usize;
    for t in tokens {
        if let Some(i) = set.index_of(t.as_ref()) {
            for (a, v) in acc.iter_mut().zip(set.row(i)) {
                *a += v.as_f64();
            }
            count += 1;
        }
    }
    if count == 0 {
        return None;
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    Some(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StsResult {
    pub spearman: f64,
    pub pearson: f64,
    /// Geometric mean of the two correlations; `None` when their signs differ.
    pub combined: Option<f64>,
    pub scored: usize,
    pub dropped: usize,
}

/// Sign-preserving geometric mean of two correlations with equal signs.
pub fn combined_score(spearman: f64, pearson: f64) -> Option<f64> {
    if spearman == 0.0 || pearson == 0.0 {
        return Some(0.0);
    }
    if spearman.signum() != pearson.signum() {
        return None;
    }
    Some(spearman.signum() * (spearman * pearson).sqrt())
}

/// Sentence similarity: cosine between centroid vectors, correlated with the
/// human ratings.
pub fn sts_eval<T: Scalar>(set: &EmbeddingSet<T>, data: &SentencePairDataset) -> Result<StsResult> {
    let mut predicted = Vec::new();
    let mut gold = Vec::new();
    let mut dropped = 0;
    for (a, b, r) in &data.pairs {
        match (centroid(set, a), centroid(set, b)) {
            (Some(ca), Some(cb)) => {
                predicted.push(cosine(&ca, &cb));
                gold.push(*r);
            }
            _ => dropped += 1,
        }
    }
    if predicted.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{}: only {} scorable sentence pairs",
            data.name,
            predicted.len()
        )));
    }
    let rho = spearman(&predicted, &gold)?;
    let r = pearson(&predicted, &gold)?;
    Ok(StsResult {
        spearman: rho,
        pearson: r,
        combined: combined_score(rho, r),
        scored: predicted.len(),
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddManPrediction {
    pub token: String,
    pub position: usize,
    /// Another exclusion reached the same score; the earliest word wins.
    pub tie: bool,
}

/// Excludes each word in turn and keeps the exclusion whose remaining words
/// have the highest mean pairwise cosine similarity.
pub fn odd_man_out<T: Scalar, S: AsRef<str>>(set: &EmbeddingSet<T>, words: &[S]) -> Result<OddManPrediction> {
    let k = words.len();
    if k < 3 {
        return Err(Error::param(format!("odd-man-out needs at least 3 words, got {k}")));
    }
    let idx: Vec<usize> = words
        .iter()
        .map(|w| {
            set.index_of(w.as_ref())
                .ok_or_else(|| Error::param(format!("{:?} is not in the vocabulary", w.as_ref())))
        })
        .collect::<Result<_>>()?;

    let mut sim = vec![vec![0.0f64; k]; k];
    for a in 0..k {
        for b in a + 1..k {
            let c = cosine(set.row(idx[a]), set.row(idx[b]));
            sim[a][b] = c;
            sim[b][a] = c;
        }
    }
    let pairs = ((k - 1) * (k - 2) / 2) as f64;
    let scores: Vec<f64> = (0..k)
        .map(|out| {
            let mut total = 0.0;
            for a in 0..k {
                for b in a + 1..k {
                    if a != out && b != out {
                        total += sim[a][b];
                    }
                }
            }
            total / pairs
        })
        .collect();

    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let close = |s: f64| (best - s).abs() <= TIE_RTOL * best.abs().max(1.0);
    let position = scores.iter().position(|&s| close(s)).expect("k >= 3");
    let tie = scores.iter().filter(|&&s| close(s)).count() > 1;
    Ok(OddManPrediction {
        token: words[position].as_ref().to_string(),
        position,
        tie,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddManResult {
    pub accuracy: f64,
    pub scored: usize,
    pub skipped: usize,
    pub ties: usize,
}

/// Accuracy over the instances whose words are all in the vocabulary.
pub fn odd_man_out_eval<T: Scalar>(set: &EmbeddingSet<T>, data: &OddManDataset) -> Result<OddManResult> {
    let (mut correct, mut scored, mut skipped, mut ties) = (0usize, 0usize, 0usize, 0usize);
    for inst in &data.instances {
        if inst.words.iter().any(|w| set.index_of(w).is_none()) {
            skipped += 1;
            continue;
        }
        let p = odd_man_out(set, &inst.words)?;
        scored += 1;
        ties += p.tie as usize;
        correct += (p.token == inst.gold) as usize;
    }
    if scored == 0 {
        return Err(Error::InsufficientData(format!("{}: no scorable instances", data.name)));
    }
    Ok(OddManResult {
        accuracy: correct as f64 / scored as f64,
        scored,
        skipped,
        ties,
    })
}

/// Evaluation datasets for [`utility_suite`].
#[derive(Debug, Clone, Default)]
pub struct UtilityDatasets {
    pub word_similarity: Vec<SimilarityDataset>,
    pub sts: Vec<SentencePairDataset>,
    pub odd_man_out: Vec<OddManDataset>,
}

impl UtilityDatasets {
    pub fn is_empty(&self) -> bool {
        self.word_similarity.is_empty() && self.sts.is_empty() && self.odd_man_out.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    WordSimilarity,
    Sts,
    OddManOut,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::WordSimilarity => "word_similarity",
            Task::Sts => "sts",
            Task::OddManOut => "odd_man_out",
        }
    }
}

/// One score per `(task, dataset)` for a fixed embedding set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task: Task,
    pub dataset: String,
    pub score: f64,
}

/// Runs every dataset once. The STS score is the combined correlation
/// (Spearman alone when the combination is undefined).
pub fn evaluate_all<T: Scalar>(set: &EmbeddingSet<T>, data: &UtilityDatasets) -> Result<Vec<TaskScore>> {
    let mut out = Vec::new();
    for d in &data.word_similarity {
        out.push(TaskScore {
            task: Task::WordSimilarity,
            dataset: d.name.clone(),
            score: word_similarity_eval(set, d)?.spearman,
        });
    }
    for d in &data.sts {
        let r = sts_eval(set, d)?;
        out.push(TaskScore {
            task: Task::Sts,
            dataset: d.name.clone(),
            score: r.combined.unwrap_or(r.spearman),
        });
    }
    for d in &data.odd_man_out {
        out.push(TaskScore {
            task: Task::OddManOut,
            dataset: d.name.clone(),
            score: odd_man_out_eval(set, d)?.accuracy,
        });
    }
    Ok(out)
}

/// Sweep over mechanisms, privacy levels and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub mechanisms: Vec<MechanismKind>,
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub seeds: Vec<u64>,
    /// Knobs shared by every run; `kind`, `params` and `seed` are replaced
    /// per run.
    pub template: MechanismConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    /// `None` for the noise-free baseline.
    pub mechanism: Option<MechanismKind>,
    pub epsilon: Option<f64>,
    pub task: Task,
    pub dataset: String,
    pub mean: f64,
    /// `None` when only one repeat was run.
    pub stderr: Option<f64>,
    pub repeats: usize,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteTable {
    pub rows: Vec<SuiteRow>,
}

impl SuiteTable {
    /// `mechanism,epsilon,task,dataset,mean,stderr,repeats`; the baseline
    /// uses mechanism `none` and an empty epsilon.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mechanism,epsilon,task,dataset,mean,stderr,repeats\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.mechanism.map_or("none", MechanismKind::name),
                r.epsilon.map(|e| e.to_string()).unwrap_or_default(),
                r.task.name(),
                r.dataset,
                r.mean,
                r.stderr.map(|e| e.to_string()).unwrap_or_default(),
                r.repeats
            ));
        }
        s
    }

    pub fn find(&self, mechanism: Option<MechanismKind>, epsilon: Option<f64>, task: Task) -> Option<&SuiteRow> {
        self.rows
            .iter()
            .find(|r| r.mechanism == mechanism && r.epsilon == epsilon && r.task == task)
    }
}

/// Perturbs the context's embedding set with every `(mechanism, ε, seed)`
/// and aggregates each task score as mean ± standard error over seeds. The
/// first rows hold the unperturbed baseline.
pub fn utility_suite<T: Scalar>(
    ctx: &PerturbationContext<'_, T>,
    data: &UtilityDatasets,
    cfg: &SuiteConfig,
) -> Result<SuiteTable> {
    if cfg.seeds.is_empty() {
        return Err(Error::param("at least one seed is required"));
    }
    let mut rows = Vec::new();
    for s in evaluate_all(ctx.set(), data)? {
        rows.push(SuiteRow {
            mechanism: None,
            epsilon: None,
            task: s.task,
            dataset: s.dataset,
            mean: s.score,
            stderr: None,
            repeats: 1,
            scores: vec![s.score],
        });
    }
    for &kind in &cfg.mechanisms {
        for &eps in &cfg.epsilons {
            let params = PrivacyParams::with_tol(eps, cfg.delta, cfg.template.params.tol)?;
            let mut per_seed: Vec<Vec<TaskScore>> = Vec::new();
            for &seed in &cfg.seeds {
                let config = MechanismConfig {
                    kind,
                    params,
                    seed,
                    ..cfg.template.clone()
                };
                let (noisy, _) = perturb(ctx, &config)?;
                per_seed.push(evaluate_all(&noisy, data)?);
            }
            for (t, first) in per_seed[0].iter().enumerate() {
                let scores: Vec<f64> = per_seed.iter().map(|s| s[t].score).collect();
                let (mean, stderr) = mean_and_stderr(&scores);
                rows.push(SuiteRow {
                    mechanism: Some(kind),
                    epsilon: Some(eps),
                    task: first.task,
                    dataset: first.dataset.clone(),
                    mean,
                    stderr,
                    repeats: scores.len(),
                    scores,
                });
            }
        }
    }
    Ok(SuiteTable { rows })
}
