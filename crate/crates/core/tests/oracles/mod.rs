//! Slow, obviously-correct reimplementations used as test oracles. Nothing
//! here calls into the library's numeric code.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// All other points sorted by (distance, index), truncated to `m`.
pub fn brute_knn(rows: &[Vec<f64>], m: usize) -> Vec<Vec<usize>> {
    (0..rows.len())
        .map(|i| brute_query(rows, &rows[i], m, Some(i)))
        .collect()
}

pub fn brute_query(rows: &[Vec<f64>], q: &[f64], m: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = (0..rows.len())
        .filter(|&j| Some(j) != exclude)
        .map(|j| (dist(q, &rows[j]), j))
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.into_iter().take(m).map(|(_, j)| j).collect()
}

pub fn set_jaccard(a: &[usize], b: &[usize]) -> f64 {
    let a: BTreeSet<_> = a.iter().collect();
    let b: BTreeSet<_> = b.iter().collect();
    a.intersection(&b).count() as f64 / a.union(&b).count() as f64
}

/// Every pair checked against both neighbouring conditions.
pub fn brute_edges(rows: &[Vec<f64>], m: usize, tau: f64) -> Vec<(usize, usize)> {
    let s = brute_knn(rows, m);
    let mut edges = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let near = s[i].contains(&j) || s[j].contains(&i);
            if near && set_jaccard(&s[i], &s[j]) >= tau {
                edges.push((i, j));
            }
        }
    }
    edges
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    edges
}

fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    adj
}

fn canonical(mut comps: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for c in &mut comps {
        c.sort_unstable();
    }
    comps.sort();
    comps
}

/// Recursive depth-first search.
pub fn dfs_components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    fn visit(v: usize, adj: &[Vec<usize>], seen: &mut [bool], out: &mut Vec<usize>) {
        seen[v] = true;
        out.push(v);
        for &w in &adj[v] {
            if !seen[w] {
                visit(w, adj, seen, out);
            }
        }
    }
    let adj = adjacency(n, edges);
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for v in 0..n {
        if !seen[v] {
            let mut c = Vec::new();
            visit(v, &adj, &mut seen, &mut c);
            comps.push(c);
        }
    }
    canonical(comps)
}

/// Frontier expansion: pick a random unvisited
/// word, grow its set by adding all neighbours of the current set until it
/// stops changing, remove it, repeat.
pub fn frontier_components(n: usize, edges: &[(usize, usize)], seed: u64) -> Vec<Vec<usize>> {
    let adj = adjacency(n, edges);
    let mut rng = rng(seed);
    let mut remaining: BTreeSet<usize> = (0..n).collect();
    let mut comps = Vec::new();
    while !remaining.is_empty() {
        let pick = *remaining.iter().nth(rng.random_range(0..remaining.len())).unwrap();
        let mut h: BTreeSet<usize> = [pick].into();
        loop {
            let mut next = h.clone();
            for &v in &h {
                next.extend(adj[v].iter().copied());
            }
            if next == h {
                break;
            }
            h = next;
        }
        for v in &h {
            remaining.remove(v);
        }
        comps.push(h.into_iter().collect());
    }
    canonical(comps)
}

/// Gauss–Legendre nodes and weights on [-1, 1], found by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre(20);
    let w = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * w;
        total += rule.iter().map(|&(x, wt)| wt * f(mid + 0.5 * w * x)).sum::<f64>() * 0.5 * w;
    }
    total
}

/// `∫_0^∞ exp(-a s - s²/2) ds` for `a >= 0`, so that for `t <= 0`
/// `Φ(t) = φ(t) · tail_integral(-t)`.
fn tail_integral(a: f64) -> f64 {
    let upper = 40.0 / (1.0 + a);
    integrate(&|s: f64| (-a * s - 0.5 * s * s).exp(), 0.0, upper, 200)
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// `ln Φ(t)` for `t <= 0` by quadrature.
pub fn quad_ln_phi_lower(t: f64) -> f64 {
    assert!(t <= 0.0);
    -0.5 * t * t - LN_SQRT_2PI + tail_integral(-t).ln()
}

/// Φ by quadrature of the normal density.
pub fn quad_phi(t: f64) -> f64 {
    if t > 0.0 {
        return 1.0 - quad_phi(-t);
    }
    quad_ln_phi_lower(t).exp()
}

/// g(u) built from the quadrature Φ; the `e^ε` factor is folded into the
/// exponent.
pub fn quad_g(u: f64, eps: f64) -> f64 {
    let a = 1.0 / (2.0 * u) - eps * u;
    let b = -1.0 / (2.0 * u) - eps * u;
    quad_phi(a) - (eps + quad_ln_phi_lower(b)).exp()
}

/// Average ranks (1-based) by exhaustive counting.
pub fn brute_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx).powi(2);
        syy += (y[i] - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn brute_spearman(x: &[f64], y: &[f64]) -> f64 {
    brute_pearson(&brute_ranks(x), &brute_ranks(y))
}

pub fn brute_cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / (na * nb)
}

/// Index of the word whose removal leaves the highest mean pairwise cosine,
/// scores listed for every exclusion.
pub fn brute_odd_man(vectors: &[Vec<f64>]) -> (usize, Vec<f64>) {
    let k = vectors.len();
    let scores: Vec<f64> = (0..k)
        .map(|out| {
            let rest: Vec<&Vec<f64>> = (0..k).filter(|&i| i != out).map(|i| &vectors[i]).collect();
            let mut sims = Vec::new();
            for a in 0..rest.len() {
                for b in a + 1..rest.len() {
                    sims.push(brute_cosine(rest[a], rest[b]));
                }
            }
            sims.iter().sum::<f64>() / sims.len() as f64
        })
        .collect();
    let mut best = 0;
    for i in 1..k {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    (best, scores)
}

/// Jaccard overlap of clean and perturbed neighbour sets, word `i` excluded
/// from both.
pub fn brute_prediction_probability(rows: &[Vec<f64>], perturbed: &[f64], i: usize, m: usize) -> f64 {
    let clean = brute_query(rows, &rows[i], m, Some(i));
    let noisy = brute_query(rows, perturbed, m, Some(i));
    set_jaccard(&clean, &noisy)
}
