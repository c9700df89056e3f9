//! Graph representation, generators, edge statistics, spectral second
//! eigenvalue, and empirical bijumbledness auditing.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("generation budget exhausted after {0} restarts")]
    GenerationExhausted(usize),
    #[error("graph is not regular (degrees {0} and {1} both present)")]
    NotRegular(usize, usize),
    #[error("exhaustive audit requires n <= {MAX_EXHAUSTIVE_N}, got {0}")]
    TooLargeForExhaustive(usize),
    #[error("common-neighbor query over an empty set")]
    EmptyQuery,
    #[error("malformed graph JSON: {0}")]
    BadFormat(String),
}

pub const MAX_EXHAUSTIVE_N: usize = 16;

/// Dense subset of `[0, n)` backed by 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VertexSet {
    n: usize,
    words: Vec<u64>,
}

impl VertexSet {
    pub fn new(n: usize) -> Self {
        VertexSet { n, words: vec![0; n.div_ceil(64)] }
    }

    pub fn full(n: usize) -> Self {
        let mut s = Self::new(n);
        for v in 0..n {
            s.insert(v);
        }
        s
    }

    pub fn from_iter<I: IntoIterator<Item = usize>>(n: usize, it: I) -> Self {
        let mut s = Self::new(n);
        for v in it {
            s.insert(v);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, v: usize) {
        assert!(v < self.n, "vertex {v} outside universe {}", self.n);
        self.words[v / 64] |= 1 << (v % 64);
    }

    pub fn remove(&mut self, v: usize) {
        if v < self.n {
            self.words[v / 64] &= !(1 << (v % 64));
        }
    }

    pub fn contains(&self, v: usize) -> bool {
        v < self.n && self.words[v / 64] >> (v % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&v| self.contains(v))
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersect(&self, other: &VertexSet) -> VertexSet {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &VertexSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn intersection_len(&self, other: &VertexSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    fn zip_with(&self, other: &VertexSet, f: impl Fn(u64, u64) -> u64) -> VertexSet {
        assert_eq!(self.n, other.n, "vertex sets over different universes");
        VertexSet {
            n: self.n,
            words: self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

impl std::fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Simple undirected graph on dense vertex ids `0..n`.
#[derive(Clone)]
pub struct Graph {
    n: usize,
    adj: Vec<VertexSet>,
    m: usize,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph { n, adj: vec![VertexSet::new(n); n], m: 0 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.m
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        assert!(u < self.n && v < self.n && u != v, "bad edge ({u},{v})");
        if !self.adj[u].contains(v) {
            self.adj[u].insert(v);
            self.adj[v].insert(u);
            self.m += 1;
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adj[u].contains(v)
    }

    pub fn neighbors(&self, v: usize) -> &VertexSet {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Edge density `2|E| / n²`, the default stand-in for p.
    pub fn density(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        2.0 * self.m as f64 / (self.n as f64 * self.n as f64)
    }

    /// Sorted `u < v` edge list.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.m);
        for u in 0..self.n {
            for v in self.adj[u].iter() {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn vertex_set(&self) -> VertexSet {
        VertexSet::full(self.n)
    }

    /// Is `s` a clique (pairwise adjacent)?
    pub fn is_clique(&self, s: &[usize]) -> bool {
        for (i, &u) in s.iter().enumerate() {
            for &v in &s[i + 1..] {
                if !self.has_edge(u, v) {
                    return false;
                }
            }
        }
        true
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "n": self.n, "edges": self.edges() })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Graph, GraphError> {
        let n = v
            .get("n")
            .and_then(|x| x.as_u64())
            .ok_or_else(|| GraphError::BadFormat("missing n".into()))? as usize;
        let edges = v
            .get("edges")
            .and_then(|x| x.as_array())
            .ok_or_else(|| GraphError::BadFormat("missing edges".into()))?;
        let mut g = Graph::new(n);
        for e in edges {
            let pair = e.as_array().filter(|a| a.len() == 2);
            let pair = pair.ok_or_else(|| GraphError::BadFormat("edge is not a pair".into()))?;
            let (u, v) = (pair[0].as_u64(), pair[1].as_u64());
            match (u, v) {
                (Some(u), Some(v)) if (u as usize) < n && (v as usize) < n && u != v => {
                    g.add_edge(u as usize, v as usize)
                }
                _ => return Err(GraphError::BadFormat(format!("bad edge {e}"))),
            }
        }
        Ok(g)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphKind {
    Gnp { n: usize, p: f64 },
    RandomRegular { n: usize, d: usize },
    Paley { n: usize },
    Complete { n: usize },
    FromFile { path: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphSpec {
    #[serde(flatten)]
    pub kind: GraphKind,
    #[serde(default)]
    pub seed: u64,
}

const PAIRING_RESTARTS: usize = 10_000;

pub fn generate_graph(spec: &GraphSpec) -> Result<Graph, GraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match &spec.kind {
        GraphKind::Complete { n } => {
            check(*n >= 1, "n must be >= 1")?;
            let mut g = Graph::new(*n);
            for u in 0..*n {
                for v in u + 1..*n {
                    g.add_edge(u, v);
                }
            }
            Ok(g)
        }
        GraphKind::Gnp { n, p } => {
            check(*n >= 1, "n must be >= 1")?;
            check((0.0..=1.0).contains(p), "p must lie in [0,1]")?;
            let mut g = Graph::new(*n);
            for u in 0..*n {
                for v in u + 1..*n {
                    if rng.gen::<f64>() < *p {
                        g.add_edge(u, v);
                    }
                }
            }
            Ok(g)
        }
        GraphKind::RandomRegular { n, d } => {
            check(*n >= 1, "n must be >= 1")?;
            check(d < n, "d must be < n")?;
            check(n * d % 2 == 0, "n*d must be even")?;
            random_regular(*n, *d, &mut rng)
        }
        GraphKind::Paley { n } => {
            check(*n >= 5 && is_prime(*n) && n % 4 == 1, "paley needs a prime n ≡ 1 mod 4")?;
            let n = *n;
            let mut residues = VertexSet::new(n);
            for x in 1..n {
                residues.insert(x * x % n);
            }
            let mut g = Graph::new(n);
            for u in 0..n {
                for v in u + 1..n {
                    if residues.contains(v - u) {
                        g.add_edge(u, v);
                    }
                }
            }
            Ok(g)
        }
        GraphKind::FromFile { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| GraphError::BadFormat(format!("{path}: {e}")))?;
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| GraphError::BadFormat(e.to_string()))?;
            Graph::from_json(&v)
        }
    }
}

fn check(cond: bool, msg: &str) -> Result<(), GraphError> {
    if cond {
        Ok(())
    } else {
        Err(GraphError::InvalidSpec(msg.to_string()))
    }
}

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Pairing (configuration) model with local repair: self-loops and repeated
/// pairs are fixed by double edge swaps (full restarts alone succeed with
/// probability ~e^{−d²/4}, hopeless beyond small d).
fn random_regular(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Result<Graph, GraphError> {
    for _ in 0..PAIRING_RESTARTS {
        let mut stubs: Vec<usize> = (0..n * d).map(|i| i / d).collect();
        stubs.shuffle(rng);
        let mut pairs: Vec<(usize, usize)> = stubs.chunks(2).map(|c| (c[0], c[1])).collect();
        let mut multiplicity: HashMap<(usize, usize), usize> = HashMap::new();
        let key = |u: usize, v: usize| if u < v { (u, v) } else { (v, u) };
        for &(u, v) in &pairs {
            *multiplicity.entry(key(u, v)).or_insert(0) += 1;
        }
        let is_bad = |p: (usize, usize), mult: &HashMap<(usize, usize), usize>| {
            p.0 == p.1 || mult[&key(p.0, p.1)] > 1
        };
        let mut ok = true;
        'repair: for _ in 0..(100 * n * d).max(10_000) {
            let Some(bi) = pairs.iter().position(|&p| is_bad(p, &multiplicity)) else {
                break 'repair;
            };
            // Swap the bad pair (a,b) with a random partner (c,e) into
            // (a,c), (b,e) when both results are fresh simple edges.
            let oi = (rng.next_u64() as usize) % pairs.len();
            let (a, b) = pairs[bi];
            let (c, e) = pairs[oi];
            if oi == bi
                || a == c
                || b == e
                || key(a, c) == key(b, e)
                || multiplicity.contains_key(&key(a, c))
                || multiplicity.contains_key(&key(b, e))
            {
                continue;
            }
            *multiplicity.get_mut(&key(a, b)).unwrap() -= 1;
            if multiplicity[&key(a, b)] == 0 {
                multiplicity.remove(&key(a, b));
            }
            *multiplicity.get_mut(&key(c, e)).unwrap() -= 1;
            if multiplicity[&key(c, e)] == 0 {
                multiplicity.remove(&key(c, e));
            }
            multiplicity.insert(key(a, c), 1);
            multiplicity.insert(key(b, e), 1);
            pairs[bi] = (a, c);
            pairs[oi] = (b, e);
        }
        if pairs.iter().any(|&p| is_bad(p, &multiplicity)) {
            ok = false;
        }
        if ok {
            let mut g = Graph::new(n);
            for &(u, v) in &pairs {
                g.add_edge(u, v);
            }
            return Ok(g);
        }
    }
    Err(GraphError::GenerationExhausted(PAIRING_RESTARTS))
}

/// `e(A,B)`: ordered incidences, counting edges inside `A ∩ B` twice.
pub fn edge_count_between(g: &Graph, a: &VertexSet, b: &VertexSet) -> usize {
    a.iter().map(|u| g.neighbors(u).intersection_len(b)).sum()
}

/// Common neighborhood `N_W(S) = (∩_{v∈S} N(v)) ∩ W`.
pub fn common_neighbors(g: &Graph, s: &VertexSet, w: &VertexSet) -> Result<VertexSet, GraphError> {
    let mut it = s.iter();
    let first = it.next().ok_or(GraphError::EmptyQuery)?;
    let mut acc = g.neighbors(first).clone();
    for v in it {
        acc = acc.intersect(g.neighbors(v));
    }
    Ok(acc.intersect(w))
}

/// Like [`common_neighbors`] but for a slice of vertices.
pub fn common_neighbors_of(g: &Graph, s: &[usize], w: &VertexSet) -> Result<VertexSet, GraphError> {
    let set = VertexSet::from_iter(g.n(), s.iter().copied());
    common_neighbors(g, &set, w)
}

/// Degree of regular graphs; error when two distinct degrees occur.
pub fn regular_degree(g: &Graph) -> Result<usize, GraphError> {
    let d = g.degree(0);
    for v in 1..g.n() {
        if g.degree(v) != d {
            return Err(GraphError::NotRegular(d, g.degree(v)));
        }
    }
    Ok(d)
}

/// Second-largest adjacency eigenvalue in absolute value of a regular graph,
/// via an in-repo cyclic Jacobi eigensolver (absolute error ≤ 1e−8).
pub fn spectral_lambda(g: &Graph) -> Result<f64, GraphError> {
    let d = regular_degree(g)?;
    assert!(g.n() >= 2, "spectral_lambda needs n >= 2");
    let mut eig = jacobi_eigenvalues(g);
    // Drop one copy of the trivial eigenvalue d (the largest).
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    debug_assert!((eig[0] - d as f64).abs() < 1e-6);
    eig.remove(0);
    Ok(eig.iter().fold(0.0f64, |acc, &x| acc.max(x.abs())))
}

/// All eigenvalues of the adjacency matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let mut a = vec![0.0f64; n * n];
    for (u, v) in g.edges() {
        a[u * n + v] = 1.0;
        a[v * n + u] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() < 1e-11 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-13 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum AuditStrategy {
    /// All `4^n` ordered pairs of nonempty subsets; requires `n ≤ 16`.
    ExhaustiveSmall,
    /// `k` pairs with set sizes log-uniform in `[1, n/2]`, plus
    /// neighborhood pairs (the structured sets most likely to witness
    /// discrepancy).
    Sampled { k: usize, seed: u64 },
    /// Only neighborhood-derived pairs.
    Neighborhoods,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JumbledAudit {
    pub p: f64,
    pub samples: usize,
    /// Certified lower bound on any β for which the graph is
    /// (p,β)-bijumbled: the max discrepancy over *tested* pairs only.
    pub beta_empirical: f64,
    pub worst_pair: (Vec<usize>, Vec<usize>),
    /// λ of the adjacency matrix when the graph is regular.
    pub lambda: Option<f64>,
    /// Whether beta_empirical ≤ λ (expander-mixing consistency), when regular
    /// and p = d/n.
    pub lambda_consistent: Option<bool>,
}

pub fn jumbledness_audit(
    g: &Graph,
    p: f64,
    strategy: &AuditStrategy,
) -> Result<JumbledAudit, GraphError> {
    assert!(p > 0.0 && p <= 1.0, "p must lie in (0,1]");
    let n = g.n();
    let mut best = -1.0f64;
    let mut worst: (VertexSet, VertexSet) = (VertexSet::new(n), VertexSet::new(n));
    let mut samples = 0usize;
    let mut consider = |g: &Graph, a: &VertexSet, b: &VertexSet, samples: &mut usize| {
        if a.is_empty() || b.is_empty() {
            return (0.0, false);
        }
        *samples += 1;
        let e = edge_count_between(g, a, b) as f64;
        let expected = p * a.len() as f64 * b.len() as f64;
        let disc = (e - expected).abs() / (a.len() as f64 * b.len() as f64).sqrt();
        (disc, true)
    };

    match strategy {
        AuditStrategy::ExhaustiveSmall => {
            if n > MAX_EXHAUSTIVE_N {
                return Err(GraphError::TooLargeForExhaustive(n));
            }
            for am in 1u32..1 << n {
                let a = mask_to_set(n, am);
                for bm in 1u32..1 << n {
                    let b = mask_to_set(n, bm);
                    let (disc, counted) = consider(g, &a, &b, &mut samples);
                    if counted && disc > best {
                        best = disc;
                        worst = (a.clone(), b.clone());
                    }
                }
            }
        }
        AuditStrategy::Sampled { k, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for _ in 0..*k {
                let a = random_log_uniform_subset(n, &mut rng);
                let b = random_log_uniform_subset(n, &mut rng);
                let (disc, counted) = consider(g, &a, &b, &mut samples);
                if counted && disc > best {
                    best = disc;
                    worst = (a, b);
                }
            }
            if *k > 0 {
                audit_neighborhood_pairs(g, &mut consider, &mut best, &mut worst, &mut samples);
            }
        }
        AuditStrategy::Neighborhoods => {
            audit_neighborhood_pairs(g, &mut consider, &mut best, &mut worst, &mut samples);
        }
    }

    let lambda = regular_degree(g).ok().and_then(|_| spectral_lambda(g).ok());
    let lambda_consistent = lambda.map(|l| best.max(0.0) <= l + 1e-6);
    Ok(JumbledAudit {
        p,
        samples,
        beta_empirical: best.max(0.0),
        worst_pair: (worst.0.to_vec(), worst.1.to_vec()),
        lambda,
        lambda_consistent,
    })
}

fn audit_neighborhood_pairs(
    g: &Graph,
    consider: &mut impl FnMut(&Graph, &VertexSet, &VertexSet, &mut usize) -> (f64, bool),
    best: &mut f64,
    worst: &mut (VertexSet, VertexSet),
    samples: &mut usize,
) {
    let full = g.vertex_set();
    for u in 0..g.n() {
        for b in [g.neighbors(u), &full] {
            let (disc, counted) = consider(g, g.neighbors(u), b, samples);
            if counted && disc > *best {
                *best = disc;
                *worst = (g.neighbors(u).clone(), b.clone());
            }
        }
    }
}

fn mask_to_set(n: usize, mask: u32) -> VertexSet {
    VertexSet::from_iter(n, (0..n).filter(|&v| mask >> v & 1 == 1))
}

fn random_log_uniform_subset(n: usize, rng: &mut ChaCha8Rng) -> VertexSet {
    let max = (n / 2).max(1) as f64;
    let size = (max.ln() * rng.gen::<f64>()).exp().round() as usize;
    let size = size.clamp(1, n);
    let mut verts: Vec<usize> = (0..n).collect();
    verts.shuffle(rng);
    VertexSet::from_iter(n, verts.into_iter().take(size))
}
