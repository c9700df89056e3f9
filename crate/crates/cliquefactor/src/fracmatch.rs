//! Fractional matchings and covers of r-uniform hypergraphs: the ν*/τ* LP
//! with an in-repo simplex (exact rationals at small scale), fan-based
//! sufficiency checks for perfect fractional matchings, greedy PFM families
//! with pair caps, and sparsify-then-match near-perfect matchings.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use thiserror::Error;

pub type Rational = Ratio<BigInt>;

#[derive(Debug, Error)]
pub enum FracError {
    #[error("hypergraph invariant violated: {0}")]
    Invalid(String),
    #[error("parameter out of range: {0}")]
    ParameterRange(String),
    #[error("PFM family construction stalled at step {0}")]
    Stalled(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Hypergraph {
    pub n: usize,
    pub r: usize,
    pub edges: Vec<Vec<usize>>,
}

impl Hypergraph {
    pub fn new(n: usize, r: usize, mut edges: Vec<Vec<usize>>) -> Result<Self, FracError> {
        let mut seen = HashSet::new();
        for e in edges.iter_mut() {
            e.sort_unstable();
            if e.len() != r || e.windows(2).any(|w| w[0] == w[1]) {
                return Err(FracError::Invalid(format!("edge {e:?} is not an r-set")));
            }
            if e.iter().any(|&v| v >= n) {
                return Err(FracError::Invalid(format!("edge {e:?} leaves the vertex range")));
            }
            if !seen.insert(e.clone()) {
                return Err(FracError::Invalid(format!("duplicate edge {e:?}")));
            }
        }
        Ok(Hypergraph { n, r, edges })
    }

    /// Complete r-uniform hypergraph on n vertices.
    pub fn complete(n: usize, r: usize) -> Self {
        let mut edges = Vec::new();
        let mut subset: Vec<usize> = (0..r).collect();
        if n >= r {
            loop {
                edges.push(subset.clone());
                let mut i = r;
                let mut advanced = false;
                while i > 0 {
                    i -= 1;
                    if subset[i] < n - (r - i) {
                        subset[i] += 1;
                        for j in i + 1..r {
                            subset[j] = subset[j - 1] + 1;
                        }
                        advanced = true;
                        break;
                    }
                }
                if !advanced {
                    break;
                }
            }
        }
        Hypergraph { n, r, edges }
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.contains(&v)).count()
    }

    /// Induced subhypergraph on `keep`, keeping original vertex ids.
    pub fn induced(&self, keep: &[bool]) -> Hypergraph {
        let edges = self
            .edges
            .iter()
            .filter(|e| e.iter().all(|&v| keep[v]))
            .cloned()
            .collect();
        Hypergraph { n: self.n, r: self.r, edges }
    }
}

/// Scalar for the simplex: exact rationals at small scale, floats above.
pub trait LpNum: Clone + PartialOrd + std::fmt::Debug {
    fn lp_zero() -> Self;
    fn lp_one() -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn is_pos(&self) -> bool;
    fn as_f64(&self) -> f64;
}

impl LpNum for f64 {
    fn lp_zero() -> Self {
        0.0
    }
    fn lp_one() -> Self {
        1.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn is_pos(&self) -> bool {
        *self > 1e-9
    }
    fn as_f64(&self) -> f64 {
        *self
    }
}

impl LpNum for Rational {
    fn lp_zero() -> Self {
        Zero::zero()
    }
    fn lp_one() -> Self {
        One::one()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn is_pos(&self) -> bool {
        self.is_positive()
    }
    fn as_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.numer().to_f64().unwrap_or(f64::NAN) / self.denom().to_f64().unwrap_or(f64::NAN)
    }
}

/// Maximize `1·x` subject to `Ax ≤ b`, `x ≥ 0` by a dense tableau simplex
/// with Bland's rule (anti-cycling). Returns (objective, primal x, dual y).
pub fn simplex_max<T: LpNum>(a: &[Vec<T>], b: &[T], nvars: usize) -> (T, Vec<T>, Vec<T>) {
    let m = a.len();
    let width = nvars + m + 1;
    let mut tab: Vec<Vec<T>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = Vec::with_capacity(width);
        row.extend(a[i].iter().cloned());
        for j in 0..m {
            row.push(if i == j { T::lp_one() } else { T::lp_zero() });
        }
        row.push(b[i].clone());
        tab.push(row);
    }
    // Reduced-cost row: +1 on structural variables, 0 elsewhere; last entry
    // holds −objective.
    let mut cost: Vec<T> = (0..width)
        .map(|j| if j < nvars { T::lp_one() } else { T::lp_zero() })
        .collect();
    let mut basis: Vec<usize> = (nvars..nvars + m).collect();

    for _iter in 0..100_000 {
        // Bland: entering = smallest index with positive reduced cost.
        let Some(enter) = (0..nvars + m).find(|&j| cost[j].is_pos()) else {
            break;
        };
        // Ratio test; ties broken by smallest basis variable (Bland).
        let mut leave: Option<usize> = None;
        let mut best: Option<T> = None;
        for i in 0..m {
            if tab[i][enter].is_pos() {
                let ratio = tab[i][width - 1].div(&tab[i][enter]);
                let better = match &best {
                    None => true,
                    Some(cur) => {
                        ratio < *cur || (ratio == *cur && basis[i] < basis[leave.unwrap()])
                    }
                };
                if better {
                    best = Some(ratio);
                    leave = Some(i);
                }
            }
        }
        let Some(li) = leave else {
            break; // unbounded; cannot occur for matching LPs
        };
        // Pivot on (li, enter).
        let piv = tab[li][enter].clone();
        for x in tab[li].iter_mut() {
            *x = x.div(&piv);
        }
        for i in 0..m {
            if i != li && tab[i][enter].as_f64() != 0.0 {
                let factor = tab[i][enter].clone();
                for j in 0..width {
                    let delta = factor.mul(&tab[li][j]);
                    tab[i][j] = tab[i][j].sub(&delta);
                }
            }
        }
        if cost[enter].as_f64() != 0.0 {
            let factor = cost[enter].clone();
            for j in 0..width {
                let delta = factor.mul(&tab[li][j]);
                cost[j] = cost[j].sub(&delta);
            }
        }
        basis[li] = enter;
    }

    let mut x = vec![T::lp_zero(); nvars];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < nvars {
            x[bv] = tab[i][width - 1].clone();
        }
    }
    // Dual values: negated reduced costs of the slack columns.
    let y: Vec<T> = (0..m).map(|i| T::lp_zero().sub(&cost[nvars + i])).collect();
    let obj = T::lp_zero().sub(&cost[width - 1]);
    (obj, x, y)
}

#[derive(Clone, Debug)]
pub struct FractionalSolution {
    pub nu_star: f64,
    pub tau_star: f64,
    /// Exact rational optimum when solved in rational mode (N ≤ 30).
    pub nu_star_exact: Option<Rational>,
    /// Optimal fractional matching, per edge of the input hypergraph.
    pub matching: Vec<f64>,
    /// Optimal fractional cover, per vertex.
    pub cover: Vec<f64>,
    pub exact: bool,
}

impl FractionalSolution {
    /// ν* = N/r within tolerance: a perfect fractional matching exists.
    pub fn is_pfm(&self, h: &Hypergraph) -> bool {
        match &self.nu_star_exact {
            Some(q) => {
                *q == Rational::new(BigInt::from(h.n as i64), BigInt::from(h.r as i64))
            }
            None => (self.nu_star - h.n as f64 / h.r as f64).abs() < 1e-7,
        }
    }
}

/// Cutoff below which the LP runs in exact rational arithmetic.
pub const EXACT_LP_MAX_N: usize = 30;

/// Solve the fractional matching/cover LP. Asserts strong duality ν* = τ*
/// (exactly in rational mode, 1e−9 in float mode) and ν* ≤ N/r.
pub fn solve_fractional(h: &Hypergraph) -> FractionalSolution {
    assert!(h.n >= 1, "hypergraph must have vertices");
    let sol = if h.n <= EXACT_LP_MAX_N {
        let a: Vec<Vec<Rational>> = (0..h.n)
            .map(|v| {
                h.edges
                    .iter()
                    .map(|e| if e.contains(&v) { Rational::one() } else { Rational::zero() })
                    .collect()
            })
            .collect();
        let b = vec![Rational::one(); h.n];
        let (obj, x, y) = simplex_max(&a, &b, h.edges.len());
        let tau: Rational = y.iter().fold(Rational::zero(), |acc, v| acc + v);
        assert_eq!(obj, tau, "strong duality must hold exactly in rational mode");
        FractionalSolution {
            nu_star: obj.as_f64(),
            tau_star: tau.as_f64(),
            nu_star_exact: Some(obj),
            matching: x.iter().map(|q| q.as_f64()).collect(),
            cover: y.iter().map(|q| q.as_f64()).collect(),
            exact: true,
        }
    } else {
        let a: Vec<Vec<f64>> = (0..h.n)
            .map(|v| h.edges.iter().map(|e| if e.contains(&v) { 1.0 } else { 0.0 }).collect())
            .collect();
        let b = vec![1.0; h.n];
        let (obj, x, y) = simplex_max(&a, &b, h.edges.len());
        let tau: f64 = y.iter().sum();
        assert!((obj - tau).abs() < 1e-9, "strong duality violated: {obj} vs {tau}");
        FractionalSolution {
            nu_star: obj,
            tau_star: tau,
            nu_star_exact: None,
            matching: x,
            cover: y,
            exact: false,
        }
    };
    assert!(
        sol.nu_star <= h.n as f64 / h.r as f64 + 1e-9,
        "nu* must be at most N/r"
    );
    sol
}

/// Exhaustive maximum (integer) matching size, by branch and bound. Oracle
/// for the ν* ≥ ν property at small N.
pub fn max_matching_exhaustive(h: &Hypergraph) -> usize {
    fn go(h: &Hypergraph, free: &mut Vec<bool>, from: usize, best: &mut usize, cur: usize) {
        let remaining = free.iter().filter(|&&f| f).count();
        if cur + remaining / h.r <= *best {
            return;
        }
        *best = (*best).max(cur);
        for ei in from..h.edges.len() {
            if h.edges[ei].iter().all(|&v| free[v]) {
                for &v in &h.edges[ei] {
                    free[v] = false;
                }
                go(h, free, ei + 1, best, cur + 1);
                for &v in &h.edges[ei] {
                    free[v] = true;
                }
            }
        }
    }
    let mut free = vec![true; h.n];
    let mut best = 0;
    go(h, &mut free, 0, &mut best, 0);
    best
}

#[derive(Clone, Debug)]
pub enum SufficiencyMode {
    /// Every vertex v and every M-subset W of V∖{v} span an edge through v.
    VertexFans { m: usize },
    /// Fans of size M1 at every vertex plus (M1, M2)-expansion.
    TwoStage { m1: usize, m2: usize },
}

#[derive(Clone, Debug)]
pub struct SufficiencyReport {
    pub holds: bool,
    pub exhaustive: bool,
    pub counterexample: Option<String>,
    /// Range/shape caveats (e.g. M below the lower bound r).
    pub warnings: Vec<String>,
    /// When the hypothesis held on an exhaustively checked instance: did the
    /// LP confirm a perfect fractional matching (the hypothesis check's promised conclusion)?
    pub pfm_confirmed: Option<bool>,
}

pub const EXHAUSTIVE_SUFFICIENCY_MAX_N: usize = 14;
const SAMPLED_SUFFICIENCY_TRIALS: usize = 2_000;

pub fn check_pfm_sufficiency(
    h: &Hypergraph,
    mode: &SufficiencyMode,
    seed: u64,
) -> Result<SufficiencyReport, FracError> {
    let n = h.n;
    let mut warnings = Vec::new();
    let upper = n / (2 * h.r);
    match mode {
        SufficiencyMode::VertexFans { m } => {
            if *m == 0 || *m > upper {
                return Err(FracError::ParameterRange(format!(
                    "need 1 <= M <= N/(2r) = {upper}, got M = {m}"
                )));
            }
            if *m < h.r {
                warnings.push(format!("M = {m} below the lower bound r = {}", h.r));
            }
        }
        SufficiencyMode::TwoStage { m1, m2 } => {
            if *m1 == 0 || m1 > m2 || *m2 > upper {
                return Err(FracError::ParameterRange(format!(
                    "need 1 <= M1 <= M2 <= N/(2r) = {upper}, got M1 = {m1}, M2 = {m2}"
                )));
            }
            if *m1 < h.r {
                warnings.push(format!("M1 = {m1} below the lower bound r = {}", h.r));
            }
        }
    }
    let exhaustive = n <= EXHAUSTIVE_SUFFICIENCY_MAX_N;
    let counterexample = match mode {
        SufficiencyMode::VertexFans { m } => check_vertex_fans(h, *m, exhaustive, seed),
        SufficiencyMode::TwoStage { m1, m2 } => check_two_stage(h, *m1, *m2, exhaustive, seed),
    };
    let holds = counterexample.is_none();
    let pfm_confirmed = if holds && exhaustive {
        Some(solve_fractional(h).is_pfm(h))
    } else {
        None
    };
    Ok(SufficiencyReport { holds, exhaustive, counterexample, warnings, pfm_confirmed })
}

fn subsets_of_size(pool: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(pool: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..pool.len() {
            if pool.len() - i < size - cur.len() {
                break;
            }
            cur.push(pool[i]);
            go(pool, size, i + 1, cur, out);
            cur.pop();
        }
    }
    go(pool, size, 0, &mut cur, &mut out);
    out
}

fn has_edge_through(h: &Hypergraph, v: usize, w: &HashSet<usize>) -> bool {
    h.edges
        .iter()
        .any(|e| e.contains(&v) && e.iter().all(|&x| x == v || w.contains(&x)))
}

fn check_vertex_fans(h: &Hypergraph, m: usize, exhaustive: bool, seed: u64) -> Option<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in 0..h.n {
        let pool: Vec<usize> = (0..h.n).filter(|&x| x != v).collect();
        if exhaustive {
            for w in subsets_of_size(&pool, m) {
                let ws: HashSet<usize> = w.iter().copied().collect();
                if !has_edge_through(h, v, &ws) {
                    return Some(format!("vertex {v}, W = {w:?}"));
                }
            }
        } else {
            for _ in 0..SAMPLED_SUFFICIENCY_TRIALS / h.n.max(1) {
                let w = random_subset(&pool, m, &mut rng);
                let ws: HashSet<usize> = w.iter().copied().collect();
                if !has_edge_through(h, v, &ws) {
                    return Some(format!("vertex {v}, W = {w:?}"));
                }
            }
        }
    }
    None
}

/// Maximum fan focused at v: maximum matching in the link of v.
fn max_fan_size(h: &Hypergraph, v: usize) -> usize {
    let link: Vec<Vec<usize>> = h
        .edges
        .iter()
        .filter(|e| e.contains(&v))
        .map(|e| e.iter().copied().filter(|&x| x != v).collect())
        .collect();
    fn go(link: &[Vec<usize>], used: &mut HashSet<usize>, from: usize, cur: usize, best: &mut usize) {
        *best = (*best).max(cur);
        for i in from..link.len() {
            if link[i].iter().all(|x| !used.contains(x)) {
                for &x in &link[i] {
                    used.insert(x);
                }
                go(link, used, i + 1, cur + 1, best);
                for &x in &link[i] {
                    used.remove(&x);
                }
            }
        }
    }
    // Greedy lower bound suffices for large links.
    if link.len() > 64 {
        let mut used = HashSet::new();
        let mut cnt = 0;
        for e in &link {
            if e.iter().all(|x| !used.contains(x)) {
                used.extend(e.iter().copied());
                cnt += 1;
            }
        }
        return cnt;
    }
    let mut best = 0;
    go(&link, &mut HashSet::new(), 0, 0, &mut best);
    best
}

fn check_two_stage(h: &Hypergraph, m1: usize, m2: usize, exhaustive: bool, seed: u64) -> Option<String> {
    for v in 0..h.n {
        if max_fan_size(h, v) < m1 {
            return Some(format!("vertex {v} has no fan of size {m1}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..h.n).collect();
    let expansion_fails = |w0: &[usize], w1: &[usize]| -> bool {
        let s0: HashSet<usize> = w0.iter().copied().collect();
        let s1: HashSet<usize> = w1.iter().copied().collect();
        !h.edges.iter().any(|e| {
            let in0 = e.iter().filter(|x| s0.contains(x)).count();
            let in1 = e.iter().filter(|x| s1.contains(x)).count();
            in0 == 1 && in1 == h.r - 1
        })
    };
    if exhaustive {
        for w0 in subsets_of_size(&all, m1) {
            let rest: Vec<usize> = all.iter().copied().filter(|x| !w0.contains(x)).collect();
            for w1 in subsets_of_size(&rest, m2) {
                if expansion_fails(&w0, &w1) {
                    return Some(format!("W0 = {w0:?}, W1 = {w1:?}"));
                }
            }
        }
    } else {
        for _ in 0..SAMPLED_SUFFICIENCY_TRIALS {
            let w0 = random_subset(&all, m1, &mut rng);
            let rest: Vec<usize> = all.iter().copied().filter(|x| !w0.contains(x)).collect();
            let w1 = random_subset(&rest, m2, &mut rng);
            if expansion_fails(&w0, &w1) {
                return Some(format!("W0 = {w0:?}, W1 = {w1:?}"));
            }
        }
    }
    None
}

fn random_subset(pool: &[usize], size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut v = pool.to_vec();
    v.shuffle(rng);
    v.truncate(size);
    v
}

/// Family of perfect fractional matchings with bounded pair loads.
#[derive(Clone, Debug)]
pub struct PfmFamily {
    /// Edge weights per member, aligned with the hypergraph's edge list.
    pub members: Vec<Vec<f64>>,
    /// Accumulated Σ_i Σ_{e ⊇ {u,v}} f_i(e) per vertex pair.
    pub pair_load: HashMap<(usize, usize), f64>,
}

impl PfmFamily {
    pub fn max_pair_load(&self) -> f64 {
        self.pair_load.values().fold(0.0f64, |a, &b| a.max(b))
    }
}

/// Build `t` perfect fractional matchings one at a time: after each member,
/// vertex pairs whose step weight reaches `theta` join the forbidden-pair
/// graph J, and later members solve the LP on H minus all edges through J.
/// The accumulated pair load stays ≤ 2 by the greedy-family argument.
pub fn greedy_pfm_family(h: &Hypergraph, t: usize, theta: f64) -> Result<PfmFamily, FracError> {
    assert!(t >= 1, "need t >= 1");
    assert!(theta > 0.0, "theta must be positive");
    let mut forbidden: HashSet<(usize, usize)> = HashSet::new();
    let mut members = Vec::new();
    let mut pair_load: HashMap<(usize, usize), f64> = HashMap::new();
    for step in 1..=t {
        let allowed: Vec<usize> = (0..h.edges.len())
            .filter(|&ei| {
                let e = &h.edges[ei];
                pairs_of(e).all(|p| !forbidden.contains(&p))
            })
            .collect();
        let sub = Hypergraph {
            n: h.n,
            r: h.r,
            edges: allowed.iter().map(|&ei| h.edges[ei].clone()).collect(),
        };
        let sol = solve_fractional(&sub);
        if !sol.is_pfm(&sub) {
            return Err(FracError::Stalled(step));
        }
        let mut weights = vec![0.0; h.edges.len()];
        for (pos, &ei) in allowed.iter().enumerate() {
            weights[ei] = sol.matching[pos];
        }
        // Step pair weights; threshold crossings join J.
        let mut step_pairs: HashMap<(usize, usize), f64> = HashMap::new();
        for (ei, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                for p in pairs_of(&h.edges[ei]) {
                    *step_pairs.entry(p).or_insert(0.0) += w;
                }
            }
        }
        for (p, w) in step_pairs {
            *pair_load.entry(p).or_insert(0.0) += w;
            if w >= theta {
                forbidden.insert(p);
            }
        }
        members.push(weights);
    }
    Ok(PfmFamily { members, pair_load })
}

fn pairs_of(e: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..e.len()).flat_map(move |i| {
        (i + 1..e.len()).map(move |j| {
            if e[i] < e[j] {
                (e[i], e[j])
            } else {
                (e[j], e[i])
            }
        })
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SparsifiedReport {
    /// Edge indices kept by the p_e coin flips.
    pub kept: Vec<usize>,
    /// Greedy maximal matching on the kept edges (edge indices into the
    /// original hypergraph).
    pub matching: Vec<usize>,
    pub uncovered: usize,
    /// The keeping probabilities p_e = Σ_i f_i(e)/2 (clamped to 1).
    pub p_e: Vec<f64>,
    /// Concentration diagnostics (reported, not asserted: small N breaks
    /// Chernoff-style bounds).
    pub mean_degree: f64,
    pub max_degree: usize,
    pub max_codegree: usize,
}

/// Sample the sparsified hypergraph H′ with p_e = Σ_i f_i(e)/2 and compute a
/// greedy maximal matching preferring low-degree vertices.
pub fn sparsified_almost_matching(h: &Hypergraph, family: &PfmFamily, seed: u64) -> SparsifiedReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_e: Vec<f64> = (0..h.edges.len())
        .map(|ei| {
            let s: f64 = family.members.iter().map(|f| f[ei]).sum();
            (s / 2.0).min(1.0)
        })
        .collect();
    let kept: Vec<usize> = (0..h.edges.len()).filter(|&ei| rng.gen::<f64>() < p_e[ei]).collect();
    let kept_edges: Vec<Vec<usize>> = kept.iter().map(|&ei| h.edges[ei].clone()).collect();
    let local = crate::orchard::greedy_hypergraph_matching(h.n, &kept_edges);
    let matching: Vec<usize> = local.iter().map(|&li| kept[li]).collect();
    let uncovered = h.n - matching.len() * h.r;
    let mut deg = vec![0usize; h.n];
    for e in &kept_edges {
        for &v in e {
            deg[v] += 1;
        }
    }
    let mut codeg: HashMap<(usize, usize), usize> = HashMap::new();
    for e in &kept_edges {
        for p in pairs_of(e) {
            *codeg.entry(p).or_insert(0) += 1;
        }
    }
    SparsifiedReport {
        kept,
        matching,
        uncovered,
        p_e,
        mean_degree: deg.iter().sum::<usize>() as f64 / h.n.max(1) as f64,
        max_degree: deg.iter().copied().max().unwrap_or(0),
        max_codegree: codeg.values().copied().max().unwrap_or(0),
    }
}
