//! Orchards of vertex-disjoint diamond trees, their K_r-hypergraphs,
//! matching-to-factor conversion, the two-round orchard-absorbs-orchard
//! algorithm, and sampled shrinkability testing.

use crate::cliques::{find_traversing_clique_budgeted, TraversalQuery};
use crate::diamond::{extract_factor_without, validate_diamond_tree, DiamondTree};
use crate::graph::{Graph, VertexSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OrchardError {
    #[error("orchard invariant violated: {0}")]
    Invalid(String),
    #[error("not a matching: tree {0} used twice")]
    NotAMatching(usize),
    #[error("absorption failed in round {round} serving index {index}")]
    Failed { round: usize, index: usize },
}

/// Ordered collection of pairwise vertex-disjoint diamond trees.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Orchard {
    pub trees: Vec<DiamondTree>,
}

impl Orchard {
    pub fn new(trees: Vec<DiamondTree>) -> Self {
        Orchard { trees }
    }

    /// Size: number of trees.
    pub fn k(&self) -> usize {
        self.trees.len()
    }

    /// Order: minimum tree order. Tree orders may range up to 2m; the
    /// stored value is the minimum (documented ≤2× slack).
    pub fn m(&self) -> usize {
        self.trees.iter().map(|t| t.order()).min().unwrap_or(0)
    }

    pub fn r(&self) -> usize {
        self.trees.first().map(|t| t.r).unwrap_or(0)
    }

    pub fn vertex_set(&self, n: usize) -> VertexSet {
        self.trees.iter().fold(VertexSet::new(n), |acc, t| acc.union(&t.vertex_set(n)))
    }

    pub fn suborchard(&self, indices: &[usize]) -> Orchard {
        Orchard::new(indices.iter().map(|&i| self.trees[i].clone()).collect())
    }

    pub fn validate(&self, g: &Graph) -> Result<(), OrchardError> {
        let mut seen = VertexSet::new(g.n());
        for (i, t) in self.trees.iter().enumerate() {
            validate_diamond_tree(g, t).map_err(|e| OrchardError::Invalid(format!("tree {i}: {e}")))?;
            let vs = t.vertex_set(g.n());
            if !vs.is_disjoint(&seen) {
                return Err(OrchardError::Invalid(format!("tree {i} overlaps an earlier tree")));
            }
            seen = seen.union(&vs);
        }
        let m = self.m();
        if let Some((i, t)) = self.trees.iter().enumerate().find(|(_, t)| t.order() > 2 * m) {
            return Err(OrchardError::Invalid(format!(
                "tree {i} has order {} > 2m = {}",
                t.order(),
                2 * m
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.trees).unwrap()
    }
}

/// r-uniform hypergraph on an orchard's trees: an edge is an r-subset of
/// tree indices whose removable sets are traversed by a host K_r; every
/// listed edge carries a validated witness clique.
#[derive(Clone, Debug)]
pub struct KrHypergraph {
    pub k: usize,
    pub r: usize,
    /// Sorted r-subsets of tree indices.
    pub edges: Vec<Vec<usize>>,
    /// Edge → witness clique, parallel to the edge's indices
    /// (witness[i] is a removable vertex of tree edges[e][i]).
    pub witness: HashMap<Vec<usize>, Vec<usize>>,
}

#[derive(Clone, Debug)]
pub enum HypergraphMode {
    /// All r-subsets, all removable-tuple assignments (complete; no
    /// one-sided error).
    Exhaustive,
    /// Probe each r-subset with a budgeted traversing-clique search; may
    /// under-report edges (one-sided error).
    Sampled { budget: usize, seed: u64 },
}

pub fn build_kr_hypergraph(g: &Graph, o: &Orchard, mode: &HypergraphMode) -> KrHypergraph {
    let r = o.r();
    let k = o.k();
    let mut edges = Vec::new();
    let mut witness = HashMap::new();
    if k < r || r == 0 {
        return KrHypergraph { k, r, edges, witness };
    }
    let removable_sets: Vec<VertexSet> = o.trees.iter().map(|t| t.removable_set(g.n())).collect();
    let mut subset: Vec<usize> = (0..r).collect();
    loop {
        let found = match mode {
            HypergraphMode::Exhaustive => exhaustive_traversal(g, o, &subset),
            HypergraphMode::Sampled { budget, seed } => {
                let sets: Vec<VertexSet> = subset.iter().map(|&i| removable_sets[i].clone()).collect();
                let q = TraversalQuery::traversing(r, sets);
                let salt = subset.iter().fold(0u64, |a, &i| a.wrapping_mul(131).wrapping_add(i as u64));
                find_traversing_clique_budgeted(g, &q, seed.wrapping_add(salt), *budget)
                    .ok()
                    .map(|c| c.vertices().to_vec())
            }
        };
        if let Some(w) = found {
            debug_assert!(g.is_clique(&w));
            edges.push(subset.clone());
            witness.insert(subset.clone(), w);
        }
        if !next_combination(&mut subset, k) {
            break;
        }
    }
    KrHypergraph { k, r, edges, witness }
}

/// Advance `subset` to the next r-combination of `0..k`; false at the end.
fn next_combination(subset: &mut [usize], k: usize) -> bool {
    let r = subset.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if subset[i] < k - (r - i) {
            subset[i] += 1;
            for j in i + 1..r {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn exhaustive_traversal(g: &Graph, o: &Orchard, subset: &[usize]) -> Option<Vec<usize>> {
    let mut chosen = Vec::with_capacity(subset.len());
    fn dfs(g: &Graph, o: &Orchard, subset: &[usize], chosen: &mut Vec<usize>) -> bool {
        if chosen.len() == subset.len() {
            return true;
        }
        let ti = subset[chosen.len()];
        for &v in &o.trees[ti].removable {
            if chosen.iter().all(|&u| g.has_edge(u, v)) {
                chosen.push(v);
                if dfs(g, o, subset, chosen) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
    dfs(g, o, subset, &mut chosen).then_some(chosen)
}

/// Turn a hypergraph matching into host r-cliques: per hyperedge, the
/// witness clique plus the K_r-factor of each matched tree minus its
/// witness vertex. A perfect matching yields a K_r-factor of V(O).
pub fn matching_to_factor(
    g: &Graph,
    o: &Orchard,
    matching: &[(Vec<usize>, Vec<usize>)],
) -> Result<Vec<Vec<usize>>, OrchardError> {
    let mut used = vec![false; o.k()];
    let mut out = Vec::new();
    for (tree_ids, wit) in matching {
        assert_eq!(tree_ids.len(), wit.len(), "witness must be parallel to the edge");
        for (&ti, &v) in tree_ids.iter().zip(wit) {
            if used[ti] {
                return Err(OrchardError::NotAMatching(ti));
            }
            used[ti] = true;
            let cliques = extract_factor_without(&o.trees[ti], v)
                .map_err(|e| OrchardError::Invalid(format!("tree {ti}: {e}")))?;
            out.extend(cliques);
        }
        if !g.is_clique(wit) {
            return Err(OrchardError::Invalid("witness is not a clique".into()));
        }
        out.push(wit.clone());
    }
    Ok(out)
}

#[derive(Clone, Debug, Default)]
pub struct AbsorbParams {
    /// Density estimate used for the bad-set threshold p|Y_j|/2; defaults
    /// to 2|E|/n².
    pub p: Option<f64>,
    /// Per-service search budget.
    pub budget: usize,
}

#[derive(Clone, Debug)]
pub struct AbsorptionResult {
    /// Indices (into `big.trees`) of the ((r−1)·k)-suborchard consumed.
    pub used: Vec<usize>,
    /// K_r-factor of V(small) ∪ V(used).
    pub factor: Vec<Vec<usize>>,
    /// Vertices the absorbed orchard had to avoid (low degree into some
    /// suborchard's removable union).
    pub bad_set: VertexSet,
    /// Size/order constraint checks, reported not enforced.
    pub warnings: Vec<String>,
}

/// The absorption bad set for a given big orchard: vertices
/// with degree < p|Y_j|/2 into the removable union Y_j of some suborchard
/// of the round-robin partition into 2(r−1) parts.
pub fn absorption_bad_set(g: &Graph, big: &Orchard, p: f64) -> VertexSet {
    let parts = round_robin_partition(big.k(), 2 * (big.r() - 1));
    let mut bad = VertexSet::new(g.n());
    for part in &parts {
        let yj: VertexSet = part
            .iter()
            .fold(VertexSet::new(g.n()), |acc, &i| acc.union(&big.trees[i].removable_set(g.n())));
        let threshold = p * yj.len() as f64 / 2.0;
        for v in 0..g.n() {
            if (g.neighbors(v).intersection_len(&yj) as f64) < threshold {
                bad.insert(v);
            }
        }
    }
    bad
}

fn round_robin_partition(k: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); parts];
    for i in 0..k {
        out[i % parts].push(i);
    }
    out
}

/// Two-round absorption of `small` into `big`: round one serves each small
/// tree from suborchards O_1..O_{r−1}, unserved indices retry in round two
/// against O_r..O_{2(r−1)}; each service is a traversing K_r over the small
/// tree's removables and r−1 removable sets of unused big trees, assembled
/// into per-tuple factors.
pub fn absorb_orchard(
    g: &Graph,
    big: &Orchard,
    small: &Orchard,
    params: &AbsorbParams,
    seed: u64,
) -> Result<AbsorptionResult, OrchardError> {
    let r = big.r();
    assert!(r >= 2, "absorption needs r >= 2");
    let p = params.p.unwrap_or_else(|| g.density());
    let budget = if params.budget == 0 { 50_000 } else { params.budget };
    let bad_set = absorption_bad_set(g, big, p);
    let mut warnings = Vec::new();

    let (k, m) = (small.k(), small.m());
    let (kk, mm) = (big.k(), big.m());
    if k * 8 * r > kk {
        warnings.push(format!("size constraint k <= K/(8r) violated: k = {k}, K = {kk}"));
    }
    if k > 0 && k * mm > m * kk {
        warnings.push(format!("order constraint kM <= mK violated: kM = {}, mK = {}", k * mm, m * kk));
    }
    let small_vs = small.vertex_set(g.n());
    let big_vs = big.vertex_set(g.n());
    if !small_vs.is_disjoint(&big_vs) {
        return Err(OrchardError::Invalid("small orchard overlaps big orchard".into()));
    }
    if !small_vs.is_disjoint(&bad_set) {
        warnings.push("small orchard intersects the bad set".into());
    }

    // Seeded partition: which trees share a part is arbitrary, and small
    // orchards fail or succeed on exactly that choice, so reseeding must
    // reshuffle it.
    let parts = {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..kk).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_f491_4f6c_dd1d)));
        round_robin_partition(kk, 2 * (r - 1))
            .into_iter()
            .map(|part| part.into_iter().map(|i| order[i]).collect())
            .collect::<Vec<Vec<usize>>>()
    };
    let mut tree_used = vec![false; kk];
    let mut services: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new(); // (small idx, clique, big trees)
    let mut unserved: Vec<usize> = (0..k).collect();

    for (round, window) in [(1usize, 0..r - 1), (2usize, r - 1..2 * (r - 1))] {
        let mut still = Vec::new();
        for &i in &unserved {
            let mut sets = vec![small.trees[i].removable_set(g.n())];
            for j in window.clone() {
                let yj = parts[j]
                    .iter()
                    .filter(|&&t| !tree_used[t])
                    .fold(VertexSet::new(g.n()), |acc, &t| {
                        acc.union(&big.trees[t].removable_set(g.n()))
                    });
                sets.push(yj);
            }
            let q = TraversalQuery::traversing(r, sets);
            match find_traversing_clique_budgeted(g, &q, seed.wrapping_add((round * 1000 + i) as u64), budget)
            {
                Ok(clique) => {
                    let verts = clique.vertices().to_vec();
                    // Vertex 0 sits in the small tree; each later vertex in
                    // an unused big tree of its window part.
                    let mut big_trees = Vec::new();
                    for (pos, j) in window.clone().enumerate() {
                        let v = verts[pos + 1];
                        let t = parts[j]
                            .iter()
                            .copied()
                            .find(|&t| !tree_used[t] && big.trees[t].removable.contains(&v))
                            .expect("witness vertex must come from an unused tree");
                        tree_used[t] = true;
                        big_trees.push(t);
                    }
                    services.push((i, verts, big_trees));
                }
                Err(_) => still.push(i),
            }
        }
        unserved = still;
        if unserved.is_empty() {
            break;
        }
        if round == 2 {
            return Err(OrchardError::Failed { round, index: unserved[0] });
        }
    }

    let mut factor = Vec::new();
    let mut used = Vec::new();
    for (i, clique, big_trees) in services {
        factor.push(clique.clone());
        factor.extend(
            extract_factor_without(&small.trees[i], clique[0])
                .map_err(|e| OrchardError::Invalid(e.to_string()))?,
        );
        for (pos, &t) in big_trees.iter().enumerate() {
            factor.extend(
                extract_factor_without(&big.trees[t], clique[pos + 1])
                    .map_err(|e| OrchardError::Invalid(e.to_string()))?,
            );
            used.push(t);
        }
    }
    used.sort_unstable();
    Ok(AbsorptionResult { used, factor, bad_set, warnings })
}

/// Greedy maximal matching on an r-uniform hypergraph over `0..k`,
/// preferring edges through low-degree vertices. Returns chosen edge
/// indices.
pub fn greedy_hypergraph_matching(k: usize, edges: &[Vec<usize>]) -> Vec<usize> {
    let mut covered = vec![false; k];
    let mut alive: Vec<usize> = (0..edges.len()).collect();
    let mut chosen = Vec::new();
    loop {
        alive.retain(|&e| edges[e].iter().all(|&v| !covered[v]));
        if alive.is_empty() {
            break;
        }
        let mut deg = vec![0usize; k];
        for &e in &alive {
            for &v in &edges[e] {
                deg[v] += 1;
            }
        }
        // Lowest-degree covered-first: the scarcest vertex picks the edge
        // whose other vertices are also scarce.
        let (&best, _) = alive
            .iter()
            .map(|e| (e, edges[*e].iter().map(|&v| deg[v]).min().unwrap()))
            .min_by_key(|&(e, min_deg)| (min_deg, edges[*e].iter().map(|&v| deg[v]).sum::<usize>(), *e))
            .map(|(e, d)| (e, d))
            .unwrap();
        for &v in &edges[best] {
            covered[v] = true;
        }
        chosen.push(best);
    }
    chosen
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShrinkTrial {
    pub q_removed: Vec<usize>,
    pub uncovered: usize,
    pub pass: bool,
}

/// Report of a *sampled* check of the universally quantified shrinkability
/// property; `sampled` is always true and recorded to make that explicit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShrinkReport {
    pub gamma: f64,
    pub threshold: usize,
    pub trials: Vec<ShrinkTrial>,
    pub all_pass: bool,
    pub sampled: bool,
}

/// For `trials` random Q′ ⊆ q, build H(O∖Q′) and match greedily; each trial
/// passes when the number of unmatched trees is at most ⌈k^{1−γ}⌉.
pub fn test_shrinkability(
    g: &Graph,
    o: &Orchard,
    q: &[usize],
    gamma: f64,
    trials: usize,
    seed: u64,
) -> ShrinkReport {
    assert!(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0,1)");
    let k = o.k();
    let threshold = (k as f64).powf(1.0 - gamma).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for t in 0..trials.max(1) {
        let q_removed: Vec<usize> =
            q.iter().copied().filter(|_| rng.gen::<bool>()).collect();
        let kept: Vec<usize> = (0..k).filter(|i| !q_removed.contains(i)).collect();
        let sub = o.suborchard(&kept);
        let h = build_kr_hypergraph(
            g,
            &sub,
            &HypergraphMode::Sampled { budget: 20_000, seed: seed.wrapping_add(t as u64) },
        );
        let matching = greedy_hypergraph_matching(sub.k(), &h.edges);
        let covered: usize = matching.len() * o.r();
        let uncovered = sub.k() - covered;
        out.push(ShrinkTrial { q_removed, uncovered, pass: uncovered <= threshold });
    }
    let all_pass = out.iter().all(|t| t.pass);
    ShrinkReport { gamma, threshold, trials: out, all_pass, sampled: true }
}
