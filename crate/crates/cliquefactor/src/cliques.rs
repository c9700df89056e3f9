//! Search for cliques traversing prescribed vertex sets, with forbidden-edge
//! exclusion and residual common-degree demands — the engine behind every
//! greedy construction step.

use crate::graph::{common_neighbors_of, Graph, VertexSet};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliqueError {
    #[error("no clique found within budget")]
    NotFound,
    #[error("query is malformed: {0}")]
    BadQuery(String),
}

/// Vertices pairwise adjacent in the host graph they were found in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clique {
    vertices: Vec<usize>,
}

impl Clique {
    /// Validates full adjacency on construction.
    pub fn new(g: &Graph, vertices: Vec<usize>) -> Result<Self, CliqueError> {
        let distinct: HashSet<_> = vertices.iter().collect();
        if distinct.len() != vertices.len() {
            return Err(CliqueError::BadQuery("repeated vertex in clique".into()));
        }
        if !g.is_clique(&vertices) {
            return Err(CliqueError::BadQuery("vertices are not pairwise adjacent".into()));
        }
        Ok(Clique { vertices })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn to_set(&self, n: usize) -> VertexSet {
        VertexSet::from_iter(n, self.vertices.iter().copied())
    }
}

#[derive(Clone)]
pub struct TraversalQuery {
    pub r_star: usize,
    /// The sets U_1..U_k; the clique must admit an assignment of its vertices
    /// to the first `r_star` of them.
    pub sets: Vec<VertexSet>,
    /// Edges of the host to exclude from found cliques.
    pub forbidden: HashSet<(usize, usize)>,
    /// `(set, minimum common degree)` demands on the found clique, evaluated
    /// in the host minus the forbidden edges.
    pub degree_targets: Vec<(VertexSet, usize)>,
}

impl TraversalQuery {
    pub fn traversing(r_star: usize, sets: Vec<VertexSet>) -> Self {
        TraversalQuery { r_star, sets, forbidden: HashSet::new(), degree_targets: Vec::new() }
    }

    pub fn forbid(mut self, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        for (u, v) in edges {
            self.forbidden.insert(norm(u, v));
        }
        self
    }

    fn validate(&self, g: &Graph) -> Result<(), CliqueError> {
        if self.r_star == 0 || self.r_star > self.sets.len() {
            return Err(CliqueError::BadQuery(format!(
                "need 1 <= r_star <= {} sets, got r_star = {}",
                self.sets.len(),
                self.r_star
            )));
        }
        for &(u, v) in &self.forbidden {
            if !g.has_edge(u, v) {
                return Err(CliqueError::BadQuery(format!(
                    "forbidden pair ({u},{v}) is not a host edge"
                )));
            }
        }
        Ok(())
    }
}

fn norm(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

fn allowed(g: &Graph, forbidden: &HashSet<(usize, usize)>, u: usize, v: usize) -> bool {
    g.has_edge(u, v) && !forbidden.contains(&norm(u, v))
}

/// Default node budget for the backtracking search. The search is complete
/// (NotFound is definitive) whenever the budget is not exhausted, which holds
/// for all instances small enough for oracle comparison.
pub const DEFAULT_NODE_BUDGET: usize = 200_000;

/// Find a clique of size `r_star` traversing `q.sets[0..r_star]`, avoiding
/// forbidden edges and meeting every degree target.
///
/// Search: an inductive greedy — extend
/// vertex by vertex through the sets in order, candidates shuffled under the
/// seed and sorted by common degree into the remaining sets — made complete
/// by backtracking under a node budget.
pub fn find_traversing_clique(
    g: &Graph,
    q: &TraversalQuery,
    seed: u64,
) -> Result<Clique, CliqueError> {
    find_traversing_clique_budgeted(g, q, seed, DEFAULT_NODE_BUDGET)
}

pub fn find_traversing_clique_budgeted(
    g: &Graph,
    q: &TraversalQuery,
    seed: u64,
    node_budget: usize,
) -> Result<Clique, CliqueError> {
    q.validate(g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = Vec::with_capacity(q.r_star);
    let mut budget = node_budget;
    if dfs(g, q, &mut chosen, &mut rng, &mut budget) {
        let clique = Clique::new(g, chosen)?;
        debug_assert!(traversal_assignment(g.n(), clique.vertices(), &q.sets[..q.r_star]).is_some());
        Ok(clique)
    } else {
        Err(CliqueError::NotFound)
    }
}

fn dfs(
    g: &Graph,
    q: &TraversalQuery,
    chosen: &mut Vec<usize>,
    rng: &mut ChaCha8Rng,
    budget: &mut usize,
) -> bool {
    let i = chosen.len();
    if i == q.r_star {
        return meets_degree_targets(g, q, chosen);
    }
    if *budget == 0 {
        return false;
    }
    let mut cands: Vec<usize> = q.sets[i]
        .iter()
        .filter(|&v| {
            !chosen.contains(&v) && chosen.iter().all(|&u| allowed(g, &q.forbidden, u, v))
        })
        .collect();
    cands.shuffle(rng);
    // Order by common degree into the remaining sets, descending: a
    // popularity preference only, so completeness of the backtracking is
    // untouched.
    if i + 1 < q.r_star {
        let rest: VertexSet =
            q.sets[i + 1..q.r_star].iter().fold(VertexSet::new(g.n()), |acc, s| acc.union(s));
        cands.sort_by_key(|&v| std::cmp::Reverse(g.neighbors(v).intersection_len(&rest)));
    }
    for v in cands {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        chosen.push(v);
        if dfs(g, q, chosen, rng, budget) {
            return true;
        }
        chosen.pop();
    }
    false
}

fn meets_degree_targets(g: &Graph, q: &TraversalQuery, clique: &[usize]) -> bool {
    q.degree_targets.iter().all(|(set, min_deg)| {
        let mut common = set.clone();
        for &u in clique {
            let mut filtered = g.neighbors(u).clone();
            for v in set.iter() {
                if !allowed(g, &q.forbidden, u, v) {
                    filtered.remove(v);
                }
            }
            common = common.intersect(&filtered);
        }
        common.len() >= *min_deg
    })
}

/// Assignment of clique vertices to sets (one per set), if one exists, found
/// by maximum bipartite matching via augmenting paths. Used to validate that
/// a clique traverses possibly-overlapping sets.
pub fn traversal_assignment(
    n: usize,
    clique: &[usize],
    sets: &[VertexSet],
) -> Option<Vec<usize>> {
    let _ = n;
    if clique.len() != sets.len() {
        return None;
    }
    let k = sets.len();
    // match_of_set[j] = index into clique assigned to set j
    let mut match_of_set: Vec<Option<usize>> = vec![None; k];
    let mut match_of_vertex: Vec<Option<usize>> = vec![None; k];
    for start in 0..k {
        let mut seen = vec![false; k];
        if !augment(clique, sets, start, &mut seen, &mut match_of_set, &mut match_of_vertex) {
            return None;
        }
    }
    Some(match_of_vertex.into_iter().map(|m| m.unwrap()).collect())
}

fn augment(
    clique: &[usize],
    sets: &[VertexSet],
    vi: usize,
    seen: &mut [bool],
    match_of_set: &mut [Option<usize>],
    match_of_vertex: &mut [Option<usize>],
) -> bool {
    for (j, set) in sets.iter().enumerate() {
        if !seen[j] && set.contains(clique[vi]) {
            seen[j] = true;
            if match_of_set[j].is_none()
                || augment(clique, sets, match_of_set[j].unwrap(), seen, match_of_set, match_of_vertex)
            {
                match_of_set[j] = Some(vi);
                match_of_vertex[vi] = Some(j);
                return true;
            }
        }
    }
    false
}

/// Find `S ∈ K_size(G[w0])` with `|N_{W_i}(S)| ≥ min_deg` for every target
/// `W_i` — the popular-clique search behind diamond-star construction.
pub fn find_popular_clique(
    g: &Graph,
    w0: &VertexSet,
    targets: &[VertexSet],
    size: usize,
    min_deg: usize,
    seed: u64,
) -> Result<Clique, CliqueError> {
    if targets.is_empty() {
        return Err(CliqueError::BadQuery("at least one target set required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(size);
    let mut budget = DEFAULT_NODE_BUDGET;
    if popular_dfs(g, w0, targets, size, min_deg, &mut chosen, &mut rng, &mut budget) {
        Clique::new(g, chosen)
    } else {
        Err(CliqueError::NotFound)
    }
}

#[allow(clippy::too_many_arguments)]
fn popular_dfs(
    g: &Graph,
    w0: &VertexSet,
    targets: &[VertexSet],
    size: usize,
    min_deg: usize,
    chosen: &mut Vec<usize>,
    rng: &mut ChaCha8Rng,
    budget: &mut usize,
) -> bool {
    if chosen.len() == size {
        return targets.iter().all(|t| {
            common_neighbors_of(g, chosen, t).map(|c| c.len() >= min_deg).unwrap_or(t.len() >= min_deg)
        });
    }
    if *budget == 0 {
        return false;
    }
    let mut cands: Vec<usize> = w0
        .iter()
        .filter(|&v| !chosen.contains(&v) && chosen.iter().all(|&u| g.has_edge(u, v)))
        .filter(|&v| {
            // Prune: the common degree into each target can only shrink.
            let mut probe = chosen.clone();
            probe.push(v);
            targets
                .iter()
                .all(|t| common_neighbors_of(g, &probe, t).map(|c| c.len() >= min_deg).unwrap_or(true))
        })
        .collect();
    cands.shuffle(rng);
    for v in cands {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        chosen.push(v);
        if popular_dfs(g, w0, targets, size, min_deg, chosen, rng, budget) {
            return true;
        }
        chosen.pop();
    }
    false
}
