//! K_r-diamond trees: validation, factor extraction, diamond stars,
//! scattered trees, and flexible removable-vertex selection.
//!
//! A diamond tree is an auxiliary tree T on m nodes together with a
//! bijection from nodes to "removable" host vertices and from edges to
//! interior (r−1)-cliques; each edge's clique lies in the common
//! neighborhood of its endpoints' removable vertices. Deleting any single
//! removable vertex leaves a K_r-factor of the rest.

use crate::cliques::{find_popular_clique, Clique};
use crate::graph::{Graph, VertexSet};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiamondError {
    #[error("diamond tree invariant violated: {0}")]
    Invalid(String),
    #[error("vertex {0} is not removable in this tree")]
    NotRemovable(usize),
    #[error("construction failed: {0}")]
    ConstructionFailed(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiamondTree {
    pub r: usize,
    /// Edges of the auxiliary tree on nodes `0..removable.len()`.
    pub aux_edges: Vec<(usize, usize)>,
    /// Node i's removable host vertex.
    pub removable: Vec<usize>,
    /// Edge e's interior (r−1)-clique, parallel to `aux_edges`.
    pub interior: Vec<Vec<usize>>,
}

impl DiamondTree {
    pub fn singleton(r: usize, v: usize) -> Self {
        DiamondTree { r, aux_edges: Vec::new(), removable: vec![v], interior: Vec::new() }
    }

    /// Order m = number of auxiliary-tree nodes = number of removables.
    pub fn order(&self) -> usize {
        self.removable.len()
    }

    pub fn removable_set(&self, n: usize) -> VertexSet {
        VertexSet::from_iter(n, self.removable.iter().copied())
    }

    pub fn vertices(&self) -> Vec<usize> {
        let mut out = self.removable.clone();
        for s in &self.interior {
            out.extend_from_slice(s);
        }
        out
    }

    pub fn vertex_set(&self, n: usize) -> VertexSet {
        VertexSet::from_iter(n, self.vertices())
    }

    pub fn num_vertices(&self) -> usize {
        self.removable.len() + self.interior.iter().map(|s| s.len()).sum::<usize>()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.order()];
        for &(a, b) in &self.aux_edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Aux-tree node degrees.
    pub fn node_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.order()];
        for &(a, b) in &self.aux_edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Restriction to a node subset that induces a subtree containing, in
    /// particular, every non-leaf. Nodes and edges are renumbered.
    pub fn restrict(&self, keep: &[bool]) -> Result<DiamondTree, DiamondError> {
        assert_eq!(keep.len(), self.order());
        let mut new_id = vec![usize::MAX; self.order()];
        let mut removable = Vec::new();
        for (i, &k) in keep.iter().enumerate() {
            if k {
                new_id[i] = removable.len();
                removable.push(self.removable[i]);
            }
        }
        if removable.is_empty() {
            return Err(DiamondError::Invalid("restriction would be empty".into()));
        }
        let mut aux_edges = Vec::new();
        let mut interior = Vec::new();
        for (e, &(a, b)) in self.aux_edges.iter().enumerate() {
            match (keep[a], keep[b]) {
                (true, true) => {
                    aux_edges.push((new_id[a], new_id[b]));
                    interior.push(self.interior[e].clone());
                }
                (false, false) => {}
                _ => {
                    // An edge with exactly one kept endpoint must hang off a
                    // dropped leaf; otherwise the restriction disconnects.
                }
            }
        }
        let out = DiamondTree { r: self.r, aux_edges, removable, interior };
        if out.aux_edges.len() + 1 != out.order() {
            return Err(DiamondError::Invalid("restriction is not a tree".into()));
        }
        Ok(out)
    }
}

/// Check every defining invariant; the error names the first violated clause.
pub fn validate_diamond_tree(g: &Graph, d: &DiamondTree) -> Result<(), DiamondError> {
    let m = d.order();
    let fail = |s: String| Err(DiamondError::Invalid(s));
    if m == 0 {
        return fail("tree must have at least one node".into());
    }
    if d.r < 2 {
        return fail(format!("r = {} < 2", d.r));
    }
    if d.aux_edges.len() != m - 1 {
        return fail(format!("tree on {m} nodes must have {} edges, has {}", m - 1, d.aux_edges.len()));
    }
    if d.interior.len() != d.aux_edges.len() {
        return fail("interior cliques must be in bijection with tree edges".into());
    }
    for &(a, b) in &d.aux_edges {
        if a >= m || b >= m || a == b {
            return fail(format!("bad aux edge ({a},{b})"));
        }
    }
    // connected + |E| = m−1 implies acyclic
    let adj = d.adjacency();
    let mut seen = vec![false; m];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(x) = stack.pop() {
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    if !seen.iter().all(|&s| s) {
        return fail("auxiliary tree is not connected".into());
    }
    let distinct: HashSet<_> = d.removable.iter().collect();
    if distinct.len() != m {
        return fail("removable vertices are not distinct".into());
    }
    for (v, host) in d.removable.iter().enumerate() {
        if *host >= g.n() {
            return fail(format!("removable of node {v} is outside the host ({host})"));
        }
    }
    let r_set = d.removable_set(g.n());
    let mut interior_seen = VertexSet::new(g.n());
    for (e, s) in d.interior.iter().enumerate() {
        if s.len() != d.r - 1 {
            return fail(format!("interior clique {e} has {} vertices, expected {}", s.len(), d.r - 1));
        }
        let set = VertexSet::from_iter(g.n(), s.iter().copied());
        if set.len() != d.r - 1 {
            return fail(format!("interior clique {e} repeats a vertex"));
        }
        if !g.is_clique(s) {
            return fail(format!("interior clique {e} is not a clique in the host"));
        }
        if !set.is_disjoint(&r_set) {
            return fail(format!("interior clique {e} meets the removable set"));
        }
        if !set.is_disjoint(&interior_seen) {
            return fail(format!("interior clique {e} meets another interior clique"));
        }
        interior_seen = interior_seen.union(&set);
        let (a, b) = d.aux_edges[e];
        for &x in s {
            if !g.has_edge(x, d.removable[a]) || !g.has_edge(x, d.removable[b]) {
                return fail(format!(
                    "interior clique {e} is not in the common neighborhood of its endpoints"
                ));
            }
        }
    }
    if d.num_vertices() != (m - 1) * d.r + 1 {
        return fail(format!(
            "vertex count {} != (m-1)r+1 = {}",
            d.num_vertices(),
            (m - 1) * d.r + 1
        ));
    }
    Ok(())
}

/// The K_r-factor of `V(D) ∖ {v}`: each tree edge e maps to its endpoint
/// farther from v's node, and contributes the clique `σ(e) ∪ ρ(φ(e))`.
pub fn extract_factor_without(d: &DiamondTree, v: usize) -> Result<Vec<Vec<usize>>, DiamondError> {
    let root = d
        .removable
        .iter()
        .position(|&x| x == v)
        .ok_or(DiamondError::NotRemovable(v))?;
    let adj = d.adjacency();
    // BFS depth from root; φ(e) is the deeper endpoint.
    let mut depth = vec![usize::MAX; d.order()];
    depth[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if depth[y] == usize::MAX {
                depth[y] = depth[x] + 1;
                queue.push_back(y);
            }
        }
    }
    let mut out = Vec::with_capacity(d.aux_edges.len());
    for (e, &(a, b)) in d.aux_edges.iter().enumerate() {
        let away = if depth[a] > depth[b] { a } else { b };
        let mut clique = d.interior[e].clone();
        clique.push(d.removable[away]);
        out.push(clique);
    }
    Ok(out)
}

/// Star-shaped diamond tree: center in `u0`, `delta` leaves in `u1`,
/// interior cliques a matching of (r−1)-cliques in `u2`.
///
/// Construction: gather popular (r−1)-cliques,
/// pick a center by pigeonhole over their `u0`-neighborhoods, then extend
/// greedily with distinct leaves from `u1`.
pub fn build_diamond_star(
    g: &Graph,
    r: usize,
    u0: &VertexSet,
    u1: &VertexSet,
    u2: &VertexSet,
    delta: usize,
    seed: u64,
) -> Result<DiamondTree, DiamondError> {
    assert!(u0.is_disjoint(u1) && u0.is_disjoint(u2) && u1.is_disjoint(u2), "u0,u1,u2 must be disjoint");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if delta == 0 {
        let mut verts = u0.to_vec();
        verts.shuffle(&mut rng);
        let v = *verts
            .first()
            .ok_or_else(|| DiamondError::ConstructionFailed("u0 is empty".into()))?;
        return Ok(DiamondTree::singleton(r, v));
    }
    for attempt in 0..8u64 {
        if let Ok(d) = try_diamond_star(g, r, u0, u1, u2, delta, seed.wrapping_add(attempt * 7919)) {
            return Ok(d);
        }
    }
    Err(DiamondError::ConstructionFailed(format!(
        "no diamond star with delta = {delta} found in the given sets"
    )))
}

fn try_diamond_star(
    g: &Graph,
    r: usize,
    u0: &VertexSet,
    u1: &VertexSet,
    u2: &VertexSet,
    delta: usize,
    seed: u64,
) -> Result<DiamondTree, DiamondError> {
    // Matching of popular cliques, each seeing u0 and u1.
    let want = 2 * delta + 2;
    let mut pool = u2.clone();
    let mut cliques: Vec<Clique> = Vec::new();
    for i in 0..want {
        if pool.len() < r - 1 {
            break;
        }
        match find_popular_clique(g, &pool, &[u0.clone(), u1.clone()], r - 1, 1, seed.wrapping_add(i as u64)) {
            Ok(c) => {
                for &v in c.vertices() {
                    pool.remove(v);
                }
                cliques.push(c);
            }
            Err(_) => break,
        }
    }
    if cliques.len() < delta {
        return Err(DiamondError::ConstructionFailed("too few popular cliques".into()));
    }
    // Pigeonhole a center covered by at least delta cliques.
    let mut best: Option<(usize, Vec<usize>)> = None;
    for v0 in u0.iter() {
        let covering: Vec<usize> = (0..cliques.len())
            .filter(|&i| cliques[i].vertices().iter().all(|&x| g.has_edge(x, v0)))
            .collect();
        if covering.len() >= delta && best.as_ref().map(|(_, c)| covering.len() > c.len()).unwrap_or(true) {
            best = Some((v0, covering));
        }
    }
    let (v0, covering) =
        best.ok_or_else(|| DiamondError::ConstructionFailed("no center covered by delta cliques".into()))?;
    // Distinct leaves from u1, one per chosen clique.
    let mut used_leaves = VertexSet::new(g.n());
    let mut removable = vec![v0];
    let mut aux_edges = Vec::new();
    let mut interior = Vec::new();
    for &ci in &covering {
        if removable.len() == delta + 1 {
            break;
        }
        let s = cliques[ci].vertices();
        let leaf = u1
            .iter()
            .find(|&w| !used_leaves.contains(w) && s.iter().all(|&x| g.has_edge(x, w)));
        if let Some(w) = leaf {
            used_leaves.insert(w);
            aux_edges.push((0, removable.len()));
            removable.push(w);
            interior.push(s.to_vec());
        }
    }
    if removable.len() != delta + 1 {
        return Err(DiamondError::ConstructionFailed("could not place distinct leaves".into()));
    }
    let d = DiamondTree { r, aux_edges, removable, interior };
    validate_diamond_tree(g, &d)?;
    Ok(d)
}

/// δ-scattered diamond tree of order in `[z, z+δ]` with removables in `u`
/// and interior cliques inside `w`, grown by repeatedly attaching diamond
/// stars at removable vertices; failed growths discard the oldest tree.
pub fn build_scattered_tree(
    g: &Graph,
    r: usize,
    u: &VertexSet,
    w: &VertexSet,
    z: usize,
    delta: usize,
    seed: u64,
) -> Result<DiamondTree, DiamondError> {
    assert!(u.is_disjoint(w), "u and w must be disjoint");
    assert!(z >= 2, "z must be at least 2");
    assert!(delta >= 1, "delta must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u_pool = u.clone();
    let mut w_pool = w.clone();
    let discard_budget = 24usize;
    for _ in 0..discard_budget {
        let mut roots = u_pool.to_vec();
        roots.shuffle(&mut rng);
        let Some(&root) = roots.first() else {
            return Err(DiamondError::ConstructionFailed("removable pool exhausted".into()));
        };
        u_pool.remove(root);
        match grow_tree(g, r, root, &mut u_pool, &mut w_pool, z, delta, &mut rng) {
            Ok(tree) => {
                validate_diamond_tree(g, &tree)?;
                return Ok(tree);
            }
            Err(_) => {
                // The partially grown tree is discarded wholesale; its
                // consumed vertices stay consumed.
                continue;
            }
        }
    }
    Err(DiamondError::ConstructionFailed("discard budget exhausted".into()))
}

#[allow(clippy::too_many_arguments)]
fn grow_tree(
    g: &Graph,
    r: usize,
    root: usize,
    u_pool: &mut VertexSet,
    w_pool: &mut VertexSet,
    z: usize,
    delta: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DiamondTree, DiamondError> {
    let mut tree = DiamondTree::singleton(r, root);
    // Growth points: nodes that are still leaves (or the bare root).
    while tree.order() < z {
        let deg = tree.node_degrees();
        let grow_node = (0..tree.order())
            .find(|&i| deg[i] <= 1 && (tree.order() == 1 || deg[i] == 1))
            .ok_or_else(|| DiamondError::ConstructionFailed("no growth point".into()))?;
        let v0 = tree.removable[grow_node];
        attach_star(g, &mut tree, grow_node, v0, u_pool, w_pool, delta, rng)?;
    }
    Ok(tree)
}

#[allow(clippy::too_many_arguments)]
fn attach_star(
    g: &Graph,
    tree: &mut DiamondTree,
    grow_node: usize,
    v0: usize,
    u_pool: &mut VertexSet,
    w_pool: &mut VertexSet,
    delta: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(), DiamondError> {
    let r = tree.r;
    let mut new_leaves = Vec::new();
    let mut new_cliques = Vec::new();
    let mut w_local = w_pool.clone();
    let mut u_local = u_pool.clone();
    for i in 0..delta {
        let near_v0 = match crate::graph::common_neighbors_of(g, &[v0], &w_local) {
            Ok(s) => s,
            Err(_) => return Err(DiamondError::ConstructionFailed("bad growth vertex".into())),
        };
        let s = find_popular_clique(g, &near_v0, &[u_local.clone()], r - 1, 1, rng.next_u64_compat(i))
            .map_err(|_| DiamondError::ConstructionFailed("no attachable interior clique".into()))?;
        let leaf = crate::graph::common_neighbors_of(g, s.vertices(), &u_local)
            .ok()
            .and_then(|c| c.iter().next())
            .ok_or_else(|| DiamondError::ConstructionFailed("no leaf for interior clique".into()))?;
        for &x in s.vertices() {
            w_local.remove(x);
        }
        u_local.remove(leaf);
        new_leaves.push(leaf);
        new_cliques.push(s.vertices().to_vec());
    }
    *u_pool = u_local;
    *w_pool = w_local;
    for (leaf, clique) in new_leaves.into_iter().zip(new_cliques) {
        tree.aux_edges.push((grow_node, tree.order()));
        tree.removable.push(leaf);
        tree.interior.push(clique);
    }
    Ok(())
}

trait RngExt {
    fn next_u64_compat(&mut self, salt: usize) -> u64;
}

impl RngExt for ChaCha8Rng {
    fn next_u64_compat(&mut self, salt: usize) -> u64 {
        use rand::RngCore;
        self.next_u64().wrapping_add(salt as u64)
    }
}

/// Flexible removable-vertex selection: forced removables X, optional
/// removables Y, and a recipe producing, for any Y′ ⊆ Y, a valid diamond
/// tree with removables exactly X ∪ Y′.
#[derive(Clone, Debug)]
pub struct FlexibleSelection {
    base: DiamondTree,
    x_nodes: Vec<usize>,
    y_nodes: Vec<usize>,
    pub x: VertexSet,
    pub y: VertexSet,
}

impl FlexibleSelection {
    pub fn base_tree(&self) -> &DiamondTree {
        &self.base
    }

    /// Diamond tree with removables `X ∪ Y′`, obtained by pruning the
    /// unwanted optional leaves and their interior cliques.
    pub fn build(&self, y_sub: &VertexSet) -> Result<DiamondTree, DiamondError> {
        assert!(y_sub.is_subset(&self.y), "y_sub must be a subset of Y");
        let mut keep = vec![false; self.base.order()];
        for &i in &self.x_nodes {
            keep[i] = true;
        }
        for &i in &self.y_nodes {
            if y_sub.contains(self.base.removable[i]) {
                keep[i] = true;
            }
        }
        self.base.restrict(&keep)
    }
}

/// Select disjoint X, Y ⊆ u with |X| + |Y| = z and |X| ≤ max{1, 2z/δ} such
/// that every Y′ ⊆ Y extends X to the removable set of a diamond tree with
/// interior cliques in `w`. The z ≤ δ branch is a diamond star (X = its
/// center); otherwise a δ-scattered tree (X = its non-leaves, Y the
/// lexicographically first leaves).
pub fn select_flexible_removable(
    g: &Graph,
    r: usize,
    u: &VertexSet,
    w: &VertexSet,
    z: usize,
    delta: usize,
    seed: u64,
) -> Result<FlexibleSelection, DiamondError> {
    assert!(z >= 2, "z must be at least 2");
    assert!(u.is_disjoint(w), "u and w must be disjoint");
    let tree = if z <= delta {
        // Arbitrary split of u into center and leaf pools.
        let verts = u.to_vec();
        let half = verts.len() / 2;
        let u0 = VertexSet::from_iter(g.n(), verts[..half].iter().copied());
        let u1 = VertexSet::from_iter(g.n(), verts[half..].iter().copied());
        build_diamond_star(g, r, &u0, &u1, w, z - 1, seed)?
    } else {
        build_scattered_tree(g, r, u, w, z, delta.max(1), seed)?
    };
    let deg = tree.node_degrees();
    let mut x_nodes: Vec<usize> = (0..tree.order()).filter(|&i| deg[i] > 1 || tree.order() == 1).collect();
    if x_nodes.is_empty() {
        // Order-2 path: both nodes are leaves; force the first.
        x_nodes.push(0);
    }
    let mut leaf_nodes: Vec<usize> = (0..tree.order()).filter(|&i| !x_nodes.contains(&i)).collect();
    // Lexicographically first leaves (by host vertex) fill Y up to z.
    leaf_nodes.sort_by_key(|&i| tree.removable[i]);
    if x_nodes.len() > z {
        return Err(DiamondError::ConstructionFailed(format!(
            "{} forced removables exceed the target z = {z}",
            x_nodes.len()
        )));
    }
    let y_nodes: Vec<usize> = leaf_nodes.into_iter().take(z - x_nodes.len()).collect();
    if x_nodes.len() + y_nodes.len() != z {
        return Err(DiamondError::ConstructionFailed("tree too small for the target z".into()));
    }
    let x = VertexSet::from_iter(g.n(), x_nodes.iter().map(|&i| tree.removable[i]));
    let y = VertexSet::from_iter(g.n(), y_nodes.iter().map(|&i| tree.removable[i]));
    Ok(FlexibleSelection { base: tree, x_nodes, y_nodes, x, y })
}
