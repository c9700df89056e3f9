//! Bipartite flexibility templates, absorbing structures realizing them in a
//! host graph ((r−1)-cliques on the I-side, diamond trees on the J-side), and
//! the absorption step turning an admissible leftover orchard plus the
//! structure into a verified K_r-factor.

use crate::cliques::{find_popular_clique, find_traversing_clique_budgeted, TraversalQuery};
use crate::diamond::{extract_factor_without, validate_diamond_tree, DiamondTree};
use crate::graph::{common_neighbors_of, Graph, VertexSet};
use crate::orchard::{absorb_orchard, AbsorbParams, Orchard};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AbsorberError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("template search exhausted its budget")]
    SearchExhausted,
    #[error("absorbing-structure stage {stage} failed: {msg}")]
    StageFailed { stage: u8, msg: String },
    #[error("total vertex count {total} is not divisible by r = {r}")]
    DivisibilityViolation { total: usize, r: usize },
    #[error("absorption failed at {stage}: {msg}")]
    Failed { stage: &'static str, msg: String },
}

/// Bipartite graph on 7t vertices: I (3t) versus J = J1 ∪ J2 (2t + 2t), such
/// that I matches perfectly into J∖J̄ for every t-subset J̄ ⊆ J2. J-side
/// indices 0..2t are J1, 2t..4t are the flexible half J2.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Template {
    pub t: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Template {
    pub fn i_count(&self) -> usize {
        3 * self.t
    }

    pub fn j_count(&self) -> usize {
        4 * self.t
    }

    pub fn is_flexible(&self, j: usize) -> bool {
        j >= 2 * self.t
    }

    pub fn neighbors_of_i(&self, i: usize) -> Vec<usize> {
        self.edges.iter().filter(|&&(a, _)| a == i).map(|&(_, j)| j).collect()
    }

    pub fn neighbors_of_j(&self, j: usize) -> Vec<usize> {
        self.edges.iter().filter(|&&(_, b)| b == j).map(|&(i, _)| i).collect()
    }

    pub fn max_degree(&self) -> usize {
        let mut di = vec![0usize; self.i_count()];
        let mut dj = vec![0usize; self.j_count()];
        for &(i, j) in &self.edges {
            di[i] += 1;
            dj[j] += 1;
        }
        di.into_iter().chain(dj).max().unwrap_or(0)
    }

    fn validate(&self) -> Result<(), AbsorberError> {
        let mut seen = HashSet::new();
        for &(i, j) in &self.edges {
            if i >= self.i_count() || j >= self.j_count() {
                return Err(AbsorberError::Invalid(format!("edge ({i},{j}) out of range")));
            }
            if !seen.insert((i, j)) {
                return Err(AbsorberError::Invalid(format!("duplicate edge ({i},{j})")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "t": self.t,
            "edges": self.edges.iter().map(|&(i, j)| vec![i, j]).collect::<Vec<_>>(),
        })
    }
}

#[derive(Clone, Debug)]
pub enum VerifyMode {
    Exhaustive,
    Sampled { k: usize, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct TemplateReport {
    pub ok: bool,
    /// A size-t subset of J2 whose removal kills the perfect matching.
    pub failing: Option<Vec<usize>>,
    pub checked: usize,
    pub exhaustive: bool,
}

/// For each tested J̄ ⊆ J2 of size t, demand a perfect matching between I
/// and J∖J̄ (both sides of size 3t), by augmenting paths.
pub fn verify_template(tpl: &Template, mode: &VerifyMode) -> Result<TemplateReport, AbsorberError> {
    tpl.validate()?;
    let t = tpl.t;
    let adj: Vec<Vec<usize>> = (0..tpl.i_count()).map(|i| tpl.neighbors_of_i(i)).collect();
    let flexible: Vec<usize> = (2 * t..4 * t).collect();
    let test = |jbar: &[usize]| -> bool {
        let mut allowed = vec![true; tpl.j_count()];
        for &j in jbar {
            allowed[j] = false;
        }
        bipartite_matching(&adj, &allowed).len() == tpl.i_count()
    };
    let mut checked = 0;
    match mode {
        VerifyMode::Exhaustive => {
            for jbar in combinations(&flexible, t) {
                checked += 1;
                if !test(&jbar) {
                    return Ok(TemplateReport { ok: false, failing: Some(jbar), checked, exhaustive: true });
                }
            }
            Ok(TemplateReport { ok: true, failing: None, checked, exhaustive: true })
        }
        VerifyMode::Sampled { k, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for _ in 0..*k {
                let mut pick = flexible.clone();
                pick.shuffle(&mut rng);
                pick.truncate(t);
                pick.sort_unstable();
                checked += 1;
                if !test(&pick) {
                    return Ok(TemplateReport { ok: false, failing: Some(pick), checked, exhaustive: false });
                }
            }
            Ok(TemplateReport { ok: true, failing: None, checked, exhaustive: false })
        }
    }
}

fn combinations(pool: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(pool: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..pool.len() {
            cur.push(pool[i]);
            go(pool, size, i + 1, cur, out);
            cur.pop();
        }
    }
    go(pool, size, 0, &mut cur, &mut out);
    out
}

/// Maximum bipartite matching (Kuhn's augmenting paths). Returns (i, j)
/// pairs.
fn bipartite_matching(adj: &[Vec<usize>], allowed: &[bool]) -> Vec<(usize, usize)> {
    let jn = allowed.len();
    let mut match_j: Vec<Option<usize>> = vec![None; jn];
    fn try_augment(
        i: usize,
        adj: &[Vec<usize>],
        allowed: &[bool],
        seen: &mut [bool],
        match_j: &mut [Option<usize>],
    ) -> bool {
        for &j in &adj[i] {
            if allowed[j] && !seen[j] {
                seen[j] = true;
                if match_j[j].is_none()
                    || try_augment(match_j[j].unwrap(), adj, allowed, seen, match_j)
                {
                    match_j[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    for i in 0..adj.len() {
        let mut seen = vec![false; jn];
        try_augment(i, adj, allowed, &mut seen, &mut match_j);
    }
    (0..jn).filter_map(|j| match_j[j].map(|i| (i, j))).collect()
}

pub const TEMPLATE_MAX_DEGREE: usize = 40;
pub const TEMPLATE_EXHAUSTIVE_MAX_T: usize = 6;
const TEMPLATE_ATTEMPTS: usize = 4_000;
const TEMPLATE_SAMPLED_SUBSETS: usize = 1_000;

/// Search-and-verify template construction: sample degree-capped bipartite
/// graphs and keep the first that verifies (exhaustively for t ≤ 6, over 10³
/// sampled subsets above). For t = 2 the seeds are enumerated
/// deterministically from 0, a brute-force scan of the sample space.
pub fn build_template(t: usize, max_deg: usize, seed: u64) -> Result<Template, AbsorberError> {
    if t < 2 {
        return Err(AbsorberError::Invalid(format!("flexibility t must be at least 2, got {t}")));
    }
    if max_deg < 2 {
        return Err(AbsorberError::Invalid("degree cap below 2 cannot verify".into()));
    }
    let i_deg = max_deg.min(t + 2);
    for attempt in 0..TEMPLATE_ATTEMPTS {
        let s = if t == 2 { attempt as u64 } else { seed.wrapping_add(attempt as u64) };
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let mut dj = vec![0usize; 4 * t];
        let mut edges = Vec::new();
        let mut feasible = true;
        for i in 0..3 * t {
            let mut open: Vec<usize> = (0..4 * t).filter(|&j| dj[j] < max_deg).collect();
            open.shuffle(&mut rng);
            if open.len() < i_deg {
                feasible = false;
                break;
            }
            for &j in open.iter().take(i_deg) {
                dj[j] += 1;
                edges.push((i, j));
            }
        }
        if !feasible {
            continue;
        }
        let tpl = Template { t, edges };
        let mode = if t <= TEMPLATE_EXHAUSTIVE_MAX_T {
            VerifyMode::Exhaustive
        } else {
            VerifyMode::Sampled { k: TEMPLATE_SAMPLED_SUBSETS, seed: s }
        };
        if verify_template(&tpl, &mode)?.ok && tpl.max_degree() <= max_deg {
            return Ok(tpl);
        }
    }
    Err(AbsorberError::SearchExhausted)
}

#[derive(Clone, Debug)]
pub struct IntersectCaps {
    /// Upper bound on the order of the returned tree.
    pub order_cap: usize,
    /// Scatter degree of the underlying flexible selection.
    pub delta: usize,
}

#[derive(Clone, Debug)]
pub struct HitReport {
    /// Indices of targets met by the removable set.
    pub hit_targets: Vec<usize>,
    /// |R ∩ U_i| per target.
    pub per_target: Vec<usize>,
    /// ⌈ℓ/(4r)⌉, the guaranteed hit count.
    pub required: usize,
}

/// Diamond tree whose removable set meets at least ⌈ℓ/(4r)⌉ of the ℓ given
/// targets: a flexible selection over their union, with Y pruned to a
/// minimal Y′ preserving every target that X ∪ Y already hits.
pub fn build_intersecting_tree(
    g: &Graph,
    r: usize,
    w: &VertexSet,
    targets: &[VertexSet],
    caps: &IntersectCaps,
    seed: u64,
) -> Result<(DiamondTree, HitReport), AbsorberError> {
    if targets.is_empty() {
        return Err(AbsorberError::Invalid("no targets to intersect".into()));
    }
    for (i, a) in targets.iter().enumerate() {
        if !a.is_disjoint(w) {
            return Err(AbsorberError::Invalid(format!("target {i} overlaps the interior pool")));
        }
        for b in targets.iter().skip(i + 1) {
            if !a.is_disjoint(b) {
                return Err(AbsorberError::Invalid(format!("target {i} overlaps a later target")));
            }
        }
    }
    let u: VertexSet = targets.iter().fold(VertexSet::new(g.n()), |acc, t| acc.union(t));
    let z = caps.order_cap.min(u.len() / 2).max(2);
    let sel = crate::diamond::select_flexible_removable(g, r, &u, w, z, caps.delta.max(1), seed)
        .map_err(|e| AbsorberError::StageFailed { stage: 1, msg: e.to_string() })?;
    // Minimal Y′: for each target hit by X ∪ Y but not by X alone, keep one
    // witness.
    let mut y_keep = VertexSet::new(g.n());
    for tgt in targets {
        if sel.x.intersection_len(tgt) > 0 {
            continue;
        }
        if let Some(wit) = sel.y.iter().find(|&v| tgt.contains(v)) {
            y_keep.insert(wit);
        }
    }
    let tree = sel
        .build(&y_keep)
        .map_err(|e| AbsorberError::StageFailed { stage: 1, msg: e.to_string() })?;
    let removables = tree.removable_set(g.n());
    let per_target: Vec<usize> = targets.iter().map(|t| removables.intersection_len(t)).collect();
    let hit_targets: Vec<usize> =
        (0..targets.len()).filter(|&i| per_target[i] > 0).collect();
    let required = targets.len().div_ceil(4 * r);
    if hit_targets.len() < required {
        return Err(AbsorberError::StageFailed {
            stage: 1,
            msg: format!("hit only {} of {} targets (need {required})", hit_targets.len(), targets.len()),
        });
    }
    if tree.order() > caps.order_cap {
        return Err(AbsorberError::StageFailed {
            stage: 1,
            msg: format!("tree order {} exceeds cap {}", tree.order(), caps.order_cap),
        });
    }
    Ok((tree, HitReport { hit_targets, per_target, required }))
}

/// A template realized in the host: (r−1)-cliques S_i on the I-side, a
/// (4t, M)-orchard D_j on the J-side, and for every template edge ij a
/// removable vertex of D_j completing S_i to an r-clique.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AbsorbingStructure {
    pub template: Template,
    /// The labelled matching {S_i}: clique i belongs to template I-vertex i.
    pub i_cliques: Vec<Vec<usize>>,
    /// Trees indexed like the template's J-side: 0..2t from J1, 2t..4t the
    /// flexible half J2.
    pub j_orchard: Orchard,
    pub m_order: usize,
}

impl AbsorbingStructure {
    pub fn t(&self) -> usize {
        self.template.t
    }

    pub fn vertex_set(&self, n: usize) -> VertexSet {
        let mut vs = self.j_orchard.vertex_set(n);
        for s in &self.i_cliques {
            for &v in s {
                vs.insert(v);
            }
        }
        vs
    }

    pub fn num_vertices(&self, n: usize) -> usize {
        self.vertex_set(n).len()
    }

    pub fn validate(&self, g: &Graph) -> Result<(), AbsorberError> {
        let t = self.template.t;
        let r = self.j_orchard.r();
        self.template.validate()?;
        if self.i_cliques.len() != 3 * t {
            return Err(AbsorberError::Invalid(format!(
                "expected 3t = {} I-cliques, got {}",
                3 * t,
                self.i_cliques.len()
            )));
        }
        if self.j_orchard.k() != 4 * t {
            return Err(AbsorberError::Invalid(format!(
                "expected 4t = {} trees, got {}",
                4 * t,
                self.j_orchard.k()
            )));
        }
        self.j_orchard.validate(g).map_err(|e| AbsorberError::Invalid(e.to_string()))?;
        let mut seen = VertexSet::new(g.n());
        for (i, s) in self.i_cliques.iter().enumerate() {
            if s.len() != r - 1 || !g.is_clique(s) {
                return Err(AbsorberError::Invalid(format!("I-clique {i} is not an (r-1)-clique")));
            }
            for &v in s {
                if seen.contains(v) {
                    return Err(AbsorberError::Invalid(format!("I-clique {i} reuses vertex {v}")));
                }
                seen.insert(v);
            }
        }
        let trees_vs = self.j_orchard.vertex_set(g.n());
        if !seen.is_disjoint(&trees_vs) {
            return Err(AbsorberError::Invalid("I-cliques overlap the J-orchard".into()));
        }
        for &(i, j) in &self.template.edges {
            let ok = self.j_orchard.trees[j]
                .removable
                .iter()
                .any(|&v| self.i_cliques[i].iter().all(|&u| g.has_edge(u, v)));
            if !ok {
                return Err(AbsorberError::Invalid(format!(
                    "template edge ({i},{j}) has no clique-completing removable"
                )));
            }
        }
        let total = self.num_vertices(g.n());
        let cap = 12 * r * t * self.m_order;
        if total > cap {
            return Err(AbsorberError::Invalid(format!(
                "structure spans {total} vertices, above the 12rtM = {cap} cap"
            )));
        }
        Ok(())
    }

    pub fn to_json(&self, n: usize) -> serde_json::Value {
        serde_json::json!({
            "template": self.template.to_json(),
            "i_cliques": self.i_cliques,
            "orchard": self.j_orchard.to_json(),
            "m": self.m_order,
            "vertices": self.num_vertices(n),
        })
    }
}

const STRUCTURE_ATTEMPTS: usize = 6;

/// Three-stage absorbing-structure build: (1) candidate (r−1)-cliques S_h
/// with private neighborhood pools X_h; (2) 4t diamond trees of order M
/// whose removables sit in the pools their template edges demand; (3) greedy
/// assignment of template I-vertices to candidates whose pools all their
/// edges reach. The output validates every structural clause.
pub fn build_absorbing_structure(
    g: &Graph,
    w: &VertexSet,
    r: usize,
    t: usize,
    m_order: usize,
    seed: u64,
) -> Result<AbsorbingStructure, AbsorberError> {
    if w.len() < 7 * t {
        return Err(AbsorberError::StageFailed {
            stage: 1,
            msg: format!("working set of {} vertices cannot host 7t = {}", w.len(), 7 * t),
        });
    }
    if m_order < 1 {
        return Err(AbsorberError::Invalid("tree order M must be at least 1".into()));
    }
    let mut last = AbsorberError::SearchExhausted;
    for attempt in 0..STRUCTURE_ATTEMPTS {
        // Degree cap: small caps keep the per-tree coverage demands light
        // (one removable must complete a clique for each of its tree's
        // template edges), but flexibility-2 templates need degree 3.
        let cap = TEMPLATE_MAX_DEGREE.min((m_order + 1).max(3));
        let template = build_template(t, cap, seed.wrapping_add(attempt as u64))?;
        match try_structure(g, w, r, t, m_order, &template, seed.wrapping_add(1 + attempt as u64)) {
            Ok(st) => {
                st.validate(g)?;
                return Ok(st);
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn try_structure(
    g: &Graph,
    w: &VertexSet,
    r: usize,
    t: usize,
    m_order: usize,
    template: &Template,
    seed: u64,
) -> Result<AbsorbingStructure, AbsorberError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::RngCore;
    // Vertex budget: candidate cliques plus trees (removables and star
    // interiors).
    let tree_cost = m_order + (m_order - 1) * (r - 1);
    let reserve = 3 * t * (r - 1) + 4 * t * tree_cost;
    if w.len() < reserve {
        return Err(AbsorberError::StageFailed {
            stage: 1,
            msg: format!("working set of {} vertices, need about {reserve}", w.len()),
        });
    }
    // Stages 1–2 restart together: the trees fix which common neighborhoods
    // the candidate cliques must live in, so a bad draw of removables is
    // cheapest to fix by redrawing the trees.
    const INNER_RESTARTS: usize = 8;
    let mut last: Option<AbsorberError> = None;
    let mut built: Option<(Orchard, Vec<Vec<usize>>)> = None;
    'restart: for _ in 0..INNER_RESTARTS {
        let mut free = w.clone();
        // Stage 1: one order-M tree per template J-vertex, removables free.
        let mut trees = Vec::with_capacity(4 * t);
        for j in 0..4 * t {
            match prescribed_star(g, r, &[], m_order, &mut free, &mut rng) {
                Ok(tree) => {
                    validate_diamond_tree(g, &tree)
                        .map_err(|e| AbsorberError::StageFailed { stage: 1, msg: e.to_string() })?;
                    trees.push(tree);
                }
                Err(msg) => {
                    last = Some(AbsorberError::StageFailed {
                        stage: 1,
                        msg: format!("tree {j}: {msg}"),
                    });
                    continue 'restart;
                }
            }
        }
        let j_orchard = Orchard::new(trees);
        // Stage 2: an (r−1)-clique per template I-vertex, drawn from the
        // common neighborhood of one designated removable of each
        // neighboring tree, so every template edge gets its
        // clique-completing removable.
        let mut cands: Vec<Vec<usize>> = Vec::new();
        for i in 0..3 * t {
            let needs = template.neighbors_of_i(i);
            let mut found = None;
            for _ in 0..30 {
                let mut pool = free.clone();
                for &j in &needs {
                    let rem = &j_orchard.trees[j].removable;
                    let pick = rem[(rng.next_u64() as usize) % rem.len()];
                    pool = pool.intersect(g.neighbors(pick));
                }
                if pool.len() < r - 1 {
                    continue;
                }
                if let Ok(c) = find_popular_clique(g, &pool, &[free.clone()], r - 1, 0, rng.next_u64()) {
                    found = Some(c.vertices().to_vec());
                    break;
                }
            }
            let Some(s) = found else {
                last = Some(AbsorberError::StageFailed {
                    stage: 2,
                    msg: format!("no clique for template vertex {i} adjacent to its trees' removables"),
                });
                continue 'restart;
            };
            for &v in &s {
                free.remove(v);
            }
            cands.push(s);
        }
        built = Some((j_orchard, cands));
        break;
    }
    let Some((j_orchard, cands)) = built else {
        return Err(last.unwrap_or(AbsorberError::SearchExhausted));
    };
    // Stage 3: greedy I-to-candidate assignment over the surviving
    // candidates; the provisional identity assignment is always available,
    // but the greedy revalidates rather than assumes it.
    let mut assigned: Vec<Option<usize>> = vec![None; 3 * t];
    let mut taken = vec![false; cands.len()];
    for i in 0..3 * t {
        let needs: Vec<usize> = template.neighbors_of_i(i);
        let pick = (0..cands.len()).find(|&h| {
            !taken[h]
                && needs.iter().all(|&j| {
                    j_orchard.trees[j]
                        .removable
                        .iter()
                        .any(|&v| cands[h].iter().all(|&u| g.has_edge(u, v)))
                })
        });
        match pick {
            Some(h) => {
                taken[h] = true;
                assigned[i] = Some(h);
            }
            None => {
                return Err(AbsorberError::StageFailed {
                    stage: 3,
                    msg: format!("no surviving candidate serves template vertex {i}"),
                });
            }
        }
    }
    let i_cliques: Vec<Vec<usize>> =
        assigned.into_iter().map(|h| cands[h.unwrap()].clone()).collect();
    Ok(AbsorbingStructure { template: template.clone(), i_cliques, j_orchard, m_order })
}

/// Diamond star with prescribed removables: center = the first, the rest as
/// leaves, padded with fresh leaves to reach `order`. Interior cliques live
/// in the free pool and are consumed from it.
fn prescribed_star(
    g: &Graph,
    r: usize,
    required: &[usize],
    order: usize,
    free: &mut VertexSet,
    rng: &mut ChaCha8Rng,
) -> Result<DiamondTree, String> {
    use rand::RngCore;
    let center = match required.first() {
        Some(&v) => v,
        None => {
            let pool: Vec<usize> = free.iter().collect();
            if pool.is_empty() {
                return Err("free pool exhausted".to_string());
            }
            // Best of three by degree: high-degree removables leave bigger
            // common neighborhoods for the candidate cliques.
            let v = (0..3)
                .map(|_| pool[(rng.next_u64() as usize) % pool.len()])
                .max_by_key(|&v| g.degree(v))
                .unwrap();
            free.remove(v);
            v
        }
    };
    let mut tree = DiamondTree::singleton(r, center);
    let attach = |tree: &mut DiamondTree, leaf: Option<usize>, free: &mut VertexSet, rng: &mut ChaCha8Rng| -> Result<(), String> {
        // Interior clique adjacent to the center (and the leaf, if given).
        let mut cand = g.neighbors(center).intersect(free);
        if let Some(v) = leaf {
            cand = cand.intersect(g.neighbors(v));
        }
        let sigma = find_popular_clique(g, &cand, &[free.clone()], r - 1, usize::from(leaf.is_none()), rng.next_u64())
            .map_err(|_| "no interior clique for a star edge".to_string())?;
        let leaf_v = match leaf {
            Some(v) => v,
            None => {
                let c = common_neighbors_of(g, sigma.vertices(), free)
                    .map_err(|e| e.to_string())?;
                let v = c.iter().find(|&v| v != center).ok_or("no fresh leaf available")?;
                free.remove(v);
                v
            }
        };
        for &x in sigma.vertices() {
            free.remove(x);
        }
        tree.aux_edges.push((0, tree.order()));
        tree.removable.push(leaf_v);
        tree.interior.push(sigma.vertices().to_vec());
        Ok(())
    };
    for &v in required.iter().skip(1) {
        attach(&mut tree, Some(v), free, rng)?;
    }
    while tree.order() < order {
        attach(&mut tree, None, free, rng)?;
    }
    Ok(tree)
}

#[derive(Clone, Debug)]
pub struct AbsorbOutcome {
    /// Verified K_r-factor of V(structure) ∪ V(rem).
    pub factor: Vec<Vec<usize>>,
    /// Flexible-half tree indices (J2-local) consumed serving `rem`.
    pub p1: Vec<usize>,
    /// Flexible-half tree indices consumed as padding r-tuples.
    pub p2: Vec<usize>,
    /// The template matching F used for the remaining trees.
    pub matching: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
}

/// Absorb a leftover orchard into the structure: P1 serves `rem` from the
/// flexible half, P2 pads with traversing r-tuples until t flexible trees
/// are spent, and a template perfect matching covers everything else.
pub fn absorb(
    g: &Graph,
    a: &AbsorbingStructure,
    rem: &Orchard,
    seed: u64,
) -> Result<AbsorbOutcome, AbsorberError> {
    let r = a.j_orchard.r();
    let t = a.t();
    let struct_vs = a.vertex_set(g.n());
    let rem_vs = rem.vertex_set(g.n());
    let total = struct_vs.len() + rem_vs.len();
    if total % r != 0 {
        return Err(AbsorberError::DivisibilityViolation { total, r });
    }
    if !struct_vs.is_disjoint(&rem_vs) {
        return Err(AbsorberError::Invalid("rem orchard overlaps the structure".into()));
    }
    let mut warnings = Vec::new();
    let k = rem.k();
    let cap = (t / (4 * r)).max(1);
    if k > cap {
        warnings.push(format!("rem size {k} above the t/(4r) cap of {cap}"));
    }
    if (r - 1) * k > t {
        return Err(AbsorberError::Failed {
            stage: "absorb-orchard",
            msg: format!("(r-1)k = {} flexible trees needed, only t = {t} may be spent", (r - 1) * k),
        });
    }
    let j2: Vec<usize> = (2 * t..4 * t).collect();
    let flexible = a.j_orchard.suborchard(&j2);
    let mut factor: Vec<Vec<usize>> = Vec::new();
    let mut p1: Vec<usize> = Vec::new();
    if k > 0 {
        // The flexible half is thin (2t trees in four round-robin parts), so
        // a handful of reseeded tries is cheap insurance.
        let mut res = Err(crate::orchard::OrchardError::Invalid("no absorb attempt ran".into()));
        for attempt in 0..8u64 {
            res = absorb_orchard(g, &flexible, rem, &AbsorbParams::default(), seed.wrapping_add(attempt));
            if res.is_ok() {
                break;
            }
        }
        let res = res
            .map_err(|e| AbsorberError::Failed { stage: "absorb-orchard", msg: e.to_string() })?;
        warnings.extend(res.warnings);
        factor.extend(res.factor);
        p1 = res.used;
    }
    // Padding: consume flexible trees in traversing r-tuples until exactly t
    // are spent. The mod-r invariant of the padding loop: the count to
    // consume is a multiple of r, never landing in [1, r-1].
    let p2_count = t - (r - 1) * k;
    assert!(
        p2_count % r == 0,
        "padding count {p2_count} not a multiple of r, despite global divisibility"
    );
    let mut remaining: Vec<usize> = (0..2 * t).filter(|i| !p1.contains(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(1));
    use rand::RngCore;
    let mut p2: Vec<usize> = Vec::new();
    while p2.len() < p2_count {
        let mut found = false;
        for _ in 0..200 {
            remaining.shuffle(&mut rng);
            let tuple = &remaining[..r];
            let sets: Vec<VertexSet> =
                tuple.iter().map(|&i| flexible.trees[i].removable_set(g.n())).collect();
            let q = TraversalQuery::traversing(r, sets);
            if let Ok(clique) = find_traversing_clique_budgeted(g, &q, rng.next_u64(), 50_000) {
                let verts = clique.vertices().to_vec();
                factor.push(verts.clone());
                for (pos, &i) in tuple.iter().enumerate() {
                    factor.extend(
                        extract_factor_without(&flexible.trees[i], verts[pos])
                            .map_err(|e| AbsorberError::Failed { stage: "padding", msg: e.to_string() })?,
                    );
                }
                let consumed: Vec<usize> = tuple.to_vec();
                remaining.retain(|i| !consumed.contains(i));
                p2.extend(consumed);
                found = true;
                break;
            }
        }
        if !found {
            return Err(AbsorberError::Failed {
                stage: "padding",
                msg: format!("no traversing r-tuple among {} flexible trees", remaining.len()),
            });
        }
    }
    // Template matching on I versus J minus the spent flexible trees.
    let jbar: HashSet<usize> = p1.iter().chain(p2.iter()).map(|&i| 2 * t + i).collect();
    let adj: Vec<Vec<usize>> = (0..3 * t).map(|i| a.template.neighbors_of_i(i)).collect();
    let allowed: Vec<bool> = (0..4 * t).map(|j| !jbar.contains(&j)).collect();
    let matching = bipartite_matching(&adj, &allowed);
    if matching.len() != 3 * t {
        return Err(AbsorberError::Failed {
            stage: "template-matching",
            msg: format!("matched {} of 3t = {} I-vertices", matching.len(), 3 * t),
        });
    }
    for &(i, j) in &matching {
        let v = a.j_orchard.trees[j]
            .removable
            .iter()
            .copied()
            .find(|&v| a.i_cliques[i].iter().all(|&u| g.has_edge(u, v)))
            .ok_or_else(|| AbsorberError::Failed {
                stage: "template-matching",
                msg: format!("edge ({i},{j}) lost its clique-completing removable"),
            })?;
        let mut clique = a.i_cliques[i].clone();
        clique.push(v);
        factor.push(clique);
        factor.extend(
            extract_factor_without(&a.j_orchard.trees[j], v)
                .map_err(|e| AbsorberError::Failed { stage: "template-matching", msg: e.to_string() })?,
        );
    }
    let expected = struct_vs.union(&rem_vs);
    check_factor(g, &factor, &expected)
        .map_err(|msg| AbsorberError::Failed { stage: "verification", msg })?;
    Ok(AbsorbOutcome { factor, p1, p2, matching, warnings })
}

/// Pairwise-disjoint fully-adjacent r-sets exactly covering `expected`.
pub fn check_factor(g: &Graph, factor: &[Vec<usize>], expected: &VertexSet) -> Result<(), String> {
    let mut seen = VertexSet::new(g.n());
    for c in factor {
        if !g.is_clique(c) {
            return Err(format!("{c:?} is not a clique"));
        }
        for &v in c {
            if seen.contains(v) {
                return Err(format!("vertex {v} covered twice"));
            }
            seen.insert(v);
        }
    }
    if seen != *expected {
        return Err(format!(
            "coverage mismatch: covered {} vertices, expected {}",
            seen.len(),
            expected.len()
        ));
    }
    Ok(())
}
