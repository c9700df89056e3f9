//! End-to-end K_r-factor search in four phases — reserve, greedy cover,
//! cascading orchard absorption, final structure absorption — plus the exact
//! exponential baseline, factor verification, and parameter profiles.

use crate::absorber::{absorb, build_absorbing_structure, check_factor, AbsorbingStructure};
use crate::cliques::{find_traversing_clique_budgeted, TraversalQuery};
use crate::diamond::DiamondTree;
use crate::graph::{Graph, VertexSet};
use crate::orchard::{
    absorb_orchard, absorption_bad_set, build_kr_hypergraph, matching_to_factor, AbsorbParams,
    HypergraphMode, Orchard,
};
use crate::shrinkable::{construct_shrinkable_orchard, ShrinkableCertificate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("n = {n} is not divisible by r = {r}")]
    DivisibilityViolation { n: usize, r: usize },
    #[error("phase {phase} failed: {msg}")]
    PhaseFailed { phase: u8, msg: String },
    #[error("n = {n} exceeds the exact-baseline cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("no K_r-factor exists")]
    Infeasible,
}

/// The constant zoo, collapsed to desk scale: small integer orders and
/// percentages instead of the asymptotic tower.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParameterProfile {
    pub r: usize,
    /// Orchard mass: each level aims for k·m ≈ alpha·n.
    pub alpha: f64,
    /// Shrinkability exponent.
    pub gamma: f64,
    /// Phase-2 leftover tolerance, as a fraction of n.
    pub zeta: f64,
    /// Reservation probability for the phase-1 cover set Y.
    pub eta: f64,
    pub levels: usize,
    /// m_0 < m_1 < … per level; m_0 = 1.
    pub level_orders: Vec<usize>,
    /// Template flexibility of the absorbing structure.
    pub t_template: usize,
    /// Diamond-tree order in the absorbing structure.
    pub m_absorber: usize,
    pub seed: u64,
    /// Full-pipeline retries with fresh seeds (the "with high probability"
    /// steps become retry loops).
    pub retry_budget: usize,
    /// Per-search node budget.
    pub search_budget: usize,
}

impl ParameterProfile {
    /// Desk defaults: template flexibility grows ~n/20 (clamped to [2,6]),
    /// absorber trees of order 1, a single orchard level of singletons.
    pub fn default_for(n: usize, r: usize) -> Self {
        let mut t = (n / 20).clamp(2, 6);
        // The structure spans t(3r+1) vertices at M = 1; keep it at most
        // ~2n/3 so the orchard and free phase have room.
        while t > 2 && t * (3 * r + 1) * 3 > 2 * n {
            t -= 1;
        }
        // Small hosts need a proportionally larger orchard: the round-robin
        // absorption pools and the shrink threshold k^{1−γ} both starve
        // below k ≈ 9. But the orchard must still fit beside the absorbing
        // structure, so cap k at one under what remains.
        let base: f64 = if n < 45 { 0.3 } else { 0.2 };
        let budget = n.saturating_sub(t * (3 * r + 1));
        let alpha = base.min(budget.saturating_sub(1).max(1) as f64 / n as f64);
        ParameterProfile {
            r,
            alpha,
            gamma: 0.3,
            zeta: 0.12,
            eta: 0.03,
            levels: 1,
            level_orders: vec![1],
            t_template: t,
            m_absorber: 1,
            seed: 0,
            retry_budget: 12,
            search_budget: 50_000,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| PipelineError::PhaseFailed { phase: 0, msg };
        if self.r < 2 {
            return Err(bad(format!("r = {} below 2", self.r)));
        }
        for &x in &[self.alpha, self.gamma, self.zeta, self.eta] {
            if !(0.0..1.0).contains(&x) || x == 0.0 {
                return Err(bad(format!("fractional parameter {x} outside (0,1)")));
            }
        }
        if self.levels == 0 || self.level_orders.len() != self.levels {
            return Err(bad("levels and level_orders disagree".into()));
        }
        if self.level_orders[0] != 1 {
            return Err(bad("m_0 must be 1".into()));
        }
        if self.level_orders.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("level orders must be strictly increasing".into()));
        }
        if self.t_template < 2 {
            return Err(bad("template flexibility below 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PhaseCounts {
    pub s1: usize,
    pub s2: usize,
    pub s3: usize,
    pub s4: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorCertificate {
    pub cliques: Vec<Vec<usize>>,
    pub phases: PhaseCounts,
    pub profile: ParameterProfile,
    pub verified: bool,
}

impl FactorCertificate {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("certificate serializes")
    }
}

/// Pairwise-disjoint fully-adjacent r-sets exactly covering V(G).
pub fn verify_factor(g: &Graph, cliques: &[Vec<usize>]) -> Result<(), String> {
    check_factor(g, cliques, &VertexSet::full(g.n()))
}

/// Four-phase factor search with whole-pipeline retries on fresh seeds.
pub fn find_clique_factor(g: &Graph, profile: &ParameterProfile) -> Result<FactorCertificate, PipelineError> {
    profile.validate()?;
    let n = g.n();
    let r = profile.r;
    if n % r != 0 {
        return Err(PipelineError::DivisibilityViolation { n, r });
    }
    let mut last = PipelineError::PhaseFailed { phase: 0, msg: "no attempt ran".into() };
    for attempt in 0..=profile.retry_budget {
        match run_once(g, profile, profile.seed.wrapping_add(attempt as u64 * 0x1234_5678)) {
            Ok(cert) => return Ok(cert),
            Err(e) => {
                if std::env::var_os("CLIQUEFACTOR_TRACE").is_some() {
                    eprintln!("attempt {attempt}: {e}");
                }
                last = e;
            }
        }
    }
    Err(last)
}

fn run_once(g: &Graph, profile: &ParameterProfile, seed: u64) -> Result<FactorCertificate, PipelineError> {
    let n = g.n();
    let r = profile.r;
    let p = g.density();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::RngCore;
    let fail = |phase: u8, msg: String| PipelineError::PhaseFailed { phase, msg };

    // Setup: reserve Y, then build the absorbing structure in V∖Y, then the
    // level orchards in descending order, recording bad sets.
    let t = profile.t_template;
    let structure_span = t * (3 * r + 1).max(1) * profile.m_absorber.max(1);
    let k0_est = ((profile.alpha * n as f64).ceil() as usize).max(r);
    let y_cap = (n.saturating_sub(structure_span + k0_est) / 2).max(1);
    let mut y: Vec<usize> = (0..n).filter(|_| rng.gen::<f64>() < profile.eta).collect();
    y.shuffle(&mut rng);
    y.truncate(y_cap);
    let y_set = VertexSet::from_iter(n, y.iter().copied());
    let mut avail = VertexSet::full(n).difference(&y_set);

    let structure: AbsorbingStructure =
        build_absorbing_structure(g, &avail, r, t, profile.m_absorber, rng.next_u64())
            .map_err(|e| fail(0, format!("absorbing structure: {e}")))?;
    let va = structure.vertex_set(n);
    avail = avail.difference(&va);

    let mut certs: Vec<Option<ShrinkableCertificate>> = vec![None; profile.levels];
    let mut bad_union = VertexSet::new(n);
    for lev in (0..profile.levels).rev() {
        let m = profile.level_orders[lev];
        let cert = construct_shrinkable_orchard(g, &avail, r, m, profile.alpha, profile.gamma, rng.next_u64())
            .map_err(|e| fail(0, format!("level-{lev} orchard: {e}")))?;
        avail = avail.difference(&cert.orchard.vertex_set(n));
        bad_union = bad_union.union(&absorption_bad_set(g, &cert.orchard, p));
        certs[lev] = Some(cert);
    }
    let orchards: Vec<Orchard> = certs.into_iter().map(|c| c.unwrap().orchard).collect();

    // Phase 1: cover the free bad vertices with cliques drawn from Y.
    let mut y_avail = y_set.clone();
    let mut s1: Vec<Vec<usize>> = Vec::new();
    let z_targets: Vec<usize> = bad_union.intersect(&avail).iter().collect();
    let mut covered = VertexSet::new(n);
    for z in z_targets {
        let mut sets = vec![VertexSet::from_iter(n, [z])];
        for _ in 0..r - 1 {
            sets.push(y_avail.clone());
        }
        let q = TraversalQuery::traversing(r, sets);
        match find_traversing_clique_budgeted(g, &q, rng.next_u64(), profile.search_budget) {
            Ok(c) => {
                for &v in c.vertices() {
                    y_avail.remove(v);
                    covered.insert(v);
                }
                covered.insert(z);
                s1.push(c.vertices().to_vec());
            }
            Err(_) => {
                // An uncovered bad vertex is not fatal; it rejoins the free
                // pool and phase 2 or 3 must cope.
            }
        }
    }

    // Phase 2: greedy disjoint r-cliques on the free vertices (leftover Y
    // included); vertices no clique serves become the leftover L.
    let mut free = avail.union(&y_avail).difference(&covered);
    let mut s2: Vec<Vec<usize>> = Vec::new();
    let mut leftover: Vec<usize> = Vec::new();
    // Exact packing takes over once the pool is small: the greedy wastes
    // vertices precisely when every vertex counts.
    const EXACT_TAIL: usize = 15;
    let mut order: Vec<usize> = free.to_vec();
    order.shuffle(&mut rng);
    for v in order {
        if !free.contains(v) {
            continue;
        }
        if free.len() < r || free.len() <= EXACT_TAIL {
            break;
        }
        let mut sets = vec![VertexSet::from_iter(n, [v])];
        for _ in 0..r - 1 {
            sets.push(free.clone());
        }
        let q = TraversalQuery::traversing(r, sets);
        match find_traversing_clique_budgeted(g, &q, rng.next_u64(), profile.search_budget) {
            Ok(c) => {
                for &u in c.vertices() {
                    free.remove(u);
                }
                s2.push(c.vertices().to_vec());
            }
            Err(_) => {
                free.remove(v);
                leftover.push(v);
            }
        }
    }
    if free.len() >= r {
        let tail: Vec<usize> = free.to_vec();
        let mut tail_cliques: Vec<Vec<usize>> = Vec::new();
        let mut edges: Vec<Vec<usize>> = Vec::new();
        for combo in index_subsets(tail.len(), r) {
            let verts: Vec<usize> = combo.iter().map(|&i| tail[i]).collect();
            if g.is_clique(&verts) {
                edges.push(combo);
                tail_cliques.push(verts);
            }
        }
        for ei in best_matching(tail.len(), &edges) {
            for &u in &tail_cliques[ei] {
                free.remove(u);
            }
            s2.push(tail_cliques[ei].clone());
        }
    }
    leftover.extend(free.iter());
    let zeta_cap = ((profile.zeta * n as f64).ceil() as usize).max(r);
    if leftover.len() > zeta_cap {
        return Err(fail(2, format!("{} leftover vertices, above the ζn cap {zeta_cap}", leftover.len())));
    }

    // Phase 3: cascade — absorb the leftover into O_0, shrink by matching
    // the K_r-hypergraph of what remains, pass the unmatched trees up.
    let mut s3: Vec<Vec<usize>> = Vec::new();
    let mut small = Orchard::new(leftover.iter().map(|&v| DiamondTree::singleton(r, v)).collect());
    // The absorption's choice of consumed trees decides how well the
    // remainder matches, so each level tries a few draws and keeps the one
    // with the fewest trees passed upward.
    const LEVEL_TRIES: usize = 6;
    for (lev, orchard) in orchards.iter().enumerate() {
        let mut best: Option<(Vec<Vec<usize>>, Orchard)> = None;
        let mut last_err = String::new();
        for _ in 0..LEVEL_TRIES {
            let absorb_seed = rng.next_u64();
            let h_seed = rng.next_u64();
            let mut part: Vec<Vec<usize>> = Vec::new();
            let mut remaining_idx: Vec<usize> = (0..orchard.k()).collect();
            if small.k() > 0 {
                match absorb_orchard(g, orchard, &small, &AbsorbParams { p: Some(p), budget: profile.search_budget }, absorb_seed) {
                    Ok(res) => {
                        part.extend(res.factor);
                        remaining_idx.retain(|i| !res.used.contains(i));
                    }
                    Err(e) => {
                        last_err = e.to_string();
                        continue;
                    }
                }
            }
            let sub = orchard.suborchard(&remaining_idx);
            let h = build_kr_hypergraph(g, &sub, &HypergraphMode::Sampled { budget: profile.search_budget, seed: h_seed });
            let chosen = best_matching(sub.k(), &h.edges);
            let pairs: Vec<(Vec<usize>, Vec<usize>)> = chosen
                .iter()
                .map(|&ei| (h.edges[ei].clone(), h.witness[&h.edges[ei]].clone()))
                .collect();
            let matched: Vec<Vec<usize>> = match matching_to_factor(g, &sub, &pairs) {
                Ok(m) => m,
                Err(e) => {
                    last_err = e.to_string();
                    continue;
                }
            };
            part.extend(matched);
            let in_matching: Vec<bool> = {
                let mut m = vec![false; sub.k()];
                for &ei in &chosen {
                    for &v in &h.edges[ei] {
                        m[v] = true;
                    }
                }
                m
            };
            let up = Orchard::new(
                (0..sub.k()).filter(|&i| !in_matching[i]).map(|i| sub.trees[i].clone()).collect(),
            );
            let better = best.as_ref().map_or(true, |(_, b)| up.k() < b.k());
            if better {
                let done = up.k() <= 1;
                best = Some((part, up));
                if done {
                    break;
                }
            }
        }
        let Some((part, up)) = best else {
            return Err(fail(3, format!("level {lev}: {last_err}")));
        };
        s3.extend(part);
        small = up;
    }

    // Phase 4: absorb the final leftover orchard into the structure.
    let outcome = absorb(g, &structure, &small, rng.next_u64())
        .map_err(|e| fail(4, e.to_string()))?;
    let s4 = outcome.factor;

    let mut cliques = Vec::new();
    let phases = PhaseCounts { s1: s1.len(), s2: s2.len(), s3: s3.len(), s4: s4.len() };
    cliques.extend(s1);
    cliques.extend(s2);
    cliques.extend(s3);
    cliques.extend(s4);
    assert_eq!((phases.s1 + phases.s2 + phases.s3 + phases.s4) * r, n, "phase counts must partition V");
    verify_factor(g, &cliques).map_err(|msg| fail(4, format!("verification: {msg}")))?;
    Ok(FactorCertificate { cliques, phases, profile: profile.clone(), verified: true })
}

fn index_subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn go(n: usize, r: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in from..n {
            cur.push(i);
            go(n, r, i + 1, cur, out);
            cur.pop();
        }
    }
    go(n, r, 0, &mut cur, &mut out);
    out
}

/// Maximum matching on an r-uniform hypergraph over `0..k`: exact branch and
/// bound for small k, greedy above.
fn best_matching(k: usize, edges: &[Vec<usize>]) -> Vec<usize> {
    const EXACT_CAP: usize = 15;
    if k > EXACT_CAP {
        return crate::orchard::greedy_hypergraph_matching(k, edges);
    }
    fn go(
        edges: &[Vec<usize>],
        r: usize,
        free: &mut Vec<bool>,
        from: usize,
        cur: &mut Vec<usize>,
        best: &mut Vec<usize>,
    ) {
        if cur.len() > best.len() {
            *best = cur.clone();
        }
        let remaining = free.iter().filter(|&&f| f).count();
        if cur.len() + remaining / r <= best.len() {
            return;
        }
        for ei in from..edges.len() {
            if edges[ei].iter().all(|&v| free[v]) {
                for &v in &edges[ei] {
                    free[v] = false;
                }
                cur.push(ei);
                go(edges, r, free, ei + 1, cur, best);
                cur.pop();
                for &v in &edges[ei] {
                    free[v] = true;
                }
            }
        }
    }
    let r = edges.first().map(|e| e.len()).unwrap_or(3);
    let mut free = vec![true; k];
    let mut best = Vec::new();
    go(edges, r, &mut free, 0, &mut Vec::new(), &mut best);
    best
}

/// Exact-baseline size cap: exponential exact cover stays tractable here.
pub const EXACT_BASELINE_MAX_N: usize = 33;

/// Complete exact-cover search over all r-cliques, branching on the lowest
/// uncovered vertex. Infeasible is definitive.
pub fn exact_factor_baseline(g: &Graph, r: usize) -> Result<Vec<Vec<usize>>, PipelineError> {
    let n = g.n();
    if n % r != 0 {
        return Err(PipelineError::DivisibilityViolation { n, r });
    }
    if n > EXACT_BASELINE_MAX_N {
        return Err(PipelineError::TooLarge { n, cap: EXACT_BASELINE_MAX_N });
    }
    let cliques = enumerate_cliques(g, r);
    let mut covered = vec![false; n];
    let mut chosen: Vec<usize> = Vec::new();
    if cover(g, &cliques, &mut covered, &mut chosen) {
        Ok(chosen.into_iter().map(|ci| cliques[ci].clone()).collect())
    } else {
        Err(PipelineError::Infeasible)
    }
}

fn cover(g: &Graph, cliques: &[Vec<usize>], covered: &mut Vec<bool>, chosen: &mut Vec<usize>) -> bool {
    let Some(v) = covered.iter().position(|&c| !c) else {
        return true;
    };
    for (ci, c) in cliques.iter().enumerate() {
        // Branch only on cliques through the lowest uncovered vertex.
        if !c.contains(&v) || c.iter().any(|&u| covered[u]) {
            continue;
        }
        for &u in c {
            covered[u] = true;
        }
        chosen.push(ci);
        if cover(g, cliques, covered, chosen) {
            return true;
        }
        chosen.pop();
        for &u in c {
            covered[u] = false;
        }
    }
    false
}

/// All r-cliques of g, each sorted ascending.
pub fn enumerate_cliques(g: &Graph, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn go(g: &Graph, r: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for v in start..g.n() {
            if cur.iter().all(|&u| g.has_edge(u, v)) {
                cur.push(v);
                go(g, r, v + 1, cur, out);
                cur.pop();
            }
        }
    }
    go(g, r, 0, &mut cur, &mut out);
    out
}
