//! Shrinkable-orchard constructions: disjoint set systems with local degree
//! conditions, the cleanup (delete-and-rebin) process, low-degree and popular
//! diamond trees, the two-round grouped reservation, and the density
//! dispatcher that assembles and certifies a shrinkable orchard.

use crate::diamond::{select_flexible_removable, DiamondTree, FlexibleSelection};
use crate::cliques::{find_traversing_clique_budgeted, TraversalQuery};
use crate::graph::{Graph, VertexSet};
use crate::orchard::{test_shrinkability, Orchard, ShrinkReport};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ShrinkError {
    #[error("set system invariant violated: {0}")]
    Invalid(String),
    #[error("cleanup binned {deleted} sets, more than the allowed {cap}")]
    TooManyDeleted { deleted: usize, cap: usize },
    #[error("construction failed ({path} path): {msg}")]
    ConstructionFailed { path: &'static str, msg: String },
    #[error("orchard built but shrinkability trials failed: {0}")]
    CertificationFailed(String),
}

fn fail(path: &'static str, msg: impl Into<String>) -> ShrinkError {
    ShrinkError::ConstructionFailed { path, msg: msg.into() }
}

/// A family of k pairwise-disjoint vertex sets, each of size at least m.
#[derive(Clone, Debug)]
pub struct SetSystem {
    pub sets: Vec<VertexSet>,
}

impl SetSystem {
    pub fn new(sets: Vec<VertexSet>) -> Result<Self, ShrinkError> {
        for (i, a) in sets.iter().enumerate() {
            if a.len() == 0 {
                return Err(ShrinkError::Invalid(format!("set {i} is empty")));
            }
            for b in sets.iter().skip(i + 1) {
                if !a.is_disjoint(b) {
                    return Err(ShrinkError::Invalid(format!("set {i} overlaps a later set")));
                }
            }
        }
        Ok(SetSystem { sets })
    }

    pub fn k(&self) -> usize {
        self.sets.len()
    }

    pub fn m(&self) -> usize {
        self.sets.iter().map(|s| s.len()).min().unwrap_or(0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalConditionReport {
    /// α·p·k·m, the degree floor of condition (1).
    pub degree_floor: f64,
    /// Sets with no vertex of degree ≥ floor into the non-Γ union.
    pub cond1_violations: Vec<usize>,
    /// Vertices whose degree into the Γ union exceeds the cap.
    pub cond2_violations: Vec<(usize, usize)>,
    pub holds: bool,
}

/// Check the two local conditions behind shrinkability: (1) every set owns a
/// vertex with degree ≥ α·p·k·m into W, the union of the sets outside Γ (the
/// first ⌈γk⌉ sets); (2) no vertex of the host sees more than `deg_cap`
/// vertices of the Γ union.
pub fn check_local_shrink_conditions(
    g: &Graph,
    lam: &SetSystem,
    gamma: f64,
    alpha: f64,
    deg_cap: usize,
) -> LocalConditionReport {
    let k = lam.k();
    let m = lam.m();
    let gsize = ((gamma * k as f64).ceil() as usize).min(k);
    let p = g.density();
    let degree_floor = alpha * p * k as f64 * m as f64;
    let w: VertexSet = lam.sets[gsize..]
        .iter()
        .fold(VertexSet::new(g.n()), |acc, s| acc.union(s));
    let gamma_union: VertexSet = lam.sets[..gsize]
        .iter()
        .fold(VertexSet::new(g.n()), |acc, s| acc.union(s));
    let cond1_violations: Vec<usize> = (0..k)
        .filter(|&i| {
            !lam.sets[i]
                .iter()
                .any(|v| g.neighbors(v).intersection_len(&w) as f64 >= degree_floor)
        })
        .collect();
    let cond2_violations: Vec<(usize, usize)> = (0..g.n())
        .filter_map(|v| {
            let d = g.neighbors(v).intersection_len(&gamma_union);
            (d > deg_cap).then_some((v, d))
        })
        .collect();
    let holds = cond1_violations.is_empty() && cond2_violations.is_empty();
    LocalConditionReport { degree_floor, cond1_violations, cond2_violations, holds }
}

#[derive(Clone, Debug)]
pub struct CleanupOutcome {
    /// The surviving k-subsystem.
    pub system: SetSystem,
    /// Its Γ companion (the surplus survivors, up to ⌈γk⌉ of them).
    pub gamma_sets: SetSystem,
    pub deleted: usize,
    pub degree_floor: f64,
}

/// Delete-and-rebin: repeatedly bin any set with no vertex meeting the
/// α·p·k·m degree floor into the union W of the *other* live sets, until the
/// floor holds everywhere. Fails when the bin outgrows the surplus the
/// (1+γ)k-sized input carried.
pub fn cleanup_system(
    g: &Graph,
    lam: &SetSystem,
    gamma: f64,
    alpha: f64,
) -> Result<CleanupOutcome, ShrinkError> {
    let k0 = lam.k();
    let k = ((k0 as f64) / (1.0 + gamma)).floor() as usize;
    if k == 0 {
        return Err(ShrinkError::Invalid("system too small for the target k".into()));
    }
    let cap = k0 - k;
    let m = lam.m();
    let p = g.density();
    let degree_floor = alpha * p * k as f64 * m as f64;
    let mut live: Vec<usize> = (0..k0).collect();
    let mut deleted = 0usize;
    loop {
        let mut removed_any = false;
        let mut idx = 0;
        while idx < live.len() {
            let i = live[idx];
            let w: VertexSet = live
                .iter()
                .filter(|&&j| j != i)
                .fold(VertexSet::new(g.n()), |acc, &j| acc.union(&lam.sets[j]));
            let ok = lam.sets[i]
                .iter()
                .any(|v| g.neighbors(v).intersection_len(&w) as f64 >= degree_floor);
            if ok {
                idx += 1;
            } else {
                live.remove(idx);
                deleted += 1;
                if deleted > cap {
                    return Err(ShrinkError::TooManyDeleted { deleted, cap });
                }
                removed_any = true;
            }
        }
        if !removed_any {
            break;
        }
    }
    let system = SetSystem { sets: live[..k].iter().map(|&i| lam.sets[i].clone()).collect() };
    let gamma_sets = SetSystem { sets: live[k..].iter().map(|&i| lam.sets[i].clone()).collect() };
    Ok(CleanupOutcome { system, gamma_sets, deleted, degree_floor })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutlierReport {
    /// Vertices of the host with degree into Q above q_cap·|Q|.
    pub outliers: usize,
    pub q_size: usize,
    pub q_cap: f64,
}

/// Diamond tree with removables X ∪ Q where Q ⊆ Y is an m-subset of an
/// oversized flexible selection, sampled in two low-degree steps: discard
/// Y-vertices with high degree back into Y, keep the rest
/// with probability 4m/|Y|, trim to m. Reports how many host vertices still
/// exceed the `q_cap` degree fraction into Q.
pub fn build_low_degree_tree(
    g: &Graph,
    r: usize,
    u: &VertexSet,
    m: usize,
    q_cap: f64,
    seed: u64,
) -> Result<(DiamondTree, VertexSet, OutlierReport), ShrinkError> {
    assert!(m >= 2, "m must be at least 2");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sel = oversized_selection(g, r, u, m, &mut rng).map_err(|e| fail("small", e))?;
    let y_all = sel.y.clone();
    let z = y_all.len();
    // Step 1: cap vertices with high degree back into the oversized pool.
    let p = g.density();
    let deg_cap = (2.0 * p * z as f64).max(1.0);
    let mut eligible: Vec<usize> = y_all
        .iter()
        .filter(|&v| (g.neighbors(v).intersection_len(&y_all) as f64) <= deg_cap)
        .collect();
    if eligible.len() < m {
        // Sparse pools have no high-degree offenders worth capping.
        eligible = y_all.to_vec();
    }
    // Step 2: keep with probability 4m/z, then trim / top up to exactly m.
    let p_keep = (4.0 * m as f64 / z.max(1) as f64).min(1.0);
    let mut kept: Vec<usize> = eligible.iter().copied().filter(|_| rng.gen::<f64>() < p_keep).collect();
    kept.shuffle(&mut rng);
    kept.truncate(m);
    for v in eligible {
        if kept.len() == m {
            break;
        }
        if !kept.contains(&v) {
            kept.push(v);
        }
    }
    if kept.len() < m {
        return Err(fail("small", "flexible pool smaller than m"));
    }
    let q_set = VertexSet::from_iter(g.n(), kept.iter().copied());
    let tree = sel.build(&q_set).map_err(|e| fail("small", e.to_string()))?;
    let threshold = q_cap * m as f64;
    let outliers = (0..g.n())
        .filter(|&v| g.neighbors(v).intersection_len(&q_set) as f64 > threshold)
        .count();
    Ok((tree, q_set, OutlierReport { outliers, q_size: m, q_cap }))
}

/// Flexible selection with an oversized optional set Y (target 2m
/// removables), built inside `u` by splitting it into removable and interior
/// halves.
fn oversized_selection(
    g: &Graph,
    r: usize,
    u: &VertexSet,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<FlexibleSelection, String> {
    let mut verts = u.to_vec();
    verts.shuffle(rng);
    if verts.len() < 2 * (2 * m) {
        return Err(format!("pool of {} too small for order-{m} trees", verts.len()));
    }
    // Removable pool gets a third; interior cliques need (r−1) vertices per
    // tree node, so they take the rest.
    let cut = (verts.len() / 3).max(2 * m + 2);
    let u_rem = VertexSet::from_iter(g.n(), verts[..cut.min(verts.len())].iter().copied());
    let u_int = VertexSet::from_iter(g.n(), verts[cut.min(verts.len())..].iter().copied());
    let z = 2 * m;
    let delta = m.max(2);
    use rand::RngCore;
    select_flexible_removable(g, r, &u_rem, &u_int, z, delta, rng.next_u64())
        .map_err(|e| e.to_string())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PopularReport {
    /// Family combinations actually tested.
    pub tested: usize,
    /// True when the combination space exceeded 2^{m/4} and was sampled.
    pub sampled: bool,
    pub warnings: Vec<String>,
}

const POPULAR_SAMPLE: usize = 1_000;
const POPULAR_RETRIES: usize = 12;

/// Diamond tree of order m whose removable set meets, for every tested
/// combination W = (W_0,…,W_{r−2}) from the families, the set Y(W) of
/// vertices extendable to a K_r traversing ({y}, W_0,…,W_{r−2}).
pub fn build_popular_tree(
    g: &Graph,
    r: usize,
    u: &VertexSet,
    m: usize,
    families: &[Vec<VertexSet>],
    seed: u64,
) -> Result<(DiamondTree, PopularReport), ShrinkError> {
    assert!(m >= 2, "m must be at least 2");
    if families.len() != r - 1 {
        return Err(ShrinkError::Invalid(format!(
            "need r-1 = {} families, got {}",
            r - 1,
            families.len()
        )));
    }
    if families.iter().any(|f| f.is_empty()) {
        return Err(ShrinkError::Invalid("empty family".into()));
    }
    let mut warnings = Vec::new();
    let product: f64 = families.iter().map(|f| f.len() as f64).product();
    let bound = 2f64.powf(m as f64 / 4.0);
    if product > bound {
        warnings.push(format!("combination count {product} exceeds 2^(m/4) = {bound:.1}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let combos = enumerate_or_sample_combos(families, product > bound, &mut rng);
    let sampled = product > bound;
    let sel = oversized_selection(g, r, u, m, &mut rng).map_err(|e| fail("large", e))?;
    let y_all = sel.y.to_vec();
    // Y(W) per combination, via budgeted traversing-clique search.
    let mut y_of_w: Vec<Vec<usize>> = Vec::with_capacity(combos.len());
    use rand::RngCore;
    for combo in &combos {
        let mut hits = Vec::new();
        for &y in &y_all {
            let mut sets = vec![VertexSet::from_iter(g.n(), [y])];
            sets.extend(combo.iter().map(|&fi| fi.clone()));
            let q = TraversalQuery::traversing(r, sets);
            if find_traversing_clique_budgeted(g, &q, rng.next_u64(), 20_000).is_ok() {
                hits.push(y);
            }
        }
        if hits.is_empty() {
            return Err(fail("large", "a family combination extends no flexible vertex"));
        }
        y_of_w.push(hits);
    }
    let p_keep = (5.0 * m as f64 / (4.0 * y_all.len().max(1) as f64)).min(1.0);
    for _ in 0..POPULAR_RETRIES {
        let mut kept: Vec<usize> =
            y_all.iter().copied().filter(|_| rng.gen::<f64>() < p_keep).collect();
        kept.shuffle(&mut rng);
        kept.truncate(m);
        if kept.len() < m {
            continue;
        }
        let kept_set = VertexSet::from_iter(g.n(), kept.iter().copied());
        if y_of_w.iter().all(|hits| hits.iter().any(|&y| kept_set.contains(y))) {
            let tree = sel.build(&kept_set).map_err(|e| fail("large", e.to_string()))?;
            return Ok((tree, PopularReport { tested: combos.len(), sampled, warnings }));
        }
    }
    // Deterministic fallback: one hit per combination, topped up to m.
    let mut kept: Vec<usize> = Vec::new();
    for hits in &y_of_w {
        if !hits.iter().any(|y| kept.contains(y)) {
            kept.push(hits[0]);
        }
    }
    for &y in &y_all {
        if kept.len() >= m {
            break;
        }
        if !kept.contains(&y) {
            kept.push(y);
        }
    }
    if kept.len() > m || kept.len() < m {
        return Err(fail("large", "could not seat all combinations inside an order-m set"));
    }
    let kept_set = VertexSet::from_iter(g.n(), kept.iter().copied());
    let tree = sel.build(&kept_set).map_err(|e| fail("large", e.to_string()))?;
    Ok((tree, PopularReport { tested: combos.len(), sampled, warnings }))
}

fn enumerate_or_sample_combos<'a>(
    families: &'a [Vec<VertexSet>],
    sample: bool,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<&'a VertexSet>> {
    if sample {
        (0..POPULAR_SAMPLE)
            .map(|_| families.iter().map(|f| &f[rng.gen_range(0..f.len())]).collect())
            .collect()
    } else {
        let mut out: Vec<Vec<&VertexSet>> = vec![Vec::new()];
        for f in families {
            out = out
                .into_iter()
                .flat_map(|pref| {
                    f.iter().map(move |s| {
                        let mut p = pref.clone();
                        p.push(s);
                        p
                    })
                })
                .collect();
        }
        out
    }
}

/// One (i,j) block of the first-round reservation: forced removables Z and
/// interior reservoir Π are consumed globally; flexible sets Y and Υ are
/// only claimed within their group.
pub struct RoundOneBlock {
    pub z: VertexSet,
    pub pi: VertexSet,
    pub y: VertexSet,
    pub ups: VertexSet,
    pub selection: FlexibleSelection,
}

/// First round of the grouped two-round construction: in lexicographic (i,j)
/// order, reserve per-block (Z, Π, Y, Υ) with the literal disjointness
/// contract — (Z, Π) pairwise disjoint across ALL blocks, (Y, Υ) pairwise
/// disjoint within each group.
pub fn first_round_reservation(
    g: &Graph,
    r: usize,
    u: &VertexSet,
    groups: usize,
    per_group: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<Vec<RoundOneBlock>>, ShrinkError> {
    assert!(groups >= 1 && per_group >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut global_pool = u.clone();
    let mut out: Vec<Vec<RoundOneBlock>> = Vec::with_capacity(groups);
    for _i in 0..groups {
        let mut group: Vec<RoundOneBlock> = Vec::with_capacity(per_group);
        // Y/Υ claims reset per group: blocks of different groups may share
        // flexible vertices, so each group works on a private view.
        let mut group_pool = global_pool.clone();
        for _j in 0..per_group {
            let sel = oversized_selection(g, r, &group_pool, m, &mut rng)
                .map_err(|e| fail("two-round", e))?;
            let base = sel.base_tree();
            let z = sel.x.clone();
            let removables = base.removable_set(g.n());
            let pi = base.vertex_set(g.n()).difference(&removables);
            let y = sel.y.clone();
            // Υ: a reserved expansion pod, flexible like Y.
            let mut spare: Vec<usize> = group_pool
                .to_vec()
                .into_iter()
                .filter(|&v| !base.vertex_set(g.n()).contains(v))
                .collect();
            spare.shuffle(&mut rng);
            let ups = VertexSet::from_iter(g.n(), spare.into_iter().take(m));
            // Global consumption of (Z, Π); group-local consumption of (Y, Υ).
            for v in z.iter().chain(pi.iter()) {
                global_pool.remove(v);
                group_pool.remove(v);
            }
            for v in y.iter().chain(ups.iter()) {
                group_pool.remove(v);
            }
            group.push(RoundOneBlock { z, pi, y, ups, selection: sel });
        }
        out.push(group);
    }
    // Literal assertions of the reservation contract.
    let mut seen_global = VertexSet::new(g.n());
    for group in &out {
        let mut seen_group = VertexSet::new(g.n());
        for b in group {
            for v in b.z.iter().chain(b.pi.iter()) {
                assert!(!seen_global.contains(v), "(Z, Pi) blocks must be globally disjoint");
                seen_global.insert(v);
            }
            for v in b.y.iter().chain(b.ups.iter()) {
                assert!(!seen_group.contains(v), "(Y, Ups) blocks must be disjoint within a group");
                seen_group.insert(v);
            }
        }
    }
    Ok(out)
}

/// Second round: sample Ỹ ⊆ Y per block with the given probability, trim to
/// the block's order, and assemble the diamond trees of one group.
pub fn second_round_assembly(
    g: &Graph,
    group: &[RoundOneBlock],
    m: usize,
    q_prob: f64,
    seed: u64,
) -> Result<Vec<DiamondTree>, ShrinkError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(group.len());
    for b in group {
        let mut kept: Vec<usize> =
            b.y.iter().filter(|_| rng.gen::<f64>() < q_prob).collect();
        kept.shuffle(&mut rng);
        kept.truncate(m);
        for v in b.y.iter() {
            if kept.len() >= m {
                break;
            }
            if !kept.contains(&v) {
                kept.push(v);
            }
        }
        let kept_set = VertexSet::from_iter(g.n(), kept.into_iter());
        let tree = b.selection.build(&kept_set).map_err(|e| fail("two-round", e.to_string()))?;
        trees.push(tree);
    }
    Ok(trees)
}

#[derive(Clone, Debug)]
pub struct ShrinkableCertificate {
    pub orchard: Orchard,
    /// Indices of the reserved suborchard Q.
    pub q: Vec<usize>,
    pub gamma: f64,
    pub report: ShrinkReport,
    /// Which construction path produced the orchard.
    pub path: &'static str,
}

impl ShrinkableCertificate {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "orchard": self.orchard.to_json(),
            "q": self.q,
            "gamma": self.gamma,
            "path": self.path,
            "trials": self.report.trials.iter().map(|t| t.uncovered).collect::<Vec<_>>(),
            "threshold": self.report.threshold,
            "all_pass": self.report.all_pass,
        })
    }
}

pub const CERTIFICATE_TRIALS: usize = 20;

/// Exponent of the small/large density threshold p ≥ n^{−1/(10r)}.
pub fn default_density_threshold(n: usize, r: usize) -> f64 {
    (n as f64).powf(-1.0 / (10.0 * r as f64))
}

/// Build a γ-shrinkable (k, m)-orchard inside `u`, with k·m ≈ α·n: singleton
/// trees for m = 1, low-degree trees when m is below p^{r−1}·n (the small
/// path), popular trees above it (the large path). The returned certificate
/// embeds the sampled shrinkability trials; all must pass.
pub fn construct_shrinkable_orchard(
    g: &Graph,
    u: &VertexSet,
    r: usize,
    m: usize,
    alpha: f64,
    gamma: f64,
    seed: u64,
) -> Result<ShrinkableCertificate, ShrinkError> {
    assert!(m >= 1, "m must be at least 1");
    assert!(alpha > 0.0 && gamma > 0.0 && gamma < 1.0);
    let n = g.n();
    let k = ((alpha * n as f64 / m as f64).ceil() as usize).max(1);
    if k * m > u.len() {
        return Err(ShrinkError::Invalid(format!(
            "target k·m = {} exceeds the working set of {} vertices",
            k * m,
            u.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::RngCore;
    let p = g.density();
    let (trees, path): (Vec<DiamondTree>, &'static str) = if m == 1 {
        let mut verts = u.to_vec();
        verts.shuffle(&mut rng);
        (verts.into_iter().take(k).map(|v| DiamondTree::singleton(r, v)).collect(), "singleton")
    } else if (m as f64) < p.powi(r as i32 - 1) * n as f64 {
        if p < default_density_threshold(n, r) {
            return Err(fail("small", format!("density {p:.3} below the n^(-1/(10r)) threshold")));
        }
        let mut pool = u.clone();
        let mut trees = Vec::with_capacity(k);
        for _ in 0..k {
            let (tree, _q, _rep) =
                build_low_degree_tree(g, r, &pool, m, 1.0, rng.next_u64())?;
            pool = pool.difference(&tree.vertex_set(n));
            trees.push(tree);
        }
        (trees, "small")
    } else {
        let mut pool = u.clone();
        let mut trees: Vec<DiamondTree> = Vec::with_capacity(k);
        for _ in 0..k {
            // Families: the removable sets of already-built trees, so the
            // popularity demand matches what shrinkability will query.
            let choices: Vec<VertexSet> = if trees.is_empty() {
                vec![pool.clone()]
            } else {
                trees.iter().map(|t| t.removable_set(n)).collect()
            };
            let families: Vec<Vec<VertexSet>> = vec![choices; r - 1];
            let (tree, _rep) = build_popular_tree(g, r, &pool, m, &families, rng.next_u64())?;
            pool = pool.difference(&tree.vertex_set(n));
            trees.push(tree);
        }
        (trees, "large")
    };
    let orchard = Orchard::new(trees);
    orchard
        .validate(g)
        .map_err(|e| fail(path, format!("assembled orchard invalid: {e}")))?;
    let q_size = ((gamma * k as f64).ceil() as usize).clamp(1, k);
    let q: Vec<usize> = (k - q_size..k).collect();
    let report = test_shrinkability(g, &orchard, &q, gamma, CERTIFICATE_TRIALS, rng.next_u64());
    if !report.all_pass {
        let worst = report.trials.iter().map(|t| t.uncovered).max().unwrap_or(0);
        return Err(ShrinkError::CertificationFailed(format!(
            "worst trial left {worst} trees uncovered (threshold {})",
            report.threshold
        )));
    }
    Ok(ShrinkableCertificate { orchard, q, gamma, report, path })
}
