use cliquefactor::absorber::*;
use cliquefactor::diamond::{validate_diamond_tree, DiamondTree};
use cliquefactor::graph::*;
use cliquefactor::orchard::Orchard;

fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    generate_graph(&GraphSpec { kind: GraphKind::Gnp { n, p }, seed }).unwrap()
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

// Independent oracle via Hall's condition: I matches into J∖J̄ iff every
// subset S ⊆ I has |N(S)∖J̄| ≥ |S|. Only tractable for small t.
fn hall_verifies(tpl: &Template, jbar: &[usize]) -> bool {
    let i_n = tpl.i_count();
    assert!(i_n <= 12);
    for mask in 1u32..1 << i_n {
        let s: Vec<usize> = (0..i_n).filter(|&i| mask >> i & 1 == 1).collect();
        let mut nbrs: Vec<usize> = s
            .iter()
            .flat_map(|&i| tpl.neighbors_of_i(i))
            .filter(|j| !jbar.contains(j))
            .collect();
        nbrs.sort_unstable();
        nbrs.dedup();
        if nbrs.len() < s.len() {
            return false;
        }
    }
    true
}

fn flexible_subsets(tpl: &Template) -> Vec<Vec<usize>> {
    let t = tpl.t;
    let pool: Vec<usize> = (2 * t..4 * t).collect();
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
    go(&pool, t, 0, &mut cur, &mut out);
    out
}

#[test]
fn built_templates_verify_against_halls_condition() {
    for t in [2usize, 3] {
        let tpl = build_template(t, 40, 0).unwrap();
        assert!(tpl.max_degree() <= 40);
        let report = verify_template(&tpl, &VerifyMode::Exhaustive).unwrap();
        assert!(report.ok, "t = {t}");
        assert!(report.exhaustive);
        assert_eq!(report.checked, binom(2 * t, t));
        for jbar in flexible_subsets(&tpl) {
            assert!(hall_verifies(&tpl, &jbar), "t = {t}, J-bar {jbar:?}");
        }
    }
}

#[test]
fn fragile_template_fails_verification() {
    // I-vertex 0 leans on a single flexible J-vertex; removing it breaks
    // the matching.
    let t = 2;
    let mut edges = vec![(0, 4)];
    for i in 1..6 {
        for j in 0..8 {
            edges.push((i, j));
        }
    }
    let tpl = Template { t, edges };
    let report = verify_template(&tpl, &VerifyMode::Exhaustive).unwrap();
    assert!(!report.ok);
    let failing = report.failing.unwrap();
    assert!(failing.contains(&4));
    assert!(!hall_verifies(&tpl, &failing));
}

#[test]
fn template_builder_rejects_degenerate_parameters() {
    assert!(build_template(1, 40, 0).is_err());
    assert!(build_template(3, 1, 0).is_err());
    let dup = Template { t: 2, edges: vec![(0, 0), (0, 0)] };
    assert!(verify_template(&dup, &VerifyMode::Exhaustive).is_err());
    let oob = Template { t: 2, edges: vec![(0, 8)] };
    assert!(verify_template(&oob, &VerifyMode::Exhaustive).is_err());
}

#[test]
fn intersecting_tree_hits_its_quota() {
    let g = gnp(300, 0.5, 4);
    let targets: Vec<VertexSet> =
        (0..8).map(|i| VertexSet::from_iter(300, i * 10..(i + 1) * 10)).collect();
    let w = VertexSet::from_iter(300, 80..300);
    let caps = IntersectCaps { order_cap: 8, delta: 2 };
    let (tree, report) = build_intersecting_tree(&g, 3, &w, &targets, &caps, 0).unwrap();
    validate_diamond_tree(&g, &tree).unwrap();
    assert!(tree.order() <= caps.order_cap);
    assert_eq!(report.required, 8usize.div_ceil(12));
    assert!(report.hit_targets.len() >= report.required);
    let rem = tree.removable_set(300);
    for (i, tgt) in targets.iter().enumerate() {
        assert_eq!(report.per_target[i], rem.intersection_len(tgt));
        assert_eq!(report.hit_targets.contains(&i), report.per_target[i] > 0);
    }
}

#[test]
fn intersecting_tree_rejects_overlapping_targets() {
    let g = gnp(100, 0.5, 0);
    let a = VertexSet::from_iter(100, 0..10);
    let b = VertexSet::from_iter(100, 5..15);
    let w = VertexSet::from_iter(100, 20..100);
    let caps = IntersectCaps { order_cap: 6, delta: 2 };
    assert!(build_intersecting_tree(&g, 3, &w, &[a.clone(), b], &caps, 0).is_err());
    assert!(build_intersecting_tree(&g, 3, &w, &[], &caps, 0).is_err());
    let overlapping_pool = VertexSet::from_iter(100, 5..100);
    assert!(build_intersecting_tree(&g, 3, &overlapping_pool, &[a], &caps, 0).is_err());
}

fn build_structure(seed: u64) -> (Graph, AbsorbingStructure) {
    let g = gnp(500, 0.5, seed);
    let w = g.vertex_set();
    let a = build_absorbing_structure(&g, &w, 3, 3, 4, seed).unwrap();
    (g, a)
}

#[test]
fn absorbing_structure_satisfies_every_clause() {
    let (g, a) = build_structure(0);
    a.validate(&g).unwrap();
    // 3t disjoint (r−1)-cliques + 4t disjoint order-4 trees, all disjoint.
    assert_eq!(a.i_cliques.len(), 9);
    assert_eq!(a.j_orchard.k(), 12);
    let n_verts = a.num_vertices(g.n());
    assert_eq!(n_verts, 9 * 2 + 12 * (4 + 3 * 2)); // 138
    assert!(n_verts <= 12 * 3 * 3 * 4);
    // Manual recheck of the edge-witness clause, independent of validate().
    for &(i, j) in &a.template.edges {
        let s = &a.i_cliques[i];
        assert!(a.j_orchard.trees[j]
            .removable
            .iter()
            .any(|&v| s.iter().all(|&u| g.has_edge(u, v))));
    }
}

#[test]
fn absorbing_an_empty_remainder_factors_the_structure() {
    let (g, a) = build_structure(1);
    let out = absorb(&g, &a, &Orchard::new(vec![]), 7).unwrap();
    assert!(out.p1.is_empty());
    assert_eq!(out.p2.len(), 3); // t flexible trees spent as padding
    assert_eq!(out.matching.len(), 9); // 3t matched template pairs
    check_factor(&g, &out.factor, &a.vertex_set(g.n())).unwrap();
}

#[test]
fn absorb_rejects_indivisible_totals() {
    let (g, a) = build_structure(2);
    let vs = a.vertex_set(g.n());
    let outside = (0..g.n()).find(|&v| !vs.contains(v)).unwrap();
    let rem = Orchard::new(vec![DiamondTree::singleton(3, outside)]);
    // 138 + 1 vertices is not divisible by 3.
    assert!(matches!(
        absorb(&g, &a, &rem, 0),
        Err(AbsorberError::DivisibilityViolation { .. })
    ));
}

#[test]
fn absorb_rejects_overlap_and_oversized_remainders() {
    let (g, a) = build_structure(3);
    let vs = a.vertex_set(g.n());
    let mut outside = (0..g.n()).filter(|&v| !vs.contains(v));
    let inside = vs.iter().next().unwrap();
    // Three singletons keep the total divisible; one overlaps the structure.
    let overlapping = Orchard::new(vec![
        DiamondTree::singleton(3, inside),
        DiamondTree::singleton(3, outside.next().unwrap()),
        DiamondTree::singleton(3, outside.next().unwrap()),
    ]);
    assert!(matches!(absorb(&g, &a, &overlapping, 0), Err(AbsorberError::Invalid(_))));
    // Three disjoint singletons need (r−1)·3 = 6 flexible trees, above t = 3.
    let mut fresh = (0..g.n()).filter(|&v| !vs.contains(v));
    let oversized = Orchard::new(
        (0..3).map(|_| DiamondTree::singleton(3, fresh.next().unwrap())).collect(),
    );
    assert!(matches!(absorb(&g, &a, &oversized, 0), Err(AbsorberError::Failed { .. })));
}

#[test]
fn structure_build_needs_room() {
    let g = gnp(15, 0.5, 0);
    let w = g.vertex_set();
    assert!(matches!(
        build_absorbing_structure(&g, &w, 3, 3, 4, 0),
        Err(AbsorberError::StageFailed { stage: 1, .. })
    ));
}
