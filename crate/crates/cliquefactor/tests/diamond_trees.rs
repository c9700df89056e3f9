use cliquefactor::diamond::*;
use cliquefactor::graph::*;
use proptest::prelude::*;
use std::collections::BTreeSet;

fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    generate_graph(&GraphSpec { kind: GraphKind::Gnp { n, p }, seed }).unwrap()
}

fn split3(n: usize) -> (VertexSet, VertexSet, VertexSet) {
    let a = VertexSet::from_iter(n, 0..n / 3);
    let b = VertexSet::from_iter(n, n / 3..2 * n / 3);
    let c = VertexSet::from_iter(n, 2 * n / 3..n);
    (a, b, c)
}

// Every removable vertex admits a factor extraction: m−1 cliques of size r
// partitioning V(D) ∖ {v}, each a clique of the host.
fn check_all_extractions(g: &Graph, d: &DiamondTree) {
    let m = d.order();
    let verts: BTreeSet<usize> = d.vertices().into_iter().collect();
    assert_eq!(verts.len(), d.num_vertices());
    assert_eq!(d.num_vertices(), (m - 1) * d.r + 1);
    for &v in &d.removable {
        let factor = extract_factor_without(d, v).unwrap();
        assert_eq!(factor.len(), m - 1);
        let mut seen = BTreeSet::new();
        for c in &factor {
            assert_eq!(c.len(), d.r);
            assert!(g.is_clique(c));
            for &x in c {
                assert!(seen.insert(x), "vertex {x} covered twice");
            }
        }
        let mut expect = verts.clone();
        expect.remove(&v);
        assert_eq!(seen, expect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn diamond_star_extracts_at_every_removable(seed in 0u64..1000, delta in 1usize..5) {
        let g = gnp(60, 0.6, seed);
        let (u0, u1, u2) = split3(60);
        if let Ok(d) = build_diamond_star(&g, 3, &u0, &u1, &u2, delta, seed) {
            prop_assert_eq!(d.order(), delta + 1);
            validate_diamond_tree(&g, &d).unwrap();
            check_all_extractions(&g, &d);
        }
    }

    #[test]
    fn scattered_tree_is_valid_and_bounded(seed in 0u64..500, z in 3usize..8, delta in 2usize..4) {
        let g = gnp(80, 0.6, seed);
        let u = VertexSet::from_iter(80, 0..40);
        let w = VertexSet::from_iter(80, 40..80);
        if let Ok(d) = build_scattered_tree(&g, 3, &u, &w, z, delta, seed) {
            validate_diamond_tree(&g, &d).unwrap();
            let m = d.order();
            prop_assert!(m >= z && m <= z + delta);
            // Scatteredness: non-leaf count is at most (m−2)/(δ−1).
            let non_leaves = d.node_degrees().iter().filter(|&&deg| deg > 1).count();
            prop_assert!(non_leaves <= (m - 2) / (delta - 1));
            check_all_extractions(&g, &d);
        }
    }

    #[test]
    fn quartic_trees_also_extract(seed in 0u64..200, delta in 1usize..4) {
        let g = gnp(80, 0.7, seed);
        let (u0, u1, u2) = split3(80);
        if let Ok(d) = build_diamond_star(&g, 4, &u0, &u1, &u2, delta, seed) {
            prop_assert_eq!(d.r, 4);
            validate_diamond_tree(&g, &d).unwrap();
            check_all_extractions(&g, &d);
        }
    }

    #[test]
    fn flexible_selection_serves_every_subset(seed in 0u64..200, z in 2usize..6) {
        let g = gnp(80, 0.6, seed);
        let u = VertexSet::from_iter(80, 0..40);
        let w = VertexSet::from_iter(80, 40..80);
        if let Ok(sel) = select_flexible_removable(&g, 3, &u, &w, z, 3, seed) {
            prop_assert!(sel.x.is_disjoint(&sel.y));
            prop_assert_eq!(sel.x.len() + sel.y.len(), z);
            prop_assert!(sel.x.len() <= (2 * z / 3).max(1));
            let y: Vec<usize> = sel.y.iter().collect();
            for mask in 0u32..1 << y.len() {
                let y_sub = VertexSet::from_iter(80, y.iter().enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &v)| v));
                let d = sel.build(&y_sub).unwrap();
                validate_diamond_tree(&g, &d).unwrap();
                prop_assert_eq!(d.removable_set(80), sel.x.union(&y_sub));
            }
        }
    }
}

#[test]
fn singleton_shape() {
    let d = DiamondTree::singleton(3, 7);
    assert_eq!(d.order(), 1);
    assert_eq!(d.num_vertices(), 1);
    assert_eq!(d.vertices(), vec![7]);
    assert_eq!(extract_factor_without(&d, 7).unwrap(), Vec::<Vec<usize>>::new());
    assert!(extract_factor_without(&d, 8).is_err());
}

#[test]
fn validation_catches_a_broken_interior() {
    let g = gnp(30, 0.9, 1);
    let (u0, u1, u2) = split3(30);
    let mut d = build_diamond_star(&g, 3, &u0, &u1, &u2, 2, 0).unwrap();
    // Corrupt one interior clique with a removable vertex.
    d.interior[0][0] = d.removable[0];
    assert!(validate_diamond_tree(&g, &d).is_err());
}

#[test]
fn restrict_rejects_disconnection() {
    let g = gnp(40, 0.9, 2);
    let (u0, u1, u2) = split3(40);
    let d = build_diamond_star(&g, 3, &u0, &u1, &u2, 3, 0).unwrap();
    // Dropping the star center (node 0) disconnects the leaves.
    let mut keep = vec![true; d.order()];
    keep[0] = false;
    assert!(d.restrict(&keep).is_err());
    // Dropping one leaf keeps a valid tree.
    keep[0] = true;
    keep[1] = false;
    let sub = d.restrict(&keep).unwrap();
    assert_eq!(sub.order(), d.order() - 1);
    validate_diamond_tree(&g, &sub).unwrap();
}

// Bulk check in the spirit of the acceptance suite, at smaller volume:
// random trees of both shapes obey the vertex-count identity.
#[test]
fn vertex_count_identity_over_many_builds() {
    let mut built = 0usize;
    for seed in 0..120u64 {
        let g = gnp(60, 0.65, seed);
        let (u0, u1, u2) = split3(60);
        let delta = 1 + (seed % 4) as usize;
        if let Ok(d) = build_diamond_star(&g, 3 + (seed % 2) as usize, &u0, &u1, &u2, delta, seed) {
            assert_eq!(d.num_vertices(), (d.order() - 1) * d.r + 1);
            built += 1;
        }
    }
    assert!(built >= 80, "only {built} of 120 star builds succeeded");
}
