use cliquefactor::graph::*;
use proptest::prelude::*;

fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    generate_graph(&GraphSpec { kind: GraphKind::Gnp { n, p }, seed }).unwrap()
}

fn petersen() -> Graph {
    let mut g = Graph::new(10);
    for i in 0..5 {
        g.add_edge(i, (i + 1) % 5); // outer cycle
        g.add_edge(5 + i, 5 + (i + 2) % 5); // inner pentagram
        g.add_edge(i, 5 + i); // spokes
    }
    g
}

fn complete_bipartite(a: usize, b: usize) -> Graph {
    let mut g = Graph::new(a + b);
    for u in 0..a {
        for v in a..a + b {
            g.add_edge(u, v);
        }
    }
    g
}

#[test]
fn paley_5_is_the_5_cycle() {
    let g = generate_graph(&GraphSpec { kind: GraphKind::Paley { n: 5 }, seed: 0 }).unwrap();
    // Quadratic residues mod 5 are {1, 4}: exactly the cycle edges.
    assert_eq!(g.edge_count(), 5);
    for v in 0..5 {
        assert_eq!(g.degree(v), 2);
        assert!(g.has_edge(v, (v + 1) % 5));
    }
}

#[test]
fn paley_rejects_bad_modulus() {
    assert!(generate_graph(&GraphSpec { kind: GraphKind::Paley { n: 7 }, seed: 0 }).is_err());
    assert!(generate_graph(&GraphSpec { kind: GraphKind::Paley { n: 15 }, seed: 0 }).is_err());
}

#[test]
fn random_regular_is_regular() {
    let g = generate_graph(&GraphSpec { kind: GraphKind::RandomRegular { n: 50, d: 6 }, seed: 3 })
        .unwrap();
    assert_eq!(regular_degree(&g).unwrap(), 6);
}

#[test]
fn generation_is_deterministic() {
    let a = gnp(40, 0.5, 7);
    let b = gnp(40, 0.5, 7);
    assert_eq!(a.edges(), b.edges());
    let c = gnp(40, 0.5, 8);
    assert_ne!(a.edges(), c.edges());
}

#[test]
fn spectral_k4_is_one() {
    let g = generate_graph(&GraphSpec { kind: GraphKind::Complete { n: 4 }, seed: 0 }).unwrap();
    assert!((spectral_lambda(&g).unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn spectral_k33_is_three() {
    let g = complete_bipartite(3, 3);
    assert!((spectral_lambda(&g).unwrap() - 3.0).abs() < 1e-8);
}

#[test]
fn spectral_petersen_is_two() {
    assert!((spectral_lambda(&petersen()).unwrap() - 2.0).abs() < 1e-8);
}

#[test]
fn spectral_rejects_irregular() {
    let mut g = Graph::new(3);
    g.add_edge(0, 1);
    assert!(spectral_lambda(&g).is_err());
}

#[test]
fn json_round_trip() {
    let g = gnp(20, 0.4, 11);
    let back = Graph::from_json(&g.to_json()).unwrap();
    assert_eq!(g.edges(), back.edges());
    assert_eq!(g.n(), back.n());
}

// Independent recomputation of the exhaustive audit on a fixed small graph.
#[test]
fn exhaustive_audit_matches_brute_force() {
    let g = gnp(5, 0.5, 2);
    let p = 0.5;
    let audit = jumbledness_audit(&g, p, &AuditStrategy::ExhaustiveSmall).unwrap();
    let mut best = 0.0f64;
    for am in 1u32..32 {
        for bm in 1u32..32 {
            let a: Vec<usize> = (0..5).filter(|&i| am >> i & 1 == 1).collect();
            let b: Vec<usize> = (0..5).filter(|&i| bm >> i & 1 == 1).collect();
            let mut e = 0usize;
            for &u in &a {
                for &v in &b {
                    if g.has_edge(u, v) {
                        e += 1;
                    }
                }
            }
            let disc = (e as f64 - p * (a.len() * b.len()) as f64).abs()
                / ((a.len() * b.len()) as f64).sqrt();
            best = best.max(disc);
        }
    }
    assert!((audit.beta_empirical - best).abs() < 1e-12);
    assert_eq!(audit.samples, 31 * 31);
}

#[test]
fn exhaustive_audit_rejects_large_hosts() {
    let g = gnp(MAX_EXHAUSTIVE_N + 1, 0.5, 0);
    assert!(jumbledness_audit(&g, 0.5, &AuditStrategy::ExhaustiveSmall).is_err());
}

// Expander mixing: for a d-regular graph at p = d/n, every tested pair's
// discrepancy is at most λ.
#[test]
fn sampled_audit_is_mixing_consistent() {
    let g = generate_graph(&GraphSpec { kind: GraphKind::RandomRegular { n: 60, d: 8 }, seed: 1 })
        .unwrap();
    let audit =
        jumbledness_audit(&g, 8.0 / 60.0, &AuditStrategy::Sampled { k: 500, seed: 9 }).unwrap();
    assert_eq!(audit.lambda_consistent, Some(true));
    assert!(audit.beta_empirical <= audit.lambda.unwrap() + 1e-9);
}

proptest! {
    #[test]
    fn edge_count_between_matches_naive(seed in 0u64..200, am in 1u32..256, bm in 1u32..256) {
        let g = gnp(8, 0.5, seed);
        let a = VertexSet::from_iter(8, (0..8).filter(|&i| am >> i & 1 == 1));
        let b = VertexSet::from_iter(8, (0..8).filter(|&i| bm >> i & 1 == 1));
        let naive: usize = a.iter().map(|u| b.iter().filter(|&v| g.has_edge(u, v)).count()).sum();
        prop_assert_eq!(edge_count_between(&g, &a, &b), naive);
    }

    #[test]
    fn full_pair_counts_each_edge_twice(seed in 0u64..200) {
        let g = gnp(12, 0.5, seed);
        let v = g.vertex_set();
        prop_assert_eq!(edge_count_between(&g, &v, &v), 2 * g.edge_count());
    }

    #[test]
    fn vertex_set_algebra(am in 0u32..1024, bm in 0u32..1024) {
        let a = VertexSet::from_iter(10, (0..10).filter(|&i| am >> i & 1 == 1));
        let b = VertexSet::from_iter(10, (0..10).filter(|&i| bm >> i & 1 == 1));
        let u = a.union(&b);
        let i = a.intersect(&b);
        prop_assert_eq!(u.len() + i.len(), a.len() + b.len());
        prop_assert!(i.is_subset(&a) && i.is_subset(&b));
        prop_assert!(a.is_subset(&u) && b.is_subset(&u));
        prop_assert_eq!(a.difference(&b).intersection_len(&b), 0);
        prop_assert_eq!(a.intersection_len(&b), i.len());
        let full = VertexSet::full(10);
        prop_assert_eq!(full.difference(&a).len(), 10 - a.len());
    }

    #[test]
    fn common_neighbors_matches_naive(seed in 0u64..100, s0 in 0usize..8, s1 in 0usize..8) {
        let g = gnp(8, 0.6, seed);
        prop_assume!(s0 != s1);
        let w = g.vertex_set();
        let c = common_neighbors_of(&g, &[s0, s1], &w).unwrap();
        for v in 0..8 {
            prop_assert_eq!(c.contains(v), g.has_edge(v, s0) && g.has_edge(v, s1));
        }
    }
}
