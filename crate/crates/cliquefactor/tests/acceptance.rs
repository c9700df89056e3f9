//! One test per acceptance criterion; each prints a PASS line on success.

use cliquefactor::absorber::*;
use cliquefactor::diamond::*;
use cliquefactor::fracmatch::*;
use cliquefactor::graph::*;
use cliquefactor::orchard::*;
use cliquefactor::pipeline::*;
use num_bigint::BigInt;
use num_rational::BigRational as Rational;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::time::Instant;

fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    generate_graph(&GraphSpec { kind: GraphKind::Gnp { n, p }, seed }).unwrap()
}

fn split3(n: usize) -> (VertexSet, VertexSet, VertexSet) {
    let a = VertexSet::from_iter(n, 0..n / 3);
    let b = VertexSet::from_iter(n, n / 3..2 * n / 3);
    let c = VertexSet::from_iter(n, 2 * n / 3..n);
    (a, b, c)
}

fn check_all_extractions(g: &Graph, d: &DiamondTree) {
    let m = d.order();
    let verts: BTreeSet<usize> = d.vertices().into_iter().collect();
    assert_eq!(verts.len(), d.num_vertices());
    assert_eq!(d.num_vertices(), (m - 1) * d.r + 1, "vertex-count identity");
    for &v in &d.removable {
        let factor = extract_factor_without(d, v).unwrap();
        assert_eq!(factor.len(), m - 1);
        let mut seen = BTreeSet::new();
        for c in &factor {
            assert_eq!(c.len(), d.r);
            assert!(g.is_clique(c));
            for &x in c {
                assert!(seen.insert(x));
            }
        }
        let mut expect = verts.clone();
        expect.remove(&v);
        assert_eq!(seen, expect);
    }
}

#[test]
fn diamond_tree_identity() {
    let start = Instant::now();
    let graphs: Vec<Graph> = (0..8).map(|s| gnp(120, 0.7, s)).collect();
    let mut built = 0usize;
    let mut seed = 0u64;
    while built < 1000 {
        assert!(seed < 5000, "tree constructions succeed too rarely");
        let g = &graphs[(seed % 8) as usize];
        let (u0, u1, u2) = split3(120);
        let tree = if seed % 3 == 0 {
            let u = u0.union(&u1);
            build_scattered_tree(g, 3, &u, &u2, 3 + (seed % 10) as usize, 2 + (seed % 3) as usize, seed)
        } else {
            let r = 3 + (seed % 2) as usize;
            build_diamond_star(g, r, &u0, &u1, &u2, 1 + (seed % 6) as usize, seed)
        };
        if let Ok(d) = tree {
            assert!(d.order() <= 20);
            validate_diamond_tree(g, &d).unwrap();
            check_all_extractions(g, &d);
            built += 1;
        }
        seed += 1;
    }
    assert!(start.elapsed().as_secs() < 30, "took {:?}", start.elapsed());
    println!("acceptance: diamond-tree identity (1000 trees): PASS");
}

#[test]
fn scattered_leaf_bound() {
    let graphs: Vec<Graph> = (0..4).map(|s| gnp(100, 0.7, 50 + s)).collect();
    let mut built = 0usize;
    let mut seed = 0u64;
    while built < 200 {
        assert!(seed < 2000, "scattered builds succeed too rarely");
        let g = &graphs[(seed % 4) as usize];
        let u = VertexSet::from_iter(100, 0..50);
        let w = VertexSet::from_iter(100, 50..100);
        let delta = 2 + (seed % 3) as usize;
        if let Ok(d) = build_scattered_tree(g, 3, &u, &w, 3 + (seed % 9) as usize, delta, seed) {
            let m = d.order();
            let non_leaves = d.node_degrees().iter().filter(|&&deg| deg > 1).count();
            assert!(
                non_leaves <= (m - 2) / (delta - 1),
                "non-leaves {non_leaves} above (m-2)/(delta-1) for m = {m}, delta = {delta}"
            );
            built += 1;
        }
        seed += 1;
    }
    println!("acceptance: scattered-tree leaf bound (200 builds): PASS");
}

fn random_hypergraph(n: usize, r: usize, density: f64, seed: u64) -> Hypergraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                if rng.gen::<f64>() < density {
                    edges.push(vec![a, b, c]);
                }
            }
        }
    }
    if edges.is_empty() {
        edges.push((0..r).collect());
    }
    Hypergraph::new(n, r, edges).unwrap()
}

#[test]
fn lp_duality_and_fano() {
    let start = Instant::now();
    for seed in 0..500u64 {
        let n = 6 + (seed % 7) as usize; // 6..12
        let h = random_hypergraph(n, 3, 0.15 + 0.5 * (seed % 5) as f64 / 5.0, seed);
        let sol = solve_fractional(&h);
        assert!((sol.nu_star - sol.tau_star).abs() < 1e-9);
        assert!(sol.nu_star <= n as f64 / 3.0 + 1e-9);
        assert!(sol.nu_star + 1e-9 >= max_matching_exhaustive(&h) as f64);
    }
    let fano = Hypergraph::new(
        7,
        3,
        vec![
            vec![0, 1, 2],
            vec![0, 3, 4],
            vec![0, 5, 6],
            vec![1, 3, 5],
            vec![1, 4, 6],
            vec![2, 3, 6],
            vec![2, 4, 5],
        ],
    )
    .unwrap();
    let sol = solve_fractional(&fano);
    assert_eq!(
        sol.nu_star_exact,
        Some(Rational::new(BigInt::from(7), BigInt::from(3)))
    );
    assert!(start.elapsed().as_secs() < 60, "took {:?}", start.elapsed());
    println!("acceptance: LP duality on 500 hypergraphs + Fano 7/3: PASS");
}

#[test]
fn pfm_family_pair_cap() {
    let mut successes = 0usize;
    for seed in 0..100u64 {
        let n = 9 + (seed % 10) as usize; // 9..18
        let h = random_hypergraph(n, 3, 0.85, seed);
        if let Ok(fam) = greedy_pfm_family(&h, 3, 0.5) {
            successes += 1;
            assert!(
                fam.max_pair_load() <= 2.0 + 1e-6,
                "seed {seed}: pair load {}",
                fam.max_pair_load()
            );
        }
    }
    assert!(successes >= 50, "only {successes}/100 families completed");
    println!("acceptance: PFM-family pair load <= 2 ({successes}/100 successes): PASS");
}

#[test]
fn sparsified_matching_coverage() {
    let h = Hypergraph::complete(30, 3);
    let fam = greedy_pfm_family(&h, 10, 1.5).unwrap();
    let mut good = 0;
    for seed in 0..20u64 {
        if sparsified_almost_matching(&h, &fam, seed).uncovered <= 3 {
            good += 1;
        }
    }
    assert!(good >= 18, "only {good}/20 seeds left at most 3 uncovered");
    println!("acceptance: sparsified matching coverage ({good}/20): PASS");
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn template_suite() {
    let start = Instant::now();
    for t in 2..=6usize {
        let tpl = build_template(t, 40, 0).unwrap();
        assert!(tpl.max_degree() <= 40);
        let report = verify_template(&tpl, &VerifyMode::Exhaustive).unwrap();
        assert!(report.ok && report.exhaustive, "t = {t}");
        assert_eq!(report.checked, binom(2 * t, t));
    }
    assert!(start.elapsed().as_secs() < 120, "took {:?}", start.elapsed());
    println!("acceptance: template suite t in 2..=6: PASS");
}

#[test]
fn absorbing_structure_contract() {
    let mut absorbed = 0usize;
    for seed in 0..20u64 {
        let g = gnp(500, 0.5, seed);
        let a = build_absorbing_structure(&g, &g.vertex_set(), 3, 3, 4, seed).unwrap();
        a.validate(&g).unwrap();
        assert!(a.num_vertices(g.n()) <= 12 * 3 * 3 * 4);
        // Divisibility forces the only admissible rem orchard here to be
        // empty: the structure spans 138 ≡ 0 (mod 3) vertices, every r = 3
        // diamond tree spans ≡ 1 (mod 3), and (r−1)k ≤ t caps rem at one
        // tree.
        let rem = Orchard::new(vec![]);
        if let Ok(out) = absorb(&g, &a, &rem, seed) {
            check_factor(&g, &out.factor, &a.vertex_set(g.n())).unwrap();
            absorbed += 1;
        }
    }
    assert!(absorbed >= 16, "absorb succeeded only {absorbed}/20 times");
    println!("acceptance: absorbing-structure contract ({absorbed}/20 absorbs): PASS");
}

#[test]
fn orchard_absorption() {
    let mut good = 0usize;
    for seed in 0..20u64 {
        let g = gnp(150, 0.6, seed);
        let big = Orchard::new((0..24).map(|v| DiamondTree::singleton(3, v)).collect());
        let small = Orchard::new((24..26).map(|v| DiamondTree::singleton(3, v)).collect());
        if let Ok(res) = absorb_orchard(&g, &big, &small, &AbsorbParams::default(), seed) {
            assert_eq!(res.used.len(), 4);
            let expected = res.used.iter().fold(small.vertex_set(g.n()), |acc, &i| {
                acc.union(&big.trees[i].vertex_set(g.n()))
            });
            check_factor(&g, &res.factor, &expected).unwrap();
            good += 1;
        }
    }
    assert!(good >= 18, "only {good}/20 absorptions succeeded");
    println!("acceptance: orchard absorption ({good}/20): PASS");
}

#[test]
fn exhaustive_hypergraph_equivalence() {
    for seed in 0..50u64 {
        let g = gnp(90, 0.55, seed);
        let k = 3 + (seed % 6) as usize;
        let mut trees = Vec::new();
        for i in 0..k {
            let base = i * 9;
            let u0 = VertexSet::from_iter(90, base..base + 3);
            let u1 = VertexSet::from_iter(90, base + 3..base + 6);
            let u2 = VertexSet::from_iter(90, base + 6..base + 9);
            let tree = build_diamond_star(&g, 3, &u0, &u1, &u2, 1, seed.wrapping_add(i as u64))
                .unwrap_or_else(|_| DiamondTree::singleton(3, base));
            trees.push(tree);
        }
        let o = Orchard::new(trees);
        let h = build_kr_hypergraph(&g, &o, &HypergraphMode::Exhaustive);
        let got: BTreeSet<Vec<usize>> = h.edges.iter().cloned().collect();
        let mut want = BTreeSet::new();
        for a in 0..k {
            for b in a + 1..k {
                for c in b + 1..k {
                    'search: for &x in &o.trees[a].removable {
                        for &y in &o.trees[b].removable {
                            for &z in &o.trees[c].removable {
                                if g.has_edge(x, y) && g.has_edge(x, z) && g.has_edge(y, z) {
                                    want.insert(vec![a, b, c]);
                                    break 'search;
                                }
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(got, want, "seed {seed}");
    }
    println!("acceptance: exhaustive hypergraph equivalence (50 orchards): PASS");
}

#[test]
fn end_to_end_factoring() {
    for (n, p) in [(30usize, 0.6f64), (60, 0.5), (99, 0.5)] {
        let mut good = 0;
        for seed in 0..10u64 {
            let start = Instant::now();
            let g = gnp(n, p, seed);
            if let Ok(cert) = find_clique_factor(&g, &ParameterProfile::default_for(n, 3)) {
                verify_factor(&g, &cert.cliques).unwrap();
                assert!(cert.verified);
                good += 1;
            }
            assert!(start.elapsed().as_secs() < 120, "run ({n}, {p}, {seed}) took {:?}", start.elapsed());
        }
        assert!(good >= 8, "G({n}, {p}): only {good}/10 verified factors");
        println!("acceptance: end-to-end G({n}, {p}) ({good}/10): PASS");
    }
    // Agreement with the exact baseline on exhaustively solvable hosts.
    let mut failures = 0usize;
    let mut total = 0usize;
    for seed in 0..15u64 {
        for p in [0.7f64, 0.75] {
            total += 1;
            let g = gnp(24, p, seed.wrapping_add((p * 100.0) as u64));
            match (exact_factor_baseline(&g, 3), find_clique_factor(&g, &ParameterProfile::default_for(24, 3))) {
                (Ok(_), Err(_)) => failures += 1,
                (_, Ok(cert)) => verify_factor(&g, &cert.cliques).unwrap(),
                _ => {}
            }
        }
    }
    assert_eq!(total, 30);
    assert!(failures * 5 <= total, "{failures}/{total} agreement failures (cap 20%)");
    println!("acceptance: pipeline-vs-exact agreement ({failures}/{total} failures): PASS");
}

#[test]
fn spectral_sanity() {
    let mut petersen = Graph::new(10);
    for i in 0..5 {
        petersen.add_edge(i, (i + 1) % 5);
        petersen.add_edge(5 + i, 5 + (i + 2) % 5);
        petersen.add_edge(i, 5 + i);
    }
    assert!((spectral_lambda(&petersen).unwrap() - 2.0).abs() < 1e-8);
    let mut k33 = Graph::new(6);
    for u in 0..3 {
        for v in 3..6 {
            k33.add_edge(u, v);
        }
    }
    assert!((spectral_lambda(&k33).unwrap() - 3.0).abs() < 1e-8);
    let mut within = 0usize;
    let bound = 3.0 * 20f64.sqrt();
    for seed in 0..50u64 {
        let g = generate_graph(&GraphSpec { kind: GraphKind::RandomRegular { n: 200, d: 20 }, seed })
            .unwrap();
        let lam = spectral_lambda(&g).unwrap();
        if lam <= bound {
            within += 1;
        }
        // Expander mixing: every sampled pair's discrepancy at p = d/n must
        // stay within lambda.
        let audit = jumbledness_audit(&g, 0.1, &AuditStrategy::Sampled { k: 200, seed }).unwrap();
        assert_eq!(audit.lambda_consistent, Some(true), "seed {seed}");
    }
    assert!(within >= 48, "lambda <= 3*sqrt(20) in only {within}/50 draws");
    println!("acceptance: spectral sanity ({within}/50 within bound): PASS");
}
