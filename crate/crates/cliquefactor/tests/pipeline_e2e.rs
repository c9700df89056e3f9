use cliquefactor::graph::*;
use cliquefactor::pipeline::*;

fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    generate_graph(&GraphSpec { kind: GraphKind::Gnp { n, p }, seed }).unwrap()
}

fn complete(n: usize) -> Graph {
    generate_graph(&GraphSpec { kind: GraphKind::Complete { n }, seed: 0 }).unwrap()
}

fn cycle(n: usize) -> Graph {
    let mut g = Graph::new(n);
    for i in 0..n {
        g.add_edge(i, (i + 1) % n);
    }
    g
}

#[test]
fn baseline_factors_k6_into_two_triangles() {
    let factor = exact_factor_baseline(&complete(6), 3).unwrap();
    assert_eq!(factor.len(), 2);
    verify_factor(&complete(6), &factor).unwrap();
}

#[test]
fn baseline_detects_infeasibility() {
    // C6 is triangle-free.
    assert!(matches!(exact_factor_baseline(&cycle(6), 3), Err(PipelineError::Infeasible)));
}

#[test]
fn baseline_rejects_large_and_indivisible_inputs() {
    assert!(matches!(
        exact_factor_baseline(&complete(36), 3),
        Err(PipelineError::TooLarge { .. })
    ));
    assert!(matches!(
        exact_factor_baseline(&complete(7), 3),
        Err(PipelineError::DivisibilityViolation { .. })
    ));
}

#[test]
fn clique_enumeration_matches_binomials() {
    assert_eq!(enumerate_cliques(&complete(6), 3).len(), 20);
    assert_eq!(enumerate_cliques(&cycle(6), 3).len(), 0);
    let g = gnp(10, 0.6, 0);
    for c in enumerate_cliques(&g, 3) {
        assert!(g.is_clique(&c));
    }
}

#[test]
fn pipeline_factors_a_complete_host() {
    let g = complete(30);
    let cert = find_clique_factor(&g, &ParameterProfile::default_for(30, 3)).unwrap();
    assert!(cert.verified);
    assert_eq!(cert.cliques.len(), 10);
    verify_factor(&g, &cert.cliques).unwrap();
    let ph = &cert.phases;
    assert_eq!((ph.s1 + ph.s2 + ph.s3 + ph.s4) * 3, 30);
}

#[test]
fn pipeline_rejects_indivisible_n() {
    let g = gnp(31, 0.6, 0);
    assert!(matches!(
        find_clique_factor(&g, &ParameterProfile::default_for(31, 3)),
        Err(PipelineError::DivisibilityViolation { .. })
    ));
}

#[test]
fn profile_validation_catches_nonsense() {
    let mut p = ParameterProfile::default_for(60, 3);
    p.alpha = 0.0;
    assert!(p.validate().is_err());
    let mut p = ParameterProfile::default_for(60, 3);
    p.level_orders = vec![2];
    assert!(p.validate().is_err());
    let mut p = ParameterProfile::default_for(60, 3);
    p.t_template = 1;
    assert!(p.validate().is_err());
    assert!(ParameterProfile::default_for(60, 3).validate().is_ok());
}

#[test]
fn pipeline_is_deterministic_for_a_fixed_profile() {
    let g = gnp(60, 0.5, 4);
    let profile = ParameterProfile::default_for(60, 3);
    let a = find_clique_factor(&g, &profile).unwrap();
    let b = find_clique_factor(&g, &profile).unwrap();
    assert_eq!(a.cliques, b.cliques);
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn verify_factor_rejects_bad_covers() {
    let g = complete(6);
    assert!(verify_factor(&g, &[vec![0, 1, 2]]).is_err()); // incomplete
    assert!(verify_factor(&g, &[vec![0, 1, 2], vec![2, 3, 4]]).is_err()); // overlap
    let mut h = cycle(6);
    h.add_edge(0, 2);
    // {0,1,2} is a triangle but {3,4,5} is not.
    assert!(verify_factor(&h, &[vec![0, 1, 2], vec![3, 4, 5]]).is_err());
}

#[test]
fn random_hosts_factor_at_moderate_density() {
    let mut ok = 0;
    for seed in 0..5u64 {
        let g = gnp(60, 0.5, seed + 40);
        if let Ok(cert) = find_clique_factor(&g, &ParameterProfile::default_for(60, 3)) {
            verify_factor(&g, &cert.cliques).unwrap();
            ok += 1;
        }
    }
    assert!(ok >= 4, "only {ok}/5 random hosts factored");
}

// On exhaustively solvable hosts the pipeline agrees with the exact
// baseline about feasibility.
#[test]
fn pipeline_agrees_with_the_exact_baseline() {
    let mut disagreements = 0;
    for seed in 0..10u64 {
        let g = gnp(24, 0.7, seed);
        let exact = exact_factor_baseline(&g, 3);
        let pipe = find_clique_factor(&g, &ParameterProfile::default_for(24, 3));
        match (&exact, &pipe) {
            (Ok(_), Ok(cert)) => verify_factor(&g, &cert.cliques).unwrap(),
            (Err(PipelineError::Infeasible), Err(_)) => {}
            _ => disagreements += 1,
        }
    }
    assert!(disagreements <= 2, "{disagreements}/10 disagreements");
}
