use cliquefactor::cliques::*;
use cliquefactor::graph::*;
use proptest::prelude::*;

fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    generate_graph(&GraphSpec { kind: GraphKind::Gnp { n, p }, seed }).unwrap()
}

// Oracle: does any clique traverse the sets? Checks every assignment of
// distinct vertices, one per set, by direct recursion.
fn oracle_has_traversing_clique(g: &Graph, sets: &[VertexSet]) -> bool {
    fn go(g: &Graph, sets: &[VertexSet], chosen: &mut Vec<usize>) -> bool {
        let i = chosen.len();
        if i == sets.len() {
            return true;
        }
        for v in sets[i].iter() {
            if chosen.contains(&v) || chosen.iter().any(|&u| !g.has_edge(u, v)) {
                continue;
            }
            chosen.push(v);
            if go(g, sets, chosen) {
                return true;
            }
            chosen.pop();
        }
        false
    }
    go(g, sets, &mut Vec::new())
}

fn mask_set(n: usize, m: u32) -> VertexSet {
    VertexSet::from_iter(n, (0..n).filter(|&i| m >> i & 1 == 1))
}

proptest! {
    // The budgeted search is complete at this scale: success iff the oracle
    // finds a traversing clique.
    #[test]
    fn traversing_search_is_complete(seed in 0u64..300, m0 in 1u32..128, m1 in 1u32..128, m2 in 1u32..128) {
        let g = gnp(7, 0.5, seed);
        let sets = vec![mask_set(7, m0), mask_set(7, m1), mask_set(7, m2)];
        let q = TraversalQuery::traversing(3, sets.clone());
        let found = find_traversing_clique(&g, &q, seed);
        prop_assert_eq!(found.is_ok(), oracle_has_traversing_clique(&g, &sets));
        if let Ok(c) = found {
            prop_assert!(g.is_clique(c.vertices()));
            prop_assert!(traversal_assignment(7, c.vertices(), &sets).is_some());
        }
    }

    #[test]
    fn traversal_assignment_is_a_system_of_representatives(seed in 0u64..100, m0 in 1u32..128, m1 in 1u32..128) {
        let g = gnp(7, 0.7, seed);
        let sets = vec![mask_set(7, m0), mask_set(7, m1)];
        if let Ok(c) = find_traversing_clique(&g, &TraversalQuery::traversing(2, sets.clone()), seed) {
            let assign = traversal_assignment(7, c.vertices(), &sets).unwrap();
            let mut used = vec![false; sets.len()];
            for (vi, &si) in assign.iter().enumerate() {
                prop_assert!(sets[si].contains(c.vertices()[vi]));
                prop_assert!(!used[si]);
                used[si] = true;
            }
        }
    }
}

#[test]
fn forbidden_edges_are_avoided() {
    let g = generate_graph(&GraphSpec { kind: GraphKind::Complete { n: 6 }, seed: 0 }).unwrap();
    let all = g.vertex_set();
    // Forbid every edge through vertex 0 except (0,1) and (0,2); a triangle
    // through 0 must then be {0,1,2}.
    let forbidden: Vec<(usize, usize)> = (3..6).map(|v| (0, v)).collect();
    let q = TraversalQuery::traversing(
        3,
        vec![VertexSet::from_iter(6, [0]), all.clone(), all.clone()],
    )
    .forbid(forbidden);
    let c = find_traversing_clique(&g, &q, 0).unwrap();
    let mut v = c.vertices().to_vec();
    v.sort_unstable();
    assert_eq!(v, vec![0, 1, 2]);
}

#[test]
fn forbidding_a_non_edge_is_rejected() {
    let mut g = Graph::new(3);
    g.add_edge(0, 1);
    let q = TraversalQuery::traversing(2, vec![g.vertex_set(), g.vertex_set()]).forbid([(0, 2)]);
    assert!(matches!(find_traversing_clique(&g, &q, 0), Err(CliqueError::BadQuery(_))));
}

#[test]
fn degree_targets_filter_results() {
    let g = gnp(12, 0.6, 5);
    let all = g.vertex_set();
    let mut q = TraversalQuery::traversing(2, vec![all.clone(), all.clone()]);
    q.degree_targets.push((all.clone(), 3));
    if let Ok(c) = find_traversing_clique(&g, &q, 1) {
        let common = common_neighbors_of(&g, c.vertices(), &all).unwrap();
        assert!(common.len() >= 3);
    }
}

#[test]
fn empty_query_is_rejected() {
    let g = gnp(5, 0.5, 0);
    let q = TraversalQuery::traversing(0, vec![]);
    assert!(matches!(find_traversing_clique(&g, &q, 0), Err(CliqueError::BadQuery(_))));
}

#[test]
fn popular_clique_meets_degree_demands() {
    let g = gnp(40, 0.6, 9);
    let all = g.vertex_set();
    let targets = vec![all.clone()];
    let c = find_popular_clique(&g, &all, &targets, 2, 5, 3).unwrap();
    assert!(g.is_clique(c.vertices()));
    let common = common_neighbors_of(&g, c.vertices(), &all).unwrap();
    assert!(common.len() >= 5);
}

#[test]
fn popular_clique_requires_targets() {
    let g = gnp(10, 0.5, 0);
    assert!(find_popular_clique(&g, &g.vertex_set(), &[], 2, 0, 0).is_err());
}

#[test]
fn clique_constructor_validates() {
    let mut g = Graph::new(3);
    g.add_edge(0, 1);
    assert!(Clique::new(&g, vec![0, 1]).is_ok());
    assert!(Clique::new(&g, vec![0, 2]).is_err());
    assert!(Clique::new(&g, vec![0, 0]).is_err());
}
