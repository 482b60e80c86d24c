mod common;

use std::collections::BTreeSet;

use common::oracle::{self, Case};
use denorm_core::{
    all_simple_paths, build_graph, joinable, load_catalog, plan, reduce_paths, save_catalog,
    ColumnClass, JoinGraph, LinkSelection, PlanOptions, TableRef, TargetSet,
};
use proptest::prelude::*;

fn sequences_json(case: &Case, catalog: &denorm_core::Catalog) -> String {
    let graph = JoinGraph::from_catalog(catalog);
    let r = plan(
        &graph,
        &TargetSet::new(oracle::target_names(case)),
        &PlanOptions::default(),
        None,
    )
    .unwrap();
    serde_json::to_string(&r.sequences).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn planner_matches_reference(case in oracle::case()) {
        if let Err(msg) = oracle::check_case(&case) {
            prop_assert!(false, "{}", msg);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn reduced_paths_match_reference(case in oracle::case(), s in 0usize..6, d in 0usize..6) {
        let (s, d) = (s % case.nodes, d % case.nodes);
        let graph = JoinGraph::from_catalog(&oracle::catalog(&case));
        let (src, dst) = (oracle::table_name(s), oracle::table_name(d));
        let found = all_simple_paths(&graph, &src, &dst, 10).unwrap();
        let edges = oracle::reference_edges(&case);
        let reference = oracle::reference_simple_paths(&case, &edges, s, d);
        prop_assert_eq!(found.paths.len(), reference.len());

        let reduced = reduce_paths(&TableRef::new(&src), &TableRef::new(&dst), found.paths).unwrap();
        let got: BTreeSet<Vec<String>> = reduced
            .paths
            .iter()
            .map(|p| p.link_ids().map(|l| l.to_string()).collect())
            .collect();
        let expected: BTreeSet<Vec<String>> = oracle::reference_reduce(s, reference)
            .into_iter()
            .map(|p| p.into_iter().map(|(_, _, k)| oracle::link_name(k)).collect())
            .collect();
        prop_assert_eq!(got, expected);
        let sizes: Vec<usize> = reduced.paths.iter().map(|p| p.node_count()).collect();
        prop_assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn result_ignores_declaration_order(case in oracle::case(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut tables: Vec<usize> = (0..case.nodes).collect();
        let mut links: Vec<usize> = (0..case.links.len()).collect();
        tables.shuffle(&mut rng);
        links.shuffle(&mut rng);
        let shuffled = oracle::catalog_in_order(&case, &tables, &links);
        prop_assert_eq!(
            sequences_json(&case, &oracle::catalog(&case)),
            sequences_json(&case, &shuffled)
        );
        let a = build_graph(&oracle::catalog(&case), &LinkSelection::all()).unwrap();
        let b = build_graph(&shuffled, &LinkSelection::all()).unwrap();
        prop_assert_eq!(a.edges(), b.edges());
    }

    #[test]
    fn graph_build_is_deterministic_and_monotone(case in oracle::case(), drop in any::<prop::sample::Index>()) {
        let catalog = oracle::catalog(&case);
        let full = build_graph(&catalog, &LinkSelection::all()).unwrap();
        let again = build_graph(&catalog, &LinkSelection::all()).unwrap();
        prop_assert_eq!(full.edges(), again.edges());
        let ids: Vec<&str> = full.edges().iter().map(|e| e.link_id.as_str()).collect();
        prop_assert!(ids.windows(2).all(|w| w[0] <= w[1]));

        for e in full.edges() {
            let link = catalog.link(e.link_id.as_str()).unwrap();
            let one_side_of_many_to_one = (link.left_class, link.right_class) != (ColumnClass::One, ColumnClass::One)
                && catalog.column(&e.from_ref()).unwrap().class == Some(ColumnClass::One);
            prop_assert!(!one_side_of_many_to_one, "edge leaves the one side: {:?}", e);
        }

        if !case.links.is_empty() {
            let victim = oracle::link_name(drop.index(case.links.len()));
            let mut selection = LinkSelection::all();
            prop_assert!(selection.deselect(&catalog, &victim).unwrap());
            let fewer = build_graph(&catalog, &selection).unwrap();
            let before: std::collections::HashSet<_> = full.edges().iter().collect();
            prop_assert!(fewer.edges().iter().all(|e| before.contains(e)));
            prop_assert!(fewer.edges().iter().all(|e| e.link_id.as_str() != victim));
        }
    }

    #[test]
    fn infeasibility_is_monotone(case in oracle::case(), extra in 0usize..6) {
        let graph = JoinGraph::from_catalog(&oracle::catalog(&case));
        let targets = TargetSet::new(oracle::target_names(&case));
        let result = plan(&graph, &targets, &PlanOptions::default(), None).unwrap();
        prop_assert_eq!(joinable(&graph, &targets).unwrap(), result.is_feasible());
        if !result.is_feasible() {
            let mut more = targets.clone();
            more.extend([oracle::table_name(extra % case.nodes)]);
            prop_assert!(!plan(&graph, &more, &PlanOptions::default(), None).unwrap().is_feasible());
            prop_assert!(!joinable(&graph, &more).unwrap());
        }
    }

    #[test]
    fn catalog_round_trips(case in oracle::case()) {
        let catalog = oracle::catalog(&case);
        let text = save_catalog(&catalog);
        let back = load_catalog(&text).unwrap();
        prop_assert_eq!(&back, &catalog);
        prop_assert_eq!(save_catalog(&back), text);
    }
}
