use lrfim::approx::{dp_ground_state, full_graph, greedy_decomposition};
use lrfim::exact::{self, SolverOptions};
use lrfim::instances;
use lrfim::reduction::{self, compile_pipeline, decode_pipeline, read_bundle, write_bundle, CompileOptions};
use lrfim::verify::{self, Domain};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn bundle_survives_disk_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let inst = instances::double_star();
    let alpha = reduction::alpha_threshold(inst.len()) + 1.0;
    let bundle = compile_pipeline(&inst, alpha, &CompileOptions::default()).unwrap();
    write_bundle(&bundle, dir.path()).unwrap();
    let back = read_bundle(dir.path()).unwrap();
    assert_eq!(back.maps, bundle.maps);
    assert_eq!(back.models, bundle.models);
    let report = verify::verify_bundle(&back, Domain::auto()).unwrap();
    assert!(report.passed);

    let ground = exact::ground_states(back.grid(), &SolverOptions::single_threaded()).unwrap();
    let decoded = decode_pipeline(&back, ground.representative()).unwrap();
    assert!(inst.is_independent(&decoded.independent_set));
}

#[test]
fn one_logical_layer_verifies_on_valid_states() {
    let inst = lrfim::reduction::MisInstance::new(vec![[0.0, 0.0], [1.0, 0.0]]).unwrap();
    let alpha = reduction::alpha_threshold(2) - 3.0;
    let bundle = compile_pipeline(&inst, alpha, &CompileOptions::default()).unwrap();
    assert_eq!(bundle.t, 1);
    let report = verify::verify_bundle(&bundle, Domain::auto()).unwrap();
    assert_eq!(report.layers[1].domain, "valid states");
    assert_eq!(report.layers[1].states_checked, 4);
    assert!(report.passed, "{report:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dp_matches_enumeration_on_planar_models(seed in any::<u64>(), n in 2usize..11) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = instances::random_planar_model(&mut rng, n, 3.0, 0.2, 2.0, -1.0, 1.0);
        let g = full_graph(&m);
        let d = greedy_decomposition(n, &g.edge_pairs());
        let (_, e) = dp_ground_state(&g, &d).unwrap();
        let opts = SolverOptions::single_threaded();
        let exact = exact::ground_states(&m, &opts).unwrap().energy;
        let spectrum = exact::energy_spectrum(&m, 1, &opts).unwrap();
        prop_assert!((e - exact).abs() < 1e-12);
        prop_assert_eq!(spectrum[0].energy, exact);
    }
}
