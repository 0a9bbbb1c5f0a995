use freehull::scenarios::{run_scenario, ScenarioConfig};

fn report_json(id: &str, seed: u64) -> String {
    serde_json::to_string(&run_scenario(id, &ScenarioConfig::with_seed(seed)).unwrap()).unwrap()
}

#[test]
fn reports_are_byte_stable() {
    for id in ["tv-archimedean", "projection-not-closed", "exactness-box", "exactness-crossterm"] {
        assert_eq!(report_json(id, 7), report_json(id, 7), "{id}");
    }
}

#[test]
fn seeds_change_the_samples() {
    assert_ne!(report_json("exactness-box", 1), report_json("exactness-box", 2));
}
