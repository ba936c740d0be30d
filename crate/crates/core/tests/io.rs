mod common;

use std::path::PathBuf;

use rfxp::model_io::{emit_model, load_dataset, load_model, parse_model, save_model, LoadError};
use sha2::{Digest, Sha256};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

#[test]
fn running_example_fixture_loads_and_predicts() {
    let forest = load_model(fixture("running_example.json")).unwrap();
    assert_eq!(forest, rfxp::model::heart_disease_forest());
    let data = load_dataset(fixture("running_example.csv"), &forest).unwrap();
    assert_eq!(data.instances.len(), 1);
    assert_eq!(forest.classes()[forest.predict(&data.instances[0])], "Yes");
    assert_eq!(forest.vote_counts(&data.instances[0]), vec![1, 2]);
    let ten = load_dataset(fixture("running_example_10.csv"), &forest).unwrap();
    assert_eq!(ten.instances.len(), 10);
    assert!(ten.labels.is_none());
}

#[test]
fn twonorm_fixture_matches_its_manifest() {
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("twonorm_manifest.json")).unwrap()).unwrap();
    let bytes = std::fs::read(fixture("twonorm_rf100.json")).unwrap();
    let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(digest, manifest["model_sha256"].as_str().unwrap());

    let forest = parse_model(std::str::from_utf8(&bytes).unwrap()).unwrap();
    assert_eq!(forest.num_trees() as u64, manifest["trees"].as_u64().unwrap());
    assert_eq!(forest.num_features(), 20);
    let depth = forest.trees().iter().map(|t| t.depth()).max().unwrap();
    assert_eq!(depth as u64, manifest["max_depth"].as_u64().unwrap());

    let data = load_dataset(fixture("twonorm_test.csv"), &forest).unwrap();
    let expected: Vec<usize> = manifest["predictions"].as_array().unwrap().iter().map(|p| p.as_u64().unwrap() as usize).collect();
    assert_eq!(data.instances.len(), expected.len());
    for (i, (v, &p)) in data.instances.iter().zip(&expected).enumerate() {
        assert_eq!(forest.predict(v), p, "row {i}");
        assert_eq!(common::vote(&forest, v.values()), p, "row {i}");
    }
    let labels = data.labels.unwrap();
    let correct = expected.iter().zip(&labels).filter(|(a, b)| a == b).count();
    assert!(correct >= 90, "accuracy {correct}/100");
}

#[test]
fn emit_is_a_fixed_point() {
    for name in ["running_example.json", "twonorm_rf100.json"] {
        let text = std::fs::read_to_string(fixture(name)).unwrap();
        let forest = parse_model(&text).unwrap();
        let once = emit_model(&forest);
        assert_eq!(parse_model(&once).unwrap(), forest);
        assert_eq!(emit_model(&parse_model(&once).unwrap()), once);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let forest = rfxp::model::heart_disease_forest();
    save_model(&forest, &path).unwrap();
    assert_eq!(load_model(&path).unwrap(), forest);
}

#[test]
fn random_forests_round_trip() {
    for seed in 0..50 {
        let mut r = common::rng(seed);
        let forest = common::random_forest(&mut r, common::Shape::default());
        assert_eq!(parse_model(&emit_model(&forest)).unwrap(), forest, "seed {seed}");
    }
}

#[test]
fn load_errors_name_the_problem() {
    assert!(matches!(load_model(fixture("missing.json")), Err(LoadError::Io { .. })));
    let err = parse_model("{\"version\": 1}").unwrap_err();
    assert!(matches!(err, LoadError::Schema { .. }), "{err}");
    let forest = rfxp::model::heart_disease_forest();
    let bad = "blocked-arteries,good-blood-circulation,chest-pain,weight\n1,0,1,heavy\n";
    let err = rfxp::model_io::read_dataset(bad.as_bytes(), &forest).unwrap_err();
    assert!(matches!(err, LoadError::Row { row: 1, .. }), "{err}");
}
