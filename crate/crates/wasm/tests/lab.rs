use coldrl_wasm::Lab;
use serde_json::Value;

#[test]
fn compare_lists_classical_policies() {
    let lab = Lab::try_new("zipf", 1, 5_000).unwrap();
    let s: Value = serde_json::from_str(&lab.try_summary()).unwrap();
    assert_eq!(s["requests"], 5_000);
    let rows: Value = serde_json::from_str(&lab.try_compare(10.0).unwrap()).unwrap();
    let names: Vec<&str> = rows.as_array().unwrap().iter().map(|r| r["policy"].as_str().unwrap()).collect();
    assert_eq!(names, ["lru", "lfu", "size", "arc", "hybrid"]);
    assert!(rows.as_array().unwrap().iter().all(|r| (0.0..=1.0).contains(&r["hit_ratio"].as_f64().unwrap())));
}

#[test]
fn training_adds_a_learned_row() {
    let mut lab = Lab::try_new("trap", 2, 8_000).unwrap();
    assert!(!lab.trained());
    let rounds: Value = serde_json::from_str(&lab.try_train(20.0, 1, 2).unwrap()).unwrap();
    assert_eq!(rounds.as_array().unwrap().len(), 1);
    assert!(lab.trained());
    let rows: Value = serde_json::from_str(&lab.try_compare(20.0).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().last().unwrap()["policy"], "coldrl");
}

#[test]
fn bad_inputs_are_errors() {
    assert!(Lab::try_new("uniform", 1, 1_000).is_err());
    let lab = Lab::try_new("zipf", 1, 1_000).unwrap();
    assert!(lab.try_compare(0.0).is_err());
    assert!(lab.try_compare(150.0).is_err());
}
