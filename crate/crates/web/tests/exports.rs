use qutrit_feedback_web::{classify_json, jump_trajectory_json, nojump_curve_json};
use serde_json::Value;

#[test]
fn nojump_curve_matches_closed_form() {
    let v: Value = serde_json::from_str(&nojump_curve_json("Lambda", 0.179, 0.2386, 0.9545, 10.0, 101).unwrap()).unwrap();
    let prop = v["propagated"].as_array().unwrap();
    let closed = v["closed_form"].as_array().unwrap();
    assert_eq!(prop.len(), 101);
    for (p, c) in prop.iter().zip(closed) {
        assert!((p.as_f64().unwrap() - c.as_f64().unwrap()).abs() < 1e-6);
    }
}

#[test]
fn perfect_feedback_trajectory_stays_maximal() {
    let v: Value = serde_json::from_str(&jump_trajectory_json(0.0, 1.0, 0.0, 5, 3.0).unwrap()).unwrap();
    for n in v["negativity"].as_array().unwrap() {
        assert!((n.as_f64().unwrap() - 1.0).abs() < 1e-6);
    }
    assert!(v["times"].as_array().unwrap().len() <= 2001);
}

#[test]
fn classify_reference_triple() {
    let v: Value = serde_json::from_str(&classify_json("E", 0.179, 0.2386, 0.9545).unwrap()).unwrap();
    assert_eq!(v["sudden_changes"], 2);
    assert_eq!(v["terminal"], "sudden_death");
    let b: Value = serde_json::from_str(&classify_json("V", 1.0, 1.0, 1.0).unwrap()).unwrap();
    assert!(b["terminal"].as_str().unwrap().starts_with("boundary"));
}

#[test]
fn bad_input_is_an_error() {
    assert!(classify_json("Q", 1.0, 1.0, 1.0).is_err());
    assert!(jump_trajectory_json(0.0, 1.5, 0.0, 0, 1.0).is_err());
}
