//! The frozen budget constants are reproducible from the calibration run.

use treeclust::calibration::{calibrate, FIXTURES, FROZEN, CALIBRATION_SEEDS};

#[test]
fn calibration_reproduces_frozen_constants() {
    for fx in FIXTURES {
        let c = calibrate(fx, CALIBRATION_SEEDS).unwrap();
        let &(_, c1, c2) = FROZEN.iter().find(|(name, _, _)| *name == fx.name).unwrap();
        assert_eq!((c.c1, c.c2), (c1, c2), "{}", fx.name);
    }
}

#[test]
fn recorded_run_matches_frozen_constants() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/calibration/calibration.json");
    let recorded: serde_json::Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    for &(name, c1, c2) in FROZEN {
        let row = recorded.as_array().unwrap().iter().find(|r| r["fixture"] == name).unwrap();
        assert_eq!(row["c1"].as_f64(), Some(c1), "{name}");
        assert_eq!(row["c2"].as_f64(), Some(c2), "{name}");
        assert_eq!(row["seeds"].as_u64(), Some(CALIBRATION_SEEDS as u64));
    }
}
