use gaitkit_demo::{orientation, rotation, segment, sprt};

#[test]
fn rotation_is_orthonormal() {
    let r = rotation(30.0, -20.0, 75.0);
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|k| r[i][k] * r[j][k]).sum();
            assert!((dot - f64::from(u8::from(i == j))).abs() < 1e-12);
        }
    }
}

#[test]
fn segment_reports_strikes() {
    let v = segment(3, 20.0, 0.1).unwrap();
    assert!(v["cycles"].as_u64().unwrap() >= 10);
    assert_eq!(v["t"].as_array().unwrap().len(), v["magnitude"].as_array().unwrap().len());
}

#[test]
fn orientation_keeps_vertical_row() {
    let v = orientation(4, 40.0, 60.0, -30.0).unwrap();
    assert_eq!(v["same_boundaries"], true);
    let (a, b) = (v["upright"]["zeta"].as_array().unwrap(), v["rotated"]["zeta"].as_array().unwrap());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-3);
    }
}

#[test]
fn sprt_paths_end_at_a_decision() {
    let v = sprt(3.0, 0.01, 0.01, 5, 1).unwrap();
    let paths = v["paths"].as_array().unwrap();
    assert_eq!(paths.len(), 10);
    assert!(paths.iter().all(|p| p["decision"] != "pending"));
}
