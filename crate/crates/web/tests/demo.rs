use tpm_demo::{eigen_summary, render_rgba, trajectory, MAX_RESOLUTION};

#[test]
fn rgba_has_four_channels_and_opaque_alpha() {
    let px = render_rgba(6, 32, 100).unwrap();
    assert_eq!(px.len(), 32 * 32 * 4);
    assert!(px.chunks(4).all(|p| p[3] == 255));
    let blue = px.chunks(4).filter(|p| p[..3] == [0, 0, 255]).count();
    let red = px.chunks(4).filter(|p| p[..3] == [255, 0, 0]).count();
    assert!(blue > 0 && red > 0);
}

#[test]
fn rgba_rejects_bad_arguments() {
    assert!(render_rgba(2, 32, 100).is_err());
    assert!(render_rgba(6, MAX_RESOLUTION + 1, 100).is_err());
    assert!(render_rgba(6, 4, 100).is_err());
}

#[test]
fn trajectory_converges_to_nearest_generator() {
    let v = trajectory(6, 0.3, 0.9, 200).unwrap();
    assert_eq!(v["converged"], true);
    assert_eq!(v["limit"]["kind"], "frame");
    assert_eq!(v["limit"]["index"], 1);
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), v["iterations"].as_u64().unwrap() as usize + 1);
    let last = &points[points.len() - 1];
    assert!((last[1].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn trajectory_rejects_zero_start() {
    assert!(trajectory(6, 0.0, 0.0, 10).is_err());
}

#[test]
fn eigen_summary_lists_pairs_and_certificates() {
    let v = eigen_summary(5).unwrap();
    let pairs = v["pairs"].as_array().unwrap();
    let total: u64 = pairs.iter().map(|p| p["multiplicity"].as_u64().unwrap()).sum();
    assert_eq!(total, 5);
    let g = v["generators"].as_array().unwrap();
    assert_eq!(g.len(), 3);
    assert!((g[0]["rho"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert_eq!(g[0]["verdict"], "Robust");
}

#[test]
fn eigen_summary_handles_degenerate_order() {
    let v = eigen_summary(4).unwrap();
    assert!(v["pairs"].is_null());
    assert_eq!(v["generators"].as_array().unwrap().len(), 3);
}
