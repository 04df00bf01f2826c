//! Classical features against the direct-formula oracles.

mod oracles;

use lineup_core::corpus::{ImageGray, LandmarkSet};
use lineup_core::imgfeat::{geometry_features, noise_features, quality_features, sharpness_features, texture_features};
use oracles::*;

#[test]
fn photometric_features_match_oracles() {
    check_random_images(50, 2024);
}

#[test]
fn constant_images_zero_column() {
    check_constant_column();
}

#[test]
fn geometry_matches_oracle() {
    check_geometry(50, 68);
}

#[test]
fn eye_and_mouth_ratios_are_similarity_invariant() {
    check_similarity_invariance(100, 30);
}

#[test]
fn impulse_spectrum_matches_dft() {
    let g = ImageGray::from_fn(8, 8, |x, y| if (x, y) == (3, 5) { 255 } else { 0 }).unwrap();
    let want = oracle_sharpness(&Img::from(&g));
    let got = sharpness_features(&g);
    // an impulse has a flat spectrum of magnitude 255
    assert_close("impulse high-frequency energy", got[3], 255.0, 1e-12);
    assert_close("impulse high-frequency energy", got[3], want[3], 1e-5);
    assert_close("impulse log magnitude", got[4], want[4], 1e-5);
}

#[test]
fn michelson_two_valued() {
    let g = ImageGray::from_fn(16, 16, |x, _| if x < 8 { 0 } else { 255 }).unwrap();
    assert_eq!(quality_features(&g)[4], 1.0);
}

#[test]
fn checkerboard_has_zero_diagonal_noise() {
    let g = ImageGray::from_fn(16, 16, |x, y| if (x + y) % 2 == 0 { 0 } else { 255 }).unwrap();
    let n = noise_features(&g);
    assert_eq!(n[0], 0.0);
    assert_eq!(n[1], 1e6);
}

#[test]
fn step_edge_density_matches_reference_canny() {
    let g = ImageGray::from_fn(16, 16, |x, _| if x < 8 { 0 } else { 255 }).unwrap();
    let want = oracle_canny(&Img::from(&g), 50.0, 150.0);
    let count = want.iter().filter(|&&e| e).count();
    // the two columns straddling the step share the maximal response; NMS keeps the left one
    assert_eq!(count, 16);
    assert_eq!(texture_features(&g)[1], count as f64 / 256.0);
}
#[test]
fn roll_follows_rotation() {
    let face = template_face();
    for deg in [30.0f64, -30.0, 10.0, 75.0, -120.0] {
        let pts = similarity(&face, deg.to_radians(), 1.0, [0.0, 0.0]);
        let lm = LandmarkSet::new("f".into(), pts, 1).unwrap();
        let roll = geometry_features(Some(&lm), 200, 200)[11];
        assert!((roll - deg).abs() < 1e-6, "{roll} vs {deg}");
    }
    // the unrotated template is level, centred on the nose and symmetric
    let lm = LandmarkSet::new("f".into(), face, 1).unwrap();
    let g = geometry_features(Some(&lm), 200, 200);
    assert_eq!(g[11], 0.0);
    assert_eq!(g[12], 0.0);
    assert!((g[10] - 1.0).abs() < 1e-12);
}
