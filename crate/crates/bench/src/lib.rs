//! Shared fixtures for the criterion benchmarks: a small deterministic
//! synthetic scene and fingerprints built from it.

use topomap::eval::scene::{generate_synthetic_scene, SyntheticSceneConfig};
use topomap::likelihood::{fingerprint_segment, EstimatorKind, EstimatorOptions};
use topomap::SegmentFingerprint;

/// A compact scene: 6 locations × 2 segments, 5 APs, fixed seed.
pub fn bench_scene_config() -> SyntheticSceneConfig {
    SyntheticSceneConfig {
        locations: Some(
            (0..6)
                .map(|k| (2.0 + 3.0 * f64::from(k % 3), 5.0 + 10.0 * f64::from(k / 3)))
                .collect(),
        ),
        segments_per_location: 2,
        samples_per_segment: 15,
        seed: 97,
        ..SyntheticSceneConfig::default()
    }
}

/// Fingerprints for every ground-truth segment of the bench scene.
pub fn bench_fingerprints(method: EstimatorKind) -> Vec<SegmentFingerprint> {
    let scene = generate_synthetic_scene(&bench_scene_config()).expect("scene generation");
    let opts = EstimatorOptions::default();
    scene
        .segments
        .iter()
        .map(|seg| fingerprint_segment(seg, scene.dataset.ap_universe(), method, &opts))
        .collect::<Result<_, _>>()
        .expect("fingerprinting")
}
