use rand::Rng;
use rflabel_core::emulation::{apply_coverage, emulate_noisy_labels, EmulationMode, EmulationSpec};
use rflabel_core::labeling::{Frame, Label, Provenance};
use rflabel_core::localization::{
    sample_localization_error, ErrorConfig, LocalizationErrorSampler,
};
use rflabel_core::projection::synthesize_bbox;
use rflabel_core::quality::quality_report;
use rflabel_core::scene::{CameraModel, ImageSize, Orientation};
use rflabel_core::stats::{gamma_quantile, quantile};
use rflabel_core::{SeedKey, Vec2, Vec3};

fn camera() -> CameraModel {
    CameraModel {
        id: "cam0".into(),
        position: Vec3::new(0.0, 0.0, 2.5),
        orientation: Orientation::level(0.0),
        focal_length: 1000.0,
        principal_point: Vec2::new(640.0, 360.0),
        image_size: ImageSize {
            width: 1280,
            height: 720,
        },
        frame_rate: 10.0,
    }
}

/// `n` unclipped ground-truth labels spread over frames of 10.
fn synthetic_set(n: usize, seed: u64) -> Vec<Frame> {
    let cam = camera();
    let mut rng = SeedKey::new(seed).str("labels").rng();
    let mut labels = Vec::new();
    while labels.len() < n {
        let y = rng.random_range(8.0..40.0);
        let x = rng.random_range(-0.3 * y..0.3 * y);
        let Ok(bbox) = synthesize_bbox(&cam, Vec2::new(x, y), 1.76, 0.41) else {
            continue;
        };
        if bbox.clipped {
            continue;
        }
        labels.push(bbox);
    }
    labels
        .chunks(10)
        .enumerate()
        .map(|(k, chunk)| Frame {
            frame_id: k as u64,
            camera_id: "cam0".into(),
            timestamp: k as f64 / cam.frame_rate,
            labels: chunk
                .iter()
                .map(|b| Label {
                    frame_id: k as u64,
                    camera_id: "cam0".into(),
                    bbox: *b,
                    depth: None,
                    identity: None,
                    confidence: 1.0,
                    provenance: Provenance::GroundTruth,
                    occluded: false,
                    hidden: false,
                })
                .collect(),
        })
        .collect()
}

fn spec(name: &str, mode: EmulationMode, vary: bool) -> EmulationSpec {
    EmulationSpec {
        mode,
        height_variation_enabled: vary,
        seed: 11,
        ..EmulationSpec::new(ErrorConfig::builtin(name).unwrap().calibrated().unwrap())
    }
}

fn pairs(a: &[Frame], b: &[Frame]) -> Vec<(Label, Label)> {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.labels.len(), y.labels.len());
            x.labels.iter().cloned().zip(y.labels.iter().cloned())
        })
        .collect()
}

#[test]
fn depth_only_keeps_centre_columns() {
    let input = synthetic_set(1000, 1);
    for name in ["S0", "S3"] {
        let (out, report) = emulate_noisy_labels(
            &input,
            &camera(),
            &spec(name, EmulationMode::DepthOnly, true),
        )
        .unwrap();
        assert_eq!(report.lost_outside_image, 0);
        let mut moved = 0;
        for (a, b) in pairs(&input, &out) {
            if !b.bbox.clipped {
                assert!(
                    (a.bbox.center_x() - b.bbox.center_x()).abs() < 1e-6,
                    "{a:?} -> {b:?}"
                );
                moved += usize::from((a.bbox.h - b.bbox.h).abs() > 1e-6);
            }
        }
        assert!(moved > 900);
    }
}

#[test]
fn angular_only_keeps_box_heights() {
    let input = synthetic_set(1000, 2);
    let (out, report) = emulate_noisy_labels(
        &input,
        &camera(),
        &spec("S0", EmulationMode::AngularOnly, false),
    )
    .unwrap();
    let mut checked = 0;
    for frame in &out {
        for b in &frame.labels {
            let a = &input[b.frame_id as usize]
                .labels
                .iter()
                .find(|l| (l.bbox.y - b.bbox.y).abs() < 1e-6);
            assert!(a.is_some(), "vertical position changed: {b:?}");
            if !b.bbox.clipped {
                assert!((a.unwrap().bbox.h - b.bbox.h).abs() < 1e-6);
                checked += 1;
            }
        }
    }
    assert!(checked > 800, "{report:?}");
}

#[test]
fn zero_error_identity() {
    let input = synthetic_set(200, 3);
    let mut cfg = ErrorConfig::custom("zero", 1.0, 2.0);
    cfg.gamma_shape = Some(1.0);
    cfg.gamma_scale = Some(1e-300);
    let s = EmulationSpec {
        height_variation_enabled: false,
        ..EmulationSpec::new(cfg)
    };
    let (out, _) = emulate_noisy_labels(&input, &camera(), &s).unwrap();
    for (a, b) in pairs(&input, &out) {
        for (x, y) in a.bbox.to_array().iter().zip(b.bbox.to_array()) {
            assert!((x - y).abs() < 1e-6);
        }
        assert_eq!(b.provenance, Provenance::EmulatedHuman);
    }
}

#[test]
fn mean_iou_improves_from_s0_to_s3() {
    let input = synthetic_set(1000, 4);
    let ious: Vec<f64> = ["S0", "S1", "S2", "S3"]
        .iter()
        .map(|n| {
            emulate_noisy_labels(&input, &camera(), &spec(n, EmulationMode::Both, true))
                .unwrap()
                .1
                .iou
                .mean
        })
        .collect();
    assert!(ious.windows(2).all(|w| w[0] < w[1]), "{ious:?}");
}

#[test]
fn coverage_keeps_a_binomial_share() {
    let mut rng = SeedKey::new(6).str("coverage").rng();
    let kept = apply_coverage((0..10_000).collect::<Vec<_>>(), 0.3, &mut rng).unwrap();
    assert!((kept.len() as i64 - 3000).abs() <= 138, "{}", kept.len());

    let input = synthetic_set(1000, 6);
    let s = EmulationSpec {
        coverage_p: 0.3,
        ..spec("S3", EmulationMode::Both, true)
    };
    let mut zero = s.clone();
    zero.error_config.gamma_scale = Some(1e-300);
    zero.height_variation_enabled = false;
    let (out, _) = emulate_noisy_labels(&input, &camera(), &zero).unwrap();
    let report = quality_report(&out, &input, 0.5).unwrap();
    assert_eq!(report.label_precision, 1.0);
    assert!(
        (report.label_recall - 0.3).abs() < 0.05,
        "{}",
        report.label_recall
    );
}

#[test]
fn both_mode_magnitudes_follow_the_calibrated_gamma() {
    for name in ["S0", "S1", "S2", "S3"] {
        let cfg = ErrorConfig::builtin(name).unwrap().calibrated().unwrap();
        let sampler = LocalizationErrorSampler::new(&cfg).unwrap();
        let mut rng = SeedKey::new(7).str(name).rng();
        let mut mags: Vec<f64> = (0..100_000)
            .map(|_| sampler.sample(&mut rng).norm())
            .collect();
        let (k, theta) = (cfg.gamma_shape.unwrap(), cfg.gamma_scale.unwrap());
        for p in [0.1, 0.25, 0.5, 0.75, 0.95] {
            let expected = theta * gamma_quantile(k, p);
            let got = quantile(&mut mags, p);
            assert!(
                (got / expected - 1.0).abs() < 0.03,
                "{name} p{p}: {got} vs {expected}"
            );
        }
        assert!(sample_localization_error(&ErrorConfig::builtin(name).unwrap(), &mut rng).is_err());
    }
}

#[test]
fn emulation_is_deterministic() {
    let input = synthetic_set(300, 8);
    let s = spec("S1", EmulationMode::Both, true);
    let a = emulate_noisy_labels(&input, &camera(), &s).unwrap();
    let b = emulate_noisy_labels(&input, &camera(), &s).unwrap();
    assert_eq!(a, b);
}
