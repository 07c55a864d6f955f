#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use rflabel::annotations::AnnotationFile;
use rflabel_core::labeling::{Frame, Label, Provenance};
use rflabel_core::projection::synthesize_bbox;
use rflabel_core::scene::CameraModel;
use rflabel_core::{SeedKey, Vec2};

pub fn rflabel<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_rflabel"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs the binary and panics with its stderr on failure.
pub fn ok<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = rflabel(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// `n` unclipped ground-truth boxes seen by `camera`, ten per frame.
pub fn synthetic_frames(camera: &CameraModel, n: usize, seed: u64) -> Vec<Frame> {
    let mut rng = SeedKey::new(seed).str("synthetic").rng();
    let mut boxes = Vec::new();
    while boxes.len() < n {
        let y = rng.random_range(6.0..40.0);
        let x = camera.position.x + rng.random_range(-0.3 * y..0.3 * y);
        match synthesize_bbox(camera, Vec2::new(x, y), 1.76, 0.41) {
            Ok(b) if !b.clipped => boxes.push(b),
            _ => {}
        }
    }
    boxes
        .chunks(10)
        .enumerate()
        .map(|(k, chunk)| Frame {
            frame_id: k as u64,
            camera_id: camera.id.clone(),
            timestamp: k as f64 / camera.frame_rate,
            labels: chunk
                .iter()
                .enumerate()
                .map(|(i, b)| Label {
                    frame_id: k as u64,
                    camera_id: camera.id.clone(),
                    bbox: *b,
                    depth: None,
                    identity: Some(format!("person-{}", 10 * k + i)),
                    confidence: 1.0,
                    provenance: Provenance::GroundTruth,
                    occluded: false,
                    hidden: false,
                })
                .collect(),
        })
        .collect()
}

pub fn write_annotations(path: &Path, frames: &[Frame]) {
    rflabel::io::write_json(path, &AnnotationFile::from_frames(frames)).unwrap();
}

/// Every regular file below `dir`, sorted.
pub fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(files(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

/// Files of `a` and `b` (same relative names, manifests excluded) that differ.
pub fn differing(a: &Path, b: &Path) -> Vec<String> {
    let names = |d: &Path| -> Vec<PathBuf> {
        files(d)
            .into_iter()
            .map(|f| f.strip_prefix(d).unwrap().to_path_buf())
            .collect()
    };
    let (na, nb) = (names(a), names(b));
    if na != nb {
        return vec![format!("file sets differ: {na:?} vs {nb:?}")];
    }
    na.into_iter()
        .filter(|n| n.file_name().unwrap() != "manifest.json")
        .filter(|n| fs::read(a.join(n)).unwrap() != fs::read(b.join(n)).unwrap())
        .map(|n| n.display().to_string())
        .collect()
}
