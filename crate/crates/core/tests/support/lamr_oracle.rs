//! Brute-force log-average miss rate and a hand-built 10-frame case, shared by
//! the metric tests of both crates.

use rflabel_core::labeling::{Frame, Label, Provenance};
use rflabel_core::projection::BoundingBox;
use rflabel_core::quality::iou;

pub fn label(frame: u64, b: [f64; 4], score: f64, occluded: bool, provenance: Provenance) -> Label {
    Label {
        frame_id: frame,
        camera_id: "cam0".into(),
        bbox: BoundingBox::new(b[0], b[1], b[2], b[3]),
        depth: None,
        identity: None,
        confidence: score,
        provenance,
        occluded,
        hidden: false,
    }
}

pub fn frame(id: u64, labels: Vec<Label>) -> Frame {
    Frame {
        frame_id: id,
        camera_id: "cam0".into(),
        timestamp: id as f64 * 0.1,
        labels,
    }
}

/// Independent threshold sweep: for every distinct score, keep the detections
/// at or above it, match them from scratch and record (fppi, miss).
pub fn brute_force_lamr(dets: &[Frame], gt: &[Frame], match_iou: f64) -> f64 {
    let positives = gt
        .iter()
        .flat_map(|f| &f.labels)
        .filter(|l| !l.occluded)
        .count() as f64;
    let mut thresholds: Vec<f64> = dets
        .iter()
        .flat_map(|f| &f.labels)
        .map(|l| l.confidence)
        .collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut points = vec![(0.0, 1.0)];
    for &tau in &thresholds {
        let (mut tp, mut fp) = (0usize, 0usize);
        for (d, g) in dets.iter().zip(gt) {
            let mut kept: Vec<&Label> = d.labels.iter().filter(|l| l.confidence >= tau).collect();
            kept.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
            let mut used = vec![false; g.labels.len()];
            for det in kept {
                let mut best = None;
                let mut best_v = match_iou;
                for (j, t) in g.labels.iter().enumerate() {
                    let v = iou(&det.bbox, &t.bbox);
                    if !t.occluded && !used[j] && v >= best_v && (best.is_none() || v > best_v) {
                        best = Some(j);
                        best_v = v;
                    }
                }
                if let Some(j) = best {
                    used[j] = true;
                    tp += 1;
                } else if !g
                    .labels
                    .iter()
                    .any(|t| t.occluded && iou(&det.bbox, &t.bbox) >= match_iou)
                {
                    fp += 1;
                }
            }
        }
        points.push((fp as f64 / gt.len() as f64, 1.0 - tp as f64 / positives));
    }
    let refs: Vec<f64> = (0..9).map(|i| 10f64.powf(-2.0 + 0.25 * i as f64)).collect();
    let mut sum = 0.0;
    for r in &refs {
        let mut best = 1.0f64;
        for &(f, m) in &points {
            if f <= *r {
                best = best.min(m);
            }
        }
        sum += best;
    }
    sum / 9.0
}

pub fn hand_case() -> (Vec<Frame>, Vec<Frame>) {
    let gt_box = |k: u64| [10.0 + 5.0 * k as f64, 20.0, 30.0, 70.0];
    let far = [400.0, 300.0, 20.0, 40.0];
    let mut gt = Vec::new();
    let mut dets = Vec::new();
    for k in 0..10u64 {
        let b = gt_box(k);
        let mut g = vec![label(k, b, 1.0, false, Provenance::GroundTruth)];
        let mut d = Vec::new();
        match k {
            // clean hits at descending scores
            0 | 1 | 2 => d.push(label(k, b, 0.95 - 0.01 * k as f64, false, Provenance::Rf)),
            // hit plus a confident false positive
            3 => {
                d.push(label(k, b, 0.6, false, Provenance::Rf));
                d.push(label(k, far, 0.9, false, Provenance::Rf));
            }
            // loose hit (IoU just above 0.5) and a low-score false positive
            4 => {
                d.push(label(
                    k,
                    [b[0] + 6.0, b[1], b[2], b[3]],
                    0.5,
                    false,
                    Provenance::Rf,
                ));
                d.push(label(k, far, 0.2, false, Provenance::Rf));
            }
            // miss: detection too far off
            5 => d.push(label(
                k,
                [b[0] + 20.0, b[1], b[2], b[3]],
                0.85,
                false,
                Provenance::Rf,
            )),
            // duplicate detections on one target: the second is a false positive
            6 => {
                d.push(label(k, b, 0.7, false, Provenance::Rf));
                d.push(label(
                    k,
                    [b[0] + 1.0, b[1], b[2], b[3]],
                    0.65,
                    false,
                    Provenance::Rf,
                ));
            }
            // detection on an occluded (ignored) target plus a real hit
            7 => {
                g.push(label(k, far, 1.0, true, Provenance::GroundTruth));
                d.push(label(k, far, 0.99, false, Provenance::Rf));
                d.push(label(k, b, 0.3, false, Provenance::Rf));
            }
            // no detection at all
            8 => {}
            // two targets, one found
            _ => {
                g.push(label(
                    k,
                    [200.0, 50.0, 30.0, 70.0],
                    1.0,
                    false,
                    Provenance::GroundTruth,
                ));
                d.push(label(
                    k,
                    [200.0, 50.0, 30.0, 70.0],
                    0.4,
                    false,
                    Provenance::Rf,
                ));
                d.push(label(k, far, 0.4, false, Provenance::Rf));
            }
        }
        gt.push(frame(k, g));
        dets.push(frame(k, d));
    }
    (dets, gt)
}
