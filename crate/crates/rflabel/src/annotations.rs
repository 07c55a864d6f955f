//! Annotation JSON: frames of labelled boxes.
//!
//! ```json
//! {"frames": [{"frame_id": 0, "camera_id": "cam0", "timestamp": 0.0,
//!   "labels": [{"bbox": [x, y, w, h], "depth": 7.9, "identity": "02:..",
//!               "confidence": 1.0, "provenance": "RF", "occluded": false,
//!               "clipped": false}]}]}
//! ```

use rflabel_core::labeling::{Frame, Label, Provenance};
use rflabel_core::projection::BoundingBox;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub camera_id: String,
    pub timestamp: f64,
    pub labels: Vec<LabelRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRecord {
    pub bbox: [f64; 4],
    #[serde(default)]
    pub depth: Option<f64>,
    #[serde(default)]
    pub identity: Option<String>,
    #[serde(default = "one")]
    pub confidence: f64,
    pub provenance: Provenance,
    #[serde(default)]
    pub occluded: bool,
    #[serde(default)]
    pub clipped: bool,
}

fn one() -> f64 {
    1.0
}

impl AnnotationFile {
    pub fn from_frames(frames: &[Frame]) -> Self {
        AnnotationFile {
            frames: frames
                .iter()
                .map(|f| FrameRecord {
                    frame_id: f.frame_id,
                    camera_id: f.camera_id.clone(),
                    timestamp: f.timestamp,
                    labels: f.labels.iter().map(LabelRecord::from_label).collect(),
                })
                .collect(),
        }
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
            .into_iter()
            .map(|f| Frame {
                labels: f
                    .labels
                    .into_iter()
                    .map(|l| l.into_label(f.frame_id, &f.camera_id))
                    .collect(),
                frame_id: f.frame_id,
                camera_id: f.camera_id,
                timestamp: f.timestamp,
            })
            .collect()
    }

    pub fn label_count(&self) -> usize {
        self.frames.iter().map(|f| f.labels.len()).sum()
    }
}

impl LabelRecord {
    pub fn from_label(l: &Label) -> Self {
        let b = l.bbox;
        LabelRecord {
            bbox: [b.x, b.y, b.w, b.h],
            depth: l.depth,
            identity: l.identity.clone(),
            confidence: l.confidence,
            provenance: l.provenance,
            occluded: l.occluded,
            clipped: b.clipped,
        }
    }

    pub fn into_label(self, frame_id: u64, camera_id: &str) -> Label {
        let [x, y, w, h] = self.bbox;
        Label {
            frame_id,
            camera_id: camera_id.into(),
            bbox: BoundingBox {
                clipped: self.clipped,
                ..BoundingBox::new(x, y, w, h)
            },
            depth: self.depth,
            identity: self.identity,
            confidence: self.confidence,
            provenance: self.provenance,
            occluded: self.occluded,
            hidden: false,
        }
    }
}
