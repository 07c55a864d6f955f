//! COCO-style export and import of annotation files.
//!
//! Images are named `{camera_id}/{frame_id:06}.jpg`. Fields without a COCO
//! counterpart travel in an `rflabel` object on images and annotations, so a
//! round trip through COCO is lossless.

use std::collections::BTreeMap;

use rflabel_core::labeling::Provenance;
use rflabel_core::scene::ImageSize;
use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotationFile, FrameRecord, LabelRecord};
use crate::error::{CliError, Result};

pub const PERSON_CATEGORY: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoFile {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    #[serde(default)]
    pub rflabel: Option<ImageExtra>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageExtra {
    pub camera_id: String,
    pub frame_id: u64,
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: [f64; 4],
    pub area: f64,
    pub iscrowd: u8,
    #[serde(default)]
    pub ignore: u8,
    #[serde(default)]
    pub score: Option<f64>,
    #[serde(default)]
    pub rflabel: Option<AnnotationExtra>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationExtra {
    pub depth: Option<f64>,
    pub identity: Option<String>,
    pub provenance: Provenance,
    pub occluded: bool,
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
}

pub fn image_file_name(camera_id: &str, frame_id: u64) -> String {
    format!("{camera_id}/{frame_id:06}.jpg")
}

/// Converts an annotation file; `sizes` supplies image dimensions per camera.
pub fn to_coco(file: &AnnotationFile, sizes: &BTreeMap<String, ImageSize>) -> CocoFile {
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    for (i, f) in file.frames.iter().enumerate() {
        let image_id = i as u64 + 1;
        let size = sizes.get(&f.camera_id);
        images.push(CocoImage {
            id: image_id,
            file_name: image_file_name(&f.camera_id, f.frame_id),
            width: size.map(|s| s.width),
            height: size.map(|s| s.height),
            rflabel: Some(ImageExtra {
                camera_id: f.camera_id.clone(),
                frame_id: f.frame_id,
                timestamp: f.timestamp,
            }),
        });
        for l in &f.labels {
            annotations.push(CocoAnnotation {
                id: annotations.len() as u64 + 1,
                image_id,
                category_id: PERSON_CATEGORY,
                bbox: l.bbox,
                area: l.bbox[2] * l.bbox[3],
                iscrowd: 0,
                ignore: u8::from(l.occluded),
                score: Some(l.confidence),
                rflabel: Some(AnnotationExtra {
                    depth: l.depth,
                    identity: l.identity.clone(),
                    provenance: l.provenance,
                    occluded: l.occluded,
                    clipped: l.clipped,
                }),
            });
        }
    }
    CocoFile {
        images,
        annotations,
        categories: vec![CocoCategory {
            id: PERSON_CATEGORY,
            name: "person".into(),
        }],
    }
}

/// Reads COCO back into frames. Images without extras are parsed from their
/// `{camera}/{frame}.ext` file name; annotations without extras become ground
/// truth.
pub fn from_coco(coco: &CocoFile) -> Result<AnnotationFile> {
    let mut frames: Vec<FrameRecord> = Vec::with_capacity(coco.images.len());
    let mut index = BTreeMap::new();
    for img in &coco.images {
        let extra = match &img.rflabel {
            Some(e) => e.clone(),
            None => parse_file_name(&img.file_name)?,
        };
        index.insert(img.id, frames.len());
        frames.push(FrameRecord {
            frame_id: extra.frame_id,
            camera_id: extra.camera_id,
            timestamp: extra.timestamp,
            labels: Vec::new(),
        });
    }
    for a in coco
        .annotations
        .iter()
        .filter(|a| a.category_id == PERSON_CATEGORY)
    {
        let &slot = index.get(&a.image_id).ok_or_else(|| {
            CliError::config(format!(
                "annotation {} references unknown image {}",
                a.id, a.image_id
            ))
        })?;
        let extra = a.rflabel.clone().unwrap_or(AnnotationExtra {
            depth: None,
            identity: None,
            provenance: Provenance::GroundTruth,
            occluded: a.ignore != 0,
            clipped: false,
        });
        frames[slot].labels.push(LabelRecord {
            bbox: a.bbox,
            depth: extra.depth,
            identity: extra.identity,
            confidence: a.score.unwrap_or(1.0),
            provenance: extra.provenance,
            occluded: extra.occluded,
            clipped: extra.clipped,
        });
    }
    Ok(AnnotationFile { frames })
}

fn parse_file_name(name: &str) -> Result<ImageExtra> {
    let bad = || {
        CliError::config(format!(
            "cannot derive camera and frame from image file name `{name}`"
        ))
    };
    let (camera, file) = name.rsplit_once('/').ok_or_else(bad)?;
    let stem = file.split('.').next().ok_or_else(bad)?;
    let frame_id: u64 = stem.parse().map_err(|_| bad())?;
    Ok(ImageExtra {
        camera_id: camera.into(),
        frame_id,
        timestamp: 0.0,
    })
}
