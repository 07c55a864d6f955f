//! Core of the RF-labeling simulator.
//!
//! Everything here is pure computation over `alloc` collections: world
//! description, pinhole projection, time-of-flight ranging, trilateration,
//! error-model calibration, label synthesis, label-noise emulation and quality
//! metrics. File formats, the command-line front-end and parallel orchestration
//! live in the `rflabel` crate.
#![no_std]

extern crate alloc;

pub mod emulation;
pub mod error;
pub mod geometry;
pub mod labeling;
pub mod localization;
pub mod pipeline;
pub mod projection;
pub mod quality;
pub mod ranging;
pub mod scene;
pub mod seed;
pub mod stats;

pub use error::{Error, ErrorClass, Result};
pub use geometry::{Polygon, Rect, Vec2, Vec3};
pub use seed::{SeedKey, SimRng};
