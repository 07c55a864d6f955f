//! Parallel drivers. Every random stream in the core is keyed on stable ids, so
//! results do not depend on the number of workers.

use rayon::prelude::*;
use rflabel_core::emulation::{emulate_frame, emulation_sampler, EmulationReport, EmulationSpec};
use rflabel_core::labeling::Frame;
use rflabel_core::pipeline::{assemble, simulate_target, PipelineConfig, SimulationOutput};
use rflabel_core::scene::{CameraModel, Scene};

use crate::error::{CliError, Result};

/// A pool of `workers` threads; `None` or 0 uses rayon's default.
pub fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config(format!("cannot start worker pool: {e}")))
}

pub fn simulate(
    scene: &Scene,
    config: &PipelineConfig,
    seed: u64,
    workers: Option<usize>,
) -> Result<SimulationOutput> {
    config.validate()?;
    let tracks = pool(workers)?.install(|| {
        scene
            .targets
            .par_iter()
            .map(|t| simulate_target(scene, t, config, seed))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(assemble(scene, config, tracks)?)
}

/// Emulates frames from any of `cameras`, matched by id.
pub fn emulate(
    frames: &[Frame],
    cameras: &[CameraModel],
    spec: &EmulationSpec,
    workers: Option<usize>,
) -> Result<(Vec<Frame>, EmulationReport)> {
    spec.validate()?;
    let sampler = emulation_sampler(spec)?;
    let outcomes = pool(workers)?.install(|| {
        frames
            .par_iter()
            .map(|f| {
                let camera = cameras
                    .iter()
                    .find(|c| c.id == f.camera_id)
                    .ok_or_else(|| {
                        CliError::config(format!("no camera `{}` in the scene", f.camera_id))
                    })?;
                Ok(emulate_frame(f, camera, spec, &sampler)?)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(EmulationReport::collect(frames, outcomes))
}
