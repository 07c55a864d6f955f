//! Loading scenes and configurations from templates, names or files.

use std::path::Path;

use rflabel_core::localization::ErrorConfig;
use rflabel_core::pipeline::PipelineConfig;
use rflabel_core::scene::{build_scene, templates, Scene, SceneConfig};
use serde::Deserialize;

use crate::error::{CliError, Result};
use crate::io::read_json;

pub const TEMPLATES: [&str; 2] = ["street", "minimal"];

pub fn template(name: &str, seed: u64) -> Result<SceneConfig> {
    match name {
        "street" => Ok(templates::street(seed)?),
        "minimal" => Ok(templates::minimal()),
        other => Err(CliError::config(format!(
            "unknown template `{other}` (expected one of {TEMPLATES:?})"
        ))),
    }
}

/// Scene from a JSON file when given, otherwise from the named template.
pub fn load_scene(file: Option<&Path>, template_name: &str, seed: u64) -> Result<Scene> {
    let config = match file {
        Some(path) => read_json::<SceneConfig>(path)?,
        None => template(template_name, seed)?,
    };
    Ok(build_scene(config)?)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    Pipeline(Box<PipelineConfig>),
    Error(ErrorConfig),
}

/// `spec` is a built-in configuration name (`S0`..`S3`) or a JSON file holding
/// either a full pipeline configuration or an error configuration.
pub fn load_pipeline_config(spec: &str) -> Result<PipelineConfig> {
    if let Some(error) = ErrorConfig::builtin(spec) {
        return Ok(PipelineConfig::new(error));
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::config(format!(
            "`{spec}` is neither a built-in configuration nor an existing file"
        )));
    }
    let config = match read_json::<ConfigFile>(path)? {
        ConfigFile::Pipeline(p) => *p,
        ConfigFile::Error(e) => PipelineConfig::new(e),
    };
    config.validate()?;
    Ok(config)
}

/// Error configuration with gamma parameters, calibrating when absent.
pub fn load_error_config(spec: &str) -> Result<ErrorConfig> {
    let error = load_pipeline_config(spec)?.error;
    if error.is_calibrated() {
        Ok(error)
    } else {
        Ok(error.calibrated()?)
    }
}
