//! On-disk cache of synthesized H-infinity controllers.
//!
//! Entries are keyed by a SHA-256 of the model kind, the vehicle
//! parameters and the synthesis settings, all as canonical JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use semiactive_core::controllers::HinfSettings;
use semiactive_core::lti::{HinfController, RealizationDoc};

use crate::error::{CliError, Result};

const FORMAT: &str = "hinf-cache-1";

#[derive(Serialize)]
struct KeyDoc<'a, P: Serialize> {
    format: &'static str,
    model: &'a str,
    params: &'a P,
    c_nominal: Option<f64>,
    weights: &'a semiactive_core::vehicle::HinfWeights,
    gamma_tol: f64,
    gamma_max: f64,
    backoff: f64,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    gamma_achieved: f64,
    gamma_opt: f64,
    controller: RealizationDoc,
}

/// Hex SHA-256 of everything the synthesis depends on. `eps_v` only
/// matters at runtime and is left out.
pub fn key<P: Serialize>(model: &str, params: &P, settings: &HinfSettings) -> String {
    let doc = KeyDoc {
        format: FORMAT,
        model,
        params,
        c_nominal: settings.c_nominal,
        weights: &settings.weights,
        gamma_tol: settings.gamma_tol,
        gamma_max: settings.gamma_max,
        backoff: settings.backoff,
    };
    let text = serde_json::to_string(&doc).expect("cache key serializes");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn entry_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("hinf-{key}.json"))
}

/// A missing or unreadable entry is a miss.
pub fn load(dir: &Path, key: &str) -> Option<HinfController> {
    let text = std::fs::read_to_string(entry_path(dir, key)).ok()?;
    let entry: Entry = serde_json::from_str(&text).ok()?;
    if entry.key != key {
        return None;
    }
    Some(HinfController {
        k: entry.controller.try_into().ok()?,
        gamma_achieved: entry.gamma_achieved,
        gamma_opt: entry.gamma_opt,
    })
}

pub fn store(dir: &Path, key: &str, controller: &HinfController) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let entry = Entry {
        key: key.to_string(),
        gamma_achieved: controller.gamma_achieved,
        gamma_opt: controller.gamma_opt,
        controller: RealizationDoc::from(&controller.k),
    };
    let path = entry_path(dir, key);
    let text = serde_json::to_string_pretty(&entry).expect("cache entry serializes");
    std::fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok(path)
}
