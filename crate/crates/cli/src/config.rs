//! Scenario files (JSON or TOML) and the built-in scenarios.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use semiactive_core::controllers::{HinfSettings, PddVariant};
use semiactive_core::road::{RoadShape, RoadSpec};
use semiactive_core::sim::SimConfig;
use semiactive_core::vehicle::{FullVehicleParams, QuarterCarParams};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Quarter,
    Full6axle,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Quarter => "quarter",
            ModelKind::Full6axle => "full6axle",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ParamsRef {
    Builtin(String),
    Inline(Value),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ControllerEntry {
    Name(String),
    Table(ControllerTable),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerTable {
    #[serde(rename = "type")]
    pub kind: String,
    pub name: Option<String>,
    pub variant: Option<PddVariant>,
    pub hinf: Option<HinfSettings>,
}

/// Scenario file as written on disk.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub model: ModelKind,
    /// Built-in parameter set name or an inline table; defaults to the
    /// built-in set of the model.
    pub params: Option<ParamsRef>,
    /// Merged into the parameters field by field.
    pub overrides: Option<Value>,
    pub road: Option<RoadSpec>,
    pub road_left: Option<RoadSpec>,
    pub road_right: Option<RoadSpec>,
    pub speed: Option<f64>,
    #[serde(default)]
    pub sim: SimConfig,
    pub controllers: Vec<ControllerEntry>,
    /// Replaces the seed of random roads (the right track gets `seed + 1`).
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControllerKind {
    Passive,
    Add,
    Pdd(PddVariant),
    Hinf(HinfSettings),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSpec {
    pub name: String,
    pub kind: ControllerKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Quarter { params: QuarterCarParams, road: RoadSpec },
    Full { params: FullVehicleParams, left: RoadSpec, right: RoadSpec, speed: f64 },
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Quarter { .. } => ModelKind::Quarter,
            Model::Full { .. } => ModelKind::Full6axle,
        }
    }

    /// Replaces the seed of random roads; the right track gets `seed + 1`.
    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Model::Quarter { road, .. } => reseed(road, seed),
            Model::Full { left, right, .. } => {
                reseed(left, seed);
                reseed(right, seed.wrapping_add(1));
            }
        }
    }
}

/// A validated scenario ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub model: Model,
    pub sim: SimConfig,
    pub controllers: Vec<ControllerSpec>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

pub const CONTROLLER_TYPES: [&str; 4] = ["passive", "add", "pdd", "hinf"];

pub struct Builtin {
    pub name: &'static str,
    pub summary: &'static str,
    pub toml: &'static str,
}

pub const BUILTINS: [Builtin; 2] = [
    Builtin {
        name: "paper-quarter",
        summary: "quarter car (m_s 2250 kg), 5 cm half-sine bump at 0.5 s, all four controllers",
        toml: r#"name = "paper-quarter"
model = "quarter"
params = "paper-quarter"
controllers = ["passive", "add", "pdd", "hinf"]

[road]
kind = "half_sine_bump"
height = 0.05
start = 0.5
duration = 0.5

[sim]
dt = 0.001
duration = 5.0
"#,
    },
    Builtin {
        name: "paper-6axle",
        summary: "six-axle truck at 10 m/s, 5 cm bump left at 0.5 s, 3 cm bump right at 1.0 s, all four controllers",
        toml: r#"name = "paper-6axle"
model = "full6axle"
params = "paper-6axle"
speed = 10.0
controllers = ["passive", "add", "pdd", "hinf"]

[road_left]
kind = "half_sine_bump"
height = 0.05
start = 0.5
duration = 0.5

[road_right]
kind = "half_sine_bump"
height = 0.03
start = 1.0
duration = 0.5

[sim]
dt = 0.001
duration = 5.0
"#,
    },
];

pub fn builtin(name: &str) -> Option<&'static Builtin> {
    BUILTINS.iter().find(|b| b.name == name)
}

fn builtin_params(name: &str) -> Option<(ModelKind, Value)> {
    let value = match name {
        "paper-quarter" => (ModelKind::Quarter, serde_json::to_value(QuarterCarParams::paper_quarter())),
        "paper-6axle" => (ModelKind::Full6axle, serde_json::to_value(FullVehicleParams::paper_6axle())),
        _ => return None,
    };
    Some((value.0, value.1.expect("built-in parameters serialize")))
}

fn default_params(model: ModelKind) -> &'static str {
    match model {
        ModelKind::Quarter => "paper-quarter",
        ModelKind::Full6axle => "paper-6axle",
    }
}

fn path_error<E: std::fmt::Display>(origin: &str, e: serde_path_to_error::Error<E>) -> CliError {
    let path = e.path().to_string();
    if path == "." || path.is_empty() {
        CliError::schema(format!("{origin}: {}", e.inner()))
    } else {
        CliError::schema(format!("{origin}: field `{path}`: {}", e.inner()))
    }
}

pub fn parse_json(text: &str, origin: &str) -> Result<ScenarioFile> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| path_error(origin, e))
}

pub fn parse_toml(text: &str, origin: &str) -> Result<ScenarioFile> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| path_error(origin, e))
}

/// Reads a scenario file, choosing the format from the extension.
pub fn load_file(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    let origin = path.display().to_string();
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
        Some("json") => parse_json(&text, &origin),
        Some("toml") => parse_toml(&text, &origin),
        _ => Err(CliError::schema(format!("{origin}: config must have a .json or .toml extension"))),
    }
}

/// Resolves `target` as a config file path, falling back to a built-in name.
pub fn load(target: &str) -> Result<Scenario> {
    let path = Path::new(target);
    if path.exists() {
        return resolve(load_file(path)?);
    }
    match builtin(target) {
        Some(b) => resolve(parse_toml(b.toml, b.name)?),
        None => Err(CliError::schema(format!(
            "`{target}` is neither a config file nor a built-in scenario (see list-builtins)"
        ))),
    }
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

fn params_value(file: &ScenarioFile) -> Result<Value> {
    let mut value = match &file.params {
        None => builtin_params(default_params(file.model)).unwrap().1,
        Some(ParamsRef::Builtin(name)) => {
            let (kind, v) = builtin_params(name).ok_or_else(|| {
                CliError::schema(format!("field `params`: unknown parameter set `{name}` (expected paper-quarter or paper-6axle)"))
            })?;
            if kind != file.model {
                return Err(CliError::schema(format!(
                    "field `params`: `{name}` is a {} parameter set but model is {}",
                    kind.as_str(),
                    file.model.as_str()
                )));
            }
            v
        }
        Some(ParamsRef::Inline(v)) => v.clone(),
    };
    if let Some(patch) = &file.overrides {
        if !patch.is_object() {
            return Err(CliError::schema("field `overrides`: expected a table"));
        }
        merge(&mut value, patch);
    }
    Ok(value)
}

fn typed_params<T: serde::de::DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "params".to_string() } else { format!("params.{path}") };
        CliError::schema(format!("field `{field}`: {}", e.inner()))
    })
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn controller(entry: &ControllerEntry, i: usize) -> Result<ControllerSpec> {
    let field = format!("controllers[{i}]");
    let (kind, name, variant, hinf) = match entry {
        ControllerEntry::Name(kind) => (kind.as_str(), None, None, None),
        ControllerEntry::Table(t) => (t.kind.as_str(), t.name.clone(), t.variant, t.hinf),
    };
    let kind = match kind {
        "passive" => ControllerKind::Passive,
        "add" => ControllerKind::Add,
        "pdd" => ControllerKind::Pdd(variant.unwrap_or_default()),
        "hinf" => ControllerKind::Hinf(hinf.unwrap_or_default()),
        other => {
            return Err(CliError::schema(format!(
                "field `{field}`: unknown controller `{other}` (expected one of {})",
                CONTROLLER_TYPES.join(", ")
            )))
        }
    };
    if variant.is_some() && !matches!(kind, ControllerKind::Pdd(_)) {
        return Err(CliError::schema(format!("field `{field}.variant`: only pdd takes a variant")));
    }
    if hinf.is_some() && !matches!(kind, ControllerKind::Hinf(_)) {
        return Err(CliError::schema(format!("field `{field}.hinf`: only hinf takes synthesis settings")));
    }
    let name = name.unwrap_or_else(|| entry_type(entry).to_string());
    if !valid_name(&name) {
        return Err(CliError::schema(format!("field `{field}.name`: `{name}` must be non-empty [A-Za-z0-9_-]")));
    }
    Ok(ControllerSpec { name, kind })
}

fn entry_type(entry: &ControllerEntry) -> &str {
    match entry {
        ControllerEntry::Name(k) => k,
        ControllerEntry::Table(t) => &t.kind,
    }
}

fn reseed(spec: &mut RoadSpec, seed: u64) {
    if let RoadShape::Random { seed: s, .. } = &mut spec.shape {
        *s = seed;
    }
}

fn require(road: &Option<RoadSpec>, field: &str, model: ModelKind) -> Result<RoadSpec> {
    road.clone()
        .ok_or_else(|| CliError::schema(format!("field `{field}`: required for model {}", model.as_str())))
}

fn forbid(present: bool, field: &str, model: ModelKind) -> Result<()> {
    match present {
        true => Err(CliError::schema(format!("field `{field}`: not used by model {}", model.as_str()))),
        false => Ok(()),
    }
}

/// Checks a parsed file and resolves parameter sets and controller names.
pub fn resolve(file: ScenarioFile) -> Result<Scenario> {
    if !valid_name(&file.name) {
        return Err(CliError::schema(format!("field `name`: `{}` must be non-empty [A-Za-z0-9_-]", file.name)));
    }
    let params = params_value(&file)?;
    let mut model = match file.model {
        ModelKind::Quarter => {
            forbid(file.road_left.is_some(), "road_left", file.model)?;
            forbid(file.road_right.is_some(), "road_right", file.model)?;
            forbid(file.speed.is_some(), "speed", file.model)?;
            let params: QuarterCarParams = typed_params(params)?;
            params.validate().map_err(|e| CliError::schema(format!("field `params`: {e}")))?;
            let road = require(&file.road, "road", file.model)?;
            Model::Quarter { params, road }
        }
        ModelKind::Full6axle => {
            forbid(file.road.is_some(), "road", file.model)?;
            let params: FullVehicleParams = typed_params(params)?;
            params.validate().map_err(|e| CliError::schema(format!("field `params`: {e}")))?;
            let left = require(&file.road_left, "road_left", file.model)?;
            let right = require(&file.road_right, "road_right", file.model)?;
            let speed = file
                .speed
                .ok_or_else(|| CliError::schema("field `speed`: required for model full6axle"))?;
            if !(speed.is_finite() && speed > 0.0) {
                return Err(CliError::schema(format!("field `speed`: must be positive, got {speed}")));
            }
            Model::Full { params, left, right, speed }
        }
    };
    if let Some(seed) = file.seed {
        model.set_seed(seed);
    }
    file.sim.validate().map_err(|e| CliError::schema(format!("field `sim`: {e}")))?;
    if file.controllers.is_empty() {
        return Err(CliError::schema("field `controllers`: at least one controller is required"));
    }
    let controllers = file
        .controllers
        .iter()
        .enumerate()
        .map(|(i, c)| controller(c, i))
        .collect::<Result<Vec<_>>>()?;
    for (i, c) in controllers.iter().enumerate() {
        if controllers[..i].iter().any(|d| d.name == c.name) {
            return Err(CliError::schema(format!(
                "field `controllers[{i}]`: duplicate controller name `{}` (set `name`)",
                c.name
            )));
        }
    }
    Ok(Scenario {
        name: file.name,
        model,
        sim: file.sim,
        controllers,
        seed: file.seed,
        out: file.out.unwrap_or_else(|| PathBuf::from("out")),
    })
}
