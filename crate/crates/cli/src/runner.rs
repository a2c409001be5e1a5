//! Runs a scenario's controller list and writes its artifacts.

use std::path::{Path, PathBuf};

use semiactive_core::controllers::{HinfDesignModel, HinfSettings};
use semiactive_core::lti::HinfController;
use semiactive_core::metrics::MetricReport;
use semiactive_core::road::{per_axle_profiles, RoadProfile};
use semiactive_core::sim::{self, SimConfig, Strategy, Trajectory};
use semiactive_core::vehicle::CornerParams;

use crate::cache;
use crate::config::{ControllerKind, Model, Scenario};
use crate::error::{CliError, Result};
use crate::report::{write_summary, SummaryRow};
use crate::svg;

/// Command-line overrides of a scenario.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub svg: bool,
}

pub fn apply_options(scenario: &mut Scenario, opts: &RunOptions) -> Result<()> {
    if let Some(out) = &opts.out {
        scenario.out = out.clone();
    }
    if let Some(seed) = opts.seed {
        scenario.seed = Some(seed);
        scenario.model.set_seed(seed);
    }
    if let Some(dt) = opts.dt {
        scenario.sim.dt = dt;
    }
    if let Some(duration) = opts.duration {
        scenario.sim.duration = duration;
    }
    scenario.sim.validate().map_err(|e| CliError::schema(format!("--dt/--duration: {e}")))
}

pub fn corners(model: &Model) -> &[CornerParams] {
    match model {
        Model::Quarter { params, .. } => std::slice::from_ref(&params.corner),
        Model::Full { params, .. } => &params.corners,
    }
}

pub fn road_profiles(model: &Model) -> Result<Vec<RoadProfile>> {
    let profile = |spec| RoadProfile::from_spec(spec).map_err(|e| CliError::schema(format!("road: {e}")));
    match model {
        Model::Quarter { road, .. } => Ok(vec![profile(road)?]),
        Model::Full { params, left, right, speed } => {
            per_axle_profiles(&profile(left)?, &profile(right)?, params, *speed).map_err(CliError::from_sim)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheUse {
    Hit,
    Stored,
    Disabled,
}

#[derive(Debug, Clone)]
pub struct Synthesized {
    pub controller: HinfController,
    pub design: HinfDesignModel,
    pub key: String,
    pub cache: CacheUse,
}

fn synthesis_error(e: semiactive_core::Error) -> CliError {
    CliError::Synthesis(e.to_string())
}

/// Builds the design model and synthesizes (or loads) its controller.
pub fn synthesize(model: &Model, settings: &HinfSettings, cache_dir: Option<&Path>) -> Result<Synthesized> {
    let (design, key) = match model {
        Model::Quarter { params, .. } => (
            HinfDesignModel::quarter_car(params, settings).map_err(synthesis_error)?,
            cache::key("quarter", params, settings),
        ),
        Model::Full { params, .. } => (
            HinfDesignModel::full_vehicle(params, settings).map_err(synthesis_error)?,
            cache::key("full6axle", params, settings),
        ),
    };
    if let Some(controller) = cache_dir.and_then(|dir| cache::load(dir, &key)) {
        return Ok(Synthesized { controller, design, key, cache: CacheUse::Hit });
    }
    let controller = design.synthesize(settings).map_err(synthesis_error)?;
    let cache = match cache_dir {
        Some(dir) => {
            cache::store(dir, &key, &controller)?;
            CacheUse::Stored
        }
        None => CacheUse::Disabled,
    };
    Ok(Synthesized { controller, design, key, cache })
}

pub fn strategy(model: &Model, kind: &ControllerKind, cache_dir: Option<&Path>) -> Result<Strategy> {
    Ok(match kind {
        ControllerKind::Passive => Strategy::Passive,
        ControllerKind::Add => Strategy::Add,
        ControllerKind::Pdd(v) => Strategy::Pdd(*v),
        ControllerKind::Hinf(settings) => {
            let s = synthesize(model, settings, cache_dir)?;
            Strategy::Hinf { controller: s.controller, design: s.design, eps_v: settings.eps_v }
        }
    })
}

pub fn simulate_one(model: &Model, strategy: &Strategy, roads: &[RoadProfile], cfg: &SimConfig) -> Result<Trajectory> {
    let traj = match model {
        Model::Quarter { params, .. } => sim::run(params, strategy, roads, cfg),
        Model::Full { params, .. } => sim::run(params, strategy, roads, cfg),
    };
    traj.map_err(CliError::from_sim)
}

#[derive(Debug, Clone)]
pub struct ControllerRun {
    pub name: String,
    pub report: MetricReport,
    pub traj: Trajectory,
}

/// Synthesizes what is needed, then simulates every controller (in
/// parallel, one thread each).
pub fn simulate(scenario: &Scenario, cache_dir: Option<&Path>) -> Result<Vec<ControllerRun>> {
    let roads = road_profiles(&scenario.model)?;
    let strategies = scenario
        .controllers
        .iter()
        .map(|c| strategy(&scenario.model, &c.kind, cache_dir))
        .collect::<Result<Vec<_>>>()?;
    let corners = corners(&scenario.model);
    let results: Vec<Result<ControllerRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenario
            .controllers
            .iter()
            .zip(&strategies)
            .map(|(spec, strategy)| {
                let roads = &roads;
                scope.spawn(move || {
                    let traj = simulate_one(&scenario.model, strategy, roads, &scenario.sim)?;
                    let report = MetricReport::compute(&traj, corners).map_err(CliError::from_sim)?;
                    Ok(ControllerRun { name: spec.name.clone(), report, traj })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    results.into_iter().collect()
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let err = |e: csv::Error| CliError::Other(format!("writing {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

pub fn state_names(model: &Model) -> Vec<String> {
    match model {
        Model::Quarter { .. } => ["x_s", "v_s", "x_u", "v_u"].map(String::from).to_vec(),
        Model::Full { params, .. } => {
            let n = params.corner_count();
            let mut names: Vec<String> = ["heave", "pitch", "roll"].map(String::from).to_vec();
            names.extend((0..n).map(|i| format!("x_u_{i}")));
            names.extend(["heave_rate", "pitch_rate", "roll_rate"].map(String::from));
            names.extend((0..n).map(|i| format!("v_u_{i}")));
            names
        }
    }
}

/// Column names of a trajectory CSV.
pub fn trajectory_header(model: &Model) -> Vec<String> {
    let n = corners(model).len();
    let mut h: Vec<String> = ["time", "displacement", "accel", "absorbed_power"].map(String::from).to_vec();
    for q in ["road", "x_def", "v_def", "c_in", "force"] {
        h.extend((0..n).map(|i| format!("{q}_{i}")));
    }
    h.extend(state_names(model).into_iter().map(|s| format!("state_{s}")));
    h
}

pub fn write_trajectory(path: &Path, model: &Model, run: &ControllerRun) -> Result<()> {
    let t = &run.traj;
    let rows = (0..t.len()).map(|k| {
        let mut row = vec![num(t.time[k]), num(t.displacement[k]), num(t.accel[k]), num(run.report.absorbed_power[k])];
        for q in [&t.road, &t.x_def, &t.v_def, &t.c_in, &t.force] {
            row.extend(q[k].iter().map(|v| num(*v)));
        }
        row.extend(t.state[k].iter().map(|v| num(*v)));
        row
    });
    write_csv(path, &trajectory_header(model), rows)
}

/// Quantities written as one plot file per scenario, one column per
/// controller. `c_in` is corner 0 (front left on the full vehicle).
pub const PLOTS: [(&str, &str); 4] = [
    ("displacement", "m"),
    ("acceleration", "m/s^2"),
    ("absorbed_power", "W"),
    ("c_in", "N s/m"),
];

fn plot_series(run: &ControllerRun, quantity: &str) -> Vec<f64> {
    match quantity {
        "displacement" => run.traj.displacement.clone(),
        "acceleration" => run.traj.accel.clone(),
        "absorbed_power" => run.report.absorbed_power.clone(),
        _ => Trajectory::corner_series(&run.traj.c_in, 0),
    }
}

pub struct Artifacts {
    pub summary: PathBuf,
    pub files: Vec<PathBuf>,
    pub rows: Vec<SummaryRow>,
}

pub fn summary_rows(scenario: &Scenario, runs: &[ControllerRun]) -> Vec<SummaryRow> {
    runs.iter()
        .map(|r| SummaryRow {
            scenario: scenario.name.clone(),
            controller: r.name.clone(),
            rms_accel: r.report.rms_accel,
            absorbed_power_final: r.report.absorbed_power_final,
            switch_count: r.report.switch_count,
        })
        .collect()
}

pub fn write_artifacts(scenario: &Scenario, runs: &[ControllerRun], out: &Path, with_svg: bool) -> Result<Artifacts> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(format!("creating {}", out.display()), e))?;
    let mut files = vec![];
    for run in runs {
        let path = out.join(format!("{}_{}.csv", scenario.name, run.name));
        write_trajectory(&path, &scenario.model, run)?;
        files.push(path);
    }
    if let Some(first) = runs.first() {
        let time = &first.traj.time;
        for (quantity, unit) in PLOTS {
            let series: Vec<(String, Vec<f64>)> =
                runs.iter().map(|r| (r.name.clone(), plot_series(r, quantity))).collect();
            let mut header = vec!["time".to_string()];
            header.extend(series.iter().map(|s| s.0.clone()));
            let rows = (0..time.len()).map(|k| {
                let mut row = vec![num(time[k])];
                row.extend(series.iter().map(|s| num(s.1[k])));
                row
            });
            let path = out.join(format!("{}_plot_{quantity}.csv", scenario.name));
            write_csv(&path, &header, rows)?;
            files.push(path);
            if with_svg {
                let chart = svg::line_chart(&format!("{} {quantity}", scenario.name), "time (s)", unit, time, &series);
                let path = out.join(format!("{}_plot_{quantity}.svg", scenario.name));
                std::fs::write(&path, chart).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
                files.push(path);
            }
        }
    }
    let rows = summary_rows(scenario, runs);
    let summary = out.join("summary.csv");
    write_summary(&summary, &rows)?;
    Ok(Artifacts { summary, files, rows })
}

pub fn cache_dir(out: &Path) -> PathBuf {
    out.join("cache")
}

/// The `run` verb: simulate, then write all artifacts to the output
/// directory.
pub fn run_scenario(scenario: &Scenario, with_svg: bool) -> Result<Artifacts> {
    let runs = simulate(scenario, Some(&cache_dir(&scenario.out)))?;
    write_artifacts(scenario, &runs, &scenario.out, with_svg)
}
