//! Executes an [`ExperimentConfig`] and writes its outputs.
//!
//! Every output reports times in units of `T₁` and rates in units of `1/T₁`.

use std::fs;
use std::path::{Path, PathBuf};

use mpemba_core::analysis::{
    pairwise_crossings, speed_field, thermalization_map, CrossingEvent, FieldSample,
    MetricSeries, ThermalizationMap,
};
use mpemba_core::bloch::stability;
use mpemba_core::integrator::integrate;
use mpemba_core::metrics::{equilibrium_density, metric_value};
use mpemba_core::{
    BlochState, Environment, IntegratorConfig, Metric, StabilityReport, SystemParams, Trajectory,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{io_error, CliError};

/// Everything computed for one environment.
#[derive(Debug, Clone)]
pub struct EnvironmentResult {
    pub env: Environment,
    pub params: SystemParams,
    pub integrator: IntegratorConfig,
    pub states: Vec<BlochState>,
    /// Empty unless trajectories or crossings were requested.
    pub trajectories: Vec<Trajectory>,
    pub crossings: Vec<CrossingEvent>,
    pub map: Option<ThermalizationMap>,
    pub field: Option<Vec<FieldSample>>,
    pub stability: Option<StabilityReport>,
}

impl EnvironmentResult {
    /// Earliest crossing in `metric`, if any.
    pub fn earliest_crossing(&self, metric: Metric) -> Option<f64> {
        self.crossings
            .iter()
            .filter(|e| e.metric == metric)
            .map(|e| e.time)
            .min_by(f64::total_cmp)
    }
}

pub fn execute(config: &ExperimentConfig) -> Result<Vec<EnvironmentResult>, CliError> {
    config.validate()?;
    config
        .environments
        .iter()
        .map(|&env| execute_env(config, env))
        .collect()
}

fn execute_env(config: &ExperimentConfig, env: Environment) -> Result<EnvironmentResult, CliError> {
    let params = config.params.resolve(env)?;
    let integrator = config.integrator.resolve(&params, config.horizon)?;
    let states = config.initial_states.states()?;
    let trajectories = if config.needs(Experiment::Trajectories) || config.needs(Experiment::Crossings) {
        states
            .par_iter()
            .map(|s| integrate(s, &params, &integrator))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    let mut crossings = Vec::new();
    if config.needs(Experiment::Crossings) {
        for &metric in &config.crossing_metrics {
            let series = trajectories
                .iter()
                .enumerate()
                .map(|(i, t)| MetricSeries::from_trajectory(i, t, metric))
                .collect::<Result<Vec<_>, _>>()?;
            crossings.extend(pairwise_crossings(&series)?);
        }
    }
    let grid = config.map_grid();
    let map = if config.needs(Experiment::ThermalMap) {
        Some(thermalization_map(&grid, &params, config.metric, config.cutoff, &integrator)?)
    } else {
        None
    };
    let field = if config.needs(Experiment::SpeedField) {
        Some(speed_field(&grid, &params)?)
    } else {
        None
    };
    let stability = if config.needs(Experiment::Stability) {
        Some(stability(&params)?)
    } else {
        None
    };
    Ok(EnvironmentResult {
        env,
        params,
        integrator,
        states,
        trajectories,
        crossings,
        map,
        field,
        stability,
    })
}

/// Formats a value with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_error(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("outputs serialize to JSON");
    text.push('\n');
    write_file(path, &text)
}

#[derive(Serialize)]
struct CrossingReport<'a> {
    environment: Environment,
    metrics: &'a [Metric],
    count: usize,
    events: Vec<CrossingEvent>,
}

#[derive(Serialize)]
struct StabilityOutput {
    environment: Environment,
    params: SystemParams,
    fixed_point: BlochState,
    lambda_r: f64,
    lambda_theta: f64,
    mpe_timescale: f64,
}

/// Stability report in units of `T₁`.
pub fn stability_json(params: &SystemParams, report: &StabilityReport) -> String {
    let t1 = params.t1;
    let out = StabilityOutput {
        environment: params.env,
        params: *params,
        fixed_point: report.fixed_point,
        lambda_r: report.lambda_r * t1,
        lambda_theta: report.lambda_theta * t1,
        mpe_timescale: report.mpe_timescale / t1,
    };
    let mut text = serde_json::to_string_pretty(&out).expect("report serializes to JSON");
    text.push('\n');
    text
}

fn trajectory_csv(trajectory: &Trajectory) -> Result<String, CliError> {
    let params = &trajectory.params;
    let reference = equilibrium_density(params);
    let mut out = String::from("t,r,theta,phi,D,Dz,Dperp,S\n");
    for (t, s) in trajectory.times.iter().zip(&trajectory.states) {
        let mut row = vec![num(t / params.t1), num(s.r), num(s.theta), num(s.phi)];
        for metric in Metric::ALL {
            row.push(num(metric_value(metric, s, params, &reference)?));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn map_csv(map: &ThermalizationMap, t1: f64) -> String {
    let mut out = String::from("r0,theta0,tau_th\n");
    for (s, tau) in map.cells() {
        let tau = tau.map(|t| num(t / t1)).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", num(s.r), num(s.theta), tau));
    }
    out
}

fn field_csv(field: &[FieldSample], t1: f64) -> String {
    let mut out = String::from("r,theta,vx,vz,speed\n");
    for f in field {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            num(f.r),
            num(f.theta),
            num(f.vx * t1),
            num(f.vz * t1),
            num(f.speed * t1)
        ));
    }
    out
}

/// Writes the outputs of `results` into `dir`, returning the files in the
/// order they were written.
///
/// Per environment `<env>` (`shared` or `independent`):
/// - `trajectories_<env>.csv`: index with `id,file,r0,theta0,phi0`;
///   `trajectories_<env>/state_NNN.csv` hold the series.
/// - `crossings_<env>.json`
/// - `tau_map_<env>.csv`
/// - `speed_field_<env>.csv`
/// - `stability_<env>.json`
pub fn write_outputs(
    config: &ExperimentConfig,
    results: &[EnvironmentResult],
    dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let mut written = Vec::new();
    for result in results {
        let label = result.env.label();
        let t1 = result.params.t1;
        if config.needs(Experiment::Trajectories) {
            let sub = format!("trajectories_{label}");
            let sub_dir = dir.join(&sub);
            fs::create_dir_all(&sub_dir).map_err(io_error(&sub_dir))?;
            let mut index = String::from("id,file,r0,theta0,phi0\n");
            for (i, (traj, s)) in result.trajectories.iter().zip(&result.states).enumerate() {
                let file = format!("state_{i:03}.csv");
                let path = sub_dir.join(&file);
                write_file(&path, &trajectory_csv(traj)?)?;
                written.push(path);
                index.push_str(&format!(
                    "{i},{sub}/{file},{},{},{}\n",
                    num(s.r),
                    num(s.theta),
                    num(s.phi)
                ));
            }
            let path = dir.join(format!("{sub}.csv"));
            write_file(&path, &index)?;
            written.push(path);
        }
        if config.needs(Experiment::Crossings) {
            let path = dir.join(format!("crossings_{label}.json"));
            let events = result
                .crossings
                .iter()
                .map(|e| CrossingEvent {
                    time: e.time / t1,
                    ..*e
                })
                .collect::<Vec<_>>();
            let report = CrossingReport {
                environment: result.env,
                metrics: &config.crossing_metrics,
                count: events.len(),
                events,
            };
            write_json(&path, &report)?;
            written.push(path);
        }
        if let Some(map) = &result.map {
            let path = dir.join(format!("tau_map_{label}.csv"));
            write_file(&path, &map_csv(map, t1))?;
            written.push(path);
        }
        if let Some(field) = &result.field {
            let path = dir.join(format!("speed_field_{label}.csv"));
            write_file(&path, &field_csv(field, t1))?;
            written.push(path);
        }
        if let Some(report) = &result.stability {
            let path = dir.join(format!("stability_{label}.json"));
            write_file(&path, &stability_json(&result.params, report))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Executes `config` and writes its outputs into `dir`.
pub fn run(config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let results = execute(config)?;
    write_outputs(config, &results, dir)
}
