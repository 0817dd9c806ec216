//! Mpemba-effect diagnostics: crossings of distance-to-equilibrium curves,
//! thermalization-time maps over initial states, and relaxation velocity
//! fields.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{cartesian_rhs, stability, BlochState, SystemParams};
use crate::error::{domain, Error, Result};
use crate::integrator::{first_crossing_time, integrate_until, IntegratorConfig, Trajectory};
use crate::metrics::{equilibrium_density, metric_value, Metric};

/// Differences this close to zero count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// One metric evaluated along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    /// Identifier of the initial state the series belongs to.
    pub source: usize,
    pub metric: Metric,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl MetricSeries {
    pub fn from_trajectory(source: usize, trajectory: &Trajectory, metric: Metric) -> Result<Self> {
        let reference = equilibrium_density(&trajectory.params);
        let values = trajectory
            .states
            .iter()
            .map(|s| metric_value(metric, s, &trajectory.params, &reference))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            source,
            metric,
            times: trajectory.times.clone(),
            values,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub first: usize,
    pub second: usize,
    pub time: f64,
    pub metric: Metric,
}

/// Times at which `a − b` changes sign.
///
/// Direct sign changes are located by linear interpolation. A run of
/// grid points where the two series tie counts as one crossing, placed at
/// the start of the run, when the sign differs on either side of it.
/// Crossings earlier than the first output stride are dropped as
/// initial-ordering artifacts.
pub fn detect_crossings(a: &MetricSeries, b: &MetricSeries) -> Result<Vec<CrossingEvent>> {
    if a.times != b.times || a.values.len() != a.times.len() || b.values.len() != b.times.len() {
        return Err(Error::Usage(format!(
            "series {} and {} are not on the same time grid",
            a.source, b.source
        )));
    }
    if a.metric != b.metric {
        return Err(Error::Usage("cannot compare different metrics".into()));
    }
    let times = &a.times;
    let first_stride = times.get(1).copied().unwrap_or(f64::INFINITY);
    let mut events = Vec::new();
    let mut last_sign = 0.0;
    let mut tie_start: Option<usize> = None;
    for i in 0..times.len() {
        let delta = a.values[i] - b.values[i];
        if delta.abs() <= TIE_TOLERANCE {
            if last_sign != 0.0 && tie_start.is_none() {
                tie_start = Some(i);
            }
            continue;
        }
        let sign = delta.signum();
        if last_sign != 0.0 && sign != last_sign {
            let time = match tie_start {
                Some(j) => times[j],
                None => {
                    let prev = a.values[i - 1] - b.values[i - 1];
                    times[i - 1] + prev / (prev - delta) * (times[i] - times[i - 1])
                }
            };
            if time >= first_stride {
                events.push(CrossingEvent {
                    first: a.source,
                    second: b.source,
                    time,
                    metric: a.metric,
                });
            }
        }
        last_sign = sign;
        tie_start = None;
    }
    Ok(events)
}

/// All crossings among every pair of series, ordered by pair then time.
pub fn pairwise_crossings(series: &[MetricSeries]) -> Result<Vec<CrossingEvent>> {
    let mut out = Vec::new();
    for (i, a) in series.iter().enumerate() {
        for b in &series[i + 1..] {
            out.extend(detect_crossings(a, b)?);
        }
    }
    Ok(out)
}

/// Rectangular grid of initial states in the `φ = 0` half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub r_count: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_count: usize,
}

impl Default for StateGrid {
    /// 64 × 64 over `r₀ ∈ [0.05, 1]`, `θ₀ ∈ [0, π]`.
    fn default() -> Self {
        Self {
            r_min: 0.05,
            r_max: 1.0,
            r_count: 64,
            theta_min: 0.0,
            theta_max: PI,
            theta_count: 64,
        }
    }
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

impl StateGrid {
    pub fn validate(&self) -> Result<()> {
        if self.r_count == 0 || self.theta_count == 0 {
            return Err(domain("grid", "grid must have at least one cell"));
        }
        if !(0.0 <= self.r_min && self.r_min <= self.r_max && self.r_max <= 1.0) {
            return Err(domain("grid", "need 0 <= r_min <= r_max <= 1"));
        }
        if !(0.0 <= self.theta_min && self.theta_min <= self.theta_max && self.theta_max <= PI) {
            return Err(domain("grid", "need 0 <= theta_min <= theta_max <= pi"));
        }
        Ok(())
    }

    pub fn r_values(&self) -> Vec<f64> {
        linspace(self.r_min, self.r_max, self.r_count)
    }

    pub fn theta_values(&self) -> Vec<f64> {
        linspace(self.theta_min, self.theta_max, self.theta_count)
    }

    /// Cells in θ-major order: all `r` for the first θ, then the next θ.
    pub fn states(&self) -> Vec<BlochState> {
        let rs = self.r_values();
        self.theta_values()
            .into_iter()
            .flat_map(|theta| rs.iter().map(move |&r| BlochState { r, theta, phi: 0.0 }))
            .collect()
    }
}

/// States on the line `a·r + b·θ/π = c` for `r` evenly spaced in `[r_min, r_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub count: usize,
}

impl LineSpec {
    pub fn states(&self) -> Result<Vec<BlochState>> {
        if self.b == 0.0 {
            return Err(domain("line.b", "coefficient of theta/pi must be non-zero"));
        }
        if self.count == 0 {
            return Err(domain("line.count", "need at least one state"));
        }
        linspace(self.r_min, self.r_max, self.count)
            .into_iter()
            .map(|r| {
                let theta = PI * (self.c - self.a * r) / self.b;
                // Snap rounding noise at the ends of [0, π].
                let theta = if (theta - PI).abs() < 1e-12 {
                    PI
                } else if theta.abs() < 1e-12 {
                    0.0
                } else {
                    theta
                };
                BlochState::new(r, theta, 0.0)
            })
            .collect()
    }
}

/// Thermalization time per grid cell, `None` where the horizon is too short.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalizationMap {
    pub grid: StateGrid,
    pub metric: Metric,
    pub cutoff: f64,
    /// θ-major, matching [`StateGrid::states`].
    pub tau: Vec<Option<f64>>,
}

impl ThermalizationMap {
    pub fn cells(&self) -> impl Iterator<Item = (BlochState, Option<f64>)> + '_ {
        self.grid.states().into_iter().zip(self.tau.iter().copied())
    }

    /// τ for cell `(theta_index, r_index)`.
    pub fn get(&self, theta_index: usize, r_index: usize) -> Option<f64> {
        self.tau[theta_index * self.grid.r_count + r_index]
    }
}

/// First time `metric` drops below `cutoff` when starting from `initial`.
pub fn thermalization_time(
    initial: &BlochState,
    params: &SystemParams,
    metric: Metric,
    cutoff: f64,
    config: &IntegratorConfig,
) -> Result<Option<f64>> {
    // The crossing depends only on the prefix up to the first sample below the cutoff.
    let reference = equilibrium_density(params);
    let mut failure = None;
    let trajectory = integrate_until(initial, params, config, |s| {
        match metric_value(metric, s, params, &reference) {
            Ok(v) => v < cutoff,
            Err(e) => {
                failure = Some(e);
                true
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let series = MetricSeries::from_trajectory(0, &trajectory, metric)?;
    Ok(first_crossing_time(&series.times, &series.values, cutoff))
}

/// Cells are evaluated in parallel; the result is ordered and independent
/// of scheduling.
pub fn thermalization_map(
    grid: &StateGrid,
    params: &SystemParams,
    metric: Metric,
    cutoff: f64,
    config: &IntegratorConfig,
) -> Result<ThermalizationMap> {
    grid.validate()?;
    params.validate()?;
    if !(cutoff > 0.0) {
        return Err(domain("cutoff", format!("must be positive, got {cutoff}")));
    }
    let tau = grid
        .states()
        .par_iter()
        .map(|s| thermalization_time(s, params, metric, cutoff, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(ThermalizationMap {
        grid: *grid,
        metric,
        cutoff,
        tau,
    })
}

/// Relaxation velocity at one point of the `φ = 0` half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSample {
    pub r: f64,
    pub theta: f64,
    /// Transverse velocity component.
    pub vx: f64,
    /// Longitudinal velocity component.
    pub vz: f64,
    pub speed: f64,
}

impl FieldSample {
    /// Unit vector along the flow, or zero at a fixed point.
    pub fn direction(&self) -> (f64, f64) {
        if self.speed == 0.0 {
            (0.0, 0.0)
        } else {
            (self.vx / self.speed, self.vz / self.speed)
        }
    }
}

/// Velocity field on the grid. Cells at `r = 0` are skipped.
pub fn speed_field(grid: &StateGrid, params: &SystemParams) -> Result<Vec<FieldSample>> {
    grid.validate()?;
    params.validate()?;
    Ok(grid
        .states()
        .into_iter()
        .filter(|s| s.r > 0.0)
        .map(|s| {
            let v = cartesian_rhs(&s.cartesian(), params);
            FieldSample {
                r: s.r,
                theta: s.theta,
                vx: v.x,
                vz: v.z,
                speed: v.norm(),
            }
        })
        .collect())
}

/// Angle between the flow and the straight line to equilibrium.
pub fn radial_misalignment(sample: &FieldSample, params: &SystemParams) -> f64 {
    let (st, ct) = sample.theta.sin_cos();
    let to_eq = params.equilibrium() - Vector3::new(sample.r * st, 0.0, sample.r * ct);
    let v = Vector3::new(sample.vx, 0.0, sample.vz);
    v.cross(&to_eq).norm().atan2(v.dot(&to_eq))
}

/// `min(1/|λ_r|, 1/|λ_θ|)`.
pub fn mpe_timescale(params: &SystemParams) -> Result<f64> {
    Ok(stability(params)?.mpe_timescale)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let rank = 0.5 * (i + j) as f64;
            for &k in &idx[i..=j] {
                out[k] = rank;
            }
            i = j + 1;
        }
        out
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
