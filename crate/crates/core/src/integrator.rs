//! Explicit Runge–Kutta integration of the Bloch field.
//!
//! The state is advanced in Cartesian coordinates and sampled on a uniform
//! output grid `k · output_stride`. Steps never straddle an output time, so
//! every sample is an actual integrator state rather than an interpolant.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::bloch::{cartesian_rhs, stability, BlochState, SystemParams};
use crate::error::{domain, Error, Result};

/// Tolerated excursion of `r` past the unit sphere before it counts as an error.
pub const BALL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with a fixed step.
    Rk4Fixed,
    /// Runge–Kutta–Fehlberg 4(5) with step-size control.
    Rkf45Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step, or the initial trial step for the adaptive method.
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    pub output_stride: f64,
}

impl IntegratorConfig {
    /// Resolves the fast relaxation mode: the output stride is
    /// `min(T₂, 1/|λ_θ|) / 50` and the base step a fifth of that.
    pub fn for_params(params: &SystemParams, method: Method, t_end: f64) -> Result<Self> {
        let report = stability(params)?;
        let fast = params.t2.min(1.0 / report.lambda_theta.abs());
        let output_stride = fast / 50.0;
        Ok(Self {
            method,
            step: output_stride / 5.0,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            t_end,
            output_stride,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step", self.step),
            ("t_end", self.t_end),
            ("output_stride", self.output_stride),
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(field, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Output times `0, s, 2s, …`, closed with `t_end` when it is not on the grid.
    pub fn sample_times(&self) -> Vec<f64> {
        let count = (self.t_end / self.output_stride + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=count).map(|k| k as f64 * self.output_stride).collect();
        let last = *times.last().unwrap_or(&0.0);
        if self.t_end - last > 1e-9 * self.output_stride {
            times.push(self.t_end);
        }
        times
    }
}

/// Time-ordered samples of a relaxation path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<BlochState>,
    pub params: SystemParams,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&BlochState> {
        self.states.last()
    }
}

fn rk4_step(m: &Vector3<f64>, h: f64, p: &SystemParams) -> Vector3<f64> {
    let k1 = cartesian_rhs(m, p);
    let k2 = cartesian_rhs(&(m + k1 * (h / 2.0)), p);
    let k3 = cartesian_rhs(&(m + k2 * (h / 2.0)), p);
    let k4 = cartesian_rhs(&(m + k3 * h), p);
    m + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

// Fehlberg tableau.
const A2: f64 = 1.0 / 4.0;
const A3: [f64; 2] = [3.0 / 32.0, 9.0 / 32.0];
const A4: [f64; 3] = [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0];
const A5: [f64; 4] = [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0];
const A6: [f64; 5] = [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0];
const B5: [f64; 6] = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0];

/// One Fehlberg step; returns the fifth-order solution and the embedded error.
fn rkf45_step(m: &Vector3<f64>, h: f64, p: &SystemParams) -> (Vector3<f64>, Vector3<f64>) {
    let k1 = cartesian_rhs(m, p);
    let k2 = cartesian_rhs(&(m + k1 * (h * A2)), p);
    let k3 = cartesian_rhs(&(m + (k1 * A3[0] + k2 * A3[1]) * h), p);
    let k4 = cartesian_rhs(&(m + (k1 * A4[0] + k2 * A4[1] + k3 * A4[2]) * h), p);
    let k5 = cartesian_rhs(
        &(m + (k1 * A5[0] + k2 * A5[1] + k3 * A5[2] + k4 * A5[3]) * h),
        p,
    );
    let k6 = cartesian_rhs(
        &(m + (k1 * A6[0] + k2 * A6[1] + k3 * A6[2] + k4 * A6[3] + k5 * A6[4]) * h),
        p,
    );
    let ks = [k1, k2, k3, k4, k5, k6];
    let mut hi = Vector3::zeros();
    let mut err = Vector3::zeros();
    for (i, k) in ks.iter().enumerate() {
        hi += k * (B5[i] * h);
        err += k * ((B5[i] - B4[i]) * h);
    }
    (m + hi, err)
}

/// Pulls a state that drifted marginally outside the unit ball back onto it.
fn clamp_to_ball(m: &mut Vector3<f64>, t: f64) -> Result<()> {
    let r = m.norm();
    if r > 1.0 {
        if r - 1.0 > BALL_SLACK {
            return Err(Error::IntegrationFailure {
                last_good_time: t,
                reason: format!("|m| = {r} left the Bloch ball"),
            });
        }
        *m /= r;
    }
    if !r.is_finite() {
        return Err(Error::IntegrationFailure {
            last_good_time: t,
            reason: "non-finite state".into(),
        });
    }
    Ok(())
}

struct Adaptive {
    h: f64,
}

impl Adaptive {
    /// Advances `m` from `t` to exactly `target`.
    fn advance(
        &mut self,
        m: &mut Vector3<f64>,
        t: f64,
        target: f64,
        p: &SystemParams,
        cfg: &IntegratorConfig,
    ) -> Result<()> {
        let mut now = t;
        while now < target {
            let remaining = target - now;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            let (next, err) = rkf45_step(m, h, p);
            let mut ratio: f64 = 0.0;
            for k in 0..3 {
                let scale = cfg.abs_tol + cfg.rel_tol * m[k].abs().max(next[k].abs());
                ratio = ratio.max(err[k].abs() / scale);
            }
            if ratio <= 1.0 {
                *m = next;
                clamp_to_ball(m, now)?;
                now = if last { target } else { now + h };
            }
            let factor = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            // A step truncated at an output time says little about the natural step.
            if !(last && ratio <= 1.0) || factor < 1.0 {
                self.h = h * factor;
            }
            if self.h < 1e-14 * now.abs().max(1.0) {
                return Err(Error::IntegrationFailure {
                    last_good_time: now,
                    reason: format!("step size underflow (h = {:e})", self.h),
                });
            }
        }
        Ok(())
    }
}

/// Integrates the mean-field dynamics from `initial` and samples the path.
pub fn integrate(
    initial: &BlochState,
    params: &SystemParams,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate_until(initial, params, config, |_| false)
}

/// Like [`integrate`], but stops after the first sample for which `stop`
/// returns true. That sample is included.
pub fn integrate_until(
    initial: &BlochState,
    params: &SystemParams,
    config: &IntegratorConfig,
    mut stop: impl FnMut(&BlochState) -> bool,
) -> Result<Trajectory> {
    params.validate()?;
    config.validate()?;
    if !(initial.r <= 1.0 + BALL_SLACK) {
        return Err(domain("r", format!("{} is outside the Bloch ball", initial.r)));
    }
    let mut times = config.sample_times();
    let phi = initial.phi;
    let mut m = initial.cartesian();
    let mut states = Vec::with_capacity(times.len());
    states.push(*initial);
    if stop(initial) {
        times.truncate(1);
    }
    let mut adaptive = Adaptive { h: config.step };
    let mut k = 1;
    while k < times.len() {
        let (t0, t1) = (times[k - 1], times[k]);
        match config.method {
            Method::Rk4Fixed => {
                let substeps = ((t1 - t0) / config.step - 1e-9).ceil().max(1.0) as usize;
                let h = (t1 - t0) / substeps as f64;
                for _ in 0..substeps {
                    m = rk4_step(&m, h, params);
                    clamp_to_ball(&mut m, t0)?;
                }
            }
            Method::Rkf45Adaptive => adaptive.advance(&mut m, t0, t1, params, config)?,
        }
        let state = BlochState::from_cartesian(&m, phi);
        states.push(state);
        if stop(&state) {
            times.truncate(k + 1);
        }
        k += 1;
    }
    Ok(Trajectory {
        times,
        states,
        params: *params,
    })
}

/// First time the linearly interpolated series drops below `cutoff`.
///
/// A series that starts below the cutoff crosses at its first sample time.
pub fn first_crossing_time(times: &[f64], values: &[f64], cutoff: f64) -> Option<f64> {
    let first = values.iter().position(|&v| v < cutoff)?;
    if first == 0 {
        return Some(times[0]);
    }
    let (ta, tb) = (times[first - 1], times[first]);
    let (va, vb) = (values[first - 1], values[first]);
    Some(ta + (va - cutoff) / (va - vb) * (tb - ta))
}
