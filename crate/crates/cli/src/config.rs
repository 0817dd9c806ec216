//! Experiment configuration, read from and written to TOML.

use std::f64::consts::PI;

use mpemba_core::analysis::{LineSpec, StateGrid};
use mpemba_core::bloch::t2_from_tphi;
use mpemba_core::{BlochState, Environment, IntegratorConfig, Method, Metric, SystemParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// What a run computes. Several can be requested at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Metric time series for every initial state.
    Trajectories,
    /// Pairwise crossings of those series.
    Crossings,
    /// Thermalization time over a grid of initial states.
    ThermalMap,
    /// Relaxation velocity over the same grid.
    SpeedField,
    /// Linearization about the fixed point.
    Stability,
}

/// Physical parameters. Exactly one of `t2` and `tphi` must be given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub t1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tphi: Option<f64>,
    pub n: u32,
    pub m0: f64,
}

impl ParamsSpec {
    pub fn resolve(&self, env: Environment) -> Result<SystemParams, CliError> {
        let t2 = match (self.t2, self.tphi) {
            (Some(t2), None) => t2,
            (None, Some(tphi)) => t2_from_tphi(self.t1, tphi)?,
            _ => {
                return Err(CliError::Config(
                    "params: give exactly one of `t2` and `tphi`".into(),
                ))
            }
        };
        Ok(SystemParams::new(self.t1, t2, self.n, self.m0, env)?)
    }
}

/// Integrator choice. Unset numbers fall back to values derived from the
/// relaxation rates of the resolved parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_stride: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
}

impl IntegratorSpec {
    pub fn resolve(&self, params: &SystemParams, horizon: f64) -> Result<IntegratorConfig, CliError> {
        let mut cfg = IntegratorConfig::for_params(params, self.method, horizon)?;
        if let Some(stride) = self.output_stride {
            cfg.output_stride = stride;
            cfg.step = cfg.step.min(stride);
        }
        if let Some(step) = self.step {
            cfg.step = step;
        }
        if let Some(tol) = self.rel_tol {
            cfg.rel_tol = tol;
        }
        if let Some(tol) = self.abs_tol {
            cfg.abs_tol = tol;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Where the initial states come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialStates {
    List(Vec<BlochState>),
    /// States on `a·r + b·θ/π = c`.
    Line(LineSpec),
    Grid(StateGrid),
}

impl InitialStates {
    pub fn states(&self) -> Result<Vec<BlochState>, CliError> {
        let states = match self {
            InitialStates::List(list) => list
                .iter()
                .map(|s| BlochState::new(s.r, s.theta, s.phi))
                .collect::<Result<Vec<_>, _>>()?,
            InitialStates::Line(line) => line.states()?,
            InitialStates::Grid(grid) => {
                grid.validate()?;
                grid.states()
            }
        };
        if states.is_empty() {
            return Err(CliError::Config("initial_states: no initial states given".into()));
        }
        Ok(states)
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub experiments: Vec<Experiment>,
    pub environments: Vec<Environment>,
    /// Metric used for thermalization times.
    pub metric: Metric,
    /// Metrics checked for crossings.
    pub crossing_metrics: Vec<Metric>,
    pub cutoff: f64,
    /// Integration end time, in the units of `t1`.
    pub horizon: f64,
    /// Grid for maps and fields. Defaults to the initial-state grid when
    /// there is one, else 64 × 64.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<StateGrid>,
    pub params: ParamsSpec,
    pub integrator: IntegratorSpec,
    pub initial_states: InitialStates,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: &str| Err(CliError::Config(msg.into()));
        if self.experiments.is_empty() {
            return fail("experiments: list is empty");
        }
        if self.environments.is_empty() {
            return fail("environments: list is empty");
        }
        if self.needs(Experiment::Crossings) && self.crossing_metrics.is_empty() {
            return fail("crossing_metrics: list is empty");
        }
        if !(self.cutoff.is_finite() && self.cutoff > 0.0) {
            return fail("cutoff: must be positive");
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return fail("horizon: must be positive");
        }
        self.initial_states.states()?;
        self.map_grid().validate()?;
        for &env in &self.environments {
            let params = self.params.resolve(env)?;
            self.integrator.resolve(&params, self.horizon)?;
        }
        Ok(())
    }

    pub fn needs(&self, experiment: Experiment) -> bool {
        self.experiments.contains(&experiment)
    }

    pub fn map_grid(&self) -> StateGrid {
        match (&self.grid, &self.initial_states) {
            (Some(grid), _) => *grid,
            (None, InitialStates::Grid(grid)) => *grid,
            _ => StateGrid::default(),
        }
    }
}

/// Command-line adjustments applied on top of a config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub metric: Option<Metric>,
    pub cutoff: Option<f64>,
    pub n: Option<u32>,
    /// Sets `t2 = ratio · t1`.
    pub t2_ratio: Option<f64>,
    /// Restricts the run to one environment.
    pub environment: Option<Environment>,
    /// `(r samples, θ samples)`.
    pub grid: Option<(usize, usize)>,
    pub horizon: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) -> Result<(), CliError> {
        if let Some(metric) = self.metric {
            config.metric = metric;
        }
        if let Some(cutoff) = self.cutoff {
            config.cutoff = cutoff;
        }
        if let Some(n) = self.n {
            config.params.n = n;
        }
        if let Some(ratio) = self.t2_ratio {
            config.params.t2 = Some(ratio * config.params.t1);
            config.params.tphi = None;
        }
        if let Some(env) = self.environment {
            config.environments = vec![env];
        }
        if let Some((r_count, theta_count)) = self.grid {
            let mut grid = config.map_grid();
            grid.r_count = r_count;
            grid.theta_count = theta_count;
            config.grid = Some(grid);
            if let InitialStates::Grid(g) = &mut config.initial_states {
                *g = grid;
            }
        }
        if let Some(horizon) = self.horizon {
            config.horizon = horizon;
        }
        config.validate()
    }
}

/// Shared-bath crossover trajectories: 12 states on `−(5/6) r + θ/π = 1/2`
/// with `r ∈ [0.05, 0.6]`, plus the same states with independent baths.
pub fn preset_fig2() -> ExperimentConfig {
    ExperimentConfig {
        name: "fig2".into(),
        experiments: vec![Experiment::Trajectories, Experiment::Crossings],
        environments: vec![Environment::Shared, Environment::Independent],
        metric: Metric::S,
        crossing_metrics: vec![Metric::D, Metric::S],
        cutoff: 1e-4,
        horizon: 5.0,
        grid: None,
        params: ParamsSpec {
            t1: 1.0,
            t2: Some(1.0),
            tphi: None,
            n: 1000,
            m0: 0.5,
        },
        integrator: IntegratorSpec {
            method: Method::Rk4Fixed,
            step: None,
            output_stride: Some(1e-3),
            rel_tol: None,
            abs_tol: None,
        },
        initial_states: InitialStates::Line(LineSpec {
            a: -5.0 / 6.0,
            b: 1.0,
            c: 0.5,
            r_min: 0.05,
            r_max: 0.6,
            count: 12,
        }),
    }
}

/// Thermalization-time maps and velocity fields at `n = 100` for both
/// environments.
pub fn preset_fig3() -> ExperimentConfig {
    ExperimentConfig {
        name: "fig3".into(),
        experiments: vec![Experiment::ThermalMap, Experiment::SpeedField],
        environments: vec![Environment::Shared, Environment::Independent],
        metric: Metric::S,
        crossing_metrics: vec![Metric::S],
        cutoff: 1e-4,
        horizon: 20.0,
        grid: None,
        params: ParamsSpec {
            t1: 1.0,
            t2: Some(1.0),
            tphi: None,
            n: 100,
            m0: 0.5,
        },
        integrator: IntegratorSpec {
            method: Method::Rkf45Adaptive,
            step: None,
            output_stride: None,
            rel_tol: None,
            abs_tol: None,
        },
        initial_states: InitialStates::Grid(StateGrid::default()),
    }
}

/// Anisotropic relaxation, `T₂ = 0.01 T₁`, independent baths: all four
/// metrics for `r = 0.75`, `θ = kπ/30` (`k = 0..=10`), plus map and field.
pub fn preset_fig4() -> ExperimentConfig {
    let states = (0..=10)
        .map(|k| BlochState {
            r: 0.75,
            theta: k as f64 * PI / 30.0,
            phi: 0.0,
        })
        .collect();
    ExperimentConfig {
        name: "fig4".into(),
        experiments: vec![
            Experiment::Trajectories,
            Experiment::Crossings,
            Experiment::ThermalMap,
            Experiment::SpeedField,
        ],
        environments: vec![Environment::Independent],
        metric: Metric::S,
        crossing_metrics: Metric::ALL.to_vec(),
        cutoff: 1e-4,
        horizon: 10.0,
        grid: None,
        params: ParamsSpec {
            t1: 1.0,
            t2: Some(0.01),
            tphi: None,
            n: 1,
            m0: 0.5,
        },
        integrator: IntegratorSpec {
            method: Method::Rkf45Adaptive,
            step: None,
            output_stride: Some(1e-3),
            rel_tol: None,
            abs_tol: None,
        },
        initial_states: InitialStates::List(states),
    }
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    match name {
        "fig2" => Some(preset_fig2()),
        "fig3" => Some(preset_fig3()),
        "fig4" => Some(preset_fig4()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig2_states_lie_on_the_line() {
        let states = preset_fig2().initial_states.states().unwrap();
        assert_eq!(states.len(), 12);
        assert_eq!(states[0].r, 0.05);
        assert!((states[11].r - 0.6).abs() < 1e-15);
        assert_eq!(states[11].theta, PI);
        for s in &states {
            assert!((-(5.0 / 6.0) * s.r + s.theta / PI - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn line_intercept() {
        let line = LineSpec {
            r_min: 0.0,
            r_max: 0.0,
            count: 1,
            ..match preset_fig2().initial_states {
                InitialStates::Line(l) => l,
                _ => unreachable!(),
            }
        };
        assert!((line.states().unwrap()[0].theta - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn preset_parameters() {
        let fig3 = preset_fig3();
        assert_eq!(fig3.cutoff, 1e-4);
        assert_eq!(fig3.params.n, 100);
        let fig4 = preset_fig4();
        assert_eq!(fig4.params.t2, Some(0.01 * fig4.params.t1));
        assert_eq!(fig4.params.m0, 0.5);
        let states = fig4.initial_states.states().unwrap();
        assert_eq!(states.len(), 11);
        assert!((states[10].theta - PI / 3.0).abs() < 1e-15);
        assert!(states.iter().all(|s| s.r == 0.75));
    }

    #[test]
    fn presets_round_trip() {
        for name in ["fig2", "fig3", "fig4"] {
            let config = preset(name).unwrap();
            config.validate().unwrap();
            let text = config.to_toml();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), config, "{text}");
        }
    }

    #[test]
    fn tphi_is_accepted() {
        let mut config = preset_fig3();
        config.params.t2 = None;
        config.params.tphi = Some(2.0);
        let p = config.params.resolve(Environment::Shared).unwrap();
        assert!((p.t2 - 1.0).abs() < 1e-15);
        config.params.t2 = Some(1.0);
        assert!(config.validate().is_err());
    }

    #[test]
    fn empty_state_list_is_rejected() {
        let mut config = preset_fig4();
        config.initial_states = InitialStates::List(Vec::new());
        let err = config.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("initial_states"));
    }

    #[test]
    fn two_generators_are_rejected() {
        let mut text = preset_fig3().to_toml();
        text.push_str("\n[initial_states.line]\na = 1.0\nb = 1.0\nc = 0.5\nr_min = 0.1\nr_max = 0.2\ncount = 2\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn diagnostics_name_the_field() {
        let text = preset_fig2().to_toml().replace("m0 = 0.5", "m0 = 1.5");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("m0"), "{err}");
        let text = preset_fig2().to_toml().replace("n = 1000", "n = \"many\"");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("line") || err.contains('|'), "{err}");
    }

    #[test]
    fn overrides() {
        let mut config = preset_fig3();
        Overrides {
            n: Some(10),
            t2_ratio: Some(0.5),
            environment: Some(Environment::Independent),
            grid: Some((8, 4)),
            ..Default::default()
        }
        .apply(&mut config)
        .unwrap();
        assert_eq!(config.params.n, 10);
        assert_eq!(config.params.t2, Some(0.5));
        assert_eq!(config.environments, vec![Environment::Independent]);
        assert_eq!(config.map_grid().r_count, 8);
        assert_eq!(config.initial_states.states().unwrap().len(), 32);
    }
}
