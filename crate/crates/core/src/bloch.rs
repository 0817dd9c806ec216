//! Mean-field Bloch dynamics of a spin-1/2 ensemble relaxing toward a bath.
//!
//! The ensemble magnetization is stored in polar form `(r, θ, φ)`. The
//! polar equations carry a `1/r` coordinate artifact, so the integrator and
//! most checks work on the equivalent Cartesian field
//!
//! ```text
//! ṁz = (M₀ − mz)/T₁ + κ (mx² + my²)
//! ṁx = −mx (1/T₂ + κ mz)
//! ṁy = −my (1/T₂ + κ mz)
//! ```
//!
//! with the collective coupling `κ = (n − 1) M₀ / (2 T₁)` when the particles
//! share one environment and `κ = 0` otherwise.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Magnetization of the ensemble in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl BlochState {
    /// Validated constructor. `phi` is reduced modulo 2π.
    pub fn new(r: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(r.is_finite() && (0.0..=1.0).contains(&r)) {
            return Err(domain("r", format!("{r} is outside [0, 1]")));
        }
        if !(theta.is_finite() && (0.0..=PI).contains(&theta)) {
            return Err(domain("theta", format!("{theta} is outside [0, pi]")));
        }
        if !phi.is_finite() {
            return Err(domain("phi", "not finite"));
        }
        Ok(Self {
            r,
            theta,
            phi: phi.rem_euclid(TAU),
        })
    }

    pub fn cartesian(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(self.r * st * cp, self.r * st * sp, self.r * ct)
    }

    /// Inverse of [`BlochState::cartesian`]. On the z-axis the azimuth is
    /// undefined and `phi_hint` is kept.
    pub fn from_cartesian(m: &Vector3<f64>, phi_hint: f64) -> Self {
        let perp = m.x.hypot(m.y);
        let r = m.norm();
        let theta = perp.atan2(m.z);
        let phi = if perp > 0.0 { m.y.atan2(m.x) } else { phi_hint };
        Self {
            r,
            theta,
            phi: phi.rem_euclid(TAU),
        }
    }

    /// Longitudinal component `r cos θ`.
    pub fn z(&self) -> f64 {
        self.r * self.theta.cos()
    }

    /// Transverse magnitude `r sin θ`.
    pub fn perp(&self) -> f64 {
        self.r * self.theta.sin()
    }
}

/// How the particles couple to their surroundings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Environment {
    /// One common bath; generates the collective `(n − 1)` term.
    Shared,
    /// Identical but separate local baths; reduces to single-particle relaxation.
    Independent,
}

impl Environment {
    pub fn label(self) -> &'static str {
        match self {
            Environment::Shared => "shared",
            Environment::Independent => "independent",
        }
    }
}

/// Model parameters. Times are in arbitrary but consistent units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub t1: f64,
    pub t2: f64,
    pub n: u32,
    pub m0: f64,
    pub env: Environment,
}

impl SystemParams {
    pub fn new(t1: f64, t2: f64, n: u32, m0: f64, env: Environment) -> Result<Self> {
        let p = Self { t1, t2, n, m0, env };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from the pure-dephasing time instead of `T₂`.
    pub fn from_tphi(t1: f64, tphi: f64, n: u32, m0: f64, env: Environment) -> Result<Self> {
        Self::new(t1, t2_from_tphi(t1, tphi)?, n, m0, env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1.is_finite() && self.t1 > 0.0) {
            return Err(domain("t1", format!("must be positive, got {}", self.t1)));
        }
        if !(self.t2.is_finite() && self.t2 > 0.0) {
            return Err(domain("t2", format!("must be positive, got {}", self.t2)));
        }
        if self.t2 > 2.0 * self.t1 {
            return Err(domain(
                "t2",
                format!("t2 = {} exceeds 2*t1 = {}", self.t2, 2.0 * self.t1),
            ));
        }
        if self.n == 0 {
            return Err(domain("n", "particle count must be at least 1"));
        }
        if !(self.m0.is_finite() && self.m0.abs() < 1.0) {
            return Err(domain("m0", format!("|m0| must be < 1, got {}", self.m0)));
        }
        Ok(())
    }

    pub fn with_env(self, env: Environment) -> Self {
        Self { env, ..self }
    }

    /// Pure-dephasing time `T_φ`; infinite when `T₂ = 2T₁`.
    pub fn tphi(&self) -> f64 {
        let rate = 1.0 / self.t2 - 0.5 / self.t1;
        if rate <= 0.0 {
            f64::INFINITY
        } else {
            1.0 / rate
        }
    }

    /// Collective coupling κ = (n − 1) M₀ / (2T₁), zero without a shared bath.
    pub fn collective(&self) -> f64 {
        match self.env {
            Environment::Shared => f64::from(self.n - 1) * self.m0 / (2.0 * self.t1),
            Environment::Independent => 0.0,
        }
    }

    /// Bloch vector of the stationary state, `(0, 0, M₀)`.
    pub fn equilibrium(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.m0)
    }
}

/// `1/T₂ = 1/(2T₁) + 1/T_φ`.
pub fn t2_from_tphi(t1: f64, tphi: f64) -> Result<f64> {
    if !(t1 > 0.0) {
        return Err(domain("t1", format!("must be positive, got {t1}")));
    }
    if !(tphi > 0.0) {
        return Err(domain("tphi", format!("must be positive, got {tphi}")));
    }
    Ok(1.0 / (0.5 / t1 + 1.0 / tphi))
}

/// Time derivative in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarRate {
    pub dr: f64,
    pub dtheta: f64,
    pub dphi: f64,
}

/// Polar equations of motion.
///
/// At the origin θ is meaningless; only the on-axis convention θ = 0 is
/// accepted there.
pub fn rhs(state: &BlochState, params: &SystemParams) -> Result<PolarRate> {
    let BlochState { r, theta, .. } = *state;
    let (st, ct) = theta.sin_cos();
    let (t1, t2, m0) = (params.t1, params.t2, params.m0);
    if r == 0.0 {
        if theta != 0.0 {
            return Err(Error::SingularState { sin_theta: st });
        }
        return Ok(PolarRate {
            dr: m0 / t1,
            dtheta: 0.0,
            dphi: 0.0,
        });
    }
    let dr = m0 * ct / t1 - r * (ct * ct / t1 + st * st / t2);
    let dtheta =
        -st * (params.collective() * r + ct * (1.0 / t2 - 1.0 / t1) + m0 / (r * t1));
    Ok(PolarRate {
        dr,
        dtheta,
        dphi: 0.0,
    })
}

/// Cartesian form of [`rhs`]; smooth everywhere in the ball.
pub fn cartesian_rhs(m: &Vector3<f64>, params: &SystemParams) -> Vector3<f64> {
    let kappa = params.collective();
    let transverse = 1.0 / params.t2 + kappa * m.z;
    Vector3::new(
        -m.x * transverse,
        -m.y * transverse,
        (params.m0 - m.z) / params.t1 + kappa * (m.x * m.x + m.y * m.y),
    )
}

/// Closed-form relaxation with independent baths: `mz` relaxes to `M₀`
/// with `T₁`, the transverse part decays with `T₂`. Particle number and the
/// environment flag are ignored.
pub fn analytic_independent(
    initial: &BlochState,
    params: &SystemParams,
    t: f64,
) -> Result<BlochState> {
    if !(t >= 0.0) {
        return Err(domain("t", format!("time must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(*initial);
    }
    let decay_z = (-t / params.t1).exp();
    let rz = params.m0 * (1.0 - decay_z) + initial.z() * decay_z;
    let rp = initial.perp() * (-t / params.t2).exp();
    Ok(BlochState {
        r: rz.hypot(rp),
        theta: rp.atan2(rz),
        phi: initial.phi,
    })
}

/// Linearization of the dynamics about the unique fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub fixed_point: BlochState,
    pub lambda_r: f64,
    pub lambda_theta: f64,
    pub mpe_timescale: f64,
}

/// Eigenvalues of the Jacobian at `(r, θ) = (M₀, 0)`.
///
/// The Jacobian is diagonal there: `λ_r = −1/T₁` and
/// `λ_θ = −(1/T₂ + κ M₀) = −(1/T₂ + (n − 1) M₀² / (2T₁))`.
pub fn stability(params: &SystemParams) -> Result<StabilityReport> {
    params.validate()?;
    let lambda_r = -1.0 / params.t1;
    let lambda_theta = -(1.0 / params.t2 + params.collective() * params.m0);
    // Negative M₀ points the fixed point down the axis.
    let fixed_point = if params.m0 >= 0.0 {
        BlochState {
            r: params.m0,
            theta: 0.0,
            phi: 0.0,
        }
    } else {
        BlochState {
            r: -params.m0,
            theta: PI,
            phi: 0.0,
        }
    };
    Ok(StabilityReport {
        fixed_point,
        lambda_r,
        lambda_theta,
        mpe_timescale: (1.0 / lambda_r.abs()).min(1.0 / lambda_theta.abs()),
    })
}
