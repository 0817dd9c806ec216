//! Single-qubit density matrices and distances to the stationary state.

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::{BlochState, SystemParams};
use crate::error::{domain, Result};

/// Eigenvalues this far below zero are rounding noise and are clamped.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Below this spectral gap a 2×2 Hermitian matrix is treated as a multiple of I.
const DEGENERATE_GAP: f64 = 1e-14;

/// Distance-like quantities tracked along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    /// Euclidean distance of the Bloch vector from equilibrium.
    D,
    /// Longitudinal part `|r cos θ − M₀|`.
    Dz,
    /// Transverse part `r sin θ`.
    Dperp,
    /// Relative entropy `S(ρ‖ρ_ss)` in nats.
    S,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::D, Metric::Dz, Metric::Dperp, Metric::S];

    pub fn name(self) -> &'static str {
        match self {
            Metric::D => "D",
            Metric::Dz => "Dz",
            Metric::Dperp => "Dperp",
            Metric::S => "S",
        }
    }
}

/// 2×2 Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix2(Matrix2<Complex64>);

fn pauli() -> [Matrix2<Complex64>; 3] {
    let o = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    [
        Matrix2::new(o, one, one, o),
        Matrix2::new(o, -i, i, o),
        Matrix2::new(one, o, o, -one),
    ]
}

/// Eigen-decomposition of a 2×2 Hermitian matrix as `(λ₋, λ₊)` with the
/// spectral projectors onto each eigenspace.
struct HermitianEigen2 {
    values: [f64; 2],
    projectors: Option<[Matrix2<Complex64>; 2]>,
}

fn hermitian_eigen(m: &Matrix2<Complex64>) -> HermitianEigen2 {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    let mean = 0.5 * (a + d);
    let half_gap = (0.5 * (a - d)).hypot(b.norm());
    let values = [mean - half_gap, mean + half_gap];
    if 2.0 * half_gap < DEGENERATE_GAP {
        return HermitianEigen2 {
            values,
            projectors: None,
        };
    }
    let id = Matrix2::<Complex64>::identity();
    let gap = Complex64::new(2.0 * half_gap, 0.0);
    // P₋ = (λ₊ I − M) / (λ₊ − λ₋), P₊ = (M − λ₋ I) / (λ₊ − λ₋)
    let lower = (id * Complex64::new(values[1], 0.0) - m) / gap;
    let upper = (m - id * Complex64::new(values[0], 0.0)) / gap;
    HermitianEigen2 {
        values,
        projectors: Some([lower, upper]),
    }
}

fn trace_product(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> f64 {
    (a * b).trace().re
}

impl DensityMatrix2 {
    /// `ρ = (I + m·σ)/2`.
    pub fn from_bloch_vector(m: &Vector3<f64>) -> Result<Self> {
        let r = m.norm();
        if !(r <= 1.0 + EIGEN_FLOOR) {
            return Err(domain("r", format!("Bloch vector length {r} exceeds 1")));
        }
        let half = 0.5;
        let rho = Matrix2::new(
            Complex64::new(half * (1.0 + m.z), 0.0),
            Complex64::new(half * m.x, -half * m.y),
            Complex64::new(half * m.x, half * m.y),
            Complex64::new(half * (1.0 - m.z), 0.0),
        );
        Ok(Self(rho))
    }

    /// Validating constructor from raw entries.
    pub fn from_matrix(m: Matrix2<Complex64>) -> Result<Self> {
        if (m - m.adjoint()).norm() > 1e-12 {
            return Err(domain("rho", "matrix is not Hermitian"));
        }
        if (m.trace() - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(domain("rho", "trace differs from 1"));
        }
        if hermitian_eigen(&m).values[0] < -EIGEN_FLOOR {
            return Err(domain("rho", "matrix has a negative eigenvalue"));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix2<Complex64> {
        &self.0
    }

    /// `m_k = tr(ρ σ_k)`.
    pub fn bloch_vector(&self) -> Vector3<f64> {
        let [sx, sy, sz] = pauli();
        Vector3::new(
            trace_product(&self.0, &sx),
            trace_product(&self.0, &sy),
            trace_product(&self.0, &sz),
        )
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        hermitian_eigen(&self.0).values
    }
}

pub fn density_from_bloch(state: &BlochState) -> Result<DensityMatrix2> {
    if !(state.r <= 1.0) {
        return Err(domain("r", format!("{} is outside [0, 1]", state.r)));
    }
    DensityMatrix2::from_bloch_vector(&state.cartesian())
}

/// Stationary state ρ_ss with Bloch vector `(0, 0, M₀)`.
pub fn equilibrium_density(params: &SystemParams) -> DensityMatrix2 {
    DensityMatrix2::from_bloch_vector(&params.equilibrium())
        .expect("validated |m0| < 1")
}

/// Euclidean distance of the magnetization from `(0, 0, M₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distance {
    pub d: f64,
    pub d_z: f64,
    pub d_perp: f64,
}

pub fn euclidean_distance(state: &BlochState, params: &SystemParams) -> Distance {
    let d_z = (state.z() - params.m0).abs();
    let d_perp = state.perp().abs();
    Distance {
        d: d_z.hypot(d_perp),
        d_z,
        d_perp,
    }
}

/// `S(ρ‖σ) = tr ρ ln ρ − tr ρ ln σ` in nats.
pub fn relative_entropy(rho: &DensityMatrix2, sigma: &DensityMatrix2) -> Result<f64> {
    let sig = hermitian_eigen(&sigma.0);
    if sig.values[0] <= 0.0 {
        return Err(domain(
            "sigma",
            "reference state is singular; relative entropy is infinite",
        ));
    }
    if rho == sigma {
        return Ok(0.0);
    }
    let neg_entropy: f64 = hermitian_eigen(&rho.0)
        .values
        .iter()
        .map(|&l| {
            let l = if (-EIGEN_FLOOR..0.0).contains(&l) { 0.0 } else { l };
            if l > 0.0 {
                l * l.ln()
            } else {
                0.0
            }
        })
        .sum();
    let cross = match sig.projectors {
        Some(proj) => sig
            .values
            .iter()
            .zip(proj.iter())
            .map(|(&mu, q)| mu.ln() * trace_product(&rho.0, q))
            .sum::<f64>(),
        None => sig.values[1].ln(),
    };
    // Klein's inequality guarantees S ≥ 0; clip the rounding residue.
    Ok((neg_entropy - cross).max(0.0))
}

/// Half the trace norm of `ρ − σ`.
pub fn trace_distance(rho: &DensityMatrix2, sigma: &DensityMatrix2) -> f64 {
    let diff = rho.0 - sigma.0;
    let [lo, hi] = hermitian_eigen(&diff).values;
    0.5 * (lo.abs() + hi.abs())
}

/// Evaluates one metric at a state.
pub fn metric_value(
    metric: Metric,
    state: &BlochState,
    params: &SystemParams,
    reference: &DensityMatrix2,
) -> Result<f64> {
    Ok(match metric {
        Metric::D => euclidean_distance(state, params).d,
        Metric::Dz => euclidean_distance(state, params).d_z,
        Metric::Dperp => euclidean_distance(state, params).d_perp,
        Metric::S => {
            let clipped = BlochState {
                r: state.r.min(1.0),
                ..*state
            };
            relative_entropy(&density_from_bloch(&clipped)?, reference)?
        }
    })
}
