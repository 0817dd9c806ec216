//! Exact Lindblad evolution of a few spins, used as ground truth for the
//! mean-field layer.
//!
//! Conventions:
//! - `σ⁺ = |↑⟩⟨↓|` raises the `σᶻ = +1` population, so the jump set
//!   `√((1+M₀)/2T₁) σ⁺`, `√((1−M₀)/2T₁) σ⁻`, `√(1/2T_φ) σᶻ` relaxes one spin to
//!   the Bloch vector `(0, 0, M₀)`.
//! - Particle 0 is the most significant tensor factor.
//! - Density matrices are vectorized by stacking columns, so
//!   `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.
//!
//! With a shared bath each channel acts through the collective operator
//! `J_k = Σᵢ L_k(i)`; the double particle sum including the cross terms is
//! exactly `J_k ρ J_k† − ½{J_k† J_k, ρ}`. With independent baths every
//! `L_k(i)` is its own channel.

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;

use crate::bloch::{Environment, SystemParams};
use crate::error::{domain, Error, Result};

/// Largest particle count the dense oracle accepts.
pub const MAX_PARTICLES: u32 = 3;

/// Dense complex matrix used for operators and density matrices.
pub type CMatrix = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn single(which: usize) -> CMatrix {
    let o = c(0.0);
    let one = c(1.0);
    let i = Complex64::new(0.0, 1.0);
    let entries = match which {
        0 => [o, one, one, o],  // σx
        1 => [o, -i, i, o],     // σy
        2 => [one, o, o, -one], // σz
        3 => [o, one, o, o],    // σ⁺ = |↑⟩⟨↓|
        4 => [o, o, one, o],    // σ⁻
        _ => unreachable!(),
    };
    DMatrix::from_row_slice(2, 2, &entries)
}

/// Embeds a single-spin operator on `site` into the `n`-spin space.
pub fn embed(op: &CMatrix, site: usize, n: usize) -> CMatrix {
    let id = CMatrix::identity(2, 2);
    let mut out = CMatrix::identity(1, 1);
    for k in 0..n {
        out = out.kronecker(if k == site { op } else { &id });
    }
    out
}

/// The three jump channels of every particle, embedded in the full space.
#[derive(Debug, Clone)]
pub struct JumpOperatorSet {
    pub n: usize,
    /// `channels[k][i]` is `L_k(i)`.
    pub channels: [Vec<CMatrix>; 3],
}

impl JumpOperatorSet {
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        check_size(params.n)?;
        let n = params.n as usize;
        let up = ((1.0 + params.m0) / (2.0 * params.t1)).sqrt();
        let down = ((1.0 - params.m0) / (2.0 * params.t1)).sqrt();
        let dephase = (0.5 / params.tphi()).sqrt();
        let build = |which: usize, rate: f64| -> Vec<CMatrix> {
            (0..n).map(|i| embed(&single(which), i, n) * c(rate)).collect()
        };
        Ok(Self {
            n,
            channels: [build(3, up), build(4, down), build(2, dephase)],
        })
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }
}

fn check_size(n: u32) -> Result<()> {
    if n > MAX_PARTICLES {
        return Err(Error::Resource {
            n,
            cap: MAX_PARTICLES,
        });
    }
    Ok(())
}

/// Dense generator acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub matrix: CMatrix,
    pub n: usize,
    pub mode: Environment,
}

impl Liouvillian {
    /// Hilbert-space dimension `2ⁿ`.
    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// `L vec(ρ)` reshaped back to a matrix.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        unvec(&(&self.matrix * vec(rho)), self.dim())
    }
}

/// `D[L]` as a superoperator matrix.
fn dissipator(l: &CMatrix) -> CMatrix {
    let d = l.nrows();
    let id = CMatrix::identity(d, d);
    let ldl = l.adjoint() * l;
    let jump = l.conjugate().kronecker(l);
    let anti = id.kronecker(&ldl) + ldl.transpose().kronecker(&id);
    jump - anti * c(0.5)
}

pub fn build_liouvillian(params: &SystemParams, mode: Environment) -> Result<Liouvillian> {
    let jumps = JumpOperatorSet::new(params)?;
    let d = jumps.dim();
    let mut matrix = CMatrix::zeros(d * d, d * d);
    for channel in &jumps.channels {
        match mode {
            Environment::Shared => {
                let collective = channel
                    .iter()
                    .fold(CMatrix::zeros(d, d), |acc, l| acc + l);
                matrix += dissipator(&collective);
            }
            Environment::Independent => {
                for l in channel {
                    matrix += dissipator(l);
                }
            }
        }
    }
    Ok(Liouvillian {
        matrix,
        n: jumps.n,
        mode,
    })
}

/// Column-stacking vectorization.
pub fn vec(rho: &CMatrix) -> DVector<Complex64> {
    DVector::from_column_slice(rho.as_slice())
}

pub fn unvec(v: &DVector<Complex64>, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Largest entry modulus.
pub fn max_abs<'a>(entries: impl IntoIterator<Item = &'a Complex64>) -> f64 {
    entries.into_iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Checks Hermiticity, unit trace and positivity to `tol`.
pub fn check_density(rho: &CMatrix, tol: f64) -> Result<()> {
    if !rho.is_square() || !rho.nrows().is_power_of_two() {
        return Err(domain("rho", "density matrix must be 2^n x 2^n"));
    }
    let herm = max_abs((rho - rho.adjoint()).iter());
    if herm > tol {
        return Err(domain("rho", format!("not Hermitian (residual {herm:e})")));
    }
    let tr = rho.trace();
    if (tr - c(1.0)).norm() > tol {
        return Err(domain("rho", format!("trace is {tr}, expected 1")));
    }
    let min = min_eigenvalue(rho);
    if min < -tol {
        return Err(domain("rho", format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

/// Smallest eigenvalue of the Hermitian part of `rho`.
pub fn min_eigenvalue(rho: &CMatrix) -> f64 {
    let herm = (rho + rho.adjoint()) * c(0.5);
    herm.symmetric_eigenvalues().min()
}

/// `ρ(t) = exp(L t) ρ₀` at each requested time.
pub fn evolve_exact(rho0: &CMatrix, liouvillian: &Liouvillian, times: &[f64]) -> Result<Vec<CMatrix>> {
    check_density(rho0, 1e-10)?;
    if rho0.nrows() != liouvillian.dim() {
        return Err(domain(
            "rho",
            format!("dimension {} does not match n = {}", rho0.nrows(), liouvillian.n),
        ));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(domain("times", "must be ascending"));
    }
    if times.first().is_some_and(|&t| !(t >= 0.0)) {
        return Err(domain("times", "must be non-negative"));
    }
    let v0 = vec(rho0);
    Ok(times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return rho0.clone();
            }
            let propagator = (&liouvillian.matrix * c(t)).exp();
            unvec(&(propagator * &v0), liouvillian.dim())
        })
        .collect())
}

fn expectation(rho: &CMatrix, op: &CMatrix) -> f64 {
    (rho * op).trace().re
}

/// Bloch vector of particle `site`.
pub fn site_magnetization(rho: &CMatrix, site: usize) -> Vector3<f64> {
    let n = rho.nrows().trailing_zeros() as usize;
    Vector3::from_fn(|k, _| expectation(rho, &embed(&single(k), site, n)))
}

/// `(1/n) Σᵢ tr(ρ σ_kⁱ)`.
pub fn mean_magnetization(rho: &CMatrix) -> Vector3<f64> {
    let n = rho.nrows().trailing_zeros() as usize;
    (0..n).map(|i| site_magnetization(rho, i)).sum::<Vector3<f64>>() / n as f64
}

/// `⊗ᵢ (I + mᵢ·σ)/2`.
pub fn product_state(bloch: &[Vector3<f64>]) -> Result<CMatrix> {
    if bloch.is_empty() {
        return Err(domain("bloch", "need at least one particle"));
    }
    let mut out = CMatrix::identity(1, 1);
    for m in bloch {
        if m.norm() > 1.0 + 1e-12 {
            return Err(domain("bloch", format!("|m| = {} exceeds 1", m.norm())));
        }
        let mut site = CMatrix::identity(2, 2) * c(0.5);
        for k in 0..3 {
            site += single(k) * c(0.5 * m[k]);
        }
        out = out.kronecker(&site);
    }
    Ok(out)
}

/// Stationary state from the null space of `L` (smallest singular vector).
pub fn stationary_state(liouvillian: &Liouvillian) -> CMatrix {
    let svd = liouvillian.matrix.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let null = v_t.row(idx).adjoint();
    let rho = unvec(&null, liouvillian.dim());
    let rho = &rho / rho.trace();
    (&rho + rho.adjoint()) * c(0.5)
}

/// Number of singular values of `L` below `tol`, i.e. the dimension of
/// its kernel.
pub fn kernel_dimension(liouvillian: &Liouvillian, tol: f64) -> usize {
    liouvillian
        .matrix
        .singular_values()
        .iter()
        .filter(|&&s| s < tol)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u32, env: Environment) -> SystemParams {
        SystemParams::from_tphi(1.0, 1.0, n, 0.5, env).unwrap()
    }

    #[test]
    fn vectorization_round_trip() {
        let m = CMatrix::from_fn(4, 4, |i, j| Complex64::new(i as f64, j as f64 * 0.5));
        assert_eq!(unvec(&vec(&m), 4), m);
        // vec(A X B) = (Bᵀ ⊗ A) vec(X)
        let a = CMatrix::from_fn(2, 2, |i, j| Complex64::new(1.0 + i as f64, j as f64));
        let b = CMatrix::from_fn(2, 2, |i, j| Complex64::new(j as f64, 2.0 - i as f64));
        let x = CMatrix::from_fn(2, 2, |i, j| Complex64::new((i * 2 + j) as f64, 1.0));
        let lhs = vec(&(&a * &x * &b));
        let rhs = b.transpose().kronecker(&a) * vec(&x);
        assert!(max_abs((lhs - rhs).iter()) < 1e-14);
    }

    #[test]
    fn single_particle_modes_coincide() {
        let p = params(1, Environment::Shared);
        let a = build_liouvillian(&p, Environment::Shared).unwrap();
        let b = build_liouvillian(&p, Environment::Independent).unwrap();
        assert!(max_abs((a.matrix - b.matrix).iter()) < 1e-15);
    }

    #[test]
    fn single_particle_stationary_state() {
        let l = build_liouvillian(&params(1, Environment::Independent), Environment::Independent).unwrap();
        let ss = stationary_state(&l);
        let m = mean_magnetization(&ss);
        assert!((m - Vector3::new(0.0, 0.0, 0.5)).norm() < 1e-10, "{m}");
        assert_eq!(kernel_dimension(&l, 1e-10), 1);
    }

    #[test]
    fn kernel_dimensions() {
        let p = params(2, Environment::Shared);
        let indep = build_liouvillian(&p, Environment::Independent).unwrap();
        assert_eq!(kernel_dimension(&indep, 1e-10), 1);
        // Collective channels conserve total spin, so the singlet sector
        // carries its own steady state.
        let shared = build_liouvillian(&p, Environment::Shared).unwrap();
        assert!(kernel_dimension(&shared, 1e-10) > 1);
    }

    #[test]
    fn trace_is_preserved_by_generator() {
        for n in 1..=3 {
            for mode in [Environment::Shared, Environment::Independent] {
                let l = build_liouvillian(&params(n, mode), mode).unwrap();
                let id = vec(&CMatrix::identity(l.dim(), l.dim()));
                let functional = id.adjoint() * &l.matrix;
                assert!(max_abs(functional.iter()) < 1e-12, "n={n} {mode:?}");
            }
        }
    }

    #[test]
    fn too_many_particles() {
        let p = SystemParams::new(1.0, 1.0, 4, 0.5, Environment::Shared).unwrap();
        assert!(matches!(
            build_liouvillian(&p, Environment::Shared),
            Err(Error::Resource { n: 4, cap: 3 })
        ));
    }

    #[test]
    fn magnetization_examples() {
        for n in 1..=3usize {
            let d = 1 << n;
            let mixed = CMatrix::identity(d, d) * c(1.0 / d as f64);
            assert!(mean_magnetization(&mixed).norm() < 1e-15);
            let up = product_state(&vec![Vector3::new(0.0, 0.0, 1.0); n]).unwrap();
            assert!((mean_magnetization(&up) - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
            let x = product_state(&vec![Vector3::new(0.5, 0.0, 0.0); n]).unwrap();
            assert!((mean_magnetization(&x) - Vector3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn evolve_rejects_invalid_input() {
        let l = build_liouvillian(&params(1, Environment::Shared), Environment::Shared).unwrap();
        let bad = CMatrix::identity(2, 2);
        assert!(evolve_exact(&bad, &l, &[0.0]).is_err());
        let rho = product_state(&[Vector3::new(0.1, 0.0, 0.2)]).unwrap();
        assert!(evolve_exact(&rho, &l, &[1.0, 0.5]).is_err());
        let two = product_state(&[Vector3::zeros(), Vector3::zeros()]).unwrap();
        assert!(evolve_exact(&two, &l, &[1.0]).is_err());
        let out = evolve_exact(&rho, &l, &[0.0]).unwrap();
        assert_eq!(out[0], rho);
    }
}
