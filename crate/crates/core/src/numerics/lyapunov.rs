//! Stein (discrete Lyapunov) equations.

use nalgebra::DMatrix;

use super::linalg::{ensure_square, spectral_radius, symmetrize};
use crate::config::Tolerances;
use crate::{Error, Result};

/// `‖X − F X Fᵀ − Q‖_F`.
pub fn stein_residual(f: &DMatrix<f64>, q: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    (x - f * x * f.transpose() - q).norm()
}

/// Solves `X − F X Fᵀ = Q` for Schur-stable `F` by squared Smith iteration
/// followed by residual-correction sweeps.
pub fn solve_stein(f: &DMatrix<f64>, q: &DMatrix<f64>, tol: &Tolerances) -> Result<DMatrix<f64>> {
    ensure_square(f, "Stein coefficient")?;
    if q.shape() != f.shape() {
        return Err(Error::dim(format!(
            "Stein right-hand side is {}x{}, coefficient {}x{}",
            q.nrows(),
            q.ncols(),
            f.nrows(),
            f.ncols()
        )));
    }
    if f.nrows() == 0 {
        return Ok(q.clone());
    }
    let mut x = smith(f, q)?;
    for _ in 0..4 {
        let r = q - (&x - f * &x * f.transpose());
        if r.norm() <= 0.01 * tol.lyapunov * (1.0 + x.norm()) {
            break;
        }
        x += smith(f, &r)?;
    }
    if q.transpose() == *q {
        x = symmetrize(&x);
    }
    let res = stein_residual(f, q, &x);
    if !res.is_finite() || res > tol.lyapunov * (1.0 + x.norm()) {
        return Err(Error::NonConvergence(format!(
            "Stein equation solve (residual {res:e})"
        )));
    }
    Ok(x)
}

fn smith(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut x = q.clone();
    let mut fk = f.clone();
    for _ in 0..80 {
        let term = &fk * &x * fk.transpose();
        let tn = term.norm();
        x += &term;
        if !tn.is_finite() || !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonConvergence(
                "Stein iteration (coefficient not Schur stable)".into(),
            ));
        }
        if tn <= 1e-17 * x.norm() {
            return Ok(x);
        }
        fk = &fk * &fk;
    }
    Err(Error::NonConvergence("Stein iteration".into()))
}

/// Solves `Pᵀ G P − η² G + I = 0` for `η ∈ (ρ(P), 1)`.
///
/// The returned `G` is symmetric positive definite and makes `‖P‖_G < η`.
pub fn solve_discrete_lyapunov(p: &DMatrix<f64>, eta: f64, tol: &Tolerances) -> Result<DMatrix<f64>> {
    ensure_square(p, "Lyapunov coefficient")?;
    let n = p.nrows();
    let rho = spectral_radius(p)?;
    if !(eta > rho && eta < 1.0) {
        return Err(Error::invalid(format!(
            "eta = {eta} must lie in (spectral radius {rho}, 1)"
        )));
    }
    // G − (Pᵀ/η) G (P/η) = I/η²
    let f = p.transpose() / eta;
    let q = DMatrix::identity(n, n) / (eta * eta);
    let g = solve_stein(&f, &q, tol)?;
    let res = (p.transpose() * &g * p - &g * (eta * eta) + DMatrix::identity(n, n)).norm();
    if res > tol.lyapunov * (1.0 + g.norm()) {
        return Err(Error::NonConvergence(format!(
            "discrete Lyapunov solve (residual {res:e})"
        )));
    }
    Ok(g)
}
