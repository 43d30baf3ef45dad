//! Discrete algebraic Riccati equation.
//!
//! `P = AᵀPA − AᵀPB (R + BᵀPB)⁻¹ BᵀPA + Q`, with gain `K = −(R + BᵀPB)⁻¹BᵀPA`
//! so that `u = K x` and the closed loop is `A + B K`.

use nalgebra::DMatrix;

use super::linalg::{ensure_square, is_symmetric, solve, spectral_radius, symmetrize};
use super::lyapunov::solve_stein;
use crate::config::Tolerances;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct DareSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub iterations: usize,
    /// `ρ(A + BK)`.
    pub closed_loop_radius: f64,
}

/// `‖AᵀPA − P + Q − AᵀPB (R + BᵀPB)⁻¹ BᵀPA‖_F`.
pub fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let btp = b.transpose() * p;
    let s = r + &btp * b;
    let rhs = &btp * a;
    match s.lu().solve(&rhs) {
        Some(x) => (a.transpose() * p * a - p + q - a.transpose() * p * b * x).norm(),
        None => f64::INFINITY,
    }
}

fn gain(a: &DMatrix<f64>, b: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let btp = b.transpose() * p;
    let s = r + &btp * b;
    Ok(-solve(&s, &(&btp * a), "R + BᵀPB")?)
}

/// Structured doubling, then Newton–Kleinman (Hewer) refinement if needed.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<DareSolution> {
    ensure_square(a, "A")?;
    let n = a.nrows();
    let m = b.ncols();
    if b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::dim(format!(
            "DARE data: A {n}x{n}, B {}x{}, Q {}x{}, R {}x{}",
            b.nrows(),
            b.ncols(),
            q.nrows(),
            q.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    if !is_symmetric(q, tol.symmetry) || !is_symmetric(r, tol.symmetry) {
        return Err(Error::invalid("DARE weights must be symmetric"));
    }
    if m > 0 && r.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite("R".into()));
    }
    let qeig = q.clone().symmetric_eigen().eigenvalues;
    if qeig.iter().any(|&l| l < -tol.symmetry * (1.0 + q.norm())) {
        return Err(Error::invalid("Q must be positive semidefinite"));
    }

    let eye = DMatrix::<f64>::identity(n, n);
    let mut ak = a.clone();
    let mut gk = if m > 0 {
        b * solve(r, &b.transpose(), "R")?
    } else {
        DMatrix::zeros(n, n)
    };
    let mut hk = q.clone();
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..200 {
        iterations = it + 1;
        let w = &eye + &gk * &hk;
        let w_lu = w.lu();
        let wa = w_lu
            .solve(&ak)
            .ok_or_else(|| Error::NonConvergence("Riccati doubling (singular I + GH)".into()))?;
        let wg = w_lu
            .solve(&gk)
            .ok_or_else(|| Error::NonConvergence("Riccati doubling (singular I + GH)".into()))?;
        let a_next = &ak * &wa;
        let g_next = &gk + &ak * wg * ak.transpose();
        let h_next = &hk + ak.transpose() * &hk * &wa;
        let delta = (&h_next - &hk).norm();
        ak = a_next;
        gk = symmetrize(&g_next);
        hk = symmetrize(&h_next);
        if !hk.iter().all(|v| v.is_finite()) {
            return Err(Error::NonConvergence(
                "Riccati doubling (pair not stabilizable/detectable)".into(),
            ));
        }
        if delta <= 1e-14 * (1.0 + hk.norm()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(
            "Riccati doubling (200 iterations; pair not stabilizable?)".into(),
        ));
    }

    let mut p = hk;
    let mut k = gain(a, b, r, &p)?;
    // Hewer refinement: P ← solution of (A+BK)ᵀP(A+BK) − P + Q + KᵀRK = 0.
    for _ in 0..5 {
        let res = dare_residual(a, b, q, r, &p);
        if res <= 0.01 * tol.riccati * (1.0 + p.norm()) {
            break;
        }
        let acl = a + b * &k;
        if spectral_radius(&acl)? >= 1.0 {
            break;
        }
        let rhs = q + k.transpose() * r * &k;
        p = symmetrize(&solve_stein(&acl.transpose(), &rhs, tol)?);
        k = gain(a, b, r, &p)?;
    }
    let res = dare_residual(a, b, q, r, &p);
    if !(res <= tol.riccati * (1.0 + p.norm())) {
        return Err(Error::NonConvergence(format!("Riccati solve (residual {res:e})")));
    }
    let closed_loop_radius = spectral_radius(&(a + b * &k))?;
    if closed_loop_radius >= 1.0 {
        return Err(Error::NonConvergence(format!(
            "Riccati solve: closed loop not Schur stable (radius {closed_loop_radius})"
        )));
    }
    Ok(DareSolution {
        p,
        k,
        iterations,
        closed_loop_radius,
    })
}
