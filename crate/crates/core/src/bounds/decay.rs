//! Decay bounds `‖A_εⁱ‖_G ≤ M γⁱ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gp::{optimize_g_geometric, GpOptions, GpSolution, GpTerm};
use crate::config::Tolerances;
use crate::errorsys::{weighted_matrix_norm, ErrorSystem, WeightedNorm};
use crate::numerics::linalg::{hstack, spectral_norm, spectral_norm_c, to_complex, vstack, CMatrix};
use crate::numerics::{eig_decompose, solve_discrete_lyapunov, EigenDecomposition};
use crate::{Error, Result};

/// Number of powers checked by [`DecayBound::validate`].
pub const DECAY_CHECK_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayMethod {
    Lyapunov,
    Eigen,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayBound {
    pub m: f64,
    pub gamma: f64,
    pub method: DecayMethod,
    pub g: WeightedNorm,
}

impl DecayBound {
    /// Checks `‖Aⁱ‖_G ≤ M γⁱ` for `i = 0..=steps` and returns the largest
    /// ratio `‖Aⁱ‖_G / (M γⁱ)` seen (skipping `M γⁱ = 0`).
    pub fn validate(&self, a: &DMatrix<f64>, steps: usize, tol: &Tolerances) -> Result<f64> {
        let s = self.g.similarity(a);
        let mut pow = DMatrix::identity(s.nrows(), s.ncols());
        let mut worst = 0.0f64;
        for i in 0..=steps {
            let lhs = spectral_norm(&pow);
            let rhs = self.m * self.gamma.powi(i as i32);
            if lhs > rhs * (1.0 + tol.decay_slack) + tol.decay_slack {
                return Err(Error::Numeric(format!(
                    "decay bound violated at i = {i}: ‖Aⁱ‖_G = {lhs:e} > Mγⁱ = {rhs:e}"
                )));
            }
            if rhs > 0.0 {
                worst = worst.max(lhs / rhs);
            }
            pow = &s * pow;
        }
        Ok(worst)
    }
}

/// `G` solves `A_εᵀ G A_ε − η² G + I = 0`; then `M = 1`, `γ = ‖A_ε‖_G < η`.
pub fn decay_lyapunov(esys: &ErrorSystem, eta: f64, tol: &Tolerances) -> Result<DecayBound> {
    let rho = esys.spectral_radius()?;
    if rho >= 1.0 {
        return Err(Error::Assumption(format!("ρ(A_ε) = {rho} ≥ 1")));
    }
    let g = solve_discrete_lyapunov(&esys.a_eps, eta, tol)?;
    let wn = WeightedNorm::new(g, tol)?;
    let gamma = weighted_matrix_norm(&esys.a_eps, &wn)?;
    if !(gamma < eta) {
        return Err(Error::Numeric(format!("‖A_ε‖_G = {gamma} did not fall below η = {eta}")));
    }
    Ok(DecayBound {
        m: 1.0,
        gamma,
        method: DecayMethod::Lyapunov,
        g: wn,
    })
}

/// Weighting used by [`decay_eigen`].
#[derive(Debug, Clone)]
pub enum WeightChoice {
    Identity,
    Given(WeightedNorm),
    /// Diagonal `G` from the geometric program with `X₁ = T`, `Y₁ = T⁻¹`,
    /// `X₂ = [B_ε G_ε]`, `Y₂ = [E_z; E_u]`.
    Geometric {
        e_z: DMatrix<f64>,
        e_u: DMatrix<f64>,
        options: GpOptions,
    },
}

#[derive(Debug, Clone)]
pub struct EigenDecay {
    pub bound: DecayBound,
    pub gp: Option<GpSolution>,
}

/// `γ = ρ(A_ε)`, `M = ‖G^{1/2}T‖₂ ‖T⁻¹G^{−1/2}‖₂` with `A_ε = T D T⁻¹`.
pub fn decay_eigen(esys: &ErrorSystem, choice: &WeightChoice, tol: &Tolerances) -> Result<EigenDecay> {
    let eig = eig_decompose(&esys.a_eps, tol)?;
    let gamma = eig.spectral_radius();
    if gamma >= 1.0 {
        return Err(Error::Assumption(format!("ρ(A_ε) = {gamma} ≥ 1")));
    }
    let t_inv = invert_c(&eig.t)?;
    let p = esys.dim();
    let (wn, gp) = match choice {
        WeightChoice::Identity => (WeightedNorm::identity(p), None),
        WeightChoice::Given(wn) => {
            if wn.dim() != p {
                return Err(Error::dim(format!("weighting of dim {} for A_ε of dim {p}", wn.dim())));
            }
            (wn.clone(), None)
        }
        WeightChoice::Geometric { e_z, e_u, options } => {
            let x2 = hstack(&[&esys.b_eps, &esys.g_eps]);
            let y2 = vstack(&[e_z, e_u]);
            let terms = [GpTerm::from_complex(&eig.t, &t_inv)?, GpTerm::from_real(&x2, &y2)?];
            let sol = optimize_g_geometric(&terms, p, options)?;
            (WeightedNorm::diagonal(&sol.g)?, Some(sol))
        }
    };
    let m = eigen_constant(&eig, &t_inv, &wn).max(1.0);
    Ok(EigenDecay {
        bound: DecayBound {
            m,
            gamma,
            method: DecayMethod::Eigen,
            g: wn,
        },
        gp,
    })
}

fn eigen_constant(eig: &EigenDecomposition, t_inv: &CMatrix, wn: &WeightedNorm) -> f64 {
    let gh = to_complex(&wn.g_half);
    let ghi = to_complex(&wn.g_half_inv);
    spectral_norm_c(&(gh * &eig.t)) * spectral_norm_c(&(t_inv * ghi))
}

fn invert_c(t: &CMatrix) -> Result<CMatrix> {
    t.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("eigenvector matrix".into()))
}

/// Conservative `η` for the startup error: `‖G^{1/2}‖₂ · cap`, where `cap`
/// bounds `‖ε‖₂` at the start time.
pub fn eta_from_state_cap(g: &WeightedNorm, cap: f64) -> f64 {
    spectral_norm(&g.g_half) * cap
}

/// `‖ε‖_G` for an explicit starting error.
pub fn eta_from_error(g: &WeightedNorm, eps: &DVector<f64>) -> f64 {
    g.norm(eps)
}
