//! Bounds `C_r ≥ ‖B_ε r‖_G` over `X̄ × 𝒰` and `C_ω ≥ ‖G_ε ω‖_G` over `𝒲 × 𝒱`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::errorsys::{ErrorSystem, WeightedNorm};
use crate::geometry::{BoxSet, Polytope, BOX_VERTEX_CAP};
use crate::numerics::linalg::spectral_norm;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputBounds {
    pub c_r: f64,
    pub c_omega: f64,
    /// Set when vertex enumeration was capped and the norm-product bound
    /// was used instead.
    pub c_r_conservative: bool,
    pub c_omega_conservative: bool,
}

pub fn compute_cr_cw(
    esys: &ErrorSystem,
    xbar: &BoxSet,
    u: &Polytope,
    w: &Polytope,
    v: &Polytope,
    wn: &WeightedNorm,
    tol: &Tolerances,
) -> Result<InputBounds> {
    if xbar.dim() + u.dim() != esys.b_eps.ncols() || w.dim() + v.dim() != esys.g_eps.ncols() {
        return Err(Error::dim(format!(
            "B_ε has {} columns for X̄ × 𝒰 of dim {}; G_ε has {} columns for 𝒲 × 𝒱 of dim {}",
            esys.b_eps.ncols(),
            xbar.dim() + u.dim(),
            esys.g_eps.ncols(),
            w.dim() + v.dim()
        )));
    }
    let (c_r, c_r_conservative) = max_weighted_image(&esys.b_eps, &xbar.to_polytope(), u, wn, tol)?;
    let (c_omega, c_omega_conservative) = max_weighted_image(&esys.g_eps, w, v, wn, tol)?;
    Ok(InputBounds {
        c_r,
        c_omega,
        c_r_conservative,
        c_omega_conservative,
    })
}

/// `max ‖G^{1/2} M [p; q]‖₂` over `P × Q`. The maximum of a convex function
/// over a polytope sits at a vertex, so vertices of the product are scanned.
/// Returns `(value, conservative)`.
pub fn max_weighted_image(
    m: &DMatrix<f64>,
    p: &Polytope,
    q: &Polytope,
    wn: &WeightedNorm,
    tol: &Tolerances,
) -> Result<(f64, bool)> {
    let s = &wn.g_half * m;
    if s.iter().all(|&x| x == 0.0) {
        return Ok((0.0, false));
    }
    if let (Some(vp), Some(vq)) = (capped_vertices(p, tol)?, capped_vertices(q, tol)?) {
        if vp.len().saturating_mul(vq.len()) <= BOX_VERTEX_CAP {
            return Ok((scan(&s, p.dim(), &vp, &vq), false));
        }
    }
    let radius = (max_sq_norm(p, tol)? + max_sq_norm(q, tol)?).sqrt();
    Ok((spectral_norm(&s) * radius, true))
}

fn capped_vertices(p: &Polytope, tol: &Tolerances) -> Result<Option<Vec<DVector<f64>>>> {
    match p.vertices(tol) {
        Ok(v) => Ok(Some(v)),
        Err(Error::VertexCap(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn scan(s: &DMatrix<f64>, dp: usize, vp: &[DVector<f64>], vq: &[DVector<f64>]) -> f64 {
    // ‖S₁p + S₂q‖² with the p-part evaluated once per p-vertex.
    let s1 = s.columns(0, dp);
    let s2 = s.columns(dp, s.ncols() - dp);
    let images: Vec<DVector<f64>> = vq.iter().map(|q| &s2 * q).collect();
    let mut best = 0.0f64;
    for p in vp {
        let sp = &s1 * p;
        for iq in &images {
            best = best.max((&sp + iq).norm_squared());
        }
    }
    best.sqrt()
}

/// Upper bound on `max ‖x‖₂²` from the bounding box of the polytope.
fn max_sq_norm(p: &Polytope, tol: &Tolerances) -> Result<f64> {
    let n = p.dim();
    let mut total = 0.0;
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        let hi = p.support(&e, tol)?;
        let lo = -p.support(&(-e), tol)?;
        total += hi.abs().max(lo.abs()).powi(2);
    }
    Ok(total)
}
