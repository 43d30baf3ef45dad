//! Controller/estimator gains and rank checks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ReducedOrderModel;
use crate::config::Tolerances;
use crate::numerics::linalg::spectral_radius;
use crate::numerics::solve_dare;
use crate::{Error, Result};

/// LQR weights for the controller and the (dual) estimator design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainWeights {
    #[serde(with = "crate::serde_util::matrix")]
    pub q: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub r: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub q_est: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub r_est: DMatrix<f64>,
}

impl GainWeights {
    /// Identity weights sized for `rom`.
    pub fn identity(rom: &ReducedOrderModel) -> Self {
        let (n, m, p) = (rom.n(), rom.m(), rom.p());
        Self {
            q: DMatrix::identity(n, n),
            r: DMatrix::identity(m, m),
            q_est: DMatrix::identity(n, n),
            r_est: DMatrix::identity(p, p),
        }
    }
}

/// `u = ū + K(x̂ − x̄)` and `x̂⁺ = A x̂ + B u + L(y − C x̂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    #[serde(with = "crate::serde_util::matrix")]
    pub k: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub l: DMatrix<f64>,
}

impl GainSet {
    /// `(ρ(A + BK), ρ(A − LC))`.
    pub fn radii(&self, rom: &ReducedOrderModel) -> Result<(f64, f64)> {
        Ok((
            spectral_radius(&(&rom.a + &rom.b * &self.k))?,
            spectral_radius(&(&rom.a - &self.l * &rom.c))?,
        ))
    }
}

/// `K` from the Riccati equation on `(A, B)`; `L = −K_dᵀ` with `K_d` from
/// the dual pair `(Aᵀ, Cᵀ)`.
pub fn synthesize_gains(rom: &ReducedOrderModel, weights: &GainWeights, tol: &Tolerances) -> Result<GainSet> {
    let ctrl = solve_dare(&rom.a, &rom.b, &weights.q, &weights.r, tol)?;
    let est = solve_dare(
        &rom.a.transpose(),
        &rom.c.transpose(),
        &weights.q_est,
        &weights.r_est,
        tol,
    )?;
    let gains = GainSet {
        k: ctrl.k,
        l: -est.k.transpose(),
    };
    let (rc, re) = gains.radii(rom)?;
    if rc >= 1.0 || re >= 1.0 {
        return Err(Error::Assumption(format!(
            "gain design left ρ(A+BK) = {rc}, ρ(A−LC) = {re}"
        )));
    }
    Ok(gains)
}

/// Dimension of the Krylov space `span{B, AB, A²B, …}`, built by repeated
/// orthogonalization. A direction counts when its orthogonal remainder
/// exceeds `tol`.
pub fn krylov_rank(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> usize {
    let n = a.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let bscale = b.norm().max(f64::MIN_POSITIVE);
    let mut frontier: Vec<DVector<f64>> = Vec::new();
    for j in 0..b.ncols() {
        let col = b.column(j).into_owned() / bscale;
        if let Some(q) = orthogonalize(&basis, col, tol) {
            basis.push(q.clone());
            frontier.push(q);
        }
    }
    while !frontier.is_empty() && basis.len() < n {
        let mut next = Vec::new();
        for q in &frontier {
            if let Some(nq) = orthogonalize(&basis, a * q, tol) {
                basis.push(nq.clone());
                next.push(nq);
                if basis.len() == n {
                    break;
                }
            }
        }
        frontier = next;
    }
    basis.len()
}

fn orthogonalize(basis: &[DVector<f64>], mut v: DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    for _ in 0..2 {
        for q in basis {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
    }
    let nrm = v.norm();
    if nrm > tol {
        Some(v / nrm)
    } else {
        None
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CtrbObsvReport {
    pub n: usize,
    pub tolerance: f64,
    pub rank_ab: usize,
    pub rank_ac: usize,
    pub rank_ah: usize,
    pub controllable_ab: bool,
    pub observable_ac: bool,
    pub observable_ah: bool,
}

impl CtrbObsvReport {
    pub fn all_hold(&self) -> bool {
        self.controllable_ab && self.observable_ac && self.observable_ah
    }
}

/// Ranks use the relative tolerance `rank_tol · max(‖A‖_F, 1)`.
pub fn check_ctrb_obsv(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    h: &DMatrix<f64>,
    tol: &Tolerances,
) -> CtrbObsvReport {
    let n = a.nrows();
    let t = tol.rank * a.norm().max(1.0);
    let at = a.transpose();
    let rank_ab = krylov_rank(a, b, t);
    let rank_ac = krylov_rank(&at, &c.transpose(), t);
    let rank_ah = krylov_rank(&at, &h.transpose(), t);
    CtrbObsvReport {
        n,
        tolerance: t,
        rank_ab,
        rank_ac,
        rank_ah,
        controllable_ab: rank_ab == n,
        observable_ac: rank_ac == n,
        observable_ah: rank_ah == n,
    }
}
