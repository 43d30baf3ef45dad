//! Row bounds on `θᵀε_k`: the transient term `Δ⁽¹⁾` and the LP term `Δ⁽²⁾`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::errorsys::ErrorSystem;
use crate::geometry::{BoxSet, Polytope};
use crate::model::{ReducedOrderModel, TrajectoryMaps};
use crate::numerics::{solve_lp_with, KktResiduals, LinearProgram, LpStatus};
use crate::{Error, Result};

/// `Δ⁽¹⁾ = M γ^{2τ} η + M γ^τ (C_r + C_ω) / (1 − γ)`.
pub fn delta1(m: f64, gamma: f64, c_r: f64, c_omega: f64, tau: usize, eta_start: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(format!("decay rate γ = {gamma} must lie in [0, 1)")));
    }
    if [m, c_r, c_omega, eta_start].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid("Δ⁽¹⁾ inputs must be finite and nonnegative"));
    }
    let gt = gamma.powf(tau as f64);
    Ok(m * gt * gt * eta_start + m * gt * (c_r + c_omega) / (1.0 - gamma))
}

/// The `Δ⁽²⁾` LP for one ROM, set family and horizon; only the objective
/// changes between rows.
///
/// Index ranges: reduced dynamics for `i ∈ [−τ, τ−2]`, `r_i ∈ X̄ × 𝒰` and
/// `H x̄_i ∈ 𝒵` for `i ∈ [−τ, τ−1]`, `ω_j ∈ 𝒲 × 𝒱` and objective terms for
/// `j ∈ [0, τ−1]`. Decision variables are `x̄_{−τ}` and `v_i` with
/// `ū_i = K_p x̄_i + v_i`.
#[derive(Debug, Clone)]
pub struct Delta2Problem {
    maps: TrajectoryMaps,
    h: DMatrix<f64>,
    b: DVector<f64>,
    tau: usize,
    w: Polytope,
    v: Polytope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delta2Value {
    pub value: f64,
    /// LP part driven by `r`.
    pub reference: f64,
    /// Closed-form part driven by `ω`.
    pub disturbance: f64,
    /// False when the LP objective vanished and no LP was needed.
    pub lp_solved: bool,
    pub residuals: KktResiduals,
}

/// Which ranges the `Δ⁽²⁾` LP uses; recorded in certificates.
pub const DELTA2_INDEX_RANGES: &str =
    "dynamics i in [-tau, tau-2]; r_i in Xbar x U and H xbar_i in Z for i in [-tau, tau-1]; omega_j in W x V and objective for j in [0, tau-1]";

impl Delta2Problem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rom: &ReducedOrderModel,
        kp: &DMatrix<f64>,
        xbar: &BoxSet,
        u: &Polytope,
        z: &Polytope,
        w: &Polytope,
        v: &Polytope,
        tau: usize,
    ) -> Result<Self> {
        let (n, m) = (rom.n(), rom.m());
        if tau == 0 {
            return Err(Error::invalid("τ must be at least 1"));
        }
        if xbar.dim() != n || u.dim() != m || z.dim() != rom.o() || kp.shape() != (m, n) {
            return Err(Error::dim(format!(
                "Δ⁽²⁾ sets: X̄ {} (n = {n}), 𝒰 {} (m = {m}), 𝒵 {} (o = {}), K_p {}x{}",
                xbar.dim(),
                u.dim(),
                z.dim(),
                rom.o(),
                kp.nrows(),
                kp.ncols()
            )));
        }
        let steps = 2 * tau;
        let maps = TrajectoryMaps::new(&rom.a, &rom.b, Some(kp), steps);
        let xp = xbar.to_polytope();
        let zh = &z.h * &rom.h;
        let per = xp.n_constraints() + z.n_constraints() + u.n_constraints();
        let mut h = DMatrix::zeros(steps * per, maps.dim());
        let mut b = DVector::zeros(steps * per);
        let mut at = 0;
        for k in 0..steps {
            for (blk, rhs) in [
                (&xp.h * &maps.states[k], &xp.b),
                (&zh * &maps.states[k], &z.b),
                (&u.h * &maps.inputs[k], &u.b),
            ] {
                h.rows_mut(at, blk.nrows()).copy_from(&blk);
                b.rows_mut(at, rhs.len()).copy_from(rhs);
                at += blk.nrows();
            }
        }
        Ok(Self {
            maps,
            h,
            b,
            tau,
            w: w.clone(),
            v: v.clone(),
        })
    }

    pub fn n_variables(&self) -> usize {
        self.maps.dim()
    }

    pub fn n_constraints(&self) -> usize {
        self.h.nrows()
    }

    /// `max Σⱼ θᵀA_ε^{τ−j−1}(B_ε r_j + G_ε ω_j)`. The weights are built by
    /// repeated products `A_εᵀφ`, never forming powers of `A_ε`. The `ω`
    /// terms are independent across `j`, so they reduce to support functions.
    pub fn solve(&self, esys: &ErrorSystem, theta: &DVector<f64>, tol: &Tolerances) -> Result<Delta2Value> {
        let (n, m) = (self.maps.n, self.maps.m);
        if theta.len() != esys.dim() || esys.b_eps.ncols() != n + m {
            return Err(Error::dim(format!(
                "θ of length {} for error system of dim {}",
                theta.len(),
                esys.dim()
            )));
        }
        let mw = self.w.dim();
        if esys.g_eps.ncols() != mw + self.v.dim() {
            return Err(Error::dim("G_ε columns do not match 𝒲 × 𝒱"));
        }
        let mut c = DVector::zeros(self.maps.dim());
        let mut disturbance = 0.0;
        let mut phi = theta.clone();
        for k in 0..self.tau {
            let j = self.tau - 1 - k;
            let cr = esys.b_eps.tr_mul(&phi);
            let idx = self.tau + j;
            c += self.maps.states[idx].tr_mul(&cr.rows(0, n));
            c += self.maps.inputs[idx].tr_mul(&cr.rows(n, m));
            let cw = esys.g_eps.tr_mul(&phi);
            disturbance += self.w.support(&cw.rows(0, mw).into_owned(), tol)?;
            disturbance += self.v.support(&cw.rows(mw, cw.len() - mw).into_owned(), tol)?;
            phi = esys.a_eps.tr_mul(&phi);
        }
        let lp_solved = c.iter().any(|&x| x != 0.0);
        let (reference, residuals) = if !lp_solved {
            (0.0, KktResiduals::default())
        } else {
            let lp = LinearProgram::new(c).with_inequalities(self.h.clone(), self.b.clone());
            let sol = solve_lp_with(&lp, tol)?;
            match sol.status {
                LpStatus::Unbounded => return Err(Error::Unbounded("Δ⁽²⁾ LP: a constraint set is not compact".into())),
                LpStatus::Infeasible => return Err(Error::Infeasible("Δ⁽²⁾ LP: X̄, 𝒰 or 𝒵 admits no trajectory".into())),
                LpStatus::Optimal => {}
            }
            let sol = sol.verified(tol, "Δ⁽²⁾ LP")?;
            (sol.value, sol.residuals)
        };
        Ok(Delta2Value {
            value: reference + disturbance,
            reference,
            disturbance,
            lp_solved,
            residuals,
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn delta2(
    esys: &ErrorSystem,
    theta: &DVector<f64>,
    tau: usize,
    rom: &ReducedOrderModel,
    kp: &DMatrix<f64>,
    xbar: &BoxSet,
    u: &Polytope,
    z: &Polytope,
    w: &Polytope,
    v: &Polytope,
    tol: &Tolerances,
) -> Result<Delta2Value> {
    Delta2Problem::new(rom, kp, xbar, u, z, w, v, tau)?.solve(esys, theta, tol)
}
