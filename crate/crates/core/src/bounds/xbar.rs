//! Box outer bound on reduced states that keep `Hx̄ ∈ 𝒵` for `ī` steps.

use nalgebra::{DMatrix, DVector};

use crate::config::Tolerances;
use crate::geometry::{BoxSet, Polytope};
use crate::model::{ReducedOrderModel, TrajectoryMaps};
use crate::numerics::{solve_lp_with, LinearProgram, LpStatus};
use crate::{par_map, Error, Result};

/// One LP per face `±eₗ`: maximize `±x̄₀[l]` subject to `Hx̄ᵢ ∈ 𝒵` for
/// `i = 0..=ī` and `ūᵢ ∈ 𝒰` for `i < ī`.
pub fn compute_xbar(
    rom: &ReducedOrderModel,
    z: &Polytope,
    u: &Polytope,
    i_bar: usize,
    tol: &Tolerances,
) -> Result<BoxSet> {
    let (n, m) = (rom.n(), rom.m());
    if z.dim() != rom.o() || u.dim() != m {
        return Err(Error::dim(format!(
            "X̄: 𝒵 has dim {} (o = {}), 𝒰 has dim {} (m = {m})",
            z.dim(),
            rom.o(),
            u.dim()
        )));
    }
    if i_bar + 1 < n {
        return Err(Error::invalid(format!("ī = {i_bar} must be at least n − 1 = {}", n - 1)));
    }
    let maps = TrajectoryMaps::new(&rom.a, &rom.b, None, i_bar);
    let (h, b) = stack_constraints(&maps, &rom.h, z, u);

    let faces: Vec<(usize, f64)> = (0..n).flat_map(|l| [(l, 1.0), (l, -1.0)]).collect();
    let values = par_map(&faces, |&(l, sign)| -> Result<f64> {
        let c = maps.states[0].row(l).transpose() * sign;
        let lp = LinearProgram::new(c).with_inequalities(h.clone(), b.clone());
        let sol = solve_lp_with(&lp, tol)?;
        let face = format!("{}e{}", if sign > 0.0 { '+' } else { '−' }, l + 1);
        match sol.status {
            LpStatus::Unbounded => Err(Error::Unbounded(format!(
                "X̄ face {face}: (A, H) unobservable or ī = {i_bar} too small"
            ))),
            LpStatus::Infeasible => Err(Error::Infeasible(format!("X̄ face {face}: 𝒵 or 𝒰 is empty"))),
            LpStatus::Optimal => Ok(sol.verified(tol, &format!("X̄ face {face}"))?.value),
        }
    });
    let mut upper = DVector::zeros(n);
    let mut lower = DVector::zeros(n);
    for (&(l, sign), v) in faces.iter().zip(values) {
        let v = v?;
        if sign > 0.0 {
            upper[l] = v;
        } else {
            lower[l] = -v;
        }
    }
    // Guard against roundoff inverting a degenerate face.
    for l in 0..n {
        if lower[l] > upper[l] {
            let mid = 0.5 * (lower[l] + upper[l]);
            lower[l] = mid;
            upper[l] = mid;
        }
    }
    BoxSet::new(lower, upper)
}

fn stack_constraints(
    maps: &TrajectoryMaps,
    hmap: &DMatrix<f64>,
    z: &Polytope,
    u: &Polytope,
) -> (DMatrix<f64>, DVector<f64>) {
    let nz = maps.dim();
    let steps = maps.steps();
    let rows = (steps + 1) * z.n_constraints() + steps * u.n_constraints();
    let mut h = DMatrix::zeros(rows, nz);
    let mut b = DVector::zeros(rows);
    let mut at = 0;
    let zh = &z.h * hmap;
    for i in 0..=steps {
        let blk = &zh * &maps.states[i];
        h.rows_mut(at, blk.nrows()).copy_from(&blk);
        b.rows_mut(at, blk.nrows()).copy_from(&z.b);
        at += blk.nrows();
        if i < steps {
            let blk = &u.h * &maps.inputs[i];
            h.rows_mut(at, blk.nrows()).copy_from(&blk);
            b.rows_mut(at, blk.nrows()).copy_from(&u.b);
            at += blk.nrows();
        }
    }
    (h, b)
}
