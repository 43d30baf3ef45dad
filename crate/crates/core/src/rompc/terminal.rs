//! Terminal ingredients: LQR cost and the maximal constraint-admissible
//! invariant set of `x⁺ = (A + B K_f) x` under `H x ∈ Z̄`, `K_f x ∈ Ū`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::geometry::Polytope;
use crate::model::ReducedOrderModel;
use crate::numerics::linalg::vstack;
use crate::numerics::{solve_dare, solve_lp_with, LinearProgram, LpStatus};
use crate::{Error, Result};

pub const TERMINAL_ITERATION_CAP: usize = 500;
const INVARIANCE_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TerminalSet {
    #[serde(with = "crate::serde_util::matrix")]
    pub p_term: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub k_f: DMatrix<f64>,
    pub set: Polytope,
    /// Number of closed-loop steps whose constraints were accumulated.
    pub iterations: usize,
    /// Worst `max(Hx⁺ − b)` over the sampled boundary points.
    pub invariance_residual: f64,
}

/// Accumulates `F (A + BK_f)ᵗ x ≤ g` for `t = 0, 1, …` and stops at the
/// first `t` whose rows are all implied by the earlier ones (one LP per
/// row). Invariance is then checked on boundary points found by ray
/// shooting from the origin in random directions.
pub fn terminal_set_synthesis(
    rom: &ReducedOrderModel,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    z_bar: &Polytope,
    u_bar: &Polytope,
    tol: &Tolerances,
) -> Result<TerminalSet> {
    let n = rom.n();
    if z_bar.dim() != rom.o() || u_bar.dim() != rom.m() {
        return Err(Error::dim("terminal constraint sets do not match the reduced model"));
    }
    let dare = solve_dare(&rom.a, &rom.b, q, r, tol)?;
    let k_f = dare.k.clone();
    let acl = &rom.a + &rom.b * &k_f;
    let f = vstack(&[&(&z_bar.h * &rom.h), &(&u_bar.h * &k_f)]);
    let g = {
        let mut g = DVector::zeros(f.nrows());
        g.rows_mut(0, z_bar.b.len()).copy_from(&z_bar.b);
        g.rows_mut(z_bar.b.len(), u_bar.b.len()).copy_from(&u_bar.b);
        g
    };
    if g.iter().any(|&v| v <= 0.0) {
        return Err(Error::Rejected(
            "tightened constraints do not contain the origin in their interior".into(),
        ));
    }
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for i in 0..f.nrows() {
        if f.row(i).iter().any(|&v| v != 0.0) {
            rows.push(f.row(i).transpose());
            rhs.push(g[i]);
        }
    }
    let mut ft = f.clone();
    let mut iterations = 0;
    let mut done = false;
    while iterations < TERMINAL_ITERATION_CAP {
        iterations += 1;
        ft = &ft * &acl;
        let h = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        let b = DVector::from_vec(rhs.clone());
        let mut added = false;
        for i in 0..ft.nrows() {
            let c = ft.row(i).transpose();
            if c.iter().all(|&v| v == 0.0) {
                continue;
            }
            let lp = LinearProgram::new(c.clone()).with_inequalities(h.clone(), b.clone());
            let sol = solve_lp_with(&lp, tol)?;
            let redundant = match sol.status {
                LpStatus::Optimal => {
                    let sol = sol.verified(tol, "terminal set redundancy")?;
                    sol.value <= g[i] + tol.lp_feasibility * (1.0 + g[i].abs())
                }
                LpStatus::Unbounded => false,
                LpStatus::Infeasible => return Err(Error::Infeasible("terminal set accumulation".into())),
            };
            if !redundant {
                rows.push(c);
                rhs.push(g[i]);
                added = true;
            }
        }
        if !added {
            done = true;
            break;
        }
    }
    if !done {
        return Err(Error::NonConvergence(format!(
            "terminal set accumulation after {TERMINAL_ITERATION_CAP} iterations"
        )));
    }
    let set = Polytope::new(
        DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]),
        DVector::from_vec(rhs),
    )?;
    let residual = check_invariance(&set, &acl, &f, &g)?;
    Ok(TerminalSet {
        p_term: dare.p,
        k_f,
        set,
        iterations,
        invariance_residual: residual,
    })
}

fn check_invariance(
    set: &Polytope,
    acl: &DMatrix<f64>,
    f: &DMatrix<f64>,
    g: &DVector<f64>,
) -> Result<f64> {
    let n = set.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e_4d1a);
    let mut worst = f64::NEG_INFINITY;
    let scale = 1.0 + set.b.amax();
    for _ in 0..INVARIANCE_SAMPLES {
        let d = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let hd = &set.h * &d;
        let t = (0..hd.len())
            .filter(|&i| hd[i] > 0.0)
            .map(|i| set.b[i] / hd[i])
            .fold(f64::INFINITY, f64::min);
        if !t.is_finite() {
            return Err(Error::Unbounded("terminal set is unbounded along a sampled ray".into()));
        }
        let x = d * t;
        let next = acl * &x;
        let v1 = (&set.h * &next - &set.b).max();
        let v2 = (f * &x - g).max();
        worst = worst.max(v1).max(v2);
    }
    if worst > 1e-7 * scale {
        return Err(Error::Numeric(format!(
            "terminal set failed the invariance check (residual {worst:e})"
        )));
    }
    Ok(worst)
}
