//! Reduced OCP: `min ‖x̄_N‖²_P + Σᵢ ‖x̄ᵢ‖²_Q + ‖ūᵢ‖²_R` over the simulated
//! ROM with `H x̄ᵢ ∈ Z̄`, `ūᵢ ∈ Ū` for `i < N` and `x̄_N ∈ X̄_f`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::geometry::Polytope;
use crate::model::{ReducedOrderModel, TrajectoryMaps};
use crate::numerics::linalg::{is_symmetric, symmetrize};
use crate::numerics::{solve_qp_with, QpStatus, QuadraticProgram};
use crate::{Error, Result};

/// `N·n` up to which the condensed formulation is used.
pub const CONDENSED_LIMIT: usize = 2000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OcpSpec {
    #[serde(with = "crate::serde_util::matrix")]
    pub a: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub b: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub h: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub q: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub r: DMatrix<f64>,
    #[serde(with = "crate::serde_util::matrix")]
    pub p_term: DMatrix<f64>,
    pub horizon: usize,
    pub z_bar: Polytope,
    pub u_bar: Polytope,
    pub x_f: Polytope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OcpFormulation {
    Auto,
    Condensed,
    Sparse,
}

#[derive(Debug, Clone)]
pub struct OcpSolution {
    pub u: Vec<DVector<f64>>,
    /// `x̄₀ … x̄_N`.
    pub x: Vec<DVector<f64>>,
    pub cost: f64,
    pub formulation: OcpFormulation,
    pub kkt_residual: f64,
    pub primal_residual: f64,
}

impl OcpSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rom: &ReducedOrderModel,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        p_term: DMatrix<f64>,
        horizon: usize,
        z_bar: Polytope,
        u_bar: Polytope,
        x_f: Polytope,
    ) -> Result<Self> {
        let spec = Self {
            a: rom.a.clone(),
            b: rom.b.clone(),
            h: rom.h.clone(),
            q,
            r,
            p_term,
            horizon,
            z_bar,
            u_bar,
            x_f,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        if self.horizon == 0 {
            return Err(Error::invalid("OCP horizon must be at least 1"));
        }
        if self.b.nrows() != n
            || self.h.ncols() != n
            || self.q.shape() != (n, n)
            || self.r.shape() != (m, m)
            || self.p_term.shape() != (n, n)
            || self.z_bar.dim() != self.h.nrows()
            || self.u_bar.dim() != m
            || self.x_f.dim() != n
        {
            return Err(Error::dim("OCP data do not match the reduced model"));
        }
        for (name, w) in [("Q", &self.q), ("R", &self.r), ("P", &self.p_term)] {
            if !is_symmetric(w, 1e-9 * (1.0 + w.amax())) || w.clone().cholesky().is_none() {
                return Err(Error::NotPositiveDefinite(format!("OCP weight {name}")));
            }
        }
        Ok(())
    }
}

pub fn ocp_solve(
    spec: &OcpSpec,
    x0: &DVector<f64>,
    formulation: OcpFormulation,
    tol: &Tolerances,
) -> Result<OcpSolution> {
    if x0.len() != spec.n() {
        return Err(Error::dim(format!("OCP initial state of dim {} for n = {}", x0.len(), spec.n())));
    }
    let form = match formulation {
        OcpFormulation::Auto if spec.horizon * spec.n() <= CONDENSED_LIMIT => OcpFormulation::Condensed,
        OcpFormulation::Auto => OcpFormulation::Sparse,
        f => f,
    };
    match form {
        OcpFormulation::Sparse => solve_sparse(spec, x0, tol),
        _ => solve_condensed(spec, x0, tol),
    }
}

fn weight_at(spec: &OcpSpec, i: usize) -> &DMatrix<f64> {
    if i == spec.horizon {
        &spec.p_term
    } else {
        &spec.q
    }
}

fn infeasible() -> Error {
    Error::Infeasible("reduced OCP".into())
}

/// Inputs only; states are affine in `[x₀; u]`.
fn solve_condensed(spec: &OcpSpec, x0: &DVector<f64>, tol: &Tolerances) -> Result<OcpSolution> {
    let (n, m, nh) = (spec.n(), spec.m(), spec.horizon);
    let maps = TrajectoryMaps::new(&spec.a, &spec.b, None, nh);
    let nu = nh * m;
    // xᵢ = Φᵢ x₀ + Γᵢ u
    let phi = |i: usize| maps.states[i].columns(0, n).into_owned();
    let gam = |i: usize| maps.states[i].columns(n, nu).into_owned();
    let mut hess = DMatrix::zeros(nu, nu);
    let mut lin = DVector::zeros(nu);
    for i in 0..=nh {
        let w = weight_at(spec, i);
        let (p, g) = (phi(i) * x0, gam(i));
        let wg = w * &g;
        hess += g.transpose() * &wg;
        lin += wg.tr_mul(&p);
    }
    for i in 0..nh {
        let mut blk = hess.view_mut((i * m, i * m), (m, m));
        blk += &spec.r;
    }
    let hess = symmetrize(&hess) * 2.0;
    let lin = lin * 2.0;

    let zh = &spec.z_bar.h * &spec.h;
    let mut rows: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::new();
    for i in 0..=nh {
        let (p, g) = (phi(i) * x0, gam(i));
        let (hh, bb) = if i < nh {
            (&zh, &spec.z_bar.b)
        } else {
            (&spec.x_f.h, &spec.x_f.b)
        };
        rows.push((hh * &g, bb - hh * &p));
    }
    for i in 0..nh {
        let mut sel = DMatrix::zeros(m, nu);
        sel.view_mut((0, i * m), (m, m)).fill_with_identity();
        rows.push((&spec.u_bar.h * sel, spec.u_bar.b.clone()));
    }
    let (a_in, b_in) = drop_constant_rows(rows, tol)?;
    let qp = QuadraticProgram::new(hess, lin).with_inequalities(a_in, b_in);
    let sol = solve_qp_with(&qp, tol)?;
    if sol.status == QpStatus::Infeasible {
        return Err(infeasible());
    }
    let sol = sol.verified(tol, "reduced OCP (condensed)")?;
    let u: Vec<DVector<f64>> = (0..nh).map(|i| sol.x.rows(i * m, m).into_owned()).collect();
    let x: Vec<DVector<f64>> = (0..=nh).map(|i| phi(i) * x0 + gam(i) * &sol.x).collect();
    Ok(OcpSolution {
        cost: trajectory_cost(spec, &x, &u),
        u,
        x,
        formulation: OcpFormulation::Condensed,
        kkt_residual: sol.kkt_residual,
        primal_residual: sol.primal_residual,
    })
}

/// States and inputs as variables, dynamics as equalities.
fn solve_sparse(spec: &OcpSpec, x0: &DVector<f64>, tol: &Tolerances) -> Result<OcpSolution> {
    let (n, m, nh) = (spec.n(), spec.m(), spec.horizon);
    let nx = (nh + 1) * n;
    let nv = nx + nh * m;
    let xi = |i: usize| i * n;
    let ui = |i: usize| nx + i * m;
    let mut hess = DMatrix::zeros(nv, nv);
    for i in 0..=nh {
        hess.view_mut((xi(i), xi(i)), (n, n)).copy_from(&(weight_at(spec, i) * 2.0));
    }
    for i in 0..nh {
        hess.view_mut((ui(i), ui(i)), (m, m)).copy_from(&(&spec.r * 2.0));
    }
    let hess = symmetrize(&hess);

    let neq = (nh + 1) * n;
    let mut e = DMatrix::zeros(neq, nv);
    let mut f = DVector::zeros(neq);
    e.view_mut((0, 0), (n, n)).fill_with_identity();
    f.rows_mut(0, n).copy_from(x0);
    for i in 0..nh {
        let r0 = (i + 1) * n;
        e.view_mut((r0, xi(i + 1)), (n, n)).fill_with_identity();
        e.view_mut((r0, xi(i)), (n, n)).copy_from(&(-&spec.a));
        e.view_mut((r0, ui(i)), (n, m)).copy_from(&(-&spec.b));
    }

    let zh = &spec.z_bar.h * &spec.h;
    let nin = nh * (zh.nrows() + spec.u_bar.n_constraints()) + spec.x_f.n_constraints();
    let mut a_in = DMatrix::zeros(nin, nv);
    let mut b_in = DVector::zeros(nin);
    let mut at = 0;
    for i in 0..nh {
        a_in.view_mut((at, xi(i)), (zh.nrows(), n)).copy_from(&zh);
        b_in.rows_mut(at, zh.nrows()).copy_from(&spec.z_bar.b);
        at += zh.nrows();
        let k = spec.u_bar.n_constraints();
        a_in.view_mut((at, ui(i)), (k, m)).copy_from(&spec.u_bar.h);
        b_in.rows_mut(at, k).copy_from(&spec.u_bar.b);
        at += k;
    }
    let k = spec.x_f.n_constraints();
    a_in.view_mut((at, xi(nh)), (k, n)).copy_from(&spec.x_f.h);
    b_in.rows_mut(at, k).copy_from(&spec.x_f.b);

    let qp = QuadraticProgram::new(hess, DVector::zeros(nv))
        .with_inequalities(a_in, b_in)
        .with_equalities(e, f);
    let sol = solve_qp_with(&qp, tol)?;
    if sol.status == QpStatus::Infeasible {
        return Err(infeasible());
    }
    let sol = sol.verified(tol, "reduced OCP (sparse)")?;
    let u: Vec<DVector<f64>> = (0..nh).map(|i| sol.x.rows(ui(i), m).into_owned()).collect();
    // Re-simulate so the returned trajectory obeys the dynamics exactly.
    let mut x = vec![x0.clone()];
    for ui in &u {
        let next = &spec.a * x.last().unwrap() + &spec.b * ui;
        x.push(next);
    }
    Ok(OcpSolution {
        cost: trajectory_cost(spec, &x, &u),
        u,
        x,
        formulation: OcpFormulation::Sparse,
        kkt_residual: sol.kkt_residual,
        primal_residual: sol.primal_residual,
    })
}

fn trajectory_cost(spec: &OcpSpec, x: &[DVector<f64>], u: &[DVector<f64>]) -> f64 {
    let mut c = 0.0;
    for (i, xi) in x.iter().enumerate() {
        c += xi.dot(&(weight_at(spec, i) * xi));
    }
    for ui in u {
        c += ui.dot(&(&spec.r * ui));
    }
    c
}

/// Rows without decision-variable coefficients are checked and removed.
fn drop_constant_rows(
    blocks: Vec<(DMatrix<f64>, DVector<f64>)>,
    tol: &Tolerances,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let ncols = blocks.first().map_or(0, |b| b.0.ncols());
    let mut keep: Vec<(Vec<f64>, f64)> = Vec::new();
    for (h, b) in blocks {
        for r in 0..h.nrows() {
            let row: Vec<f64> = h.row(r).iter().copied().collect();
            if row.iter().all(|&v| v == 0.0) {
                if b[r] < -tol.qp_feasibility * (1.0 + b[r].abs()) {
                    return Err(infeasible());
                }
            } else {
                keep.push((row, b[r]));
            }
        }
    }
    let h = DMatrix::from_fn(keep.len(), ncols, |i, j| keep[i].0[j]);
    let b = DVector::from_fn(keep.len(), |i, _| keep[i].1);
    Ok((h, b))
}
