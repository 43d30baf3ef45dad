//! Strictly convex quadratic programming.
//!
//! `minimize ½ xᵀP x + qᵀx  s.t.  A x ≤ b,  E x = f`.
//!
//! Primal active-set method. A feasible starting vertex comes from the LP
//! solver; each iteration solves the equality-constrained subproblem on the
//! working set through its KKT system.

use nalgebra::{DMatrix, DVector};

use super::linalg::{is_symmetric, max_abs};
use super::lp::{solve_lp_with, LinearProgram, LpStatus};
use crate::config::Tolerances;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub cost_matrix: DMatrix<f64>,
    pub cost_vector: DVector<f64>,
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

impl QuadraticProgram {
    pub fn new(cost_matrix: DMatrix<f64>, cost_vector: DVector<f64>) -> Self {
        let n = cost_vector.len();
        Self {
            cost_matrix,
            cost_vector,
            ineq_matrix: DMatrix::zeros(0, n),
            ineq_rhs: DVector::zeros(0),
            eq_matrix: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
        }
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.ineq_matrix = a;
        self.ineq_rhs = b;
        self
    }

    pub fn with_equalities(mut self, e: DMatrix<f64>, f: DVector<f64>) -> Self {
        self.eq_matrix = e;
        self.eq_rhs = f;
        self
    }

    pub fn dim(&self) -> usize {
        self.cost_vector.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.cost_matrix * x)) + self.cost_vector.dot(x)
    }

    fn validate(&self, tol: &Tolerances) -> Result<()> {
        let n = self.dim();
        if self.cost_matrix.shape() != (n, n) {
            return Err(Error::dim(format!(
                "QP cost matrix is {}x{} for {} variables",
                self.cost_matrix.nrows(),
                self.cost_matrix.ncols(),
                n
            )));
        }
        if self.ineq_matrix.ncols() != n || self.ineq_matrix.nrows() != self.ineq_rhs.len() {
            return Err(Error::dim("QP inequality system"));
        }
        if self.eq_matrix.ncols() != n || self.eq_matrix.nrows() != self.eq_rhs.len() {
            return Err(Error::dim("QP equality system"));
        }
        if !is_symmetric(&self.cost_matrix, tol.symmetry) {
            return Err(Error::NotPositiveDefinite("QP cost matrix is not symmetric".into()));
        }
        if n > 0 && self.cost_matrix.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("QP cost matrix".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: DVector<f64>,
    pub value: f64,
    pub ineq_duals: DVector<f64>,
    pub eq_duals: DVector<f64>,
    /// `‖P x + q + Aᵀλ + Eᵀμ‖∞ / (1 + ‖q‖∞)`.
    pub kkt_residual: f64,
    /// Scaled primal infeasibility, same convention as the LP residuals.
    pub primal_residual: f64,
    pub iterations: usize,
}

impl QpSolution {
    pub fn verified(self, tol: &Tolerances, context: &str) -> Result<Self> {
        if self.status == QpStatus::Infeasible {
            return Err(Error::Infeasible(context.to_string()));
        }
        if self.kkt_residual > tol.qp_kkt || self.primal_residual > tol.qp_feasibility {
            return Err(Error::ResidualCheck {
                context: context.to_string(),
                detail: format!(
                    "kkt {:e}, primal {:e}",
                    self.kkt_residual, self.primal_residual
                ),
            });
        }
        Ok(self)
    }
}

pub fn solve_qp(qp: &QuadraticProgram) -> Result<QpSolution> {
    solve_qp_with(qp, &Tolerances::default())
}

pub fn solve_qp_with(qp: &QuadraticProgram, tol: &Tolerances) -> Result<QpSolution> {
    qp.validate(tol)?;
    let n = qp.dim();
    let a = &qp.ineq_matrix;
    let b = &qp.ineq_rhs;
    let e = &qp.eq_matrix;
    let f = &qp.eq_rhs;
    let m = a.nrows();

    let infeasible = || QpSolution {
        status: QpStatus::Infeasible,
        x: DVector::zeros(n),
        value: f64::INFINITY,
        ineq_duals: DVector::zeros(m),
        eq_duals: DVector::zeros(e.nrows()),
        kkt_residual: 0.0,
        primal_residual: 0.0,
        iterations: 0,
    };

    // Unconstrained fast path.
    if m == 0 && e.nrows() == 0 {
        let x = match qp.cost_matrix.clone().cholesky() {
            Some(ch) => -ch.solve(&qp.cost_vector),
            None => return Err(Error::NotPositiveDefinite("QP cost matrix".into())),
        };
        return Ok(finish(qp, x, DVector::zeros(0), DVector::zeros(0), 0));
    }

    // Feasible starting point.
    let start = solve_lp_with(
        &LinearProgram::new(DVector::zeros(n))
            .with_inequalities(a.clone(), b.clone())
            .with_equalities(e.clone(), f.clone()),
        tol,
    )?;
    match start.status {
        LpStatus::Infeasible => return Ok(infeasible()),
        LpStatus::Unbounded => {}
        LpStatus::Optimal => {}
    }
    let mut x = start.x;

    let row_norm: Vec<f64> = (0..m)
        .map(|i| a.row(i).iter().fold(0.0_f64, |s, v| s.max(v.abs())))
        .collect();
    let active_tol = |i: usize, x: &DVector<f64>| -> bool {
        let slack = b[i] - a.row(i).dot(&x.transpose());
        slack.abs() <= 1e-9 * (1.0 + b[i].abs())
    };

    // Working set: equalities (implicit) plus a linearly independent subset of
    // the active inequalities. Zero rows never enter.
    let mut working: Vec<usize> = Vec::new();
    {
        let mut basis_rows: Vec<DVector<f64>> = Vec::new();
        for k in 0..e.nrows() {
            push_independent(&mut basis_rows, e.row(k).transpose());
        }
        for i in 0..m {
            if row_norm[i] > 0.0 && active_tol(i, &x) {
                if push_independent(&mut basis_rows, a.row(i).transpose()) {
                    working.push(i);
                }
            }
            if basis_rows.len() >= n {
                break;
            }
        }
    }

    let max_iter = 20 * (n + m) + 100;
    let p = &qp.cost_matrix;
    let q = &qp.cost_vector;
    let scale = 1.0 + max_abs(p) + q.iter().fold(0.0_f64, |s, v| s.max(v.abs()));

    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::NonConvergence(format!(
                "active-set QP after {max_iter} iterations"
            )));
        }
        let (x_eqp, lam_w, mu) = solve_eqp(p, q, a, b, e, f, &working)?;
        let step = &x_eqp - &x;
        let step_norm = step.amax();
        if step_norm <= 1e-11 * (1.0 + x.amax()) {
            // Stationary on the working set: check multipliers.
            let mut worst: Option<(usize, f64)> = None;
            for (k, &lam) in lam_w.iter().enumerate() {
                if lam < -1e-10 * scale && worst.map_or(true, |(_, w)| lam < w) {
                    worst = Some((k, lam));
                }
            }
            match worst {
                None => {
                    let mut lam_full = DVector::zeros(m);
                    for (k, &i) in working.iter().enumerate() {
                        lam_full[i] = lam_w[k].max(0.0);
                    }
                    return Ok(finish(qp, x_eqp, lam_full, mu, iterations));
                }
                Some((k, _)) => {
                    working.remove(k);
                    continue;
                }
            }
        }

        // Step toward the subproblem minimizer until a constraint blocks.
        let mut alpha = 1.0;
        let mut blocking: Option<usize> = None;
        for i in 0..m {
            if row_norm[i] == 0.0 || working.contains(&i) {
                continue;
            }
            let ap = a.row(i).dot(&step.transpose());
            if ap > 1e-12 * row_norm[i] * step_norm {
                let slack = (b[i] - a.row(i).dot(&x.transpose())).max(0.0);
                let t = slack / ap;
                if t < alpha {
                    alpha = t;
                    blocking = Some(i);
                }
            }
        }
        x += &step * alpha;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
}

/// Adds `v` to an orthonormalized row set if it is independent of it.
fn push_independent(rows: &mut Vec<DVector<f64>>, v: DVector<f64>) -> bool {
    let norm = v.norm();
    if norm == 0.0 {
        return false;
    }
    let mut w = v / norm;
    for _ in 0..2 {
        for r in rows.iter() {
            let c = r.dot(&w);
            w -= r * c;
        }
    }
    let rest = w.norm();
    if rest > 1e-8 {
        rows.push(w / rest);
        true
    } else {
        false
    }
}

#[allow(clippy::too_many_arguments)]
fn solve_eqp(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    e: &DMatrix<f64>,
    f: &DVector<f64>,
    working: &[usize],
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let n = q.len();
    let w = working.len();
    let ne = e.nrows();
    let size = n + w + ne;
    let mut kkt = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);
    kkt.view_mut((0, 0), (n, n)).copy_from(p);
    for i in 0..n {
        rhs[i] = -q[i];
    }
    for (k, &i) in working.iter().enumerate() {
        for j in 0..n {
            kkt[(n + k, j)] = a[(i, j)];
            kkt[(j, n + k)] = a[(i, j)];
        }
        rhs[n + k] = b[i];
    }
    for k in 0..ne {
        for j in 0..n {
            kkt[(n + w + k, j)] = e[(k, j)];
            kkt[(j, n + w + k)] = e[(k, j)];
        }
        rhs[n + w + k] = f[k];
    }
    let sol = kkt
        .lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular("QP working-set KKT system".into()))?;
    let x = sol.rows(0, n).into_owned();
    let lam = sol.rows(n, w).into_owned();
    let mu = sol.rows(n + w, ne).into_owned();
    Ok((x, lam, mu))
}

fn finish(
    qp: &QuadraticProgram,
    x: DVector<f64>,
    lam: DVector<f64>,
    mu: DVector<f64>,
    iterations: usize,
) -> QpSolution {
    let grad = &qp.cost_matrix * &x
        + &qp.cost_vector
        + qp.ineq_matrix.tr_mul(&lam)
        + qp.eq_matrix.tr_mul(&mu);
    let qn = qp.cost_vector.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    let kkt_residual = grad.amax() / (1.0 + qn);
    let mut primal = 0.0_f64;
    let ax = &qp.ineq_matrix * &x;
    for i in 0..ax.len() {
        primal = primal.max((ax[i] - qp.ineq_rhs[i]).max(0.0) / (1.0 + qp.ineq_rhs[i].abs()));
    }
    let ex = &qp.eq_matrix * &x;
    for i in 0..ex.len() {
        primal = primal.max((ex[i] - qp.eq_rhs[i]).abs() / (1.0 + qp.eq_rhs[i].abs()));
    }
    QpSolution {
        status: QpStatus::Optimal,
        value: qp.objective(&x),
        x,
        ineq_duals: lam,
        eq_duals: mu,
        kkt_residual,
        primal_residual: primal,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn box_rows(n: usize, lo: f64, hi: f64) -> (DMatrix<f64>, DVector<f64>) {
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(i, i)] = 1.0;
            b[i] = hi;
            a[(n + i, i)] = -1.0;
            b[n + i] = -lo;
        }
        (a, b)
    }

    #[test]
    fn active_lower_bound() {
        // min x² s.t. x ≥ 1
        let qp = QuadraticProgram::new(DMatrix::from_element(1, 1, 2.0), DVector::zeros(1))
            .with_inequalities(DMatrix::from_element(1, 1, -1.0), DVector::from_element(1, -1.0));
        let s = solve_qp(&qp).unwrap().verified(&Tolerances::default(), "t").unwrap();
        assert_relative_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.ineq_duals[0], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn unconstrained_minimum() {
        let qp = QuadraticProgram::new(DMatrix::from_element(1, 1, 2.0), DVector::zeros(1));
        let s = solve_qp(&qp).unwrap();
        assert_relative_eq!(s.x[0], 0.0, epsilon = 1e-14);
    }

    /// Brute-force minimizer on a 1e-3 grid over a box.
    fn grid_min(p: &DMatrix<f64>, q: &DVector<f64>, lo: f64, hi: f64) -> (f64, f64) {
        let steps = ((hi - lo) / 1e-3).round() as usize;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=steps {
            for j in 0..=steps {
                let x = DVector::from_column_slice(&[lo + i as f64 * 1e-3, lo + j as f64 * 1e-3]);
                let v = 0.5 * x.dot(&(p * &x)) + q.dot(&x);
                if v < best.0 {
                    best = (v, x[0], x[1]);
                }
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn projection_onto_box_matches_grid() {
        // min (x−2)² + (y−2)² over [0,1]²
        let p = DMatrix::identity(2, 2) * 2.0;
        let q = DVector::from_column_slice(&[-4.0, -4.0]);
        let (a, b) = box_rows(2, 0.0, 1.0);
        let s = solve_qp(&QuadraticProgram::new(p.clone(), q.clone()).with_inequalities(a, b))
            .unwrap()
            .verified(&Tolerances::default(), "t")
            .unwrap();
        let (gx, gy) = grid_min(&p, &q, 0.0, 1.0);
        assert!((s.x[0] - gx).abs() <= 2e-3 && (s.x[1] - gy).abs() <= 2e-3);
        assert_relative_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_indefinite_cost() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let qp = QuadraticProgram::new(p, DVector::zeros(2));
        assert!(matches!(solve_qp(&qp), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn reports_infeasible() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let b = DVector::from_column_slice(&[-1.0, -1.0]);
        let qp = QuadraticProgram::new(DMatrix::identity(1, 1), DVector::zeros(1)).with_inequalities(a, b);
        assert_eq!(solve_qp(&qp).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn equality_constrained() {
        // min x² + y² s.t. x + y = 1
        let qp = QuadraticProgram::new(DMatrix::identity(2, 2) * 2.0, DVector::zeros(2))
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 1.0));
        let s = solve_qp(&qp).unwrap().verified(&Tolerances::default(), "t").unwrap();
        assert_relative_eq!(s.x[0], 0.5, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn two_variable_qps_match_grid(
            p11 in 0.5f64..3.0, p22 in 0.5f64..3.0, p12 in -0.4f64..0.4,
            q1 in -4.0f64..4.0, q2 in -4.0f64..4.0,
        ) {
            let p = DMatrix::from_row_slice(2, 2, &[p11, p12, p12, p22]);
            let q = DVector::from_column_slice(&[q1, q2]);
            let (a, b) = box_rows(2, -1.0, 1.0);
            let s = solve_qp(&QuadraticProgram::new(p.clone(), q.clone()).with_inequalities(a, b))
                .unwrap().verified(&Tolerances::default(), "prop").unwrap();
            let (gx, gy) = grid_min(&p, &q, -1.0, 1.0);
            prop_assert!((s.x[0] - gx).abs() <= 2e-3 && (s.x[1] - gy).abs() <= 2e-3,
                "qp ({}, {}) grid ({}, {})", s.x[0], s.x[1], gx, gy);
        }
    }
}
