//! Dense linear programming.
//!
//! `maximize cᵀx  s.t.  H x ≤ b,  E x = f,  x free`.
//!
//! The problem is solved through its dual `min bᵀλ + fᵀμ  s.t.  Hᵀλ + Eᵀμ = c,
//! λ ≥ 0`, which is in standard form with one row per primal variable. The
//! pipeline LPs have few variables and many inequality rows, so the dual
//! tableau stays small. A two-phase tableau simplex with Dantzig pricing,
//! lowest-index tie-breaking and a Bland fallback on degenerate stalls
//! solves it; the primal point is read off the final basis by a fresh LU
//! solve against the original data.

use nalgebra::{DMatrix, DVector};

use crate::config::Tolerances;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    /// Objective to maximize.
    pub objective: DVector<f64>,
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

impl LinearProgram {
    /// Unconstrained problem over `objective.len()` free variables.
    pub fn new(objective: DVector<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            ineq_matrix: DMatrix::zeros(0, n),
            ineq_rhs: DVector::zeros(0),
            eq_matrix: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
        }
    }

    pub fn with_inequalities(mut self, h: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.ineq_matrix = h;
        self.ineq_rhs = b;
        self
    }

    pub fn with_equalities(mut self, e: DMatrix<f64>, f: DVector<f64>) -> Self {
        self.eq_matrix = e;
        self.eq_rhs = f;
        self
    }

    pub fn dim(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.ineq_matrix.ncols() != n || self.ineq_matrix.nrows() != self.ineq_rhs.len() {
            return Err(Error::dim(format!(
                "LP inequality system is {}x{} with rhs {} for {} variables",
                self.ineq_matrix.nrows(),
                self.ineq_matrix.ncols(),
                self.ineq_rhs.len(),
                n
            )));
        }
        if self.eq_matrix.ncols() != n || self.eq_matrix.nrows() != self.eq_rhs.len() {
            return Err(Error::dim(format!(
                "LP equality system is {}x{} with rhs {} for {} variables",
                self.eq_matrix.nrows(),
                self.eq_matrix.ncols(),
                self.eq_rhs.len(),
                n
            )));
        }
        let finite = self.objective.iter().all(|v| v.is_finite())
            && self.ineq_matrix.iter().all(|v| v.is_finite())
            && self.ineq_rhs.iter().all(|v| v.is_finite())
            && self.eq_matrix.iter().all(|v| v.is_finite())
            && self.eq_rhs.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("LP data must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Scaled post-hoc optimality residuals.
///
/// * `primal`: `max (Hx − b)₊ / (1 + |b|)` and `|Ex − f| / (1 + |f|)`.
/// * `dual`: `‖Hᵀλ + Eᵀμ − c‖∞ / (1 + ‖c‖∞)` and `max (−λ)₊`.
/// * `complementarity`: `max λ_j (b − Hx)_j / (1 + |b_j|)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal value; `-inf` when infeasible, `+inf` when unbounded.
    pub value: f64,
    pub x: DVector<f64>,
    pub ineq_duals: DVector<f64>,
    pub eq_duals: DVector<f64>,
    pub residuals: KktResiduals,
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Errors unless the solution is optimal and passes the residual checks.
    pub fn verified(self, tol: &Tolerances, context: &str) -> Result<Self> {
        match self.status {
            LpStatus::Infeasible => return Err(Error::Infeasible(context.to_string())),
            LpStatus::Unbounded => return Err(Error::Unbounded(context.to_string())),
            LpStatus::Optimal => {}
        }
        let r = self.residuals;
        if r.primal > tol.lp_feasibility
            || r.dual > tol.lp_optimality
            || r.complementarity > tol.lp_optimality
        {
            return Err(Error::ResidualCheck {
                context: context.to_string(),
                detail: format!(
                    "primal {:e}, dual {:e}, complementarity {:e}",
                    r.primal, r.dual, r.complementarity
                ),
            });
        }
        Ok(self)
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_with(lp, &Tolerances::default())
}

pub fn solve_lp_with(lp: &LinearProgram, tol: &Tolerances) -> Result<LpSolution> {
    lp.validate()?;
    solve_inner(lp, tol, false)
}

fn non_optimal(lp: &LinearProgram, status: LpStatus, pivots: usize) -> LpSolution {
    LpSolution {
        status,
        value: if status == LpStatus::Infeasible {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        },
        x: DVector::zeros(lp.dim()),
        ineq_duals: DVector::zeros(lp.ineq_rhs.len()),
        eq_duals: DVector::zeros(lp.eq_rhs.len()),
        residuals: KktResiduals::default(),
        pivots,
    }
}

fn row_inf_norm(m: &DMatrix<f64>, i: usize) -> f64 {
    m.row(i).iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

fn solve_inner(lp: &LinearProgram, tol: &Tolerances, probing: bool) -> Result<LpSolution> {
    let n = lp.dim();
    let h = &lp.ineq_matrix;
    let e = &lp.eq_matrix;

    // Rows that are identically zero are either trivially satisfied or
    // prove infeasibility on their own.
    let mut ineq_rows = Vec::new();
    for j in 0..h.nrows() {
        let s = row_inf_norm(h, j);
        if s == 0.0 {
            if lp.ineq_rhs[j] < -tol.lp_feasibility * (1.0 + lp.ineq_rhs[j].abs()) {
                return Ok(non_optimal(lp, LpStatus::Infeasible, 0));
            }
        } else {
            ineq_rows.push((j, 1.0 / s));
        }
    }
    let mut eq_rows = Vec::new();
    for j in 0..e.nrows() {
        let s = row_inf_norm(e, j);
        if s == 0.0 {
            if lp.eq_rhs[j].abs() > tol.lp_feasibility * (1.0 + lp.eq_rhs[j].abs()) {
                return Ok(non_optimal(lp, LpStatus::Infeasible, 0));
            }
        } else {
            eq_rows.push((j, 1.0 / s));
        }
    }

    if n == 0 {
        return Ok(finish(lp, DVector::zeros(0), DVector::zeros(h.nrows()), DVector::zeros(e.nrows()), 0));
    }

    // Column (variable) scaling after row scaling.
    let mut sigma = vec![0.0_f64; n];
    for &(j, s) in &ineq_rows {
        for i in 0..n {
            sigma[i] = sigma[i].max((h[(j, i)] * s).abs());
        }
    }
    for &(j, s) in &eq_rows {
        for i in 0..n {
            sigma[i] = sigma[i].max((e[(j, i)] * s).abs());
        }
    }
    for s in sigma.iter_mut() {
        *s = if *s > 0.0 { 1.0 / *s } else { 1.0 };
    }

    // Standard-form dual: columns [H'ᵀ | E'ᵀ | −E'ᵀ], costs [b'; f'; −f'].
    let r = ineq_rows.len();
    let q = eq_rows.len();
    let cols = r + 2 * q;
    let mut m = DMatrix::<f64>::zeros(n, cols);
    let mut cost = vec![0.0; cols];
    for (k, &(j, s)) in ineq_rows.iter().enumerate() {
        for i in 0..n {
            m[(i, k)] = h[(j, i)] * s * sigma[i];
        }
        cost[k] = lp.ineq_rhs[j] * s;
    }
    for (k, &(j, s)) in eq_rows.iter().enumerate() {
        for i in 0..n {
            let v = e[(j, i)] * s * sigma[i];
            m[(i, r + k)] = v;
            m[(i, r + q + k)] = -v;
        }
        cost[r + k] = lp.eq_rhs[j] * s;
        cost[r + q + k] = -lp.eq_rhs[j] * s;
    }
    let mut rhs: Vec<f64> = (0..n).map(|i| lp.objective[i] * sigma[i]).collect();
    let mut row_sign = vec![1.0; n];
    for i in 0..n {
        if rhs[i] < 0.0 {
            row_sign[i] = -1.0;
            rhs[i] = -rhs[i];
            for k in 0..cols {
                m[(i, k)] = -m[(i, k)];
            }
        }
    }

    let std = StandardForm { m: &m, cost: &cost, rhs: &rhs };
    let outcome = std.solve()?;
    match outcome {
        StdOutcome::Unbounded { pivots } => Ok(non_optimal(lp, LpStatus::Infeasible, pivots)),
        StdOutcome::Infeasible { pivots } => {
            if probing {
                return Err(Error::Numeric(
                    "feasibility probe LP reported an infeasible dual".into(),
                ));
            }
            let feasible = feasibility_probe(lp, tol)?;
            let status = if feasible {
                LpStatus::Unbounded
            } else {
                LpStatus::Infeasible
            };
            Ok(non_optimal(lp, status, pivots))
        }
        StdOutcome::Optimal { basis, pivots } => {
            let (y_b, pi) = std.basic_solution(&basis)?;
            let mut x = DVector::zeros(n);
            for i in 0..n {
                x[i] = sigma[i] * row_sign[i] * pi[i];
            }
            let mut lam = DVector::zeros(h.nrows());
            let mut mu = DVector::zeros(e.nrows());
            for (pos, &col) in basis.iter().enumerate() {
                if col < r {
                    let (j, s) = ineq_rows[col];
                    lam[j] = y_b[pos].max(0.0) * s;
                } else if col < r + q {
                    let (j, s) = eq_rows[col - r];
                    mu[j] += y_b[pos] * s;
                } else if col < cols {
                    let (j, s) = eq_rows[col - r - q];
                    mu[j] -= y_b[pos] * s;
                }
            }
            Ok(finish(lp, x, lam, mu, pivots))
        }
    }
}

fn finish(
    lp: &LinearProgram,
    x: DVector<f64>,
    lam: DVector<f64>,
    mu: DVector<f64>,
    pivots: usize,
) -> LpSolution {
    let value = lp.objective.dot(&x);
    let mut primal = 0.0_f64;
    let mut compl = 0.0_f64;
    let hx = &lp.ineq_matrix * &x;
    for j in 0..hx.len() {
        let b = lp.ineq_rhs[j];
        let scale = 1.0 + b.abs();
        primal = primal.max((hx[j] - b).max(0.0) / scale);
        compl = compl.max((lam[j] * (b - hx[j])).abs() / scale);
    }
    let ex = &lp.eq_matrix * &x;
    for j in 0..ex.len() {
        let f = lp.eq_rhs[j];
        primal = primal.max((ex[j] - f).abs() / (1.0 + f.abs()));
    }
    let grad = lp.ineq_matrix.tr_mul(&lam) + lp.eq_matrix.tr_mul(&mu) - &lp.objective;
    let cnorm = lp.objective.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut dual = grad.iter().fold(0.0_f64, |a, v| a.max(v.abs())) / (1.0 + cnorm);
    for l in lam.iter() {
        dual = dual.max(-l);
    }
    LpSolution {
        status: LpStatus::Optimal,
        value,
        x,
        ineq_duals: lam,
        eq_duals: mu,
        residuals: KktResiduals {
            primal,
            dual,
            complementarity: compl,
        },
        pivots,
    }
}

/// Decides feasibility of `{Hx ≤ b, Ex = f}` by minimizing a uniform slack.
fn feasibility_probe(lp: &LinearProgram, tol: &Tolerances) -> Result<bool> {
    let n = lp.dim();
    let r = lp.ineq_matrix.nrows();
    let q = lp.eq_matrix.nrows();
    let rows = r + 2 * q + 1;
    let mut hp = DMatrix::zeros(rows, n + 1);
    let mut bp = DVector::zeros(rows);
    for j in 0..r {
        for i in 0..n {
            hp[(j, i)] = lp.ineq_matrix[(j, i)];
        }
        hp[(j, n)] = -1.0;
        bp[j] = lp.ineq_rhs[j];
    }
    for j in 0..q {
        for i in 0..n {
            hp[(r + j, i)] = lp.eq_matrix[(j, i)];
            hp[(r + q + j, i)] = -lp.eq_matrix[(j, i)];
        }
        hp[(r + j, n)] = -1.0;
        hp[(r + q + j, n)] = -1.0;
        bp[r + j] = lp.eq_rhs[j];
        bp[r + q + j] = -lp.eq_rhs[j];
    }
    hp[(rows - 1, n)] = -1.0;
    let mut c = DVector::zeros(n + 1);
    c[n] = -1.0;
    let bscale = lp
        .ineq_rhs
        .iter()
        .chain(lp.eq_rhs.iter())
        .fold(0.0_f64, |a, v| a.max(v.abs()));
    let probe = LinearProgram::new(c).with_inequalities(hp, bp);
    let sol = solve_inner(&probe, tol, true)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numeric("feasibility probe LP did not solve".into()));
    }
    Ok(sol.x[n] <= tol.lp_feasibility * (1.0 + bscale))
}

// ---------------------------------------------------------------------------
// Standard-form tableau simplex: minimize costᵀy s.t. M y = rhs, y ≥ 0, rhs ≥ 0.

struct StandardForm<'a> {
    m: &'a DMatrix<f64>,
    cost: &'a [f64],
    rhs: &'a [f64],
}

enum StdOutcome {
    Optimal { basis: Vec<usize>, pivots: usize },
    Infeasible { pivots: usize },
    Unbounded { pivots: usize },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

const OPT_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-9;
const HARRIS_DELTA: f64 = 1e-10;

struct Tableau {
    width: usize,
    data: Vec<f64>,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let piv = self.data[r * w + c];
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        prow[c] = 1.0;
        let nz: Vec<usize> = (0..w).filter(|&j| prow[j] != 0.0).collect();
        let eliminate = |row: &mut [f64]| {
            let f = row[c];
            if f != 0.0 {
                for &j in &nz {
                    row[j] -= f * prow[j];
                }
                row[c] = 0.0;
            }
        };
        for row in before.chunks_mut(w) {
            eliminate(row);
        }
        for row in after.chunks_mut(w) {
            eliminate(row);
        }
    }
}

impl StandardForm<'_> {
    fn n(&self) -> usize {
        self.m.nrows()
    }

    fn cols(&self) -> usize {
        self.m.ncols()
    }

    /// Column of `[M | I]`.
    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.cols() {
            self.m.column(j).into_owned()
        } else {
            let mut v = DVector::zeros(self.n());
            v[j - self.cols()] = 1.0;
            v
        }
    }

    fn phase_cost(&self, phase: Phase, j: usize) -> f64 {
        match phase {
            Phase::One => {
                if j < self.cols() {
                    0.0
                } else {
                    1.0
                }
            }
            Phase::Two => {
                if j < self.cols() {
                    self.cost[j]
                } else {
                    0.0
                }
            }
        }
    }

    fn basis_matrix(&self, basis: &[usize]) -> DMatrix<f64> {
        let n = self.n();
        let mut b = DMatrix::zeros(n, n);
        for (k, &j) in basis.iter().enumerate() {
            b.set_column(k, &self.column(j));
        }
        b
    }

    /// Basic variable values and simplex multipliers from the original data.
    fn basic_solution(&self, basis: &[usize]) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.n();
        let b = self.basis_matrix(basis);
        let lu = b.clone().lu();
        let rhs = DVector::from_column_slice(self.rhs);
        let y = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("final LP basis".into()))?;
        let cb = DVector::from_fn(n, |k, _| self.phase_cost(Phase::Two, basis[k]));
        let pi = b
            .transpose()
            .lu()
            .solve(&cb)
            .ok_or_else(|| Error::Singular("final LP basis (transposed)".into()))?;
        Ok((y, pi))
    }

    /// Rebuilds the tableau for `basis` from the original data.
    fn rebuild(&self, basis: &[usize], phase: Phase) -> Option<Tableau> {
        let n = self.n();
        let cols = self.cols();
        let width = cols + n + 1;
        let b = self.basis_matrix(basis);
        let lu = b.clone().lu();
        let binv = lu.try_inverse()?;
        if !binv.iter().all(|v| v.is_finite()) {
            return None;
        }
        let body = &binv * self.m;
        let rhs = &binv * DVector::from_column_slice(self.rhs);
        let cb = DVector::from_fn(n, |k, _| self.phase_cost(phase, basis[k]));
        let pi = binv.tr_mul(&cb);
        let mut data = vec![0.0; (n + 1) * width];
        for i in 0..n {
            for j in 0..cols {
                data[i * width + j] = body[(i, j)];
            }
            for j in 0..n {
                data[i * width + cols + j] = binv[(i, j)];
            }
            data[i * width + width - 1] = rhs[i];
        }
        let obj = n * width;
        let mtpi = self.m.tr_mul(&pi);
        for j in 0..cols {
            data[obj + j] = self.phase_cost(phase, j) - mtpi[j];
        }
        for j in 0..n {
            data[obj + cols + j] = self.phase_cost(phase, cols + j) - pi[j];
        }
        data[obj + width - 1] = -pi.dot(&DVector::from_column_slice(self.rhs));
        // Basic columns are exact unit vectors with zero reduced cost.
        for (k, &j) in basis.iter().enumerate() {
            for i in 0..=n {
                data[i * width + j] = if i == k { 1.0 } else { 0.0 };
            }
        }
        Some(Tableau {

            width,
            data,
        })
    }

    fn solve(&self) -> Result<StdOutcome> {
        let n = self.n();
        let cols = self.cols();
        let width = cols + n + 1;
        let mut basis: Vec<usize> = (cols..cols + n).collect();

        // Initial phase-one tableau: [M | I | rhs], reduced costs −1ᵀM.
        let mut data = vec![0.0; (n + 1) * width];
        for i in 0..n {
            for j in 0..cols {
                data[i * width + j] = self.m[(i, j)];
            }
            data[i * width + cols + i] = 1.0;
            data[i * width + width - 1] = self.rhs[i];
        }
        let obj = n * width;
        for j in 0..cols {
            data[obj + j] = -(0..n).map(|i| self.m[(i, j)]).sum::<f64>();
        }
        data[obj + width - 1] = -self.rhs.iter().sum::<f64>();
        let mut tab = Tableau {

            width,
            data,
        };

        let mut pivots = 0usize;
        let max_pivots = 50 * (n + cols) + 1000;
        let reinvert_every = n.max(200);

        match self.iterate(&mut tab, &mut basis, Phase::One, &mut pivots, max_pivots, reinvert_every)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => {
                return Err(Error::Numeric("phase-one LP reported unbounded".into()));
            }
        }
        if let Some(t) = self.rebuild(&basis, Phase::One) {
            tab = t;
        }
        let infeas: f64 = basis
            .iter()
            .enumerate()
            .filter(|(_, &j)| j >= cols)
            .map(|(k, _)| tab.at(k, width - 1).max(0.0))
            .sum();
        let rhs_scale = 1.0 + self.rhs.iter().fold(0.0_f64, |a, v| a.max(*v));
        if infeas > 1e-9 * rhs_scale {
            return Ok(StdOutcome::Infeasible { pivots });
        }

        // Drive remaining artificials out of the basis where possible.
        for k in 0..n {
            if basis[k] < cols {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..cols {
                if basis.contains(&j) {
                    continue;
                }
                let v = tab.at(k, j).abs();
                if v > 1e-7 && best.map_or(true, |(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                tab.pivot(k, j);
                basis[k] = j;
                pivots += 1;
            }
        }

        let mut tab = self
            .rebuild(&basis, Phase::Two)
            .ok_or_else(|| Error::Singular("LP basis after phase one".into()))?;
        loop {
            match self.iterate(&mut tab, &mut basis, Phase::Two, &mut pivots, max_pivots, reinvert_every)? {
                PhaseEnd::Unbounded => return Ok(StdOutcome::Unbounded { pivots }),
                PhaseEnd::Optimal => {}
            }
            // Confirm optimality on a freshly inverted tableau.
            match self.rebuild(&basis, Phase::Two) {
                Some(t) => {
                    let fresh_optimal = (0..cols)
                        .all(|j| basis.contains(&j) || t.at(n, j) >= -OPT_TOL);
                    let fresh_feasible = (0..n).all(|i| t.at(i, width - 1) >= -1e-9);
                    tab = t;
                    if fresh_optimal && fresh_feasible {
                        break;
                    }
                    if !fresh_feasible {
                        // Lost primal feasibility of the dual basis: fall back on
                        // the values we have; residual checks will report it.
                        break;
                    }
                }
                None => break,
            }
        }
        Ok(StdOutcome::Optimal { basis, pivots })
    }

    fn iterate(
        &self,
        tab: &mut Tableau,
        basis: &mut [usize],
        phase: Phase,
        pivots: &mut usize,
        max_pivots: usize,
        reinvert_every: usize,
    ) -> Result<PhaseEnd> {
        let n = self.n();
        let cols = self.cols();
        let width = tab.width;
        let rhs_col = width - 1;
        let enter_limit = match phase {
            Phase::One => cols + n,
            Phase::Two => cols,
        };
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut since_reinvert = 0usize;
        let mut in_basis = vec![false; cols + n];
        for &j in basis.iter() {
            in_basis[j] = true;
        }
        // A missing pivot is retried once on a freshly inverted tableau.
        let mut retried = false;
        let feas_tol = 1e-12 * (1.0 + self.rhs.iter().fold(0.0_f64, |a, v| a.max(*v)));

        loop {
            if *pivots > max_pivots {
                return Err(Error::NonConvergence(format!(
                    "simplex ({} pivots on a {}x{} tableau)",
                    pivots,
                    n,
                    cols
                )));
            }
            if since_reinvert >= reinvert_every {
                if let Some(t) = self.rebuild(basis, phase) {
                    *tab = t;
                }
                since_reinvert = 0;
            }

            // Once the artificials are all zero, further phase-one pivots only
            // chase rounding noise and can wreck the basis.
            if phase == Phase::One {
                let infeas: f64 = (0..n)
                    .filter(|&i| basis[i] >= cols)
                    .map(|i| tab.at(i, rhs_col).max(0.0))
                    .sum();
                if infeas <= feas_tol {
                    return Ok(PhaseEnd::Optimal);
                }
            }

            // Pricing.
            let obj = n * width;
            let mut enter: Option<usize> = None;
            let mut best = -OPT_TOL;
            for j in 0..enter_limit {
                if in_basis[j] {
                    continue;
                }
                let d = tab.data[obj + j];
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(c) = enter else {
                return Ok(PhaseEnd::Optimal);
            };

            // Ratio test.
            let leave = if bland {
                let mut best: Option<(usize, f64)> = None;
                for i in 0..n {
                    let a = tab.at(i, c);
                    if a > PIVOT_TOL {
                        let ratio = tab.at(i, rhs_col).max(0.0) / a;
                        match best {
                            None => best = Some((i, ratio)),
                            Some((bi, br)) => {
                                if ratio < br - 1e-12 * (1.0 + br)
                                    || (ratio <= br + 1e-12 * (1.0 + br) && basis[i] < basis[bi])
                                {
                                    best = Some((i, ratio));
                                }
                            }
                        }
                    }
                }
                best
            } else {
                // Harris two-pass ratio test.
                let mut bound = f64::INFINITY;
                for i in 0..n {
                    let a = tab.at(i, c);
                    if a > PIVOT_TOL {
                        bound = bound.min((tab.at(i, rhs_col).max(0.0) + HARRIS_DELTA) / a);
                    }
                }
                if bound.is_finite() {
                    let mut best: Option<(usize, f64, f64)> = None;
                    for i in 0..n {
                        let a = tab.at(i, c);
                        if a > PIVOT_TOL {
                            let ratio = tab.at(i, rhs_col).max(0.0) / a;
                            if ratio <= bound {
                                let better = match best {
                                    None => true,
                                    Some((bi, _, ba)) => a > ba || (a == ba && basis[i] < basis[bi]),
                                };
                                if better {
                                    best = Some((i, ratio, a));
                                }
                            }
                        }
                    }
                    best.map(|(i, r, _)| (i, r))
                } else {
                    None
                }
            };
            let Some((r, ratio)) = leave else {
                if !retried {
                    retried = true;
                    if let Some(t) = self.rebuild(basis, phase) {
                        *tab = t;
                        since_reinvert = 0;
                        continue;
                    }
                }
                return Ok(PhaseEnd::Unbounded);
            };
            retried = false;

            if ratio <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > 2 * n + 10 {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }

            tab.pivot(r, c);
            for i in 0..n {
                let idx = i * width + rhs_col;
                if tab.data[idx] < 0.0 && tab.data[idx] > -1e-11 {
                    tab.data[idx] = 0.0;
                }
            }
            in_basis[basis[r]] = false;
            in_basis[c] = true;
            basis[r] = c;
            *pivots += 1;
            since_reinvert += 1;
        }
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}
