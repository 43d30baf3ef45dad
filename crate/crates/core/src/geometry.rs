//! H-polytopes `{x | Hx ≤ b}` and axis-aligned boxes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::numerics::linalg::block_diag;
use crate::numerics::{solve_lp_with, LinearProgram, LpStatus};
use crate::{Error, Result};

/// Default dimension cap for general vertex enumeration.
pub const VERTEX_DIM_CAP: usize = 12;
/// Cap on the number of box vertices (2²⁰).
pub const BOX_VERTEX_CAP: usize = 1 << 20;
/// Cap on the number of row subsets examined for general polytopes.
const SUBSET_CAP: u128 = 2_000_000;
const DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    #[serde(with = "crate::serde_util::matrix")]
    pub h: DMatrix<f64>,
    #[serde(with = "crate::serde_util::vector")]
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    #[serde(with = "crate::serde_util::vector")]
    pub lower: DVector<f64>,
    #[serde(with = "crate::serde_util::vector")]
    pub upper: DVector<f64>,
}

impl BoxSet {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::invalid("box lower bound exceeds upper bound"));
        }
        Ok(Self { lower, upper })
    }

    /// `[−r, r]^dim`.
    pub fn symmetric(dim: usize, r: f64) -> Result<Self> {
        Self::new(DVector::from_element(dim, -r), DVector::from_element(dim, r))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::dim(format!("point of dim {} for box of dim {}", x.len(), self.dim())));
        }
        Ok((0..x.len()).all(|i| x[i] >= self.lower[i] - tol && x[i] <= self.upper[i] + tol))
    }

    pub fn support(&self, d: &DVector<f64>) -> f64 {
        (0..d.len())
            .map(|i| if d[i] >= 0.0 { d[i] * self.upper[i] } else { d[i] * self.lower[i] })
            .sum()
    }

    /// Row order: `+e₁ … +e_n` then `−e₁ … −e_n`.
    pub fn to_polytope(&self) -> Polytope {
        let n = self.dim();
        let mut h = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            h[(i, i)] = 1.0;
            b[i] = self.upper[i];
            h[(n + i, i)] = -1.0;
            b[n + i] = -self.lower[i];
        }
        Polytope { h, b }
    }

    pub fn vertices(&self) -> Result<Vec<DVector<f64>>> {
        let free: Vec<usize> = (0..self.dim()).filter(|&i| self.upper[i] > self.lower[i]).collect();
        if free.len() >= 64 || (1usize << free.len()) > BOX_VERTEX_CAP {
            return Err(Error::VertexCap(format!(
                "box with {} non-degenerate coordinates exceeds the 2^20 vertex cap",
                free.len()
            )));
        }
        let count = 1usize << free.len();
        let mut out = Vec::with_capacity(count);
        for mask in 0..count {
            let mut v = self.lower.clone();
            for (bit, &i) in free.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    v[i] = self.upper[i];
                }
            }
            out.push(v);
        }
        Ok(out)
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }
}

impl Polytope {
    pub fn new(h: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if h.nrows() != b.len() {
            return Err(Error::dim(format!(
                "polytope has {} rows in H but {} entries in b",
                h.nrows(),
                b.len()
            )));
        }
        if !h.iter().chain(b.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("polytope data must be finite"));
        }
        for i in 0..h.nrows() {
            if h.row(i).iter().all(|&v| v == 0.0) {
                return Err(Error::invalid(format!("polytope row {i} of H is all zero")));
            }
        }
        Ok(Self { h, b })
    }

    /// The zero-dimensional space, neutral for [`Polytope::product`].
    pub fn point() -> Self {
        Self {
            h: DMatrix::zeros(0, 0),
            b: DVector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_constraints(&self) -> usize {
        self.h.nrows()
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::dim(format!(
                "point of dim {} for polytope of dim {}",
                x.len(),
                self.dim()
            )));
        }
        let hx = &self.h * x;
        Ok((0..hx.len()).all(|i| hx[i] <= self.b[i] + tol))
    }

    /// `{x | Hx ≤ b − delta}`, rows kept in order.
    pub fn tighten(&self, delta: &DVector<f64>) -> Result<Self> {
        if delta.len() != self.n_constraints() {
            return Err(Error::dim(format!(
                "tightening vector of length {} for {} constraints",
                delta.len(),
                self.n_constraints()
            )));
        }
        Ok(Self {
            h: self.h.clone(),
            b: &self.b - delta,
        })
    }

    pub fn product(&self, other: &Polytope) -> Self {
        let h = block_diag(&[&self.h, &other.h]);
        let mut b = DVector::zeros(self.b.len() + other.b.len());
        b.rows_mut(0, self.b.len()).copy_from(&self.b);
        b.rows_mut(self.b.len(), other.b.len()).copy_from(&other.b);
        Self { h, b }
    }

    /// Decided by one LP feasibility probe.
    pub fn is_empty(&self, tol: &Tolerances) -> Result<bool> {
        if self.dim() == 0 {
            return Ok(self.b.iter().any(|&v| v < 0.0));
        }
        let lp = LinearProgram::new(DVector::zeros(self.dim()))
            .with_inequalities(self.h.clone(), self.b.clone());
        let sol = solve_lp_with(&lp, tol)?;
        match sol.status {
            LpStatus::Infeasible => Ok(true),
            _ => sol.verified(tol, "emptiness check").map(|_| false),
        }
    }

    /// `max dᵀx` over the polytope.
    pub fn support(&self, d: &DVector<f64>, tol: &Tolerances) -> Result<f64> {
        if d.len() != self.dim() {
            return Err(Error::dim("support direction"));
        }
        if let Some(bx) = self.as_box() {
            return Ok(bx.support(d));
        }
        let lp = LinearProgram::new(d.clone()).with_inequalities(self.h.clone(), self.b.clone());
        Ok(solve_lp_with(&lp, tol)?.verified(tol, "support function")?.value)
    }

    /// Recognizes a box: every row is a signed unit vector and each
    /// coordinate is bounded on both sides with `lower ≤ upper`.
    pub fn as_box(&self) -> Option<BoxSet> {
        let n = self.dim();
        let mut lo = DVector::from_element(n, f64::NEG_INFINITY);
        let mut up = DVector::from_element(n, f64::INFINITY);
        for i in 0..self.n_constraints() {
            let nz: Vec<usize> = (0..n).filter(|&j| self.h[(i, j)] != 0.0).collect();
            if nz.len() != 1 {
                return None;
            }
            let j = nz[0];
            let a = self.h[(i, j)];
            let bound = self.b[i] / a;
            if a > 0.0 {
                up[j] = up[j].min(bound);
            } else {
                lo[j] = lo[j].max(bound);
            }
        }
        if (0..n).all(|j| lo[j].is_finite() && up[j].is_finite() && lo[j] <= up[j]) {
            Some(BoxSet { lower: lo, upper: up })
        } else {
            None
        }
    }

    /// Vertex set. Boxes are handled combinatorially; general polytopes by
    /// intersecting every `dim`-subset of rows, which is capped.
    pub fn vertices(&self, tol: &Tolerances) -> Result<Vec<DVector<f64>>> {
        if let Some(bx) = self.as_box() {
            return bx.vertices();
        }
        let d = self.dim();
        if d == 0 {
            return Ok(vec![DVector::zeros(0)]);
        }
        if d > VERTEX_DIM_CAP {
            return Err(Error::VertexCap(format!(
                "general polytope of dimension {d} exceeds the cap {VERTEX_DIM_CAP}"
            )));
        }
        let m = self.n_constraints();
        if binomial(m, d) > SUBSET_CAP {
            return Err(Error::VertexCap(format!(
                "{m} constraints in dimension {d} exceed the subset cap"
            )));
        }
        for i in 0..d {
            for s in [1.0, -1.0] {
                let mut e = DVector::zeros(d);
                e[i] = s;
                let lp = LinearProgram::new(e).with_inequalities(self.h.clone(), self.b.clone());
                let sol = solve_lp_with(&lp, tol)?;
                match sol.status {
                    LpStatus::Unbounded => {
                        return Err(Error::Unbounded("vertex enumeration of an unbounded polytope".into()))
                    }
                    LpStatus::Infeasible => return Err(Error::Infeasible("vertex enumeration of an empty polytope".into())),
                    LpStatus::Optimal => {
                        sol.verified(tol, "vertex enumeration bound")?;
                    }
                }
            }
        }
        let scale = 1.0 + self.b.amax();
        let mut out: Vec<DVector<f64>> = Vec::new();
        let mut idx: Vec<usize> = (0..d).collect();
        loop {
            let sub = DMatrix::from_fn(d, d, |r, c| self.h[(idx[r], c)]);
            let rhs = DVector::from_fn(d, |r, _| self.b[idx[r]]);
            if let Some(x) = sub.lu().solve(&rhs) {
                if x.iter().all(|v| v.is_finite())
                    && self.contains(&x, 1e-9 * scale)?
                    && !out.iter().any(|v| (v - &x).amax() <= DEDUP_TOL * scale)
                {
                    out.push(x);
                }
            }
            if !next_combination(&mut idx, m) {
                break;
            }
        }
        Ok(out)
    }
}

impl From<&BoxSet> for Polytope {
    fn from(b: &BoxSet) -> Self {
        b.to_polytope()
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
        if r > u64::MAX as u128 {
            return r;
        }
    }
    r
}

/// Advances a sorted index combination; false once exhausted.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in (i + 1)..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
