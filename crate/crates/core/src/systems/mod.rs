//! Benchmark plants and Matrix Market I/O.
//!
//! * `mass-spring-chain`: masses between two walls, exact zero-order-hold
//!   sampling of the second-order ODE.
//! * `heat2d-fd`: 5-point conductive stencil on an `s × s` grid with Dirichlet walls,
//!   boundary-temperature actuators, point sensors and region-average
//!   outputs.
//! * `random-stable`: seeded dense plant with prescribed spectral radius.
//! * `surrogate`: seeded six-state plant with two inputs, one measured
//!   output and the first two states as performance outputs.
//! * `file`: Matrix Market files.

mod mtx;

pub use mtx::{
    format_matrix_market, load_matrix_market, parse_matrix_market, read_matrix_market, save_matrix_market,
    write_matrix_market, ModelPaths,
};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::geometry::{BoxSet, Polytope};
use crate::model::{check_ctrb_obsv, FullOrderModel};
use crate::numerics::linalg::{expm, spectral_radius};
use crate::{Error, Result};

/// Largest full-order dimension any generator produces.
pub const MAX_STATES: usize = 4096;

/// Symmetric boxes `‖z‖∞ ≤ z`, `‖u‖∞ ≤ u`, `‖w‖∞ ≤ w`, `‖v‖∞ ≤ v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRadii {
    pub z: f64,
    pub u: f64,
    pub w: f64,
    pub v: f64,
}

impl BoxRadii {
    pub fn sets(&self, fom: &FullOrderModel) -> Result<ConstraintSets> {
        let b = |dim, r| Ok::<_, Error>(BoxSet::symmetric(dim, r)?.to_polytope());
        Ok(ConstraintSets {
            z: b(fom.o(), self.z)?,
            u: b(fom.m(), self.u)?,
            w: b(fom.mw(), self.w)?,
            v: b(fom.p(), self.v)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSets {
    pub z: Polytope,
    pub u: Polytope,
    pub w: Polytope,
    pub v: Polytope,
}

impl ConstraintSets {
    pub fn check_dims(&self, fom: &FullOrderModel) -> Result<()> {
        let want = [("𝒵", self.z.dim(), fom.o()), ("𝒰", self.u.dim(), fom.m()), ("𝒲", self.w.dim(), fom.mw()), ("𝒱", self.v.dim(), fom.p())];
        for (name, got, n) in want {
            if got != n {
                return Err(Error::dim(format!("{name} has dimension {got}, the plant needs {n}")));
            }
        }
        Ok(())
    }
}

fn default_masses() -> usize {
    10
}
fn one() -> f64 {
    1.0
}
fn default_damping() -> f64 {
    2.0
}
fn default_ms_dt() -> f64 {
    0.5
}
fn default_ms_actuators() -> Vec<usize> {
    vec![2, 7]
}
fn default_ms_sensors() -> Vec<usize> {
    vec![0, 4, 9]
}
fn default_ms_outputs() -> Vec<usize> {
    vec![3, 8]
}

/// Positions `q` and velocities `q̇` of `masses` equal masses joined by
/// springs and dampers, walls at both ends. Actuators push single masses,
/// disturbances act on every mass, sensors and outputs read positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassSpringSpec {
    #[serde(default = "default_masses")]
    pub masses: usize,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub stiffness: f64,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_ms_dt")]
    pub dt: f64,
    #[serde(default = "default_ms_actuators")]
    pub actuators: Vec<usize>,
    #[serde(default = "default_ms_sensors")]
    pub sensors: Vec<usize>,
    #[serde(default = "default_ms_outputs")]
    pub outputs: Vec<usize>,
}

impl Default for MassSpringSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

fn default_grid() -> usize {
    15
}
fn default_heat_actuators() -> usize {
    4
}
fn default_heat_sensors() -> usize {
    4
}
fn two() -> usize {
    2
}
fn default_heterogeneity() -> f64 {
    0.5
}
fn default_heat_dt() -> f64 {
    0.01
}

/// Temperatures on an `s × s` grid of the unit square with a smoothly
/// varying conductivity. Actuator `i` sets the wall temperature along the
/// `i`-th of `actuators` stretches of the perimeter (of increasing length);
/// sensors read single cells; outputs average small square regions;
/// disturbances are heat sources on other small regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatSpec {
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_heat_actuators")]
    pub actuators: usize,
    #[serde(default = "default_heat_sensors")]
    pub sensors: usize,
    #[serde(default = "two")]
    pub regions: usize,
    #[serde(default = "two")]
    pub disturbance_regions: usize,
    #[serde(default = "one")]
    pub diffusivity: f64,
    /// Relative variation of the conductivity over the square. Zero gives
    /// the uniform Laplacian, whose degenerate eigenspaces few actuators
    /// cannot reach.
    #[serde(default = "default_heterogeneity")]
    pub heterogeneity: f64,
    #[serde(default = "default_heat_dt")]
    pub dt: f64,
}

impl Default for HeatSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

fn default_radius() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomStableSpec {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub o: usize,
    pub mw: usize,
    #[serde(default)]
    pub seed: u64,
    /// Spectral radius of `A^f`, at most 0.95.
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_surrogate_radius() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_surrogate_radius")]
    pub radius: f64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            radius: default_surrogate_radius(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileSpec {
    pub paths: ModelPaths,
    pub sets: BoxRadii,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    MassSpringChain(MassSpringSpec),
    Heat2dFd(HeatSpec),
    RandomStable(RandomStableSpec),
    Surrogate(SurrogateSpec),
    File(FileSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSystem {
    pub fom: FullOrderModel,
    pub sets: BoxRadii,
}

pub fn generate(spec: &GeneratorSpec, tol: &Tolerances) -> Result<GeneratedSystem> {
    match spec {
        GeneratorSpec::MassSpringChain(s) => mass_spring(s, tol),
        GeneratorSpec::Heat2dFd(s) => heat2d(s, tol),
        GeneratorSpec::RandomStable(s) => random_stable(s, tol),
        GeneratorSpec::Surrogate(s) => surrogate(s, tol),
        GeneratorSpec::File(s) => Ok(GeneratedSystem {
            fom: load_matrix_market(&s.paths)?,
            sets: s.sets,
        }),
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

fn cap(nf: usize) -> Result<()> {
    if nf == 0 || nf > MAX_STATES {
        return Err(Error::invalid(format!("plant dimension {nf} outside 1..={MAX_STATES}")));
    }
    Ok(())
}

fn indices(name: &str, idx: &[usize], len: usize) -> Result<()> {
    if idx.is_empty() {
        return Err(Error::invalid(format!("{name} list is empty")));
    }
    if let Some(i) = idx.iter().find(|&&i| i >= len) {
        return Err(Error::invalid(format!("{name} index {i} outside 0..{len}")));
    }
    Ok(())
}

/// Krylov rank test on the generated pair; fails construction otherwise.
fn require_ctrb_obsv(fom: &FullOrderModel, tol: &Tolerances, family: &str) -> Result<()> {
    let r = check_ctrb_obsv(&fom.a, &fom.b, &fom.c, &fom.h, tol);
    if !r.all_hold() {
        return Err(Error::Assumption(format!(
            "{family}: placement fails the rank test (ranks (A,B) {}, (A,C) {}, (A,H) {} of {})",
            r.rank_ab, r.rank_ac, r.rank_ah, r.n
        )));
    }
    Ok(())
}

/// `exp([[A, B], [0, 0]] dt)`, split into the sampled `A` and `B`.
fn zoh(ac: &DMatrix<f64>, bc: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (ac.nrows(), bc.ncols());
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(ac * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(bc * dt));
    let e = expm(&aug);
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned())
}

fn tridiagonal(n: usize, diag: f64, off: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag
        } else if i.abs_diff(j) == 1 {
            off
        } else {
            0.0
        }
    })
}

/// Continuous-time `(A_c, [B_c, B_wc])` of the chain.
pub fn mass_spring_continuous(s: &MassSpringSpec) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = s.masses;
    let k = tridiagonal(n, 2.0 * s.stiffness, -s.stiffness);
    let d = tridiagonal(n, 2.0 * s.damping, -s.damping);
    let mut ac = DMatrix::zeros(2 * n, 2 * n);
    ac.view_mut((0, n), (n, n)).fill_with_identity();
    ac.view_mut((n, 0), (n, n)).copy_from(&(-&k / s.mass));
    ac.view_mut((n, n), (n, n)).copy_from(&(-&d / s.mass));
    let mut bc = DMatrix::zeros(2 * n, s.actuators.len());
    for (j, &a) in s.actuators.iter().enumerate() {
        bc[(n + a, j)] = 1.0 / s.mass;
    }
    let mut bwc = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        bwc[(n + i, i)] = 1.0 / s.mass;
    }
    (ac, bc, bwc)
}

fn mass_spring(s: &MassSpringSpec, tol: &Tolerances) -> Result<GeneratedSystem> {
    let n = s.masses;
    cap(2 * n)?;
    positive("mass", s.mass)?;
    positive("stiffness", s.stiffness)?;
    positive("dt", s.dt)?;
    if !(s.damping >= 0.0 && s.damping.is_finite()) {
        return Err(Error::invalid(format!("damping must be nonnegative, got {}", s.damping)));
    }
    indices("actuator", &s.actuators, n)?;
    indices("sensor", &s.sensors, n)?;
    indices("output", &s.outputs, n)?;
    let (ac, bc, bwc) = mass_spring_continuous(s);
    let m = bc.ncols();
    let both = crate::numerics::linalg::hstack(&[&bc, &bwc]);
    let (a, bb) = zoh(&ac, &both, s.dt);
    let b = bb.columns(0, m).into_owned();
    let bw = bb.columns(m, n).into_owned();
    let pick = |idx: &[usize]| DMatrix::from_fn(idx.len(), 2 * n, |r, c| if c == idx[r] { 1.0 } else { 0.0 });
    let fom = FullOrderModel::new(a, b, bw, pick(&s.sensors), pick(&s.outputs))?;
    require_ctrb_obsv(&fom, tol, "mass-spring-chain")?;
    Ok(GeneratedSystem {
        fom,
        sets: BoxRadii {
            z: 1.0,
            u: 1.0,
            w: 0.01,
            v: 0.01,
        },
    })
}

/// Boundary cells in clockwise order starting at the top-left corner.
fn perimeter(s: usize) -> Vec<(usize, usize)> {
    if s == 1 {
        return vec![(0, 0)];
    }
    let mut p = Vec::with_capacity(4 * (s - 1));
    p.extend((0..s - 1).map(|j| (0, j)));
    p.extend((0..s - 1).map(|i| (i, s - 1)));
    p.extend((1..s).rev().map(|j| (s - 1, j)));
    p.extend((1..s).rev().map(|i| (i, 0)));
    p
}

/// Top-left corners of `count` small `r × r` squares spread over the grid
/// along a line from `(a, b)` with slope given by `(di, dj)`.
fn region_corners(s: usize, r: usize, count: usize, start: (usize, usize), step: (usize, usize)) -> Vec<(usize, usize)> {
    let span = s - r;
    (0..count)
        .map(|k| ((start.0 + k * step.0) % (span + 1), (start.1 + k * step.1) % (span + 1)))
        .collect()
}

pub struct HeatContinuous {
    pub ac: DMatrix<f64>,
    pub bc: DMatrix<f64>,
    pub bwc: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

pub fn heat2d_continuous(s: &HeatSpec) -> Result<HeatContinuous> {
    let g = s.grid;
    if g < 3 {
        return Err(Error::invalid(format!("heat grid {g} is below 3")));
    }
    cap(g * g)?;
    positive("diffusivity", s.diffusivity)?;
    if !(s.heterogeneity >= 0.0 && s.heterogeneity.is_finite()) {
        return Err(Error::invalid(format!("heterogeneity must be nonnegative, got {}", s.heterogeneity)));
    }
    positive("dt", s.dt)?;
    let per = perimeter(g);
    if s.actuators == 0 || s.actuators > per.len() {
        return Err(Error::invalid(format!("actuator count {} outside 1..={}", s.actuators, per.len())));
    }
    let nf = g * g;
    if s.sensors == 0 || s.sensors > nf || s.regions == 0 {
        return Err(Error::invalid("heat model needs at least one sensor and one output region"));
    }
    let idx = |i: usize, j: usize| i * g + j;
    let hh = 1.0 / (g as f64 + 1.0);
    // Conductance of the face whose midpoint is (x, y); cell (i, j) sits at
    // x = (j + 1)h, y = (i + 1)h.
    let face = |x: f64, y: f64| {
        s.diffusivity * (1.0 + s.heterogeneity * (0.6 * x + 0.3 * y * y + 0.4 * x * y)) / (hh * hh)
    };
    let mut ac = DMatrix::zeros(nf, nf);
    // Wall conductance per cell; a wall at temperature u feeds it times u.
    let mut wall = vec![0.0; nf];
    for i in 0..g {
        for j in 0..g {
            let me = idx(i, j);
            let (x, y) = ((j + 1) as f64 * hh, (i + 1) as f64 * hh);
            let faces = [
                (i.checked_sub(1).map(|ii| idx(ii, j)), x, y - 0.5 * hh),
                ((i + 1 < g).then(|| idx(i + 1, j)), x, y + 0.5 * hh),
                (j.checked_sub(1).map(|jj| idx(i, jj)), x - 0.5 * hh, y),
                ((j + 1 < g).then(|| idx(i, j + 1)), x + 0.5 * hh, y),
            ];
            for (nb, fx, fy) in faces {
                let c = face(fx, fy);
                ac[(me, me)] -= c;
                match nb {
                    Some(o) => ac[(me, o)] = c,
                    None => wall[me] += c,
                }
            }
        }
    }
    // Stretch `a` of the perimeter ends at `len·(a+1)(a+2)/(b(b+1))`.
    let (b, len) = (s.actuators, per.len());
    let mut bc = DMatrix::zeros(nf, b);
    for (t, &(i, j)) in per.iter().enumerate() {
        let a = (0..b).find(|&a| t * b * (b + 1) < len * (a + 1) * (a + 2)).unwrap_or(b - 1);
        bc[(idx(i, j), a)] = wall[idx(i, j)];
    }
    let r = (g / 5).max(1);
    let avg = |corners: &[(usize, usize)]| {
        let mut m = DMatrix::zeros(corners.len(), nf);
        for (row, &(ci, cj)) in corners.iter().enumerate() {
            for i in ci..ci + r {
                for j in cj..cj + r {
                    m[(row, idx(i, j))] = 1.0 / (r * r) as f64;
                }
            }
        }
        m
    };
    let h = avg(&region_corners(g, r, s.regions, (1, 2), (3, 5)));
    let bwc = avg(&region_corners(g, r, s.disturbance_regions, (g / 2, 1), (5, 3))).transpose() * ((r * r) as f64);
    let mut c = DMatrix::zeros(s.sensors, nf);
    for q in 0..s.sensors {
        let cell = (q * 7 + g / 3) * nf / (s.sensors * 7 + g / 3 + 1);
        c[(q, cell.min(nf - 1))] = 1.0;
    }
    Ok(HeatContinuous { ac, bc, bwc, c, h })
}

/// Mode-wise rank test on the symmetric generator: every eigenspace must be
/// reached by the inputs and seen by the sensors and the outputs.
fn symmetric_pbh(hc: &HeatContinuous, tol: &Tolerances) -> Result<()> {
    let eig = SymmetricEigen::new(hc.ac.clone());
    let n = hc.ac.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut start = 0;
    while start < n {
        let l0 = eig.eigenvalues[order[start]];
        let mut end = start + 1;
        while end < n && (eig.eigenvalues[order[end]] - l0).abs() <= 1e-8 * l0.abs().max(1.0) {
            end += 1;
        }
        let q = DMatrix::from_fn(n, end - start, |i, j| eig.eigenvectors[(i, order[start + j])]);
        let checks = [("inputs", q.transpose() * &hc.bc, &hc.bc), ("sensors", &hc.c * &q, &hc.c), ("outputs", &hc.h * &q, &hc.h)];
        for (what, proj, full) in checks {
            let sv = proj.singular_values();
            let smin = if sv.len() < end - start { 0.0 } else { sv.min() };
            if smin <= tol.rank * full.norm().max(1.0) {
                return Err(Error::Assumption(format!(
                    "heat2d-fd: the {} eigenspace at λ = {l0:.6e} is not reached by the {what}",
                    end - start
                )));
            }
        }
        start = end;
    }
    Ok(())
}

fn heat2d(s: &HeatSpec, tol: &Tolerances) -> Result<GeneratedSystem> {
    let hc = heat2d_continuous(s)?;
    symmetric_pbh(&hc, tol)?;
    let m = hc.bc.ncols();
    let both = crate::numerics::linalg::hstack(&[&hc.bc, &hc.bwc]);
    let (a, bb) = zoh(&hc.ac, &both, s.dt);
    let fom = FullOrderModel::new(
        a,
        bb.columns(0, m).into_owned(),
        bb.columns(m, hc.bwc.ncols()).into_owned(),
        hc.c,
        hc.h,
    )?;
    Ok(GeneratedSystem {
        fom,
        sets: BoxRadii {
            z: 2.0,
            u: 100.0,
            w: 1.0,
            v: 0.01,
        },
    })
}

fn scaled_random(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Result<DMatrix<f64>> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let rho = spectral_radius(&g)?;
    if rho == 0.0 {
        return Err(Error::Numeric("random plant has zero spectral radius".into()));
    }
    Ok(g * (radius / rho))
}

fn random_stable(s: &RandomStableSpec, tol: &Tolerances) -> Result<GeneratedSystem> {
    cap(s.n)?;
    if !(s.radius > 0.0 && s.radius <= 0.95) {
        return Err(Error::invalid(format!("spectral radius {} outside (0, 0.95]", s.radius)));
    }
    if s.m == 0 || s.p == 0 || s.o == 0 {
        return Err(Error::invalid("random plant needs m, p, o ≥ 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let a = scaled_random(&mut rng, s.n, s.radius)?;
    let mut g = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
    let fom = FullOrderModel::new(a, g(s.n, s.m), g(s.n, s.mw), g(s.p, s.n), g(s.o, s.n))?;
    require_ctrb_obsv(&fom, tol, "random-stable")?;
    Ok(GeneratedSystem {
        fom,
        sets: BoxRadii {
            z: 1.0,
            u: 1.0,
            w: 0.01,
            v: 0.01,
        },
    })
}

fn surrogate(s: &SurrogateSpec, tol: &Tolerances) -> Result<GeneratedSystem> {
    if !(s.radius > 0.0 && s.radius < 1.0) {
        return Err(Error::invalid(format!("spectral radius {} outside (0, 1)", s.radius)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let a = scaled_random(&mut rng, 6, s.radius)?;
    let b = DMatrix::from_fn(6, 2, |_, _| rng.gen_range(-1.0..1.0));
    let mut c = DMatrix::zeros(1, 6);
    c[(0, 0)] = 1.29;
    c[(0, 1)] = 0.24;
    let h = DMatrix::from_fn(2, 6, |i, j| if i == j { 1.0 } else { 0.0 });
    let fom = FullOrderModel::new(a, b, DMatrix::identity(6, 6), c, h)?;
    require_ctrb_obsv(&fom, tol, "surrogate")?;
    Ok(GeneratedSystem {
        fom,
        sets: BoxRadii {
            z: 50.0,
            u: 20.0,
            w: 0.05,
            v: 0.01,
        },
    })
}
