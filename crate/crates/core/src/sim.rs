//! Closed-loop simulation of the full-order plant under the reduced-order
//! scheme, disturbance sampling, auditing and trajectory export.
//!
//! The tightened OCP drives the simulated ROM from `k = 0`, so the premises
//! of the bounds hold from `k̲ = 0` with `η = ‖ε₀‖_G` and the certificate
//! applies for `k ≥ k₀ ≥ 2τ`. The simulated ROM does not see the plant, so
//! its trajectory (the nominal plan) depends on `x̄₀` only.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundCertificate;
use crate::config::Tolerances;
use crate::geometry::{BoxSet, Polytope};
use crate::model::{FullOrderModel, GainSet, ReducedOrderModel};
use crate::numerics::linalg::{solve, vconcat};
use crate::numerics::SolverStats;
use crate::rompc::{control_law, ocp_solve, scheme_step, ControllerState, OcpFormulation, OcpSpec};
use crate::{par_map, Error, Result};

/// Relative threshold below which a negative slack counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DisturbancePolicy {
    Zero,
    /// Uniform in the box `𝒲 × 𝒱`.
    Uniform,
    /// I.i.d. uniform over the vertices of `𝒲` and `𝒱` at every step.
    VertexExtreme,
    /// Explicit sequences with at least `steps + 1` entries each.
    Fixed { w: Vec<Vec<f64>>, v: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialState {
    Fixed { x: Vec<f64> },
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub steps: usize,
    pub policy: DisturbancePolicy,
    pub seed: u64,
    pub initial: InitialState,
    pub k0: usize,
    /// Start the controller at `x̂₀ = x̄₀ = (WᵀV)⁻¹Wᵀ x^f₀` instead of zero.
    #[serde(default)]
    pub project_initial: bool,
}

impl SimConfig {
    pub fn validate(&self, nf: usize, tau: usize) -> Result<()> {
        if self.k0 < 2 * tau {
            return Err(Error::invalid(format!("k₀ = {} is below 2τ = {}", self.k0, 2 * tau)));
        }
        if self.steps < self.k0 {
            return Err(Error::invalid(format!("steps = {} is below k₀ = {}", self.steps, self.k0)));
        }
        match &self.initial {
            InitialState::Fixed { x } if x.len() != nf => {
                Err(Error::dim(format!("initial state of length {} for n^f = {nf}", x.len())))
            }
            InitialState::Uniform { lower, upper } if lower.len() != nf || upper.len() != nf => {
                Err(Error::dim(format!("initial box of dim {}/{} for n^f = {nf}", lower.len(), upper.len())))
            }
            InitialState::Uniform { lower, upper } if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) => {
                Err(Error::invalid("initial box has lower > upper"))
            }
            _ => Ok(()),
        }
    }
}

enum Sampler {
    Zero(usize),
    Uniform(BoxSet),
    /// Vertex of a box: each coordinate at its lower or upper bound.
    Corners(BoxSet),
    Vertices(Vec<DVector<f64>>),
    Fixed(Vec<DVector<f64>>),
}

impl Sampler {
    fn build(
        policy: &DisturbancePolicy,
        set: &Polytope,
        fixed: Option<&[Vec<f64>]>,
        steps: usize,
        name: &str,
        tol: &Tolerances,
    ) -> Result<Self> {
        let dim = set.dim();
        Ok(match policy {
            DisturbancePolicy::Zero => {
                if !set.contains(&DVector::zeros(dim), tol.membership)? {
                    return Err(Error::invalid(format!("zero disturbance is not in {name}")));
                }
                Self::Zero(dim)
            }
            DisturbancePolicy::Uniform => Self::Uniform(
                set.as_box()
                    .ok_or_else(|| Error::invalid(format!("uniform sampling needs {name} to be a box")))?,
            ),
            DisturbancePolicy::VertexExtreme => match set.as_box() {
                Some(bx) => Self::Corners(bx),
                None => Self::Vertices(set.vertices(tol)?),
            },
            DisturbancePolicy::Fixed { .. } => {
                let seq = fixed.unwrap_or(&[]);
                if seq.len() < steps + 1 {
                    return Err(Error::invalid(format!(
                        "fixed {name} sequence has {} entries, {} needed",
                        seq.len(),
                        steps + 1
                    )));
                }
                let mut out = Vec::with_capacity(steps + 1);
                for (k, s) in seq.iter().take(steps + 1).enumerate() {
                    let x = DVector::from_column_slice(s);
                    if x.len() != dim {
                        return Err(Error::dim(format!("fixed {name} entry {k} has length {}", x.len())));
                    }
                    if !set.contains(&x, tol.membership)? {
                        return Err(Error::invalid(format!("fixed {name} entry {k} lies outside the set")));
                    }
                    out.push(x);
                }
                Self::Fixed(out)
            }
        })
    }

    fn draw(&self, k: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        match self {
            Self::Zero(dim) => DVector::zeros(*dim),
            Self::Uniform(bx) => DVector::from_fn(bx.dim(), |i, _| rng.gen_range(bx.lower[i]..=bx.upper[i])),
            Self::Corners(bx) => {
                DVector::from_fn(bx.dim(), |i, _| if rng.gen::<bool>() { bx.upper[i] } else { bx.lower[i] })
            }
            Self::Vertices(vs) => vs[rng.gen_range(0..vs.len())].clone(),
            Self::Fixed(seq) => seq[k].clone(),
        }
    }
}

/// Simulated ROM trajectory `x̄_k`, `ū_k` for `k = 0..=steps` and the OCP
/// value at each step.
#[derive(Debug, Clone)]
pub struct NominalPlan {
    pub x_bar: Vec<DVector<f64>>,
    pub u_bar: Vec<DVector<f64>>,
    pub cost: Vec<f64>,
    pub stats: SolverStats,
}

pub fn nominal_plan(ocp: &OcpSpec, x_bar0: &DVector<f64>, steps: usize, tol: &Tolerances) -> Result<NominalPlan> {
    let mut plan = NominalPlan {
        x_bar: Vec::with_capacity(steps + 1),
        u_bar: Vec::with_capacity(steps + 1),
        cost: Vec::with_capacity(steps + 1),
        stats: SolverStats::default(),
    };
    let mut x = x_bar0.clone();
    for k in 0..=steps {
        let sol = ocp_solve(ocp, &x, OcpFormulation::Auto, tol).map_err(|e| match e {
            Error::Infeasible(_) => Error::Infeasible(format!("reduced OCP at step {k}")),
            other => other,
        })?;
        plan.stats.record_qp(sol.kkt_residual, sol.primal_residual);
        let u = sol.u[0].clone();
        let next = &ocp.a * &x + &ocp.b * &u;
        plan.x_bar.push(x);
        plan.u_bar.push(u);
        plan.cost.push(sol.cost);
        x = next;
    }
    Ok(plan)
}

/// Everything a closed-loop run needs. `z`, `u` are the original sets, the
/// OCP carries the tightened ones.
#[derive(Clone, Copy)]
pub struct ClosedLoop<'a> {
    pub fom: &'a FullOrderModel,
    pub rom: &'a ReducedOrderModel,
    pub gains: &'a GainSet,
    pub ocp: &'a OcpSpec,
    pub cert: &'a BoundCertificate,
    pub z: &'a Polytope,
    pub u: &'a Polytope,
    pub w: &'a Polytope,
    pub v: &'a Polytope,
}

impl ClosedLoop<'_> {
    pub fn controller_start(&self, x_f0: &DVector<f64>, project: bool) -> Result<DVector<f64>> {
        if project {
            let rhs = DMatrix::from_column_slice(x_f0.len(), 1, x_f0.as_slice());
            let x = solve(&(self.rom.w.transpose() * &self.rom.v), &(self.rom.w.transpose() * rhs), "WᵀV")?;
            Ok(x.column(0).into_owned())
        } else {
            Ok(DVector::zeros(self.rom.n()))
        }
    }

    /// Refuses a start whose `‖ε₀‖_G` exceeds the certified `η`.
    pub fn check_premise(&self, x_f0: &DVector<f64>, x_bar0: &DVector<f64>) -> Result<f64> {
        let e0 = x_f0 - &self.rom.v * x_bar0;
        let eps = vconcat(&[&e0, &DVector::zeros(self.rom.n())]);
        let g = &self.cert.decay.g;
        let norm = g.norm(&eps);
        let eta = self.cert.eta_start;
        // Roundoff in forming e₀ scales with the start state.
        let scale = g.norm(&vconcat(&[x_f0, &DVector::zeros(self.rom.n())]));
        if norm > eta * (1.0 + 1e-12) + 1e-12 * scale {
            return Err(Error::Assumption(format!(
                "initial error ‖ε₀‖_G = {norm:e} exceeds the certified η = {eta:e}"
            )));
        }
        Ok(norm)
    }

    fn start(&self, cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<(DVector<f64>, DVector<f64>)> {
        let x_f0 = match &cfg.initial {
            InitialState::Fixed { x } => DVector::from_column_slice(x),
            InitialState::Uniform { lower, upper } => {
                DVector::from_fn(lower.len(), |i, _| rng.gen_range(lower[i]..=upper[i]))
            }
        };
        let x_bar0 = self.controller_start(&x_f0, cfg.project_initial)?;
        self.check_premise(&x_f0, &x_bar0)?;
        Ok((x_f0, x_bar0))
    }
}

/// Slacks are nonnegative when satisfied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    #[serde(with = "crate::serde_util::vector")]
    pub x_f: DVector<f64>,
    #[serde(with = "crate::serde_util::vector")]
    pub x_hat: DVector<f64>,
    #[serde(with = "crate::serde_util::vector")]
    pub x_bar: DVector<f64>,
    #[serde(with = "crate::serde_util::vector")]
    pub u: DVector<f64>,
    #[serde(with = "crate::serde_util::vector")]
    pub u_bar: DVector<f64>,
    #[serde(with = "crate::serde_util::vector")]
    pub y: DVector<f64>,
    #[serde(with = "crate::serde_util::vector")]
    pub z: DVector<f64>,
    #[serde(with = "crate::serde_util::vector")]
    pub w: DVector<f64>,
    #[serde(with = "crate::serde_util::vector")]
    pub v: DVector<f64>,
    #[serde(with = "crate::serde_util::vector")]
    pub e: DVector<f64>,
    #[serde(with = "crate::serde_util::vector")]
    pub d: DVector<f64>,
    pub ocp_cost: f64,
    /// `b_z − H_z z`
    #[serde(with = "crate::serde_util::vector")]
    pub slack_z: DVector<f64>,
    /// `b_u − H_u u`
    #[serde(with = "crate::serde_util::vector")]
    pub slack_u: DVector<f64>,
    /// `Δ_z − E_z ε`
    #[serde(with = "crate::serde_util::vector")]
    pub slack_ez: DVector<f64>,
    /// `Δ_u − E_u ε`
    #[serde(with = "crate::serde_util::vector")]
    pub slack_eu: DVector<f64>,
}

impl StepRecord {
    pub fn eps(&self) -> DVector<f64> {
        vconcat(&[&self.e, &self.d])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub seed: u64,
    pub k0: usize,
    /// `steps + 1` records, `k = 0..=steps`.
    pub records: Vec<StepRecord>,
}

struct Slacks {
    z: DVector<f64>,
    u: DVector<f64>,
    ez: DVector<f64>,
    eu: DVector<f64>,
}

fn slacks(
    zs: &Polytope,
    us: &Polytope,
    cert: &BoundCertificate,
    z: &DVector<f64>,
    u: &DVector<f64>,
    eps: &DVector<f64>,
) -> Slacks {
    Slacks {
        z: &zs.b - &zs.h * z,
        u: &us.b - &us.h * u,
        ez: DVector::from_column_slice(&cert.delta_z) - &cert.e_z * eps,
        eu: DVector::from_column_slice(&cert.delta_u) - &cert.e_u * eps,
    }
}

fn simulate(
    cl: &ClosedLoop<'_>,
    cfg: &SimConfig,
    plan: &NominalPlan,
    x_f0: DVector<f64>,
    rng: &mut ChaCha8Rng,
    tol: &Tolerances,
) -> Result<TrajectoryLog> {
    let (w_fixed, v_fixed) = match &cfg.policy {
        DisturbancePolicy::Fixed { w, v } => (Some(w.as_slice()), Some(v.as_slice())),
        _ => (None, None),
    };
    let w_src = Sampler::build(&cfg.policy, cl.w, w_fixed, cfg.steps, "𝒲", tol)?;
    let v_src = Sampler::build(&cfg.policy, cl.v, v_fixed, cfg.steps, "𝒱", tol)?;
    let (fom, rom, gains) = (cl.fom, cl.rom, cl.gains);
    if plan.u_bar.len() < cfg.steps + 1 {
        return Err(Error::invalid("nominal plan is shorter than the simulation"));
    }
    let mut x = x_f0;
    let x_bar0 = plan.x_bar[0].clone();
    let mut st = ControllerState::new(x_bar0.clone(), x_bar0, cfg.k0);
    let mut records = Vec::with_capacity(cfg.steps + 1);
    for k in 0..=cfg.steps {
        let w = w_src.draw(k, rng);
        let v = v_src.draw(k, rng);
        let y = &fom.c * &x + &v;
        let z = &fom.h * &x;
        let u_bar = &plan.u_bar[k];
        let u = control_law(&st.x_hat, &st.x_bar, u_bar, &gains.k);
        if !(x.iter().all(|a| a.is_finite()) && u.iter().all(|a| a.is_finite())) {
            return Err(Error::Numeric(format!("closed loop diverged at step {k}")));
        }
        let e = &x - &rom.v * &st.x_bar;
        let d = &st.x_hat - &st.x_bar;
        let s = slacks(cl.z, cl.u, cl.cert, &z, &u, &vconcat(&[&e, &d]));
        let next = if k < cfg.steps {
            let xn = &fom.a * &x + &fom.b * &u + &fom.bw * &w;
            Some((xn, scheme_step(&st, rom, gains, u_bar, &y)))
        } else {
            None
        };
        records.push(StepRecord {
            k,
            x_f: x.clone(),
            x_hat: st.x_hat.clone(),
            x_bar: st.x_bar.clone(),
            u,
            u_bar: u_bar.clone(),
            y,
            z,
            w,
            v,
            e,
            d,
            ocp_cost: plan.cost[k],
            slack_z: s.z,
            slack_u: s.u,
            slack_ez: s.ez,
            slack_eu: s.eu,
        });
        if let Some((xn, sn)) = next {
            x = xn;
            st = sn;
        }
    }
    Ok(TrajectoryLog {
        seed: cfg.seed,
        k0: cfg.k0,
        records,
    })
}

pub fn run_closed_loop(cl: &ClosedLoop<'_>, cfg: &SimConfig, tol: &Tolerances) -> Result<TrajectoryLog> {
    cfg.validate(cl.fom.n(), cl.cert.tau)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (x_f0, x_bar0) = cl.start(cfg, &mut rng)?;
    let plan = nominal_plan(cl.ocp, &x_bar0, cfg.steps, tol)?;
    simulate(cl, cfg, &plan, x_f0, &mut rng, tol)
}

impl TrajectoryLog {
    pub fn header(&self) -> Vec<String> {
        let Some(r) = self.records.first() else {
            return vec!["k".into()];
        };
        let mut h = vec!["k".to_string()];
        for (name, x) in r.vector_fields() {
            if name == "slack_z" {
                h.push("ocp_cost".into());
            }
            h.extend((0..x.len()).map(|i| format!("{name}_{i}")));
        }
        h
    }

    /// One row per step, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(self.header()).map_err(std::io::Error::from)?;
        for r in &self.records {
            let mut row = vec![r.k.to_string()];
            for (name, x) in r.vector_fields() {
                if name == "slack_z" {
                    row.push(format!("{:.16e}", r.ocp_cost));
                }
                row.extend(x.iter().map(|a| format!("{a:.16e}")));
            }
            wr.write_record(&row).map_err(std::io::Error::from)?;
        }
        wr.flush()?;
        Ok(())
    }
}

impl StepRecord {
    fn vector_fields(&self) -> [(&'static str, &DVector<f64>); 15] {
        [
            ("x_f", &self.x_f),
            ("x_hat", &self.x_hat),
            ("x_bar", &self.x_bar),
            ("u", &self.u),
            ("u_bar", &self.u_bar),
            ("y", &self.y),
            ("z", &self.z),
            ("w", &self.w),
            ("v", &self.v),
            ("e", &self.e),
            ("d", &self.d),
            ("slack_z", &self.slack_z),
            ("slack_u", &self.slack_u),
            ("slack_ez", &self.slack_ez),
            ("slack_eu", &self.slack_eu),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Z,
    U,
    ErrorZ,
    ErrorU,
    /// `‖ε_k‖_G ≤ Mγᵏη + M(C_r + C_ω)(1 − γᵏ)/(1 − γ)`
    ErrorNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub k: usize,
    pub kind: ViolationKind,
    pub row: usize,
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlackSummary {
    pub z: f64,
    pub u: f64,
    pub ez: f64,
    pub eu: f64,
    pub norm: f64,
}

impl SlackSummary {
    fn min(self, o: Self) -> Self {
        Self {
            z: self.z.min(o.z),
            u: self.u.min(o.u),
            ez: self.ez.min(o.ez),
            eu: self.eu.min(o.eu),
            norm: self.norm.min(o.norm),
        }
    }

    fn infinite() -> Self {
        Self {
            z: f64::INFINITY,
            u: f64::INFINITY,
            ez: f64::INFINITY,
            eu: f64::INFINITY,
            norm: f64::INFINITY,
        }
    }
}

/// Per-row minimum slacks over `k ≥ k₀`, plus the `𝒵`/`𝒰` minima before
/// `k₀` where nothing is guaranteed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub k0: usize,
    pub records: usize,
    pub min_slack_z: Vec<f64>,
    pub min_slack_u: Vec<f64>,
    pub min_slack_ez: Vec<f64>,
    pub min_slack_eu: Vec<f64>,
    pub min_slack_norm: f64,
    pub pre_k0_min_slack_z: f64,
    pub pre_k0_min_slack_u: f64,
    pub violations: Vec<Violation>,
}

fn vmin(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

impl ViolationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> SlackSummary {
        SlackSummary {
            z: vmin(&self.min_slack_z),
            u: vmin(&self.min_slack_u),
            ez: vmin(&self.min_slack_ez),
            eu: vmin(&self.min_slack_eu),
            norm: self.min_slack_norm,
        }
    }
}

/// `‖ε_k‖_G` bound with `k̲ = 0`.
pub fn error_norm_bound(cert: &BoundCertificate, k: usize) -> f64 {
    let (m, g) = (cert.decay.m, cert.decay.gamma);
    let gk = g.powi(k.min(i32::MAX as usize) as i32);
    m * gk * cert.eta_start + m * (cert.c_r + cert.c_omega) * (1.0 - gk) / (1.0 - g)
}

pub fn audit(log: &TrajectoryLog, z: &Polytope, u: &Polytope, cert: &BoundCertificate) -> ViolationReport {
    let (nz, nu) = (z.n_constraints(), u.n_constraints());
    let mut rep = ViolationReport {
        k0: log.k0,
        records: log.records.len(),
        min_slack_z: vec![f64::INFINITY; nz],
        min_slack_u: vec![f64::INFINITY; nu],
        min_slack_ez: vec![f64::INFINITY; cert.delta_z.len()],
        min_slack_eu: vec![f64::INFINITY; cert.delta_u.len()],
        min_slack_norm: f64::INFINITY,
        pre_k0_min_slack_z: f64::INFINITY,
        pre_k0_min_slack_u: f64::INFINITY,
        violations: Vec::new(),
    };
    for r in &log.records {
        let eps = r.eps();
        let s = slacks(z, u, cert, &r.z, &r.u, &eps);
        if r.k < log.k0 {
            rep.pre_k0_min_slack_z = rep.pre_k0_min_slack_z.min(s.z.min());
            rep.pre_k0_min_slack_u = rep.pre_k0_min_slack_u.min(s.u.min());
            continue;
        }
        let groups = [
            (ViolationKind::Z, &s.z, &z.b, &mut rep.min_slack_z),
            (ViolationKind::U, &s.u, &u.b, &mut rep.min_slack_u),
        ];
        for (kind, sl, scale, mins) in groups {
            scan(r.k, kind, sl.as_slice(), scale.as_slice(), mins, &mut rep.violations);
        }
        scan(r.k, ViolationKind::ErrorZ, s.ez.as_slice(), &cert.delta_z, &mut rep.min_slack_ez, &mut rep.violations);
        scan(r.k, ViolationKind::ErrorU, s.eu.as_slice(), &cert.delta_u, &mut rep.min_slack_eu, &mut rep.violations);
        let bound = error_norm_bound(cert, r.k);
        let sn = bound - cert.decay.g.norm(&eps);
        rep.min_slack_norm = rep.min_slack_norm.min(sn);
        if sn < -VIOLATION_TOL * (1.0 + bound.abs()) {
            rep.violations.push(Violation {
                k: r.k,
                kind: ViolationKind::ErrorNorm,
                row: 0,
                slack: sn,
            });
        }
    }
    rep
}

fn scan(k: usize, kind: ViolationKind, sl: &[f64], scale: &[f64], mins: &mut [f64], out: &mut Vec<Violation>) {
    for (row, (&s, &b)) in sl.iter().zip(scale).enumerate() {
        mins[row] = mins[row].min(s);
        if s < -VIOLATION_TOL * (1.0 + b.abs()) {
            out.push(Violation { k, kind, row, slack: s });
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub report: ViolationReport,
    pub log: Option<TrajectoryLog>,
}

/// Runs `runs` seeds `cfg.seed, cfg.seed + 1, …` in parallel; results are in
/// seed order. A fixed initial state shares one nominal plan.
pub fn monte_carlo(
    cl: &ClosedLoop<'_>,
    cfg: &SimConfig,
    runs: usize,
    keep_logs: bool,
    tol: &Tolerances,
) -> Result<Vec<RunOutcome>> {
    cfg.validate(cl.fom.n(), cl.cert.tau)?;
    let shared = match &cfg.initial {
        InitialState::Fixed { .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let (_, x_bar0) = cl.start(cfg, &mut rng)?;
            Some(nominal_plan(cl.ocp, &x_bar0, cfg.steps, tol)?)
        }
        InitialState::Uniform { .. } => None,
    };
    let seeds: Vec<u64> = (0..runs as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let outcomes = par_map(&seeds, |&seed| -> Result<RunOutcome> {
        let run_cfg = SimConfig { seed, ..cfg.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x_f0, x_bar0) = cl.start(&run_cfg, &mut rng)?;
        let own;
        let plan = match &shared {
            Some(p) => p,
            None => {
                own = nominal_plan(cl.ocp, &x_bar0, cfg.steps, tol)?;
                &own
            }
        };
        let log = simulate(cl, &run_cfg, plan, x_f0, &mut rng, tol)?;
        let report = audit(&log, cl.z, cl.u, cl.cert);
        Ok(RunOutcome {
            seed,
            report,
            log: keep_logs.then_some(log),
        })
    });
    outcomes.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub violations: usize,
    pub seeds_with_violations: Vec<u64>,
    pub min_slack: SlackSummary,
    pub pre_k0_min_slack_z: f64,
    pub pre_k0_min_slack_u: f64,
}

pub fn summarize(outcomes: &[RunOutcome]) -> MonteCarloSummary {
    let mut s = MonteCarloSummary {
        runs: outcomes.len(),
        violations: 0,
        seeds_with_violations: Vec::new(),
        min_slack: SlackSummary::infinite(),
        pre_k0_min_slack_z: f64::INFINITY,
        pre_k0_min_slack_u: f64::INFINITY,
    };
    for o in outcomes {
        s.violations += o.report.violations.len();
        if !o.report.is_clean() {
            s.seeds_with_violations.push(o.seed);
        }
        s.min_slack = s.min_slack.min(o.report.summary());
        s.pre_k0_min_slack_z = s.pre_k0_min_slack_z.min(o.report.pre_k0_min_slack_z);
        s.pre_k0_min_slack_u = s.pre_k0_min_slack_u.min(o.report.pre_k0_min_slack_u);
    }
    s
}
