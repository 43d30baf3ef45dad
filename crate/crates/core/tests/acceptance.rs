//! Acceptance suite. Runs every criterion in order and prints one
//! `PASS`/`FAIL` line each; exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rompc::bounds::{
    compute_xbar, decay_eigen, decay_lyapunov, delta2, gp_log_objective, optimize_g_geometric, DecayBound,
    DecayMethod, GpOptions, GpTerm, WeightChoice,
};
use rompc::config::Tolerances;
use rompc::errorsys::ErrorSystem;
use rompc::geometry::{BoxSet, Polytope};
use rompc::model::{synthesize_gains, ReducedOrderModel};
use rompc::numerics::{dare_residual, solve_dare};
use rompc::numerics::linalg::spectral_radius;
use rompc::numerics::SolverStats;
use rompc::pipeline::{controller_stage, preset, reduce_stage, synthesize, PipelineConfig, Synthesis, SynthesisSettings};
use rompc::rompc::{ocp_solve, OcpFormulation, OcpSpec};
use rompc::sim::{monte_carlo, nominal_plan, run_closed_loop, summarize, DisturbancePolicy, InitialState, SimConfig};
use rompc::systems::{generate, GeneratorSpec, RandomStableSpec, SurrogateSpec};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn spec_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

fn tol() -> Tolerances {
    Tolerances::default()
}

/// Synthesis and audit of a preset configuration.
struct Benchmark {
    name: &'static str,
    cfg: PipelineConfig,
    syn: Synthesis,
    plan_stats: SolverStats,
    seconds: f64,
}

fn run_preset(name: &'static str) -> Result<(Benchmark, rompc::sim::MonteCarloSummary), String> {
    let t = Instant::now();
    let cfg = preset(name).ok_or("missing preset")?;
    let g = generate(&cfg.system, &cfg.tolerances).map_err(|e| e.to_string())?;
    let sets = cfg.sets.apply(&g.sets, &g.fom).map_err(|e| e.to_string())?;
    let syn = synthesize(g.fom, sets, &cfg.synthesis, Some(cfg.start()), &cfg.tolerances)
        .map_err(|e| format!("{name}: {e}"))?;
    let cl = syn.closed_loop();
    let runs = monte_carlo(&cl, &cfg.sim, cfg.runs, false, &cfg.tolerances).map_err(|e| format!("{name}: {e}"))?;
    let summary = summarize(&runs);
    // The presets start at rest, where every OCP is trivial; the solver
    // residuals are sampled from an interior start instead.
    let x0 = interior_start(&syn.controller.ocp, 0, &cfg.tolerances);
    let plan = nominal_plan(&syn.controller.ocp, &x0, cfg.sim.steps, &cfg.tolerances).map_err(|e| e.to_string())?;
    let seconds = t.elapsed().as_secs_f64();
    Ok((
        Benchmark {
            name,
            cfg,
            syn,
            plan_stats: plan.stats,
            seconds,
        },
        summary,
    ))
}

fn criterion_1(out: &mut Vec<Benchmark>) -> Outcome {
    let t = Instant::now();
    let mut lines = Vec::new();
    for (name, nf, n) in [("mass-spring", 20, 4), ("heat", 225, 10)] {
        let (b, s) = run_preset(name)?;
        let rom = &b.syn.reduced.rom;
        ensure(rom.v.nrows() == nf && rom.n() == n, || format!("{name}: n^f {} n {}", rom.v.nrows(), rom.n()))?;
        ensure(b.cfg.runs == 200 && b.cfg.sim.steps == 300, || format!("{name}: not 200 × 300"))?;
        ensure(b.cfg.sim.policy == DisturbancePolicy::VertexExtreme, || format!("{name}: policy"))?;
        ensure(s.runs == 200, || format!("{name}: {} runs", s.runs))?;
        ensure(s.violations == 0, || {
            format!("{name}: {} violations in seeds {:?}", s.violations, s.seeds_with_violations)
        })?;
        lines.push(format!(
            "{name} 0/200 violated, min slack z {:.3e} u {:.3e} ez {:.3e} eu {:.3e}, {:.0} s",
            s.min_slack.z, s.min_slack.u, s.min_slack.ez, s.min_slack.eu, b.seconds
        ));
        out.push(b);
    }
    let total = t.elapsed().as_secs_f64();
    ensure(total <= 600.0, || format!("took {total:.0} s"))?;
    Ok(format!("{}; total {total:.0} s", lines.join("; ")))
}

fn random_esys(rng: &mut ChaCha8Rng, p: usize, nr: usize, nw: usize) -> ErrorSystem {
    let mut rm = |r, c| DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
    let a: DMatrix<f64> = rm(p, p);
    let rho = spectral_radius(&a).unwrap();
    ErrorSystem {
        a_eps: a * (0.8 / rho),
        b_eps: rm(p, nr),
        g_eps: rm(p, nw),
        nf: p,
        n: 0,
    }
}

fn interval(lo: f64, hi: f64) -> Polytope {
    BoxSet::new(DVector::from_element(1, lo), DVector::from_element(1, hi)).unwrap().to_polytope()
}

/// Scalar reduced model `x⁺ = 0.5x + u` with `|u| ≤ 1`, so `|x| ≤ 2` after
/// one step and `X̄ = [−10, 10]` never binds: every vertex of the feasible
/// set is a corner of the box of `(x̄_{−τ}, ū_{−τ}, …, ū_{τ−1})`.
fn criterion_2() -> Outcome {
    let t = Instant::now();
    let s = |v| DMatrix::from_element(1, 1, v);
    let rom = ReducedOrderModel {
        a: s(0.5),
        b: s(1.0),
        c: s(1.0),
        h: s(1.0),
        v: s(1.0),
        w: s(1.0),
    };
    let xbar = BoxSet::symmetric(1, 10.0).unwrap();
    let (u, z) = (interval(-1.0, 1.0), interval(-100.0, 100.0));
    let (wlo, whi, vlo, vhi) = (-0.3, 0.2, -0.1, 0.4);
    let (w, v) = (interval(wlo, whi), interval(vlo, vhi));
    let kp = s(-0.25);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for tau in 1..=4usize {
        let count = (1usize << (2 * tau + 1)) + 4usize.pow(tau as u32);
        ensure(count <= 4096, || format!("τ = {tau}: {count} sequences"))?;
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 * tau as u64 + seed);
            let es = random_esys(&mut rng, 3, 2, 2);
            let theta = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let got = delta2(&es, &theta, tau, &rom, &kp, &xbar, &u, &z, &w, &v, &tol()).map_err(|e| e.to_string())?;

            // Weights of r_j and ω_j from explicit matrix powers.
            let (mut cr, mut cw) = (Vec::new(), Vec::new());
            for j in 0..tau {
                let row = theta.transpose() * es.a_eps.pow((tau - j - 1) as u32);
                cr.push((&row * &es.b_eps).transpose());
                cw.push((&row * &es.g_eps).transpose());
            }
            let mut best_r = f64::NEG_INFINITY;
            for mask in 0..(1u32 << (2 * tau + 1)) {
                let bit = |k: usize| mask >> k & 1 == 1;
                let mut x: f64 = if bit(0) { 10.0 } else { -10.0 };
                let mut total = 0.0;
                for i in 0..2 * tau {
                    ensure(x.abs() <= 10.0, || "X̄ binds".into())?;
                    let ui = if bit(1 + i) { 1.0 } else { -1.0 };
                    if i >= tau {
                        let j = i - tau;
                        total += cr[j][0] * x + cr[j][1] * ui;
                    }
                    x = 0.5 * x + ui;
                }
                best_r = best_r.max(total);
            }
            let mut best_w = f64::NEG_INFINITY;
            for mask in 0..(1u32 << (2 * tau)) {
                let bit = |k: usize| mask >> k & 1 == 1;
                let total: f64 = (0..tau)
                    .map(|j| {
                        let wj = if bit(2 * j) { whi } else { wlo };
                        let vj = if bit(2 * j + 1) { vhi } else { vlo };
                        cw[j][0] * wj + cw[j][1] * vj
                    })
                    .sum();
                best_w = best_w.max(total);
            }
            let err = (got.value - (best_r + best_w)).abs();
            worst = worst.max(err);
            cases += 1;
            ensure(err <= 1e-6, || format!("τ = {tau}, seed {seed}: LP {} vs enumeration {}", got.value, best_r + best_w))?;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(secs <= 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{cases} cases τ = 1..4, max |LP − enumeration| {worst:.1e}, {secs:.2} s"))
}

/// Smallest `Mγⁱ − ‖A^i‖_G` over `i = 0..=200`, with the weighted norm
/// formed directly from `G^{1/2}` and an SVD.
fn decay_slack(d: &DecayBound, a: &DMatrix<f64>) -> f64 {
    let s = &d.g.g_half * a * &d.g.g_half_inv;
    let mut pow = DMatrix::identity(a.nrows(), a.ncols());
    let mut worst = f64::INFINITY;
    for i in 0..=200 {
        worst = worst.min(d.m * d.gamma.powi(i) - spec_norm(&pow));
        pow = &s * pow;
    }
    worst
}

fn criterion_3() -> Outcome {
    let tol = tol();
    let mut worst = f64::INFINITY;
    let mut margin = f64::INFINITY;
    for seed in 0..20u64 {
        let spec = RandomStableSpec {
            n: 10,
            m: 2,
            p: 2,
            o: 2,
            mw: 2,
            seed,
            radius: 0.95,
        };
        let g = generate(&GeneratorSpec::RandomStable(spec), &tol).map_err(|e| e.to_string())?;
        let s = SynthesisSettings::default();
        let r = reduce_stage(&g.fom, &s, &tol).map_err(|e| e.to_string())?;
        let gains = synthesize_gains(&r.rom, &s.weights(&r.rom), &tol).map_err(|e| e.to_string())?;
        let es = ErrorSystem::assemble(&g.fom, &r.rom, &gains).map_err(|e| e.to_string())?;
        let rho = es.spectral_radius().map_err(|e| e.to_string())?;
        let eta = 0.5 * (1.0 + rho);
        let lyap = decay_lyapunov(&es, eta, &tol).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(lyap.gamma < eta, || format!("seed {seed}: γ = {} ≥ η = {eta}", lyap.gamma))?;
        margin = margin.min(eta - lyap.gamma);
        let sets = g.sets.sets(&g.fom).map_err(|e| e.to_string())?;
        let (e_z, e_u) = es.output_maps(&g.fom, &gains, &sets.z.h, &sets.u.h);
        let mut bounds = vec![("lyapunov", lyap)];
        for (label, choice) in [
            ("eigen", WeightChoice::Identity),
            ("eigen+gp", WeightChoice::Geometric { e_z, e_u, options: GpOptions::default() }),
        ] {
            let d = decay_eigen(&es, &choice, &tol).map_err(|e| format!("seed {seed} {label}: {e}"))?;
            ensure(d.bound.method == DecayMethod::Eigen, || "method".into())?;
            bounds.push((label, d.bound));
        }
        for (label, d) in &bounds {
            let slack = decay_slack(d, &es.a_eps);
            worst = worst.min(slack);
            ensure(slack >= -1e-9, || format!("seed {seed} {label}: slack {slack:e}"))?;
        }
    }
    Ok(format!("20 systems × 3 weightings, min slack {worst:.2e}, min η − γ {margin:.2e}"))
}

fn xbar_rom(a: DMatrix<f64>, b: DMatrix<f64>, h: DMatrix<f64>) -> ReducedOrderModel {
    let n = a.nrows();
    ReducedOrderModel {
        c: h.clone(),
        a,
        b,
        h,
        v: DMatrix::identity(n, n),
        w: DMatrix::identity(n, n),
    }
}

fn close(got: f64, want: f64, what: &str) -> Result<(), String> {
    ensure((got - want).abs() <= 1e-8, || format!("{what}: {got} vs {want}"))
}

fn criterion_4() -> Outcome {
    let tol = tol();
    let s = |v| DMatrix::from_element(1, 1, v);
    let sym = |r| BoxSet::symmetric(1, r).unwrap().to_polytope();

    // Scalar: |2x̄₀| ≤ 1 caps the box at ±0.5 whatever the input does.
    let scalar = xbar_rom(s(0.5), s(1.0), s(2.0));
    for i_bar in [0, 1, 4] {
        let b = compute_xbar(&scalar, &sym(1.0), &sym(5.0), i_bar, &tol).map_err(|e| e.to_string())?;
        close(b.upper[0], 0.5, "scalar upper")?;
        close(b.lower[0], -0.5, "scalar lower")?;
    }

    // Chain x₁⁺ = 0.5x₁ + x₂, x₂⁺ = 0.5x₂ + u, z = x₁, |z| ≤ 1, |u| ≤ 0.1:
    // z₀ = x₁, z₁ = 0.5x₁ + x₂, z₂ = 0.25x₁ + x₂ + u₀.
    // ī = 1: x₂ ≤ 1 − 0.5x₁ with x₁ = −1 gives 1.5.
    // ī = 2: also x₂ ≤ 1.1 − 0.25x₁, so 1.35 at x₁ = −1.
    let chain = xbar_rom(
        DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.5]),
        DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
    );
    let (z, u) = (sym(1.0), sym(0.1));
    let b1 = compute_xbar(&chain, &z, &u, 1, &tol).map_err(|e| e.to_string())?;
    let b2 = compute_xbar(&chain, &z, &u, 2, &tol).map_err(|e| e.to_string())?;
    for (b, x2) in [(&b1, 1.5), (&b2, 1.35)] {
        close(b.upper[0], 1.0, "chain x₁ upper")?;
        close(b.lower[0], -1.0, "chain x₁ lower")?;
        close(b.upper[1], x2, "chain x₂ upper")?;
        close(b.lower[1], -x2, "chain x₂ lower")?;
    }

    // Monotonicity as ī doubles from n − 1 to 8(n − 1).
    let mut checked = 0;
    let g = generate(&GeneratorSpec::Surrogate(SurrogateSpec::default()), &tol).map_err(|e| e.to_string())?;
    let sets = g.sets.sets(&g.fom).map_err(|e| e.to_string())?;
    let rom4 = reduce_stage(&g.fom, &SynthesisSettings::default(), &tol).map_err(|e| e.to_string())?.rom;
    for (rom, z, u) in [(&chain, &z, &u), (&rom4, &sets.z, &sets.u)] {
        let n = rom.n();
        let mut prev: Option<BoxSet> = None;
        let mut i_bar = n - 1;
        while i_bar <= 8 * (n - 1) {
            let b = compute_xbar(rom, z, u, i_bar, &tol).map_err(|e| e.to_string())?;
            if let Some(p) = &prev {
                for l in 0..n {
                    ensure(b.upper[l] <= p.upper[l] + 1e-9 && -b.lower[l] <= -p.lower[l] + 1e-9, || {
                        format!("n = {n}, ī = {i_bar}: face {l} grew")
                    })?;
                }
            }
            prev = Some(b);
            checked += 1;
            i_bar *= 2;
        }
    }
    Ok(format!("scalar and 2-state boxes exact; {checked} nested horizons nonincreasing"))
}

fn gp_terms(seed: u64, p: usize) -> Vec<GpTerm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x1 = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-1.0..1.0)));
    let y1 = x1.clone().try_inverse().unwrap();
    let x2 = DMatrix::from_fn(p, 3, |_, _| rng.gen_range(-1.0..1.0));
    let y2 = DMatrix::from_fn(2, p, |_, _| rng.gen_range(-1.0..1.0));
    vec![GpTerm::from_real(&x1, &y1).unwrap(), GpTerm::from_real(&x2, &y2).unwrap()]
}

/// Gradient descent with Armijo backtracking on the convex log-space
/// objective `F(s) = Σ log(Σ aᵢ e^{sᵢ}) + log(Σ bⱼ e^{−sⱼ})`.
fn log_space_oracle(terms: &[GpTerm], p: usize) -> f64 {
    let f = |s: &DVector<f64>| -> f64 {
        terms
            .iter()
            .map(|t| {
                let a: f64 = (0..p).map(|i| t.a[i] * s[i].exp()).sum();
                let b: f64 = (0..p).map(|i| t.b[i] * (-s[i]).exp()).sum();
                a.ln() + b.ln()
            })
            .sum()
    };
    let grad = |s: &DVector<f64>| {
        let mut out = DVector::zeros(p);
        for t in terms {
            let a: f64 = (0..p).map(|i| t.a[i] * s[i].exp()).sum();
            let b: f64 = (0..p).map(|i| t.b[i] * (-s[i]).exp()).sum();
            for i in 0..p {
                out[i] += t.a[i] * s[i].exp() / a - t.b[i] * (-s[i]).exp() / b;
            }
        }
        out
    };
    let mut s = DVector::zeros(p);
    let mut step = 1.0;
    for _ in 0..50000 {
        let d = grad(&s);
        if d.norm() < 1e-12 {
            break;
        }
        let f0 = f(&s);
        loop {
            let cand = &s - &d * step;
            if f(&cand) <= f0 - 0.5 * step * d.norm_squared() {
                s = cand;
                step *= 2.0;
                break;
            }
            step *= 0.5;
            if step < 1e-30 {
                return f0.exp();
            }
        }
    }
    f(&s).exp()
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    let mut instances = 0;
    for p in 2..=8usize {
        for seed in 0..3u64 {
            let terms = gp_terms(1000 * p as u64 + seed, p);
            let sol = optimize_g_geometric(&terms, p, &GpOptions::default()).map_err(|e| e.to_string())?;
            for w in sol.history.windows(2) {
                ensure(w[1] <= w[0], || format!("p = {p}, seed {seed}: objective rose {} → {}", w[0], w[1]))?;
            }
            let direct = gp_log_objective(&terms, &sol.g).exp();
            ensure((direct - sol.objective).abs() <= 1e-12 * direct, || "reported objective".into())?;
            let oracle = log_space_oracle(&terms, p);
            let rel = (sol.objective - oracle).abs() / oracle;
            worst = worst.max(rel);
            instances += 1;
            ensure(rel <= 1e-6, || format!("p = {p}, seed {seed}: {} vs oracle {oracle}", sol.objective))?;
        }
    }
    Ok(format!("{instances} instances p = 2..8, monotone sweeps, max rel. gap {worst:.1e}"))
}

fn criterion_6(benches: &[Benchmark]) -> Outcome {
    let mut stats = SolverStats::default();
    let mut lyap = 0.0f64;
    let mut dare = 0.0f64;
    for b in benches {
        let c = &b.syn.certified;
        stats.merge(&c.cert.provenance.solver);
        stats.merge(&b.plan_stats);
        let tol = &b.cfg.tolerances;
        let rom = &b.syn.reduced.rom;

        ensure(c.decay.method == DecayMethod::Lyapunov, || format!("{}: decay method", b.name))?;
        let rho = c.esys.spectral_radius().map_err(|e| e.to_string())?;
        let eta = b.cfg.synthesis.lyapunov_eta.unwrap_or(0.5 * (1.0 + rho));
        let g = &c.decay.g.g;
        let a = &c.esys.a_eps;
        let p = g.nrows();
        let res = (a.transpose() * g * a - g * (eta * eta) + DMatrix::identity(p, p)).norm() / g.norm();
        lyap = lyap.max(res);

        let w = &c.weights;
        let ctrl = solve_dare(&rom.a, &rom.b, &w.q, &w.r, tol).map_err(|e| e.to_string())?;
        let est = solve_dare(&rom.a.transpose(), &rom.c.transpose(), &w.q_est, &w.r_est, tol).map_err(|e| e.to_string())?;
        let term = &b.syn.controller.terminal;
        for (what, res) in [
            ("controller", dare_residual(&rom.a, &rom.b, &w.q, &w.r, &ctrl.p) / ctrl.p.norm()),
            (
                "estimator",
                dare_residual(&rom.a.transpose(), &rom.c.transpose(), &w.q_est, &w.r_est, &est.p) / est.p.norm(),
            ),
            ("terminal", dare_residual(&rom.a, &rom.b, &w.q, &w.r, &term.p_term) / term.p_term.norm()),
            ("K", (&ctrl.k - &c.gains.k).norm() / ctrl.k.norm()),
            ("L", (-est.k.transpose() - &c.gains.l).norm() / est.k.norm()),
        ] {
            ensure(res <= 1e-8, || format!("{}: {what} residual {res:e}", b.name))?;
            dare = dare.max(res);
        }
    }
    ensure(lyap <= 1e-8, || format!("Lyapunov residual {lyap:e}"))?;
    ensure(stats.lp_solves > 0 && stats.qp_solves > 0, || "no solves recorded".into())?;
    ensure(stats.max_lp_dual <= 1e-8 && stats.max_lp_complementarity <= 1e-8, || {
        format!("LP KKT {:e}/{:e}", stats.max_lp_dual, stats.max_lp_complementarity)
    })?;
    ensure(stats.max_lp_primal <= 1e-6, || format!("LP feasibility {:e}", stats.max_lp_primal))?;
    ensure(stats.max_qp_kkt <= 1e-8, || format!("QP KKT {:e}", stats.max_qp_kkt))?;
    ensure(stats.max_qp_primal <= 1e-6, || format!("QP feasibility {:e}", stats.max_qp_primal))?;
    Ok(format!(
        "{} LPs (primal {:.1e}, dual {:.1e}, compl. {:.1e}), {} QPs (KKT {:.1e}, primal {:.1e}), Lyapunov {lyap:.1e}, Riccati {dare:.1e}",
        stats.lp_solves,
        stats.max_lp_primal,
        stats.max_lp_dual,
        stats.max_lp_complementarity,
        stats.qp_solves,
        stats.max_qp_kkt,
        stats.max_qp_primal
    ))
}

/// Half the largest feasible multiple of a fixed direction.
fn interior_start(ocp: &OcpSpec, seed: u64, tol: &Tolerances) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = DVector::from_fn(ocp.n(), |_, _| rng.gen_range(-1.0..1.0)).normalize();
    let feasible = |s: f64| ocp_solve(ocp, &(&d * s), OcpFormulation::Auto, tol).is_ok();
    let (mut lo, mut hi) = (0.0, 1.0);
    while feasible(hi) && hi < 1e6 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    d * (0.5 * lo)
}

fn criterion_7(surrogate: &Benchmark) -> Outcome {
    let tol = tol();
    // Recursive feasibility and cost descent on the tightened OCP.
    let ocp = &surrogate.syn.controller.ocp;
    let mut worst_descent = f64::NEG_INFINITY;
    for seed in 0..3u64 {
        let x0 = interior_start(ocp, seed, &tol);
        let plan = nominal_plan(ocp, &x0, 200, &tol).map_err(|e| format!("seed {seed}: {e}"))?;
        for k in 0..200 {
            let (x, u) = (&plan.x_bar[k], &plan.u_bar[k]);
            let stage = x.dot(&(&ocp.q * x)) + u.dot(&(&ocp.r * u));
            let excess = plan.cost[k + 1] - (plan.cost[k] - stage);
            worst_descent = worst_descent.max(excess / plan.cost[k].max(1e-300));
            ensure(excess <= 1e-6 * plan.cost[k], || {
                format!("seed {seed}, k = {k}: V⁺ = {} > V − ℓ = {}", plan.cost[k + 1], plan.cost[k] - stage)
            })?;
        }
    }

    // Δ = 0 on an exact, undisturbed plant: the full scheme must reproduce
    // nominal MPC applied to the plant state.
    let mut cfg = preset("surrogate").ok_or("missing preset")?;
    cfg.synthesis.order = 6;
    cfg.synthesis.tau = 10;
    let g = generate(&cfg.system, &tol).map_err(|e| e.to_string())?;
    let mut sets = cfg.sets.apply(&g.sets, &g.fom).map_err(|e| e.to_string())?;
    sets.w = BoxSet::symmetric(sets.w.dim(), 0.0).unwrap().to_polytope();
    sets.v = BoxSet::symmetric(sets.v.dim(), 0.0).unwrap().to_polytope();
    let x_ref = DVector::from_fn(6, |i, _| [3.0, -2.0, 1.0, 0.5, -1.0, 2.0][i]);
    cfg.sim = SimConfig {
        steps: 200,
        policy: DisturbancePolicy::Zero,
        seed: 0,
        initial: InitialState::Fixed { x: x_ref.as_slice().to_vec() },
        k0: 20,
        project_initial: true,
    };
    let mut syn = synthesize(g.fom, sets, &cfg.synthesis, Some(cfg.start()), &tol).map_err(|e| e.to_string())?;
    let zero = |k: usize| DVector::zeros(k);
    let cert = &mut syn.certified.cert;
    cert.delta_z = vec![0.0; cert.delta_z.len()];
    cert.delta_u = vec![0.0; cert.delta_u.len()];
    cert.z_tightened = syn.sets.z.tighten(&zero(cert.delta_z.len())).map_err(|e| e.to_string())?;
    cert.u_tightened = syn.sets.u.tighten(&zero(cert.delta_u.len())).map_err(|e| e.to_string())?;
    ensure(cert.z_tightened == syn.sets.z && cert.u_tightened == syn.sets.u, || "Δ = 0 changed the sets".into())?;
    syn.controller = controller_stage(
        &syn.reduced.rom,
        &syn.certified.weights,
        &syn.certified.cert.z_tightened,
        &syn.certified.cert.u_tightened,
        cfg.synthesis.horizon,
        &tol,
    )
    .map_err(|e| e.to_string())?;
    let log = run_closed_loop(&syn.closed_loop(), &cfg.sim, &tol).map_err(|e| e.to_string())?;

    let rom = &syn.reduced.rom;
    let nominal = OcpSpec::new(
        rom,
        syn.certified.weights.q.clone(),
        syn.certified.weights.r.clone(),
        syn.controller.terminal.p_term.clone(),
        cfg.synthesis.horizon,
        syn.sets.z.clone(),
        syn.sets.u.clone(),
        syn.controller.terminal.set.clone(),
    )
    .map_err(|e| e.to_string())?;
    let to_rom = (rom.w.transpose() * &rom.v).try_inverse().ok_or("WᵀV singular")? * rom.w.transpose();
    let mut x = x_ref;
    let mut gap = 0.0f64;
    for rec in &log.records {
        let sol = ocp_solve(&nominal, &(&to_rom * &x), OcpFormulation::Auto, &tol).map_err(|e| e.to_string())?;
        let u = &sol.u[0];
        gap = gap.max((&rec.x_f - &x).amax() / (1.0 + x.amax()));
        gap = gap.max((&rec.u - u).amax() / (1.0 + u.amax()));
        x = &syn.fom.a * &x + &syn.fom.b * u;
    }
    ensure(gap <= 1e-9, || format!("Δ = 0 scheme departs from nominal MPC by {gap:e}"))?;
    Ok(format!(
        "200 feasible steps from 3 starts, worst descent excess {worst_descent:.1e}; Δ = 0 matches nominal MPC to {gap:.1e}"
    ))
}

fn criterion_8() -> Result<(String, Benchmark), String> {
    let cfg = preset("surrogate").ok_or("missing preset")?;
    let s = &cfg.synthesis;
    ensure(s.tau == 100 && s.horizon == 20 && s.order == 4, || "τ, N or n differ".into())?;
    ensure(s.q_weight == 10.0 && s.r_weight == 1.0, || "weights differ".into())?;
    ensure(matches!(cfg.system, GeneratorSpec::Surrogate(_)), || "system".into())?;
    let (b, summary) = run_preset("surrogate")?;
    let sets = &b.syn.sets;
    for (set, r, what) in [(&sets.z, 50.0, "𝒵"), (&sets.u, 20.0, "𝒰"), (&sets.w, 0.05, "𝒲"), (&sets.v, 0.01, "𝒱")] {
        let bx = set.as_box().ok_or_else(|| format!("{what} is not a box"))?;
        ensure(bx.upper.iter().chain(bx.lower.iter()).all(|v| (v.abs() - r).abs() < 1e-12), || {
            format!("{what} radius")
        })?;
    }
    ensure(b.syn.fom.n() == 6, || "not 6 states".into())?;
    ensure(summary.violations == 0, || format!("{} violations", summary.violations))?;
    ensure(b.seconds <= 120.0, || format!("took {:.0} s", b.seconds))?;
    let z = &b.syn.certified.cert.z_tightened;
    let u = &b.syn.certified.cert.u_tightened;
    let line = format!(
        "certificate accepted (min b − Δ: z {:.3}, u {:.3}), {} runs clean, {:.1} s",
        z.b.min(),
        u.b.min(),
        summary.runs,
        b.seconds
    );
    Ok((line, b))
}

fn main() -> ExitCode {
    // Keep `cargo test <filter>` usable: run only when no filter is given
    // or the filter names this suite.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }

    let mut failed = 0;
    let mut report = |n: u32, title: &str, outcome: Outcome| {
        match outcome {
            Ok(detail) => println!("criterion {n} ({title}): PASS  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} ({title}): FAIL  {detail}");
            }
        }
    };

    let mut benches = Vec::new();
    report(1, "soundness", criterion_1(&mut benches));
    report(2, "Δ⁽²⁾ exactness", criterion_2());
    report(3, "decay bounds", criterion_3());
    report(4, "X̄ boxes", criterion_4());
    report(5, "geometric program", criterion_5());
    let surrogate = match criterion_8() {
        Ok((line, b)) => {
            benches.push(b);
            Ok(line)
        }
        Err(e) => Err(e),
    };
    report(6, "solver contracts", criterion_6(&benches));
    match benches.iter().find(|b| b.name == "surrogate") {
        Some(b) => report(7, "MPC sanity", criterion_7(b)),
        None => report(7, "MPC sanity", Err("surrogate synthesis unavailable".into())),
    }
    report(8, "surrogate end to end", surrogate);

    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all criteria passed");
        ExitCode::SUCCESS
    }
}
