mod artifacts;
mod report;

use std::io::Write;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rompc::bounds::DecayMethod;
use rompc::pipeline::{
    certify_stage, controller_stage, preset, reduce_stage, PipelineConfig, Synthesis, PRESETS,
};
use rompc::sim::{monte_carlo, summarize, SimConfig};
use rompc::systems::{generate, save_matrix_market, write_matrix_market, ConstraintSets, ModelPaths};
use rompc::{Error, Result};

use artifacts::*;

#[derive(Parser)]
#[command(name = "rompc", version, about = "Reduced-order MPC with a priori error bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Pipeline configuration (JSON). Defaults to <out>/config.json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for LP batches and Monte-Carlo runs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Base seed of the Monte-Carlo runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Length of the error-bound look-back window; requires k0 >= 2*tau.
    #[arg(long, global = true)]
    tau: Option<usize>,
    /// Bound on the initial error norm; derived from the start state if omitted.
    #[arg(long = "eta-start", global = true)]
    eta_start: Option<f64>,
    /// How the error decay rate and norm weighting are computed.
    #[arg(long, global = true, value_enum)]
    method: Option<Method>,
    /// Tolerance override, e.g. `--tol lp_feasibility=1e-10`. Repeatable.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    tol: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Lyapunov,
    Eigen,
}

#[derive(Subcommand)]
enum Command {
    /// Write a benchmark configuration to stdout.
    Init {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        preset: String,
    },
    /// Generate or load the plant and reduce it.
    Reduce,
    /// Gains, error bounds, constraint tightening and terminal ingredients.
    Certify,
    /// Monte-Carlo closed loop with an audit of every guarantee.
    Simulate,
    /// Markdown summary of all artifacts.
    Report,
    /// reduce, certify, simulate and report in one go.
    Run,
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_REJECTED: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Dimension(_)
        | Error::InvalidArgument(_)
        | Error::Parse { .. }
        | Error::Io(_)
        | Error::Json(_) => EXIT_VALIDATION,
        Error::Infeasible(_) | Error::Assumption(_) | Error::Rejected(_) => EXIT_REJECTED,
        _ => EXIT_NUMERIC,
    }
}

/// Raised by the simulate stage when the audit finds a violation.
struct AuditFailure(usize);

enum Failure {
    Core { stage: &'static str, error: Error },
    Audit(AuditFailure),
}

impl From<(&'static str, Error)> for Failure {
    fn from((stage, error): (&'static str, Error)) -> Self {
        Failure::Core { stage, error }
    }
}

struct Ctx {
    cfg: PipelineConfig,
    layout: Layout,
}

fn apply_tolerance(cfg: &mut PipelineConfig, spec: &str) -> Result<()> {
    let (name, value) = spec
        .split_once('=')
        .ok_or_else(|| Error::InvalidArgument(format!("--tol expects NAME=VALUE, got `{spec}`")))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("--tol {name}: `{value}` is not a number")))?;
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::InvalidArgument(format!("--tol {name} must be positive")));
    }
    let mut v = serde_json::to_value(&cfg.tolerances)?;
    let obj = v.as_object_mut().expect("tolerances serialize to an object");
    if !obj.contains_key(name) {
        let known: Vec<&String> = obj.keys().collect();
        return Err(Error::InvalidArgument(format!("unknown tolerance `{name}`; known: {known:?}")));
    }
    obj.insert(name.to_string(), value.into());
    cfg.tolerances = serde_json::from_value(v)?;
    Ok(())
}

fn load_context(cli: &Cli) -> Result<Ctx> {
    let (mut cfg, base, out) = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
            let cfg = PipelineConfig::from_json(&text)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            let out = cli
                .out
                .clone()
                .or_else(|| cfg.output_dir.as_ref().map(|d| base.join(d)))
                .unwrap_or_else(|| PathBuf::from("rompc-out"));
            (cfg, base, out)
        }
        None => {
            let out = cli
                .out
                .clone()
                .ok_or_else(|| Error::InvalidArgument("give --config or --out with an existing config.json".into()))?;
            let path = out.join("config.json");
            let text = fs::read_to_string(&path)
                .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
            (PipelineConfig::from_json(&text)?, out.clone(), out)
        }
    };
    cfg.resolve_paths(&base);
    if let Some(s) = cli.seed {
        cfg.sim.seed = s;
    }
    if let Some(t) = cli.tau {
        cfg.synthesis.tau = t;
    }
    if let Some(e) = cli.eta_start {
        cfg.synthesis.eta_start = Some(e);
    }
    if let Some(m) = cli.method {
        cfg.synthesis.method = match m {
            Method::Lyapunov => DecayMethod::Lyapunov,
            Method::Eigen => DecayMethod::Eigen,
        };
    }
    for t in &cli.tol {
        apply_tolerance(&mut cfg, t)?;
    }
    cfg.validate()?;
    fs::create_dir_all(&out)?;
    let layout = Layout::new(out);
    // Paths are absolute after resolution; the stored copy is self-contained.
    write_json(&layout.config(), &cfg)?;
    Ok(Ctx { cfg, layout })
}

fn plant(cfg: &PipelineConfig) -> Result<(rompc::model::FullOrderModel, ConstraintSets)> {
    let g = generate(&cfg.system, &cfg.tolerances)?;
    let sets = cfg.sets.apply(&g.sets, &g.fom)?;
    Ok((g.fom, sets))
}

fn cmd_reduce(ctx: &Ctx) -> Result<()> {
    let t = Instant::now();
    let (fom, _) = plant(&ctx.cfg)?;
    fs::create_dir_all(ctx.layout.model_dir())?;
    save_matrix_market(&ModelPaths::in_dir(&ctx.layout.model_dir()), &fom)?;
    let rom = reduce_stage(&fom, &ctx.cfg.synthesis, &ctx.cfg.tolerances)?;
    let dir = ctx.layout.rom_dir();
    fs::create_dir_all(&dir)?;
    let r = &rom.rom;
    for (name, m) in [("V", &r.v), ("W", &r.w), ("A", &r.a), ("B", &r.b), ("C", &r.c), ("H", &r.h)] {
        write_matrix_market(&dir.join(format!("{name}.mtx")), m)?;
    }
    let c = &rom.ctrb_obsv;
    println!("reduced {} states to {}", fom.n(), r.n());
    let hsv: Vec<String> = rom.reduction.hankel.iter().take(12).map(|v| format!("{v:.3e}")).collect();
    println!("hankel values: {}", hsv.join(" "));
    println!("impulse mismatch: {:.3e}", rom.impulse_error);
    println!(
        "rank (A,B) {} (A,C) {} (A,H) {} of {}",
        c.rank_ab, c.rank_ac, c.rank_ah, c.n
    );
    write_json(
        &ctx.layout.rom(),
        &Stamped {
            config: ctx.cfg.clone(),
            artifact: rom,
        },
    )?;
    record_timing(&ctx.layout, "reduce", t.elapsed().as_secs_f64())
}

fn load_rom(ctx: &Ctx) -> Result<RomFile> {
    let rom: RomFile = read_json(&ctx.layout.rom(), "reduce")?;
    check_fresh(&rom.config, &ctx.cfg, "reduce", &ctx.layout.rom(), false)?;
    Ok(rom)
}

fn cmd_certify(ctx: &Ctx) -> Result<()> {
    let t = Instant::now();
    let rom = load_rom(ctx)?;
    let (fom, sets) = plant(&ctx.cfg)?;
    let tol = &ctx.cfg.tolerances;
    let s = &ctx.cfg.synthesis;
    let certified = certify_stage(&fom, &rom.artifact.rom, &sets, s, Some(ctx.cfg.start()), tol)?;
    let cert = &certified.cert;
    println!(
        "decay: M = {:.4e}, γ = {:.6}; C_r = {:.4e}, C_ω = {:.4e}; Δ⁽¹⁾ = {:.4e}",
        cert.decay.m, cert.decay.gamma, cert.c_r, cert.c_omega, cert.delta1
    );
    print!("{}", report::delta_table(cert, &sets.z, &sets.u));
    fs::write(ctx.layout.certificate(), cert.to_json()? + "\n")?;
    let controller = controller_stage(
        &rom.artifact.rom,
        &certified.weights,
        &cert.z_tightened,
        &cert.u_tightened,
        s.horizon,
        tol,
    )?;
    println!(
        "terminal set: {} rows after {} steps",
        controller.terminal.set.n_constraints(),
        controller.terminal.iterations
    );
    write_json(
        &ctx.layout.synthesis(),
        &Stamped {
            config: ctx.cfg.clone(),
            artifact: SynthesisFile { certified, controller },
        },
    )?;
    record_timing(&ctx.layout, "certify", t.elapsed().as_secs_f64())
}

fn load_synthesis(ctx: &Ctx) -> Result<Synthesis> {
    let rom = load_rom(ctx)?;
    let syn: Stamped<SynthesisFile> = read_json(&ctx.layout.synthesis(), "certify")?;
    check_fresh(&syn.config, &ctx.cfg, "certify", &ctx.layout.synthesis(), true)?;
    let (fom, sets) = plant(&ctx.cfg)?;
    Ok(Synthesis {
        fom,
        sets,
        reduced: rom.artifact,
        certified: syn.artifact.certified,
        controller: syn.artifact.controller,
    })
}

/// Runs are processed in batches so only logged trajectories stay in memory.
const BATCH: usize = 16;

fn cmd_simulate(ctx: &Ctx) -> std::result::Result<(), Failure> {
    let t = Instant::now();
    let syn = load_synthesis(ctx).map_err(|e| Failure::from(("simulate", e)))?;
    let cl = syn.closed_loop();
    let cfg = &ctx.cfg;
    let runs_dir = ctx.layout.runs_dir();
    let io = |e: std::io::Error| Failure::from(("simulate", Error::Io(e)));
    if runs_dir.exists() {
        fs::remove_dir_all(&runs_dir).map_err(io)?;
    }
    fs::create_dir_all(&runs_dir).map_err(io)?;
    let mut outcomes = Vec::with_capacity(cfg.runs);
    let mut logged_seeds = Vec::new();
    let mut start = 0;
    while start < cfg.runs {
        let count = BATCH.min(cfg.runs - start);
        let batch_cfg = SimConfig {
            seed: cfg.sim.seed.wrapping_add(start as u64),
            ..cfg.sim.clone()
        };
        let keep = start < cfg.logged_runs;
        let mut batch = monte_carlo(&cl, &batch_cfg, count, keep, &cfg.tolerances).map_err(|e| {
            let e = match e {
                Error::Infeasible(m) => Error::Infeasible(format!("nominal OCP at handover: {m}")),
                other => other,
            };
            Failure::from(("simulate", e))
        })?;
        for (i, o) in batch.iter_mut().enumerate() {
            if let Some(log) = o.log.take() {
                if start + i < cfg.logged_runs {
                    let f = fs::File::create(runs_dir.join(format!("run_{:06}.csv", o.seed))).map_err(io)?;
                    log.write_csv(std::io::BufWriter::new(f)).map_err(|e| Failure::from(("simulate", e)))?;
                    logged_seeds.push(o.seed);
                }
            }
        }
        outcomes.extend(batch);
        start += count;
    }
    let summary = summarize(&outcomes);
    let m = &summary.min_slack;
    println!(
        "{} runs, {} violations; min slack for k ≥ k₀: 𝒵 {:.3e} 𝒰 {:.3e} E_zε {:.3e} E_uε {:.3e} ‖ε‖_G {:.3e}",
        summary.runs, summary.violations, m.z, m.u, m.ez, m.eu, m.norm
    );
    let violations = summary.violations;
    let audit = AuditFile {
        summary,
        logged_seeds,
        runs: outcomes
            .into_iter()
            .map(|o| RunAudit {
                seed: o.seed,
                report: o.report,
            })
            .collect(),
    };
    write_json(&ctx.layout.audit(), &audit).map_err(|e| Failure::from(("simulate", e)))?;
    record_timing(&ctx.layout, "simulate", t.elapsed().as_secs_f64()).map_err(|e| Failure::from(("simulate", e)))?;
    if violations > 0 {
        return Err(Failure::Audit(AuditFailure(violations)));
    }
    Ok(())
}

fn cmd_report(ctx: &Ctx) -> Result<()> {
    let rom = load_rom(ctx)?;
    let syn: Stamped<SynthesisFile> = read_json(&ctx.layout.synthesis(), "certify")?;
    check_fresh(&syn.config, &ctx.cfg, "certify", &ctx.layout.synthesis(), true)?;
    let (_, sets) = plant(&ctx.cfg)?;
    let audit: Option<AuditFile> = if ctx.layout.audit().exists() {
        Some(read_json(&ctx.layout.audit(), "simulate")?)
    } else {
        None
    };
    let text = report::render(
        &ctx.cfg,
        &rom.artifact,
        &syn.artifact,
        &sets.z,
        &sets.u,
        audit.as_ref(),
        &read_timings(&ctx.layout),
    );
    fs::write(ctx.layout.report(), &text)?;
    print!("{text}");
    Ok(())
}

fn execute(cli: &Cli, ctx: &Ctx) -> std::result::Result<(), Failure> {
    let core = |stage: &'static str, r: Result<()>| r.map_err(|e| Failure::from((stage, e)));
    match cli.command {
        Command::Init { .. } => unreachable!(),
        Command::Reduce => core("reduce", cmd_reduce(ctx)),
        Command::Certify => core("certify", cmd_certify(ctx)),
        Command::Simulate => cmd_simulate(ctx),
        Command::Report => core("report", cmd_report(ctx)),
        Command::Run => {
            core("reduce", cmd_reduce(ctx))?;
            core("certify", cmd_certify(ctx))?;
            let sim = cmd_simulate(ctx);
            core("report", cmd_report(ctx))?;
            sim
        }
    }
}

fn report_failure(out: Option<&Layout>, f: &Failure) -> u8 {
    let (code, body) = match f {
        Failure::Core { stage, error } => {
            let kind = match (stage, error) {
                (&"simulate", Error::Infeasible(_)) => "ocp-infeasible",
                _ => error.kind(),
            };
            let code = exit_code(error);
            (
                code,
                serde_json::json!({"stage": stage, "kind": kind, "message": error.to_string(), "exit_code": code}),
            )
        }
        Failure::Audit(AuditFailure(n)) => (
            EXIT_REJECTED,
            serde_json::json!({"stage": "simulate", "kind": "audit-violation",
                "message": format!("{n} guarantee violations for k ≥ k₀; see audit.json"), "exit_code": EXIT_REJECTED}),
        ),
    };
    eprintln!("{body}");
    if let Some(l) = out {
        let _ = write_json(&l.error(), &body);
    }
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Init { preset: name } = &cli.command {
        let cfg = preset(name).expect("clap restricts preset names");
        let text = serde_json::to_string_pretty(&cfg).expect("config serializes");
        // A closed pipe (e.g. `rompc init heat | head`) is not an error.
        let _ = writeln!(std::io::stdout(), "{text}");
        return ExitCode::SUCCESS;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            let f = Failure::from(("setup", Error::InvalidArgument("--workers must be at least 1".into())));
            return ExitCode::from(report_failure(None, &f));
        }
        // Only fails when a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let ctx = match load_context(&cli) {
        Ok(c) => c,
        Err(e) => return ExitCode::from(report_failure(None, &Failure::from(("setup", e)))),
    };
    let _ = fs::remove_file(ctx.layout.error());
    match execute(&cli, &ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => ExitCode::from(report_failure(Some(&ctx.layout), &f)),
    }
}
