//! Config-driven experiment runner: reproducible evolutions, stationary
//! solves, vanishing-horizon studies, and the verification front end.
//!
//! Exit codes: 0 success, 1 property failure, 2 config error, 3 solver
//! failure.

mod artifacts;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nonloclaw::resolvent::{assemble, solve_regularized, solve_resolvent};
use nonloclaw::semigroup::{
    evolve_explicit, evolve_forced, evolve_implicit, local_limit_study, ForcingSpec, StudyOracle,
    Trajectory,
};
use nonloclaw::verify::{entropy_audit, entropy_tolerance, theorem_suite, TestFunctionFamily};
use nonloclaw::{Error, GridField, OperatorAssembly, ShiftVector};

use artifacts::{ArtifactSink, RunManifest};
use config::{ConfigError, RunConfig, SchemeKind};

#[derive(Parser)]
#[command(name = "nonloclaw", version, about = "Nonlocal conservation law runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides NONLOCLAW_OUT and the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for random initial data.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve the configured problem and dump snapshot CSVs.
    Run(Common),
    /// Run the semigroup property suite and the entropy audit.
    Verify(Common),
    /// Vanishing-horizon error study against a closed-form reference.
    Study(Common),
    /// Single stationary resolvent solve.
    Resolvent(Common),
}

impl Cmd {
    fn common(&self) -> &Common {
        match self {
            Cmd::Run(c) | Cmd::Verify(c) | Cmd::Study(c) | Cmd::Resolvent(c) => c,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Cmd::Run(_) => "run",
            Cmd::Verify(_) => "verify",
            Cmd::Study(_) => "study",
            Cmd::Resolvent(_) => "resolvent",
        }
    }
}

fn lib_err(e: Error) -> ConfigError {
    ConfigError {
        line: 0,
        message: e.to_string(),
    }
}

/// Failures sorted into the exit-code contract.
enum Failure {
    Property(String),
    Config(ConfigError),
    Solver(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SolverDiverged { .. } | Error::NonFinite(_) => Failure::Solver(e.to_string()),
            other => Failure::Config(lib_err(other)),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.cmd.common();
    if let Some(n) = common.threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            eprintln!("error: cannot configure {n} worker threads");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Property(msg)) => {
            eprintln!("FAIL {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(cmd: &Cmd) -> Result<(), Failure> {
    let common = cmd.common();
    let cfg = RunConfig::load(&common.config)?;
    let out_dir = resolve_out_dir(common, &cfg);
    let start = Instant::now();
    let mut sink = ArtifactSink::new(&out_dir);
    let mut manifest = RunManifest {
        version: artifacts::VERSION.to_string(),
        command: cmd.name().to_string(),
        config: cfg.echo.clone(),
        seed: common.seed.or(cfg.initial.seed),
        grid_cells: cfg.grid.cells().to_vec(),
        grid_spacing: cfg.grid.spacing().to_vec(),
        times: Vec::new(),
        solver_residuals: Vec::new(),
        residual_budget: 0.0,
        artifacts: Vec::new(),
    };
    match cmd {
        Cmd::Run(_) => run(&cfg, common, &mut sink, &mut manifest)?,
        Cmd::Verify(_) => verify(&cfg, common, &mut sink, &mut manifest)?,
        Cmd::Study(_) => study(&cfg, &mut sink, &mut manifest)?,
        Cmd::Resolvent(_) => resolvent(&cfg, common, &mut sink, &mut manifest)?,
    }
    sink.finish(manifest, start.elapsed())
        .map_err(artifacts::io_err)?;
    Ok(())
}

/// --out wins; otherwise NONLOCLAW_OUT (or the working directory) is the
/// root under which the config's output directory is created.
fn resolve_out_dir(common: &Common, cfg: &RunConfig) -> PathBuf {
    match &common.out {
        Some(o) => o.clone(),
        None => {
            let root = std::env::var_os("NONLOCLAW_OUT")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("."));
            root.join(&cfg.output.directory)
        }
    }
}

fn build_operator(cfg: &RunConfig) -> Result<OperatorAssembly, Failure> {
    assemble(&cfg.grid, &cfg.kernel, cfg.fluxes.clone()).map_err(Failure::from)
}

fn evolve(cfg: &RunConfig, op: &OperatorAssembly, u0: &GridField) -> Result<Trajectory, Failure> {
    let t = cfg.scheme.t_final;
    let dt = t / cfg.scheme.steps as f64;
    let opts = cfg.resolvent_options(u0);
    let traj = match cfg.scheme.kind {
        SchemeKind::Implicit => evolve_implicit(op, u0, t, dt, &opts)?,
        SchemeKind::Explicit => evolve_explicit(op, u0, t, dt)?,
        SchemeKind::Forced => {
            let rate = cfg.scheme.forcing_rate;
            let forcing = ForcingSpec {
                g: Box::new(move |_t, u: &GridField| u.scale(-rate)),
                lipschitz_in_u: rate.abs(),
            };
            evolve_forced(op, u0, t, dt, &forcing, &opts)?
        }
    };
    Ok(traj)
}

fn run(
    cfg: &RunConfig,
    common: &Common,
    sink: &mut ArtifactSink,
    manifest: &mut RunManifest,
) -> Result<(), Failure> {
    let op = build_operator(cfg)?;
    let u0 = cfg.initial_field(common.seed)?;
    let traj = evolve(cfg, &op, &u0)?;
    let snapshots = artifacts::dump_trajectory(sink, &traj, cfg.output.cadence)?;
    manifest.times = snapshots.iter().map(|(_, t)| *t).collect();
    manifest.solver_residuals = traj.reports.iter().map(|r| r.final_residual).collect();
    manifest.residual_budget = traj.residual_budget();
    let script = artifacts::trajectory_plot_script(cfg.grid.spacing(), cfg.grid.dim(), &snapshots);
    sink.write("plot.gp", script.as_bytes())
        .map_err(artifacts::io_err)?;
    println!(
        "run: {} steps to t={}, {} snapshots, residual budget {:e}",
        cfg.scheme.steps,
        cfg.scheme.t_final,
        snapshots.len(),
        traj.residual_budget()
    );
    Ok(())
}

fn verify(
    cfg: &RunConfig,
    common: &Common,
    sink: &mut ArtifactSink,
    manifest: &mut RunManifest,
) -> Result<(), Failure> {
    let op = build_operator(cfg)?;
    let tol = cfg.verify.tolerance.unwrap_or(1e-8);
    let mut failures: Vec<String> = Vec::new();

    // The entropy audit runs on either an ingested trajectory or a fresh
    // implicit evolution of the configured problem.
    let (traj, u0) = match &cfg.verify.trajectory {
        Some(path) => {
            let traj = artifacts::load_trajectory(Path::new(path))?;
            if traj.states[0].grid() != op.grid() {
                return Err(Failure::Config(ConfigError {
                    line: 0,
                    message: "ingested trajectory grid does not match the config grid".into(),
                }));
            }
            let u0 = traj.states[0].clone();
            (traj, u0)
        }
        None => {
            let u0 = cfg.initial_field(common.seed)?;
            let traj = evolve(cfg, &op, &u0)?;
            (traj, u0)
        }
    };
    let t_span = traj.final_time();
    let family = TestFunctionFamily::tensor_grid(op.grid(), t_span, cfg.verify.family_nx, cfg.verify.family_nt);
    let e_tol = cfg
        .verify
        .tolerance
        .unwrap_or_else(|| entropy_tolerance(&traj, &u0, t_span));
    let report = entropy_audit(&traj, &op, &family, cfg.verify.c_count, e_tol)?;

    let mut csv = String::from("f_center,width,c,residual\n");
    for e in &report.entries {
        let f = &family.members[e.member];
        csv.push_str(&format!(
            "{},{},{},{}\n",
            f.center[0], f.width[0], e.c, e.residual
        ));
    }
    csv.push_str(&format!(
        "# min_residual = {}, tolerance = {}, pass = {}\n",
        report.min_residual, report.tolerance, report.pass
    ));
    sink.write("entropy_report.csv", csv.as_bytes())
        .map_err(artifacts::io_err)?;
    println!(
        "entropy audit: min residual {:e} (tolerance {:e}) .. {}",
        report.min_residual,
        report.tolerance,
        if report.pass { "pass" } else { "FAIL" }
    );
    if !report.pass {
        failures.push(format!(
            "entropy audit: min residual {:e} below -{:e}",
            report.min_residual, report.tolerance
        ));
    }

    // Theorem suite on the configured problem against a translated copy.
    let u0_cfg = cfg.initial_field(common.seed)?;
    let mut probe = vec![0isize; cfg.grid.dim()];
    probe[0] = (cfg.grid.cells()[0] / 2) as isize;
    let v0 = u0_cfg.shift(&ShiftVector::new(&probe))?;
    let dt = cfg.scheme.t_final / cfg.scheme.steps as f64;
    let opts = cfg.resolvent_options(&u0_cfg);
    let suite = theorem_suite(&op, &u0_cfg, &v0, cfg.scheme.t_final, dt, &opts, tol)?;
    let named = [
        ("integrability", suite.integrability_margin),
        ("maximum principle", suite.max_principle_margin),
        ("order preservation", suite.monotonicity_margin),
        ("equicontinuity", suite.equicontinuity_margin),
        ("mass conservation", -suite.mass_defect),
    ];
    for (name, margin) in named {
        let ok = margin >= -(tol + suite.residual_budget);
        println!("theorem suite: {name} margin {margin:e} .. {}", if ok { "pass" } else { "FAIL" });
        if !ok {
            failures.push(format!("{name}: margin {margin:e}"));
        }
    }
    let suite_txt = format!(
        "integrability_margin = {}\nmax_principle_margin = {}\nmonotonicity_margin = {}\nequicontinuity_margin = {}\nmass_defect = {}\nresidual_budget = {}\npass = {}\n",
        suite.integrability_margin,
        suite.max_principle_margin,
        suite.monotonicity_margin,
        suite.equicontinuity_margin,
        suite.mass_defect,
        suite.residual_budget,
        suite.pass && report.pass
    );
    sink.write("theorem_report.txt", suite_txt.as_bytes())
        .map_err(artifacts::io_err)?;

    manifest.times = traj.times.clone();
    manifest.solver_residuals = traj.reports.iter().map(|r| r.final_residual).collect();
    manifest.residual_budget = traj.residual_budget();
    if let Some(first) = failures.first() {
        return Err(Failure::Property(first.clone()));
    }
    Ok(())
}

fn study(cfg: &RunConfig, sink: &mut ArtifactSink, manifest: &mut RunManifest) -> Result<(), Failure> {
    let block = cfg.study.as_ref().ok_or_else(|| {
        Failure::Config(ConfigError {
            line: 0,
            message: "the study subcommand needs a [study] section".into(),
        })
    })?;
    let oracle = StudyOracle::by_name(&block.oracle).expect("validated");
    let rows = local_limit_study(
        &cfg.fluxes[0],
        &cfg.kernel.profile,
        oracle,
        &cfg.grid,
        block.t_final,
        &block.deltas,
        block.eps,
    )?;
    let mut csv = String::from("delta,l1_error,order\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            r.delta,
            r.l1_error,
            r.order.map(|o| o.to_string()).unwrap_or_default()
        ));
    }
    sink.write("study.csv", csv.as_bytes())
        .map_err(artifacts::io_err)?;
    sink.write("plot.gp", artifacts::study_plot_script("study.csv").as_bytes())
        .map_err(artifacts::io_err)?;
    for r in &rows {
        println!(
            "study: delta {:e} error {:e}{}",
            r.delta,
            r.l1_error,
            r.order.map(|o| format!(" order {o:.3}")).unwrap_or_default()
        );
    }
    manifest.times = vec![block.t_final];
    Ok(())
}

fn resolvent(
    cfg: &RunConfig,
    common: &Common,
    sink: &mut ArtifactSink,
    manifest: &mut RunManifest,
) -> Result<(), Failure> {
    let block = cfg.resolvent.as_ref().ok_or_else(|| {
        Failure::Config(ConfigError {
            line: 0,
            message: "the resolvent subcommand needs a [resolvent] section".into(),
        })
    })?;
    let op = build_operator(cfg)?;
    let g = cfg.initial_field(common.seed)?;
    let opts = cfg.resolvent_options(&g);
    let (u, report) = match block.epsilon {
        Some(eps) if eps > 0.0 => solve_regularized(&op, &g, block.lambda, eps, &opts)?,
        _ => solve_resolvent(&op, &g, block.lambda, &opts)?,
    };
    sink.write_field("solution.csv", &u)?;
    manifest.solver_residuals = vec![report.final_residual];
    manifest.residual_budget = report.final_residual;
    println!(
        "resolvent: lambda {} solved in {} iterations, residual {:e}",
        block.lambda, report.iterations, report.final_residual
    );
    Ok(())
}
