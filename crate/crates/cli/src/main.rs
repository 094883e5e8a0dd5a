//! Command-line driver for the Robin-Robin splitting solver.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use rrsplit::cases::ManufacturedCase;
use rrsplit::cutoff::CutoffConfig;
use rrsplit::fem::interpolate_trace;
use rrsplit::harness::{
    self, cutoff_report, default_norms, dyadic_steps, energy_audit, gnuplot_script, run_study,
    simulate, write_cutoff_csv, AuditConfig, MeshPolicy, Method, StudyConfig,
};
use rrsplit::{CaseName, SchemeOrder};

const OUT_ENV: &str = "RRSPLIT_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "rrsplit",
    version,
    about = "Robin-Robin splitting for coupled parabolic interface problems",
    args_override_self = true,
    after_help = "Any long flag may also be set from a file given with --config <FILE>, one `flag = value` per line; \
                  command-line flags take precedence."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one manufactured case and report final errors and the energy ledger.
    Run(RunArgs),
    /// Convergence table over dyadic time steps with h tied to dt.
    Convergence(ConvergenceArgs),
    /// Check the discrete energy balance with random data and zero sources.
    EnergyAudit(AuditArgs),
    /// Check the cut-off function properties over dyadic time steps.
    CutoffVerify(CutoffArgs),
    /// Write the coupled mesh used for a case and time step.
    MeshDump(MeshArgs),
}

#[derive(Args, Debug)]
struct Physics {
    /// Robin parameter.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long = "nu-f", default_value_t = 1.0)]
    nu_f: f64,
    #[arg(long = "nu-s", default_value_t = 1.0)]
    nu_s: f64,
}

#[derive(Args, Debug)]
struct Output {
    /// Output directory.
    #[arg(long, env = OUT_ENV, default_value = "rrsplit-out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    case: CaseName,
    /// Scheme order; must agree with the case.
    #[arg(long)]
    k: Option<u8>,
    #[arg(long)]
    dt: f64,
    #[arg(long = "t-final", default_value_t = 0.25)]
    t_final: f64,
    /// Use the monolithic solver instead of the splitting.
    #[arg(long)]
    oracle: bool,
    #[command(flatten)]
    physics: Physics,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[arg(long)]
    case: CaseName,
    #[arg(long)]
    k: Option<u8>,
    /// Coarsest time step.
    #[arg(long = "dt-max")]
    dt_max: f64,
    /// Finest time step; steps are halved from --dt-max down to here.
    #[arg(long = "dt-min")]
    dt_min: f64,
    #[arg(long = "t-final", default_value_t = 0.25)]
    t_final: f64,
    #[arg(long)]
    oracle: bool,
    /// Also report accumulated gradient errors.
    #[arg(long)]
    gradients: bool,
    /// Write a gnuplot script next to the CSV.
    #[arg(long = "emit-plot")]
    emit_plot: bool,
    #[command(flatten)]
    physics: Physics,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[arg(long)]
    k: u8,
    #[arg(long)]
    dt: f64,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    /// Elements per side of the uniform mesh.
    #[arg(long = "mesh-n", default_value_t = 8)]
    mesh_n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    physics: Physics,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct CutoffArgs {
    #[arg(long = "dt-max", default_value_t = 0.25)]
    dt_max: f64,
    #[arg(long = "dt-min", default_value_t = 1.0 / 1024.0)]
    dt_min: f64,
    #[arg(long = "emit-plot")]
    emit_plot: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct MeshArgs {
    #[arg(long)]
    case: CaseName,
    #[arg(long)]
    dt: f64,
    #[command(flatten)]
    output: Output,
}

/// Usage-level failure: printed by clap, exit status 2.
fn usage_error(kind: ErrorKind, message: impl std::fmt::Display) -> ! {
    Cli::command().error(kind, message).exit()
}

fn check_order(case: CaseName, k: Option<u8>) -> SchemeOrder {
    let order = ManufacturedCase::new(case).order;
    if let Some(k) = k {
        if k != order.k() {
            usage_error(
                ErrorKind::ValueValidation,
                format!(
                    "--k {k} does not match case {case}, which uses k = {}",
                    order.k()
                ),
            );
        }
    }
    order
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

fn step_label(dt: f64) -> String {
    format!("{dt:e}")
}

fn run(args: RunArgs) -> Result<ExitCode> {
    check_order(args.case, args.k);
    let case =
        ManufacturedCase::new(args.case).with_coefficients(args.physics.nu_f, args.physics.nu_s);
    let mesh = MeshPolicy::for_geometry(case.geometry).build(args.dt)?;
    let method = if args.oracle {
        Method::Monolithic
    } else {
        Method::RobinRobin
    };
    let sim = simulate(
        &case,
        mesh,
        args.dt,
        args.t_final,
        args.physics.alpha,
        method,
    )?;

    let stem = format!("run_{}_dt{}", args.case, step_label(args.dt));
    let (ledger_path, mut w) = create(&args.output.out, &format!("{stem}_energy.csv"))?;
    sim.outcome.ledger.write_csv(&mut w)?;
    w.flush()?;
    let (state_path, mut w) = create(&args.output.out, &format!("{stem}_state.txt"))?;
    sim.outcome.final_state.write_checkpoint(&mut w)?;
    w.flush()?;

    let multiplier_gap = |t: f64| {
        let reference = interpolate_trace(&sim.mesh, |x, t| case.exact_multiplier(x, t), t);
        let consistent = interpolate_trace(&sim.mesh, |x, t| case.l_consistent(x, t), t);
        reference
            .values
            .iter()
            .zip(&consistent.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let ledger = &sim.outcome.ledger;
    let balance = ledger.z.last().copied().unwrap_or(0.0) + ledger.s.iter().sum::<f64>();

    println!(
        "case {} (k = {}), dt = {}, steps = {}",
        args.case, case.order, args.dt, sim.params.n_steps
    );
    println!(
        "solver: {}",
        if args.oracle {
            "monolithic"
        } else {
            "robin-robin"
        }
    );
    println!("L2 error U = {:.6e}", sim.final_l2[0]);
    println!("L2 error W = {:.6e}", sim.final_l2[1]);
    println!("L2 error Q = {:.6e}", sim.final_l2[2]);
    println!(
        "accumulated grad error U = {:.6e}",
        sim.accumulated_gradient[0]
    );
    println!(
        "accumulated grad error W = {:.6e}",
        sim.accumulated_gradient[1]
    );
    println!(
        "energy Z0 = {:.6e}, ZN + sum S = {balance:.6e}",
        ledger.z[0]
    );
    println!(
        "multiplier: reference vs fluid flux, max nodal gap {:.3e} at t = 0, {:.3e} at t = {}",
        multiplier_gap(0.0),
        multiplier_gap(args.t_final),
        args.t_final
    );
    println!("wrote {}", ledger_path.display());
    println!("wrote {}", state_path.display());
    Ok(ExitCode::SUCCESS)
}

fn convergence(args: ConvergenceArgs) -> Result<ExitCode> {
    let order = check_order(args.case, args.k);
    let dt_list = dyadic_steps(args.dt_max, args.dt_min)
        .unwrap_or_else(|e| usage_error(ErrorKind::ValueValidation, e));
    let mut cfg = StudyConfig::new(args.case, dt_list);
    cfg.final_time = args.t_final;
    cfg.alpha = args.physics.alpha;
    cfg.nu_f = args.physics.nu_f;
    cfg.nu_s = args.physics.nu_s;
    cfg.norms = default_norms(order, args.gradients);
    cfg.method = if args.oracle {
        Method::Monolithic
    } else {
        Method::RobinRobin
    };
    if let Err(e) = cfg.validate() {
        usage_error(ErrorKind::ValueValidation, e);
    }
    let table = run_study(&cfg)?;

    let stem = format!(
        "convergence_{}{}",
        args.case,
        if args.oracle { "_monolithic" } else { "" }
    );
    let (csv_path, mut w) = create(&args.output.out, &format!("{stem}.csv"))?;
    table.write_csv(&mut w)?;
    w.flush()?;
    print!("{}", table.to_csv_string());
    for (dt, msg) in table.failures() {
        eprintln!("row dt = {dt} failed: {msg}");
    }
    println!("wrote {}", csv_path.display());
    if args.emit_plot {
        let script = gnuplot_script(
            &csv_path,
            &table.norms,
            &args.output.out.join(format!("{stem}.png")),
        );
        let (gp, mut w) = create(&args.output.out, &format!("{stem}.gp"))?;
        w.write_all(script.as_bytes())?;
        w.flush()?;
        println!("wrote {}", gp.display());
    }
    Ok(if table.failures().next().is_some() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn audit(args: AuditArgs) -> Result<ExitCode> {
    let order =
        SchemeOrder::from_k(args.k).unwrap_or_else(|e| usage_error(ErrorKind::ValueValidation, e));
    let mut cfg = AuditConfig::new(order, args.dt, args.physics.alpha, args.seed);
    cfg.nu_f = args.physics.nu_f;
    cfg.nu_s = args.physics.nu_s;
    cfg.n_steps = args.steps;
    cfg.mesh_n = args.mesh_n;
    let report = energy_audit(&cfg)?;
    let (path, mut w) = create(
        &args.output.out,
        &format!(
            "energy_audit_k{}_dt{}_seed{}.csv",
            args.k,
            step_label(args.dt),
            args.seed
        ),
    )?;
    report.ledger.write_csv(&mut w)?;
    w.flush()?;
    println!("Z0 = {:.6e}", report.z0);
    println!(
        "max relative defect = {:.3e} (tolerance {:.0e}): {}",
        report.max_relative_defect,
        harness::AUDIT_TOLERANCE,
        if report.pass { "pass" } else { "FAIL" }
    );
    println!("wrote {}", path.display());
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cutoff_verify(args: CutoffArgs) -> Result<ExitCode> {
    let dts = dyadic_steps(args.dt_max, args.dt_min)
        .unwrap_or_else(|e| usage_error(ErrorKind::ValueValidation, e));
    if let Some(bad) = dts.iter().find(|dt| CutoffConfig::unchecked(**dt).is_err()) {
        usage_error(
            ErrorKind::ValueValidation,
            format!("time step {bad} must lie in (0, 1)"),
        );
    }
    let rows = cutoff_report(&dts)?;
    let (path, mut w) = create(&args.output.out, "cutoff_report.csv")?;
    write_cutoff_csv(&rows, &mut w)?;
    w.flush()?;
    let mut all = true;
    for r in &rows {
        let a = &r.assumptions;
        all &= a.all_pass();
        println!(
            "dt = {:<12} energy = {:.6} ratio = {:.4} trace = {:.6} precondition={} (i)={} (ii)={} (iii)={} (iv)={}",
            r.dt,
            r.grad_energy,
            r.ratio,
            r.trace_measure,
            a.precondition,
            a.range.pass,
            a.boundary.pass,
            a.trace_measure.pass,
            a.growth.pass
        );
    }
    if rows.len() >= 2 {
        println!("log slope = {:.4}", harness::cutoff_log_slope(&rows));
    }
    println!("wrote {}", path.display());
    if args.emit_plot {
        let image = args.output.out.join("cutoff_report.png");
        let script = format!(
            "set datafile separator ','\nset logscale x\nset xlabel 'dt'\nset ylabel 'grad energy'\n\
             set terminal pngcairo size 800,600\nset output '{}'\n\
             plot '{}' using 1:2 skip 1 with linespoints title 'quadrature', \\\n     \
             '{}' using 1:3 skip 1 with lines title 'closed form'\n",
            image.display(),
            path.display(),
            path.display()
        );
        let (gp, mut w) = create(&args.output.out, "cutoff_report.gp")?;
        w.write_all(script.as_bytes())?;
        w.flush()?;
        println!("wrote {}", gp.display());
    }
    Ok(if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn mesh_dump(args: MeshArgs) -> Result<ExitCode> {
    let case = ManufacturedCase::new(args.case);
    let mesh = MeshPolicy::for_geometry(case.geometry).build(args.dt)?;
    let violations = mesh.validate();
    let (path, mut w) = create(
        &args.output.out,
        &format!("mesh_{}_dt{}.txt", args.case, step_label(args.dt)),
    )?;
    mesh.write_dump(&mut w)?;
    w.flush()?;
    println!(
        "{} nodes, {} + {} triangles, {} interface nodes, h_max = {:.4}",
        mesh.n_nodes(),
        mesh.triangles_f.len(),
        mesh.triangles_s.len(),
        mesh.n_interface(),
        mesh.h_max
    );
    for v in &violations {
        eprintln!("mesh check: {v}");
    }
    println!("wrote {}", path.display());
    Ok(if violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => usage_error(ErrorKind::InvalidValue, format!("{e:#}")),
    };
    let cli = Cli::parse_from(args);
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Convergence(a) => convergence(a),
        Command::EnergyAudit(a) => audit(a),
        Command::CutoffVerify(a) => cutoff_verify(a),
        Command::MeshDump(a) => mesh_dump(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
