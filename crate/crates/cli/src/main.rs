//! Command-line front end: mesh generation, energy evaluation,
//! minimization, convergence experiments, holonomy queries, and the named
//! invariant suite.
//!
//! Exit status: 0 on success, 1 on domain errors (printed with the error
//! name), 2 on usage errors (malformed flags, handled by the arg parser).

// Config validators write `!(x > 0.0)` on purpose: the negation also
// rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod csvout;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use frustra::body::Configuration;
use frustra::checks;
use frustra::constructions::{
    cone_mesh, dislocation_block, dislocation_lattice, euclidean_triangulation, flat_disc,
    flat_square, holonomy, spherical_cap_phi, DislocationParams, LatticeMode,
};
use frustra::energy::{total_energy, EnergySettings};
use frustra::io::{self, fmt_g17};
use frustra::solve::{gamma_experiment, initial_configuration, minimize, SolveOptions};

#[derive(Parser)]
#[command(
    name = "frustra",
    version,
    about = "Incompatible elasticity on intrinsic triangulated surfaces"
)]
struct Cli {
    /// Worker threads for parallel sections (default: available parallelism)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a body mesh and write it as `bodymesh v1`
    Gen(GenArgs),
    /// Evaluate total energy and gradient norm of a configuration
    Energy(EnergyArgs),
    /// Minimize the energy and write the minimizer as `bodyconf v1`
    Minimize(MinimizeArgs),
    /// Run a convergence experiment from a config file and write the CSV
    Converge(ConvergeArgs),
    /// Develop a triangle loop and print its holonomy
    Holonomy(HolonomyArgs),
    /// Run the full named invariant suite; nonzero exit on any failure
    Check,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    FlatSquare,
    Cone,
    Disc,
    DislocationBlock,
    DislocationLattice,
    SphericalCap,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mean,
    Uniform,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    /// Output path for the mesh
    #[arg(long)]
    out: PathBuf,
    /// Grid resolution (flat-square, dislocation-lattice, spherical-cap)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    side: f64,
    /// Cone opening factor (cone)
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    r_max: f64,
    #[arg(long, default_value_t = 32)]
    resolution: usize,
    /// Disclination half-angle (dislocation-block)
    #[arg(long)]
    theta: Option<f64>,
    /// Dipole separation (dislocation-block)
    #[arg(long)]
    d: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    block_size: f64,
    #[arg(long, default_value_t = 1)]
    refinement: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Uniform)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.3)]
    theta0: f64,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Also write the dipole loop (dislocation-block)
    #[arg(long)]
    loop_out: Option<PathBuf>,
    /// Also write the flat limit mesh (dislocation-lattice)
    #[arg(long)]
    limit_out: Option<PathBuf>,
}

#[derive(Args)]
struct EnergyArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    conf: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 1e-12)]
    dis_floor: f64,
}

#[derive(Args)]
struct MinimizeArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Starting configuration; defaults to the seeded boundary-circle layout
    #[arg(long)]
    conf: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 1e-12)]
    dis_floor: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    grad_tol: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct HolonomyArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Loop file: one triangle index per line
    #[arg(long = "loop")]
    loop_path: PathBuf,
}

enum AppError {
    /// Missing or inconsistent flags for the chosen mode; exit 2.
    Usage(String),
    /// Any validated-domain or I/O failure; exit 1.
    Domain(String),
    /// `check` found failing invariants; exit 1.
    ChecksFailed(usize),
}

impl<E: std::error::Error> From<E> for AppError {
    fn from(e: E) -> Self {
        AppError::Domain(e.to_string())
    }
}

fn need<T: Copy>(opt: Option<T>, flag: &str, kind: &str) -> Result<T, AppError> {
    opt.ok_or_else(|| AppError::Usage(format!("--{flag} is required for --kind {kind}")))
}

fn run_gen(args: &GenArgs) -> Result<(), AppError> {
    let mesh = match args.kind {
        GenKind::FlatSquare => {
            let n = need(args.n, "n", "flat-square")?;
            flat_square(n, args.side)?
        }
        GenKind::Cone => {
            let alpha = need(args.alpha, "alpha", "cone")?;
            cone_mesh(alpha, args.r_max, args.resolution)?
        }
        GenKind::Disc => flat_disc(args.r_max, args.resolution)?,
        GenKind::DislocationBlock => {
            let theta = need(args.theta, "theta", "dislocation-block")?;
            let d = need(args.d, "d", "dislocation-block")?;
            let params = DislocationParams { theta, d, block_size: args.block_size };
            let block = dislocation_block(&params, args.refinement)?;
            if let Some(loop_out) = &args.loop_out {
                std::fs::write(loop_out, io::format_loop(&block.dipole_loop))
                    .map_err(|e| AppError::Domain(format!("Io: {}: {e}", loop_out.display())))?;
            }
            block.mesh
        }
        GenKind::DislocationLattice => {
            let n = need(args.n, "n", "dislocation-lattice")?;
            let mode = match args.mode {
                ModeArg::Mean => LatticeMode::MeanRegime,
                ModeArg::Uniform => LatticeMode::UniformRegime,
            };
            let (mesh, limit) = dislocation_lattice(n, mode, args.theta0, args.epsilon)?;
            if let Some(limit_out) = &args.limit_out {
                io::save_bodymesh(limit_out, &limit)
                    .map_err(|e| AppError::Domain(format!("{e}: {}", limit_out.display())))?;
            }
            mesh
        }
        GenKind::SphericalCap => {
            let n = need(args.n, "n", "spherical-cap")?;
            euclidean_triangulation(spherical_cap_phi::<f64>, n)?
        }
    };
    io::save_bodymesh(&args.out, &mesh)
        .map_err(|e| AppError::Domain(format!("{e}: {}", args.out.display())))?;
    println!(
        "wrote {}: {} vertices, {} triangles",
        args.out.display(),
        mesh.vertex_count(),
        mesh.triangle_count()
    );
    Ok(())
}

fn settings_from(p: f64, dis_floor: f64) -> Result<EnergySettings<f64>, AppError> {
    let settings = EnergySettings { p, dis_floor };
    settings.validate()?;
    Ok(settings)
}

fn run_energy(args: &EnergyArgs) -> Result<(), AppError> {
    let mesh = io::load_bodymesh(&args.mesh)?;
    let conf = io::load_bodyconf(&args.conf)?;
    let settings = settings_from(args.p, args.dis_floor)?;
    let report = total_energy(&mesh, &conf, &settings)?;
    println!("total {}", fmt_g17(report.total));
    println!("grad_norm {}", fmt_g17(report.grad_norm));
    Ok(())
}

fn run_minimize(args: &MinimizeArgs) -> Result<(), AppError> {
    let mesh = io::load_bodymesh(&args.mesh)?;
    let settings = settings_from(args.p, args.dis_floor)?;
    let opts = SolveOptions {
        max_iters: args.max_iters,
        grad_tol: args.grad_tol,
        seed: args.seed,
        ..SolveOptions::default()
    };
    let u0: Configuration<f64> = match &args.conf {
        Some(path) => io::load_bodyconf(path)?,
        None => initial_configuration(&mesh, args.seed)?,
    };
    let res = minimize(&mesh, &u0, &settings, &opts)?;
    io::save_bodyconf(&args.out, &res.configuration)
        .map_err(|e| AppError::Domain(format!("{e}: {}", args.out.display())))?;
    println!(
        "energy {} grad_norm {} iterations {} termination {:?}",
        fmt_g17(res.report.total),
        fmt_g17(res.report.grad_norm),
        res.iterations,
        res.termination
    );
    Ok(())
}

fn run_converge(args: &ConvergeArgs) -> Result<(), AppError> {
    let cfg = config::load(&args.config)?;
    let result = gamma_experiment(
        &cfg.generator,
        &cfg.n_list,
        &cfg.settings,
        &cfg.options,
        cfg.cold_start,
    )?;
    csvout::emit_results(&result, &cfg.out)
        .map_err(|e| AppError::Domain(format!("Io: {}: {e}", cfg.out.display())))?;
    println!("wrote {}: {} rows", cfg.out.display(), result.rows.len());
    Ok(())
}

fn run_holonomy(args: &HolonomyArgs) -> Result<(), AppError> {
    let mesh = io::load_bodymesh(&args.mesh)?;
    let loop_tris = io::load_loop(&args.loop_path)?;
    let h = holonomy(&mesh, &loop_tris)?;
    println!("rotation_angle {}", fmt_g17(h.rotation_angle));
    println!("translation {} {}", fmt_g17(h.translation[0]), fmt_g17(h.translation[1]));
    println!(
        "translation_magnitude {}",
        fmt_g17(h.translation[0].hypot(h.translation[1]))
    );
    Ok(())
}

fn run_check() -> Result<(), AppError> {
    let mut outcomes = checks::run_all();
    outcomes.push(csvout::csv_round_trip_check());
    let mut failed = 0usize;
    for c in &outcomes {
        println!("{c}");
        if !c.passed {
            failed += 1;
        }
    }
    println!("{} checks, {} failed", outcomes.len(), failed);
    if failed > 0 {
        return Err(AppError::ChecksFailed(failed));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), AppError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(AppError::Usage("--threads must be positive".to_string()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| AppError::Domain(format!("ThreadPool: {e}")))?;
    }
    match &cli.command {
        Command::Gen(args) => run_gen(args),
        Command::Energy(args) => run_energy(args),
        Command::Minimize(args) => run_minimize(args),
        Command::Converge(args) => run_converge(args),
        Command::Holonomy(args) => run_holonomy(args),
        Command::Check => run_check(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(AppError::ChecksFailed(n)) => {
            eprintln!("error: {n} checks failed");
            ExitCode::from(1)
        }
    }
}
