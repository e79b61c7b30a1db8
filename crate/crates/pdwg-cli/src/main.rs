//! `pdwg` command line: single solves, refinement-ladder convergence studies,
//! the built-in property suite, and matrix dumps.
//!
//! Settings can come from a flat `key=value` config file (one setting per
//! line, `#` comments); command-line flags override config values.

use clap::{Args, Parser, Subcommand};
use pdwg::problem::{DomainChoice, ExampleId, LoadChoice};
use pdwg::solver::{write_matrix_market_vector, SolveOptions};
use pdwg::study::{run_study, solve_level, StudyConfig};
use pdwg::{assemble, run_verify, WgSpace};
use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "pdwg", version, about = "Primal-dual weak Galerkin solver for convection-diffusion problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a single level and report norms and residuals.
    Solve(RunArgs),
    /// Run a refinement ladder and emit the convergence table.
    Study(RunArgs),
    /// Run the built-in property suite.
    Verify,
    /// Assemble one level and write the system in MatrixMarket format.
    DumpMatrix(RunArgs),
}

#[derive(Args, Debug, Default, Clone)]
struct RunArgs {
    /// Flat key=value config file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in example: ex1 | ex2 | ex3 | ex4 | ex5.
    #[arg(long)]
    example: Option<String>,
    /// Polynomial degree k >= 1.
    #[arg(long)]
    k: Option<usize>,
    /// Edge-flux degree: "k", "k-1", or an integer.
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    tau1: Option<f64>,
    #[arg(long)]
    tau2: Option<f64>,
    /// Comma-separated ladder of resolutions 1/h (e.g. 4,8,16,32,64).
    #[arg(long)]
    levels: Option<String>,
    /// Single resolution 1/h (solve, dump-matrix).
    #[arg(long)]
    level: Option<usize>,
    /// square | lshape.
    #[arg(long)]
    domain: Option<String>,
    /// Diffusion scale for ex3.
    #[arg(long)]
    eps: Option<f64>,
    /// Load choice 0 or 1 for ex4/ex5.
    #[arg(long)]
    f: Option<u8>,
    /// Quadrature exactness override (default 2k+4).
    #[arg(long)]
    quad_degree: Option<usize>,
    /// direct | minres.
    #[arg(long)]
    solver: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("PDWG_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().ok();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Study(args) => cmd_study(args),
        Command::Verify => cmd_verify(),
        Command::DumpMatrix(args) => cmd_dump_matrix(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type AnyError = Box<dyn std::error::Error>;

fn cmd_study(args: RunArgs) -> Result<(), AnyError> {
    let config = build_config(&args, false)?;
    let study = run_study(&config)?;
    println!("{}", study.report.to_markdown(&study.title()));
    for row in &study.report.rows {
        println!(
            "level 1/h={:<4} unknowns={:<8} cons={:.2e} jump={:.2e} solve[{} it={} res={:.2e}]",
            row.inv_h,
            row.n_unknowns,
            row.cons_residual,
            row.flux_jump,
            row.solve.method,
            row.solve.iterations,
            row.solve.residual
        );
    }
    for file in &study.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn cmd_solve(args: RunArgs) -> Result<(), AnyError> {
    let config = build_config(&args, true)?;
    let problem = config.problem();
    let inv_h = config.levels[0];
    let level = solve_level(&config, &problem, inv_h)?;
    let row = &level.report;
    println!(
        "{} k={} l={} tau=({}, {}) 1/h={} unknowns={}",
        problem.name, config.k, config.l, config.tau1, config.tau2, inv_h, row.n_unknowns
    );
    if let Some(n) = row.norms {
        println!("  ||e_0||      = {:.6e}", n.e0);
        println!("  ||grad e_0|| = {:.6e}", n.grad_e0);
        println!("  ||e_b||      = {:.6e}", n.eb);
        println!("  ||e_n||      = {:.6e}", n.en);
    }
    if let Some(su) = row.seminorm_u {
        println!("  |||e_h|||_Wh      = {:.6e}", su);
    }
    println!("  |||lambda|||_Mh   = {:.6e}", row.seminorm_lambda);
    println!("  conservation  = {:.6e}", row.cons_residual);
    println!("  flux jump     = {:.6e}", row.flux_jump);
    println!("  solve residual= {:.6e} ({})", row.solve.residual, row.solve.method);
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)?;
        let raster = pdwg::sample_field(&level.solution, &level.space, config.raster_resolution);
        let path = dir.join("field.csv");
        std::fs::write(&path, raster.to_csv())?;
        println!("wrote {}", path.display());
        let mesh_path = dir.join("mesh.txt");
        std::fs::write(&mesh_path, level.space.mesh.to_text())?;
        println!("wrote {}", mesh_path.display());
    }
    Ok(())
}

fn cmd_verify() -> Result<(), AnyError> {
    let report = run_verify();
    for line in report.lines() {
        println!("{line}");
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err("one or more properties failed".into())
    }
}

fn cmd_dump_matrix(args: RunArgs) -> Result<(), AnyError> {
    let config = build_config(&args, true)?;
    let problem = config.problem();
    let inv_h = config.levels[0];
    let mesh = Arc::new(pdwg::study::level_mesh(&config, &problem, inv_h)?);
    let mut space = WgSpace::new(mesh, config.k, config.l, config.tau1, config.tau2)?;
    if let Some(d) = config.quad_degree {
        space = space.with_quad_degree(d)?;
    }
    let system = assemble(&space, &problem)?;
    let dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let mat_path = dir.join("matrix.mtx");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&mat_path)?);
    system.matrix.write_matrix_market(&mut file)?;
    let rhs_path = dir.join("rhs.mtx");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&rhs_path)?);
    write_matrix_market_vector(&mut file, &system.rhs)?;
    println!(
        "wrote {} ({} x {}, {} nonzeros) and {}",
        mat_path.display(),
        system.matrix.n,
        system.matrix.n,
        system.matrix.nnz(),
        rhs_path.display()
    );
    Ok(())
}

fn read_config_file(path: &PathBuf) -> Result<HashMap<String, String>, AnyError> {
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), lineno + 1))?;
        map.insert(key.trim().replace('-', "_"), value.trim().to_string());
    }
    Ok(map)
}

/// Merge config file and flags (flags win) into a validated study config.
fn build_config(args: &RunArgs, single_level: bool) -> Result<StudyConfig, AnyError> {
    let file = match &args.config {
        Some(path) => read_config_file(path)?,
        None => HashMap::new(),
    };
    let get = |key: &str| file.get(key).cloned();
    let parse = |key: &str, value: &str| -> Result<f64, AnyError> {
        value.parse().map_err(|_| format!("bad {key}: {value:?}").into())
    };

    let example_name = args
        .example
        .clone()
        .or_else(|| get("example"))
        .ok_or("missing --example (ex1..ex5)")?
        .to_lowercase();
    let domain_name = args
        .domain
        .clone()
        .or_else(|| get("domain"))
        .unwrap_or_else(|| "square".into())
        .to_lowercase();
    let domain = match domain_name.as_str() {
        "square" | "unit-square" | "unitsquare" => DomainChoice::UnitSquare,
        "lshape" | "l-shape" | "l" => DomainChoice::LShape,
        other => return Err(format!("unknown domain {other:?}").into()),
    };
    let eps = match args.eps.or(get("eps").map(|v| parse("eps", &v)).transpose()?) {
        Some(e) => e,
        None => 1e-10,
    };
    let f_choice = match args.f.or(get("f").map(|v| v.parse::<u8>()).transpose().map_err(|_| "bad f")?) {
        Some(0) => LoadChoice::Zero,
        Some(1) | None => LoadChoice::One,
        Some(other) => return Err(format!("f must be 0 or 1, got {other}").into()),
    };
    let example = match example_name.as_str() {
        "ex1" | "1" => ExampleId::Ex1,
        "ex2" | "2" => ExampleId::Ex2,
        "ex3" | "3" => {
            eprintln!("note: ex3 uses an isotropic diffusion tensor a = diag(eps, eps), eps = {eps:e}");
            ExampleId::Ex3 { eps }
        }
        "ex4" | "4" => ExampleId::Ex4 { f: f_choice },
        "ex5" | "5" => ExampleId::Ex5 { domain, f: f_choice },
        other => return Err(format!("unknown example {other:?}").into()),
    };

    let k = match args.k.or(get("k").map(|v| v.parse()).transpose().map_err(|_| "bad k")?) {
        Some(k) => k,
        None => 1,
    };
    let l_text = args.l.clone().or_else(|| get("l")).unwrap_or_else(|| "k".into());
    let l = match l_text.trim().to_lowercase().as_str() {
        "k" => k,
        "k-1" | "k−1" => k.checked_sub(1).ok_or("l = k-1 requires k >= 1")?,
        other => other.parse::<usize>().map_err(|_| format!("bad l: {other:?}"))?,
    };

    let tau1 = match args.tau1.or(get("tau1").map(|v| parse("tau1", &v)).transpose()?) {
        Some(t) => t,
        None => 1.0,
    };
    let tau2 = match args.tau2.or(get("tau2").map(|v| parse("tau2", &v)).transpose()?) {
        Some(t) => t,
        None => 1.0,
    };

    let levels: Vec<usize> = if single_level {
        let level = args
            .level
            .or(get("level").map(|v| v.parse()).transpose().map_err(|_| "bad level")?)
            .unwrap_or(16);
        vec![level]
    } else {
        let text = args.levels.clone().or_else(|| get("levels"));
        match text {
            Some(t) => t
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|_| format!("bad level {s:?}").into()))
                .collect::<Result<_, AnyError>>()?,
            // ladders matching the reference tables
            None if k >= 2 => vec![2, 4, 8, 16, 32],
            None => vec![4, 8, 16, 32, 64],
        }
    };

    let solver_name = args.solver.clone().or_else(|| get("solver")).unwrap_or_else(|| "direct".into());
    let solver = match solver_name.to_lowercase().as_str() {
        "direct" => SolveOptions::direct(),
        "minres" => SolveOptions::minres(),
        other => return Err(format!("unknown solver {other:?}").into()),
    };

    let quad_degree =
        args.quad_degree.or(get("quad_degree").map(|v| v.parse()).transpose().map_err(|_| "bad quad_degree")?);
    let out_dir = args.out.clone().or_else(|| get("out").map(PathBuf::from));

    let mut config = StudyConfig::new(example, k, l, levels);
    config.tau1 = tau1;
    config.tau2 = tau2;
    config.domain = domain;
    config.solver = solver;
    config.quad_degree = quad_degree;
    config.out_dir = out_dir;
    config.validate()?;
    Ok(config)
}
