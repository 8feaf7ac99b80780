use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use homobound::driver::{build_material, emit_report, run_experiment, validate_config, Format};

#[derive(Parser)]
#[command(name = "homobound", version, about = "Guaranteed bounds on homogenized matrices by FFT-based GaNi")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the grid sweep described by a JSON config.
    Solve {
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Grids solved concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// CG tolerance (overrides the config).
        #[arg(long)]
        tol: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("HOMOBOUND_THREADS").ok().and_then(|v| v.parse().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Solve {
            config,
            out,
            format,
            jobs,
            tol,
        } => solve(&config, out, format, jobs, tol),
    }
}

fn solve(path: &Path, out: Option<PathBuf>, format: Option<FormatArg>, jobs: usize, tol: Option<f64>) -> ExitCode {
    let raw = match std::fs::read_to_string(path) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(1);
        }
    };
    let mut cfg = match validate_config(&raw) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(t) = tol {
        cfg.solver.tol = t;
        if let Err(e) = cfg.solver.validate() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    if let Some(f) = format {
        cfg.output.formats = match f {
            FormatArg::Json => vec![Format::Json],
            FormatArg::Csv => vec![Format::Csv],
            FormatArg::Both => vec![Format::Json, Format::Csv],
        };
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let material = match build_material(&cfg, base) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let reports = run_experiment(&cfg, &material, jobs.max(1));
    let dir = out.unwrap_or_else(|| base.join(&cfg.output.dir));
    let failed = reports.iter().filter(|r| r.failure.is_some()).count();
    for r in &reports {
        let grid: Vec<String> = r.grid.iter().map(|n| n.to_string()).collect();
        match (&r.failure, &r.error) {
            (Some(msg), _) => eprintln!("grid {}: FAILED: {msg}", grid.join("x")),
            (None, Some(d)) => println!("grid {}: D_11 = {:.6e}", grid.join("x"), d.data[0]),
            (None, None) => println!("grid {}: done", grid.join("x")),
        }
        for w in &r.diagnostics.warnings {
            eprintln!("grid {}: warning: {w}", grid.join("x"));
        }
    }
    match emit_report(&cfg, &reports, &dir, &cfg.output.formats) {
        Ok(paths) => paths.iter().for_each(|p| println!("wrote {}", p.display())),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if failed > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
