use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tsr::pipeline::{self, ExitStatus, RunConfig};
use tsr::TsrError;

#[derive(Parser, Debug)]
#[command(name = "tsr", version, about = "Two-stage reconstruction of two-phase microstructures")]
struct Cli {
    /// Plain-text `key = value` configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "tsr_out")]
    out: PathBuf,

    #[command(flatten)]
    tuning: Tuning,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Tuning {
    /// Number of random starts for stage two.
    #[arg(long = "m", global = true)]
    m: Option<usize>,
    #[arg(long, global = true)]
    t0: Option<f64>,
    #[arg(long, global = true)]
    ratio: Option<f64>,
    /// Convergence tolerance δ on the energy.
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    max_step: Option<usize>,
    #[arg(long, global = true)]
    max_loops: Option<usize>,
    #[arg(long, global = true)]
    scale_stride: Option<usize>,
    #[arg(long, global = true)]
    loop_c: Option<usize>,
    #[arg(long, global = true)]
    max_restarts: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report cluster statistics and descriptor curves of a target image.
    Analyze { target: PathBuf },
    /// Build one surrogate library per seed.
    Stage1 {
        target: PathBuf,
        /// Comma-separated library seeds.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Arrange a library by simulated annealing.
    Stage2 {
        target: PathBuf,
        #[arg(long)]
        library: PathBuf,
    },
    /// Compare a reconstruction against the target.
    Validate { target: PathBuf, reconstruction: PathBuf },
}

fn build_config(cli: &Cli) -> Result<RunConfig, TsrError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
    }
    let t = &cli.tuning;
    if let Some(v) = cli.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = t.m {
        cfg.m = v;
    }
    if let Some(v) = t.t0 {
        cfg.t0 = v;
    }
    if let Some(v) = t.ratio {
        cfg.ratio = v;
    }
    if let Some(v) = t.delta {
        cfg.delta = v;
    }
    if let Some(v) = t.max_step {
        cfg.max_step = Some(v);
    }
    if let Some(v) = t.max_loops {
        cfg.max_loops = v;
    }
    if let Some(v) = t.scale_stride {
        cfg.scale_stride = v;
    }
    if let Some(v) = t.loop_c {
        cfg.loop_c = v;
    }
    if let Some(v) = t.max_restarts {
        cfg.max_restarts = v;
    }
    if let Command::Stage1 { seeds: Some(s), .. } = &cli.command {
        cfg.library_seeds = pipeline::parse_seed_list(s)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<ExitStatus, TsrError> {
    let cfg = build_config(cli)?;
    let out = &cli.out;
    match &cli.command {
        Command::Analyze { target } => {
            let r = pipeline::cmd_analyze(target, out, &cfg)?;
            print!("{}", r.summary());
        }
        Command::Stage1 { target, .. } => {
            let r = pipeline::cmd_stage1(target, out, &cfg)?;
            println!("target mean q {:.6}", r.target_mean_q);
            for lib in &r.libraries {
                println!(
                    "seed {}: {} clusters, mean q {:.6}, lineal score {:e}",
                    lib.seed,
                    lib.shapes.len(),
                    lib.mean_q,
                    lib.lineal_score
                );
            }
            println!("preferred seed {}", r.libraries[r.preferred].seed);
        }
        Command::Stage2 { target, library } => {
            let r = pipeline::cmd_stage2(target, library, out, &cfg)?;
            println!(
                "E_start {:e}  E_final {:e}  accepted {}  converged {}",
                r.result.start_energy, r.result.final_energy, r.result.accepted, r.result.converged
            );
            return Ok(r.status());
        }
        Command::Validate { target, reconstruction } => {
            for d in pipeline::cmd_validate(target, reconstruction, out, &cfg)? {
                println!("{:<14} max {:.6e}  mean {:.6e}", d.kind.name(), d.max_abs, d.mean_abs);
            }
        }
    }
    Ok(ExitStatus::Converged)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ExitStatus::InputError as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("tsr: {e}");
            ExitCode::from(ExitStatus::for_error(&e) as u8)
        }
    }
}
