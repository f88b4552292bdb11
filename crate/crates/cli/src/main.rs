use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use heatkernel::constants::{consistency_report, ConstantsBundle};
use heatkernel::harness::{
    exit_code, run, run_kernel, run_oracle, run_validate, write_density_csv, write_kernel, write_report, BoundReport,
    HarnessError, OutputFormat, Overrides, RunConfig, Stage, EXIT_PASS, EXIT_RUNTIME,
};

#[derive(Debug, Parser)]
#[command(name = "heatkernel", version, about = "Discrete heat kernels and verification of their bounds")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the Monte Carlo seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory from the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Format printed on stdout.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the config and check the operator's structural conditions.
    Validate { config: PathBuf },
    /// Print the constants for a dimension and ellipticity.
    Constants {
        #[arg(long = "N")]
        n: u32,
        #[arg(long)]
        lambda: f64,
        #[arg(long = "H0", default_value_t = 0.0, allow_hyphen_values = true)]
        h0: f64,
        #[arg(long = "H0star", default_value_t = 0.0, allow_hyphen_values = true)]
        h0_star: f64,
    },
    /// Compute kernel columns and write kernel.bin / kernel.csv.
    Kernel { config: PathBuf },
    /// Run every enabled check.
    Check { config: PathBuf },
    /// Run the Monte Carlo oracle only.
    Oracle { config: PathBuf },
}

fn load(path: &Path) -> Result<RunConfig, HarnessError> {
    Ok(RunConfig::from_path(path)?)
}

fn pick_format(cli: Option<Format>, config: Option<OutputFormat>) -> Format {
    match (cli, config) {
        (Some(f), _) => f,
        (None, Some(OutputFormat::Csv)) => Format::Csv,
        _ => Format::Json,
    }
}

fn print_report(report: &BoundReport, format: Format) -> io::Result<()> {
    let stdout = io::stdout();
    match format {
        Format::Json => report.write_json(stdout.lock()),
        Format::Csv => report.write_csv(stdout.lock()),
    }
}

fn finish(report: &BoundReport, dir: &Path, format: Format) -> Result<i32, HarnessError> {
    write_report(report, dir)?;
    print_report(report, format).map_err(|e| HarnessError::Stage {
        stage: Stage::Output,
        message: e.to_string(),
    })?;
    for row in report.checks.iter().filter(|c| c.failed()) {
        log::error!("{} failed: margin {:e}, tolerance {:e}", row.name, row.margin, row.tolerance);
    }
    Ok(exit_code(report))
}

fn constants(n: u32, lambda: f64, h0: f64, h0_star: f64, format: Format) -> Result<i32, HarnessError> {
    let config_error = |e: heatkernel::constants::ConstantsError| HarnessError::Stage {
        stage: Stage::Config,
        message: e.to_string(),
    };
    let bundle = ConstantsBundle::new(n, lambda, h0.min(0.0), h0_star.min(0.0)).map_err(config_error)?;
    let consistency = consistency_report(n, lambda).map_err(config_error)?;
    let mut out = io::stdout().lock();
    let res = match format {
        Format::Json => {
            let value = serde_json::json!({ "constants": bundle, "consistency": consistency });
            writeln!(out, "{}", serde_json::to_string_pretty(&value).expect("serializable"))
        }
        Format::Csv => {
            let value = serde_json::to_value(bundle).expect("serializable");
            let mut res = writeln!(out, "name,value");
            if let serde_json::Value::Object(map) = value {
                for (k, v) in map {
                    res = res.and_then(|_| writeln!(out, "{k},{v}"));
                }
            }
            res
        }
    };
    res.map_err(|e| HarnessError::Stage { stage: Stage::Output, message: e.to_string() })?;
    Ok(EXIT_PASS)
}

fn execute(cli: Cli) -> Result<i32, HarnessError> {
    let overrides = Overrides { seed: cli.seed, out_dir: cli.out_dir.clone() };
    match cli.command {
        Command::Constants { n, lambda, h0, h0_star } => {
            constants(n, lambda, h0, h0_star, cli.format.unwrap_or(Format::Json))
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let (dir, format) = (out_dir(&cfg, &overrides), pick_format(cli.format, Some(cfg.output.format)));
            finish(&run_validate(cfg, &overrides)?, &dir, format)
        }
        Command::Kernel { config } => {
            let cfg = load(&config)?;
            let (dir, format) = (out_dir(&cfg, &overrides), pick_format(cli.format, Some(cfg.output.format)));
            let (report, kernel) = run_kernel(cfg, &overrides)?;
            if let Some(kernel) = kernel {
                write_kernel(&kernel, &dir)?;
            }
            finish(&report, &dir, format)
        }
        Command::Check { config } => {
            let cfg = load(&config)?;
            let (dir, format) = (out_dir(&cfg, &overrides), pick_format(cli.format, Some(cfg.output.format)));
            finish(&run(cfg, &overrides)?, &dir, format)
        }
        Command::Oracle { config } => {
            let cfg = load(&config)?;
            let (dir, format) = (out_dir(&cfg, &overrides), pick_format(cli.format, Some(cfg.output.format)));
            let (report, density) = run_oracle(cfg, &overrides)?;
            std::fs::create_dir_all(&dir)
                .map_err(|e| HarnessError::Stage { stage: Stage::Output, message: e.to_string() })?;
            write_density_csv(&density, &dir.join("mc_density.csv"))?;
            finish(&report, &dir, format)
        }
    }
}

fn out_dir(cfg: &RunConfig, overrides: &Overrides) -> PathBuf {
    overrides.out_dir.clone().unwrap_or_else(|| cfg.output.dir.clone())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_RUNTIME as u8);
        }
    }
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
