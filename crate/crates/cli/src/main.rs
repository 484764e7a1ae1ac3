use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use observer_core::harness::{
    defect_sweep, export_all, run_scenario, ExperimentResult, Scenario, DEFAULT_OUTPUT_DIR,
    RATIO_BAND,
};
use observer_core::Error;

/// Environment variable overriding the output directory.
const OUT_ENV: &str = "OBSERVER_LAB_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "observer-lab",
    version,
    about = "Compare adaptive state observers under measurement noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario from a TOML config and write CSV, SVG and metrics.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in oscillator scenario.
    Paper {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the disturbance amplitude and tabulate the cubic-regression defect.
    Sweep {
        #[arg(long = "delta-scale", value_delimiter = ',', required = true, num_args = 1..)]
        delta_scale: Vec<f64>,
        /// Scenario to sweep; defaults to the built-in one.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check a config file without running it.
    Validate { config: PathBuf },
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn classify(err: Error) -> Self {
        match err {
            Error::Validation { .. } | Error::Config(_) | Error::UnknownFigure(_) => {
                Failure::Usage(err.into())
            }
            other => Failure::Runtime(other.into()),
        }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(|e| match e {
        Error::Io { .. } => Failure::Usage(anyhow::Error::from(e).context("cannot read config")),
        other => Failure::classify(other),
    })
}

fn output_dir(flag: Option<PathBuf>, scenario: &Scenario) -> PathBuf {
    flag.or_else(|| {
        std::env::var_os(OUT_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    })
    .or_else(|| scenario.output.dir.clone())
    .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn summary(r: &ExperimentResult) -> String {
    let mut out = format!(
        "config {}  samples {}  step {}\n",
        r.provenance.config_hash, r.provenance.samples, r.provenance.step
    );
    out.push_str("scheme\ti\teps_max\teps_mean\ttail_theta_err\tterminal_theta_err\n");
    for m in &r.metrics.schemes {
        for i in 0..m.eps_max.len() {
            out.push_str(&format!(
                "{}\t{}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.6e}\n",
                m.name,
                i + 1,
                m.eps_max[i],
                m.eps_mean[i],
                m.tail_theta_error[i],
                m.terminal_theta_error[i]
            ));
        }
    }
    let a2 = &r.metrics.assumption2;
    for (i, (max, ok)) in a2.max_abs.iter().zip(&a2.ok).enumerate() {
        out.push_str(&format!(
            "mixed disturbance channel {}: max |d1| = {max:.6}{}\n",
            i + 1,
            if *ok { "" } else { "  (>= 1: bound violated)" }
        ));
    }
    out
}

fn execute(scenario: &Scenario, out: Option<PathBuf>) -> Result<(), Failure> {
    let dir = output_dir(out, scenario);
    let result = run_scenario(scenario).map_err(Failure::classify)?;
    let written = export_all(&result, &dir)
        .with_context(|| format!("writing results to {}", dir.display()))
        .map_err(Failure::Runtime)?;
    print!("{}", summary(&result));
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, out } => execute(&load(&config)?, out),
        Command::Paper { out } => execute(&Scenario::paper(), out),
        Command::Sweep {
            delta_scale,
            config,
        } => {
            let scenario = match config {
                Some(path) => load(&path)?,
                None => Scenario::paper(),
            };
            let report = defect_sweep(&scenario, &delta_scale).map_err(Failure::classify)?;
            print!("{}", report.table());
            println!(
                "ratios within [{}, {}]: {}",
                RATIO_BAND.0,
                RATIO_BAND.1,
                if report.ratios_within(RATIO_BAND) {
                    "yes"
                } else {
                    "no"
                }
            );
            Ok(())
        }
        Command::Validate { config } => {
            let scenario = load(&config)?;
            let samples = scenario.time_grid().map_err(Failure::classify)?.len();
            println!(
                "ok: {} (order {}, {samples} samples, config {})",
                config.display(),
                scenario.order(),
                scenario.config_hash()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
