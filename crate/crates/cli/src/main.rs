use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use risnoma_core::scenario::{outage_table, run_partitioning, run_scenario, Overrides};
use risnoma_core::{Error, MetricReport, Scenario};

#[derive(Parser)]
#[command(name = "risnoma", about = "RIS-partitioned NOMA link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo power sweep of the configured schemes.
    Simulate(RunArgs),
    /// Threshold, step and fairness search for the RIS partition.
    Partition(RunArgs),
    /// Closed-form outage of the C2 users over the power sweep.
    OutageTable(RunArgs),
    /// Print the version.
    Version,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    correlated: Option<Switch>,
    /// Phase resolution in bits, or `cont` for continuous phases.
    #[arg(long, value_parser = parse_bits)]
    phase_bits: Option<PhaseBits>,
    /// Von Mises concentration, or `inf` for error-free phases.
    #[arg(long, value_parser = parse_kappa)]
    kappa: Option<Kappa>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy)]
struct PhaseBits(Option<u32>);

#[derive(Clone, Copy)]
struct Kappa(Option<f64>);

fn parse_bits(s: &str) -> Result<PhaseBits, String> {
    if s == "cont" {
        return Ok(PhaseBits(None));
    }
    s.parse()
        .map(|b| PhaseBits(Some(b)))
        .map_err(|_| format!("expected a bit count or 'cont', got '{s}'"))
}

fn parse_kappa(s: &str) -> Result<Kappa, String> {
    if s == "inf" {
        return Ok(Kappa(None));
    }
    match s.parse::<f64>() {
        Ok(k) if k.is_finite() && k >= 0.0 => Ok(Kappa(Some(k))),
        _ => Err(format!(
            "expected a non-negative concentration or 'inf', got '{s}'"
        )),
    }
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            trials: self.trials,
            correlated: self.correlated.map(|c| matches!(c, Switch::On)),
            phase_bits: self.phase_bits.map(|b| b.0),
            kappa: self.kappa.map(|k| k.0),
        }
    }

    fn scenario(&self) -> Result<Scenario, Error> {
        if let Some(t) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .map_err(|e| Error::Config(format!("cannot start {t} worker threads: {e}")))?;
        }
        let mut sc = Scenario::load(&self.config)?;
        sc.apply(&self.overrides())?;
        Ok(sc)
    }

    fn write(&self, report: &MetricReport) -> Result<(), Error> {
        match &self.out {
            Some(p) => report.emit(p),
            None => std::io::stdout()
                .write_all(report.to_csv().as_bytes())
                .map_err(|source| Error::Io {
                    path: Path::new("<stdout>").to_owned(),
                    source,
                }),
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Version => {
            println!("risnoma {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
        Command::Simulate(args) => {
            let sc = args.scenario()?;
            args.write(&run_scenario(&sc)?)
        }
        Command::OutageTable(args) => {
            let sc = args.scenario()?;
            args.write(&outage_table(&sc)?)
        }
        Command::Partition(args) => {
            let sc = args.scenario()?;
            let r = run_partitioning(&sc)?;
            eprintln!(
                "N_thr = {} (P = {:.4}{}), b = {}{}, |S| = {}",
                r.bounds.n_thr,
                r.threshold.probability,
                if r.threshold.capped { ", capped" } else { "" },
                r.bounds.step,
                if r.step.capped { " (capped)" } else { "" },
                r.candidates
            );
            for s in &r.searches {
                eprintln!(
                    "P = {} dBm: best {} with Jain {:.6}",
                    s.p_dbm, s.result.best, s.result.jain
                );
            }
            let m2 = sc.system_config()?.m2();
            args.write(&r.to_report(&sc.name, m2))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("risnoma: {e}");
            match e {
                Error::Numerical { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
