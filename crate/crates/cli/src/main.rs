use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use emlab::commands::{self, AnalyzeOptions, MetricsOptions, ReceiverSource};
use emlab::error::{CliError, EXIT_FAILURE};
use emlab::run::{execute_run, run_dir, run_id};
use emlab::sweep::run_sweep;
use emlab::transmit::{transmit, TransmitConfig};
use emlab::{Grid, RunConfig};
use emlab_core::analysis::{AblationProtocol, DEFAULT_ABLATION_REPETITIONS};

#[derive(Parser)]
#[command(name = "emlab", version, about = "Emergent-language signaling game experiments")]
struct Cli {
    /// Seed; overrides the config's seed for `train`, offsets `seeds = N` grids.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output root.
    #[arg(long, global = true, env = "EMLAB_OUT_DIR", default_value = "emlab-out")]
    out_dir: PathBuf,

    /// Exit with a distinct status when a run does not converge.
    #[arg(long, global = true)]
    strict_convergence: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one Sender/Receiver pair from a key=value config file.
    Train { config: PathBuf },
    /// Run every configuration of a grid file; finished runs are reused.
    Sweep {
        grid: PathBuf,
        /// Runs in flight at once.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// topsim, posdis and bosdis of a corpus file.
    Metrics {
        corpus: PathBuf,
        /// Sample at most this many input pairs for topsim.
        #[arg(long)]
        pair_cap: Option<u64>,
        /// Count the reserved symbol 0 in bosdis.
        #[arg(long)]
        all_symbols: bool,
        #[arg(long)]
        csv: bool,
    },
    /// MI profile, cue validity, vocabulary usage and ablations of a corpus.
    Analyze {
        corpus: PathBuf,
        /// Receiver checkpoint, or `oracle:<pos,..>` for the positional oracle.
        #[arg(long)]
        receiver: Option<ReceiverSource>,
        /// fix-one:P, shuffle-one:P, shuffle-within-message or fix-all (P from 0); repeatable.
        #[arg(long = "protocol")]
        protocols: Vec<AblationProtocol>,
        #[arg(long, default_value_t = DEFAULT_ABLATION_REPETITIONS)]
        repetitions: usize,
    },
    /// Retrain fresh Receivers on frozen Senders (run directories or checkpoints).
    Transmit {
        #[arg(required = true)]
        senders: Vec<PathBuf>,
        /// key=value transmission settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Spearman correlation between two columns of a CSV file.
    Correlate {
        table: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Keep only rows with `column=value`; repeatable.
        #[arg(long = "where", value_parser = parse_filter)]
        filters: Vec<(String, String)>,
    },
    /// Write the three reference languages as corpus files.
    Fixtures,
}

fn parse_filter(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected column=value, got '{s}'"))
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Train { config } => {
            let mut cfg = RunConfig::parse(&read(&config)?, &config.display().to_string())?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let dir = run_dir(&cli.out_dir, &run_id(&cfg));
            let record = execute_run(&cfg, &dir)?;
            for w in &record.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", record.to_json()?);
            eprintln!("run written to {}", dir.display());
            if cli.strict_convergence && !record.converged {
                return Err(CliError::NotConverged(format!(
                    "run {} did not converge in {} epochs",
                    record.run_id, record.epochs_run
                ))
                .into());
            }
        }
        Command::Sweep { grid, jobs } => {
            let configs = Grid::parse(&read(&grid)?, &grid.display().to_string())?.expand(seed)?;
            let summary = run_sweep(&configs, &cli.out_dir, jobs)?;
            eprintln!(
                "{} runs ({} reused, {} failed, {} not converged); table {}",
                summary.rows.len(),
                summary.resumed,
                summary.failed,
                summary.not_converged,
                summary.table.display()
            );
            if cli.strict_convergence && summary.not_converged > 0 {
                return Err(CliError::NotConverged(format!("{} runs did not converge", summary.not_converged)).into());
            }
        }
        Command::Metrics {
            corpus,
            pair_cap,
            all_symbols,
            csv,
        } => {
            let c = commands::load_corpus(&corpus)?;
            let report = commands::corpus_metrics(
                &c,
                MetricsOptions {
                    pair_cap,
                    seed,
                    all_symbols,
                },
            )?;
            if csv {
                println!("{}", emlab_core::metrics::MetricReport::CSV_HEADER);
                println!("{}", report.csv_row());
            } else {
                println!("{}", report.to_json()?);
            }
        }
        Command::Analyze {
            corpus,
            receiver,
            protocols,
            repetitions,
        } => {
            let c = commands::load_corpus(&corpus)?;
            let out = commands::analyze(
                &c,
                &AnalyzeOptions {
                    receiver,
                    protocols,
                    repetitions,
                    seed,
                },
                &cli.out_dir.join("analysis"),
            )?;
            if !out.ablations.is_empty() {
                print!("{}", emlab_core::analysis::ablation_table_csv(&out.ablations));
            }
            for f in out.files {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Transmit { senders, config } => {
            let cfg = match config {
                Some(p) => TransmitConfig::parse(&read(&p)?, &p.display().to_string())?,
                None => TransmitConfig::default(),
            };
            let out = transmit(&senders, &cfg, seed, &cli.out_dir.join("transmission"))?;
            for (id, why) in &out.skipped {
                eprintln!("skipped {id}: {why}");
            }
            for note in &out.notes {
                eprintln!("{note}");
            }
            if let Some(p) = &out.correlations {
                print!("{}", read(p)?);
            }
            for f in out.files {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Correlate { table, x, y, filters } => {
            let c = commands::correlate(&table, &x, &y, &filters)?;
            println!("{}", serde_json::to_string(&c)?);
        }
        Command::Fixtures => {
            for f in commands::write_fixtures(&cli.out_dir.join("fixtures"))? {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(EXIT_FAILURE, CliError::exit_code);
            ExitCode::from(code)
        }
    }
}
