use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ecfm::characterizer::{CharacterizerKind, WordVectors};
use ecfm::clusterer;
use ecfm::corpus;
use ecfm::eval::{self, RunReport};
use ecfm::pipeline::{Mode, Pipeline, PipelineConfig};
use ecfm::selector::SelectorOrder;
use ecfm::synthgen::{self, SynthConfig};
use ecfm::{config, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "ecfm", version, about = "Event-aware semi-supervised fake news detection")]
struct Cli {
    /// Flat `key = value` file with pipeline settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Worker threads for scoring and sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assign event ids by single-pass clustering.
    Cluster {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Cosine similarity needed to join an event.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Run the self-training loop and evaluate on the test news.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Report destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Checkpoint file written after the run and every `--checkpoint-every` updates.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        checkpoint_every: usize,
        /// Continue from a checkpoint instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Pretrained word vectors for the text-CNN embeddings.
        #[arg(long)]
        vectors: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the test news of its dataset.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average test metrics over seeds for every alpha of a grid.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Alpha-versus-metric CSV.
        #[arg(long)]
        out: PathBuf,
        /// Directory for the per-run JSON reports.
        #[arg(long)]
        reports: Option<PathBuf>,
    },
    /// Generate a synthetic corpus.
    Synth {
        #[arg(long, default_value_t = 200)]
        events: usize,
        #[arg(long, default_value_t = 20)]
        news_per_event: usize,
        #[arg(long, default_value_t = 0.1)]
        labeled_frac: f64,
        #[arg(long, default_value_t = 1.0)]
        purity: f64,
        #[arg(long, default_value_t = 0.5)]
        balance: f64,
        #[arg(long, default_value_t = 200)]
        shared_vocab: usize,
        #[arg(long, default_value_t = 20)]
        signal_vocab: usize,
        #[arg(long, default_value_t = 8)]
        tokens_per_news: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Export a run report as JSON or CSV, optionally against a second report.
    Report {
        #[arg(long)]
        report: PathBuf,
        /// Second report; deltas are `report - against`.
        #[arg(long)]
        against: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Output file for json, output directory for csv (stdout / `.` when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Default)]
struct PipelineArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    updates: Option<usize>,
    #[arg(long)]
    mode: Option<Mode>,
    /// Use raw event means instead of the Kalman estimate.
    #[arg(long)]
    no_kalman: bool,
    #[arg(long)]
    characterizer: Option<CharacterizerKind>,
    #[arg(long)]
    selector_order: Option<SelectorOrder>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs_per_update: Option<usize>,
    #[arg(long)]
    lambda_l: Option<f64>,
    #[arg(long)]
    lambda_s: Option<f64>,
}

impl PipelineArgs {
    fn apply(&self, c: &mut PipelineConfig) {
        macro_rules! take {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v; })*
            };
        }
        take!(
            alpha => c.alpha,
            updates => c.updates,
            mode => c.mode,
            characterizer => c.characterizer,
            selector_order => c.selector_order,
            learning_rate => c.learning_rate,
            batch_size => c.batch_size,
            epochs_per_update => c.epochs_per_update,
            lambda_l => c.lambda_l,
            lambda_s => c.lambda_s,
        );
        if self.no_kalman {
            c.use_kalman = false;
        }
    }
}

fn pipeline_config(cli: &Cli, args: &PipelineArgs) -> Result<PipelineConfig> {
    let mut c = PipelineConfig::default();
    if let Some(path) = &cli.config {
        config::load_into(&mut c, path)?;
    }
    args.apply(&mut c);
    if let Some(seed) = cli.seed {
        c.seed = seed;
    }
    c.validate()?;
    Ok(c)
}

fn write_or_print(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_err(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| io_err(Path::new("<stdout>"), e))
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn summarize(report: &RunReport) {
    eprintln!(
        "accuracy {:.4}  auc {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  ({} test news)",
        report.accuracy, report.auc_roc, report.precision, report.recall, report.f1, report.test_size
    );
    for flag in &report.flags {
        eprintln!("flag: {flag}");
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Cluster { data, out, tau } => {
            let mut c = PipelineConfig::default();
            if let Some(path) = &cli.config {
                config::load_into(&mut c, path)?;
            }
            let tau = tau.unwrap_or(c.tau);
            let dataset = corpus::ingest(data)?;
            let (clustered, state) = clusterer::assign_events(&dataset, tau)?;
            corpus::write_dataset(&clustered, out)?;
            eprintln!(
                "{} news in {} events ({} new clusters)",
                clustered.len(),
                clustered.event_count(),
                state.len()
            );
        }
        Command::Train {
            data,
            pipeline,
            out,
            checkpoint,
            checkpoint_every,
            resume,
            vectors,
        } => {
            let dataset = corpus::ingest(data)?;
            let mut run = match resume {
                Some(path) => Pipeline::resume(path, &dataset)?,
                None => Pipeline::new(pipeline_config(cli, pipeline)?, &dataset)?,
            };
            if let Some(path) = vectors {
                let wv = WordVectors::load(path)?;
                let matched = run.import_vectors(&wv)?;
                eprintln!("imported {matched} word vectors");
            }
            while !run.is_done() {
                let t = run.step()?.t;
                if let Some(path) = checkpoint {
                    if *checkpoint_every > 0 && t % checkpoint_every == 0 {
                        run.checkpoint(path)?;
                    }
                }
            }
            if let Some(path) = checkpoint {
                run.checkpoint(path)?;
            }
            let report = run.report()?;
            summarize(&report);
            write_or_print(&(report.to_json()? + "\n"), out.as_deref())?;
        }
        Command::Eval {
            data,
            checkpoint,
            out,
        } => {
            let dataset = corpus::ingest(data)?;
            let run = Pipeline::resume(checkpoint, &dataset)?;
            let report = run.report()?;
            summarize(&report);
            write_or_print(&(report.to_json()? + "\n"), out.as_deref())?;
        }
        Command::Sweep {
            data,
            pipeline,
            alphas,
            runs,
            out,
            reports,
        } => {
            let dataset = corpus::ingest(data)?;
            let base = pipeline_config(cli, pipeline)?;
            let table = eval::sweep_alpha(alphas, *runs, &base, &dataset, cli.jobs.unwrap_or(0))?;
            eval::write_sweep_csv(&table, out)?;
            if let Some(dir) = reports {
                std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
                for report in &table.reports {
                    let name = format!("alpha{}_seed{}.json", report.config.alpha, report.seed);
                    report.write_json(dir.join(name))?;
                }
            }
            println!("{:>6} {:>9} {:>9} {:>9} {:>9} {:>9}", "alpha", "accuracy", "auc", "precision", "recall", "f1");
            for row in &table.rows {
                println!(
                    "{:>6.2} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                    row.alpha, row.accuracy, row.auc_roc, row.precision, row.recall, row.f1
                );
            }
        }
        Command::Synth {
            events,
            news_per_event,
            labeled_frac,
            purity,
            balance,
            shared_vocab,
            signal_vocab,
            tokens_per_news,
            output,
        } => {
            let config = SynthConfig {
                events: *events,
                news_per_event: *news_per_event,
                labeled_frac: *labeled_frac,
                purity: *purity,
                balance: *balance,
                shared_vocab: *shared_vocab,
                signal_vocab: *signal_vocab,
                tokens_per_news: *tokens_per_news,
                seed: cli.seed.unwrap_or(0),
            };
            let dataset = synthgen::generate(&config)?;
            corpus::write_dataset(&dataset, output)?;
            eprintln!(
                "wrote {} news ({} labeled train, {} test) in {} events",
                dataset.len(),
                dataset.labeled_train().len(),
                dataset.test().len(),
                dataset.event_count()
            );
        }
        Command::Report {
            report,
            against,
            format,
            out,
        } => {
            let a = RunReport::read_json(report)?;
            let b = against.as_ref().map(RunReport::read_json).transpose()?;
            match format {
                Format::Json => write_or_print(&(a.to_json()? + "\n"), out.as_deref())?,
                Format::Csv => {
                    let dir = out.clone().unwrap_or_else(|| PathBuf::from("."));
                    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
                    eval::write_metrics_csv(&a.metrics(), dir.join("metrics.csv"))?;
                    eval::write_epoch_csv(&a.epoch_logs, dir.join("epochs.csv"))?;
                    if let Some(b) = &b {
                        eval::write_comparison_csv(&a.metrics(), &b.metrics(), dir.join("comparison.csv"))?;
                    }
                }
            }
            if let Some(b) = &b {
                eval::write_comparison_table(&a.metrics(), &b.metrics(), &mut std::io::stderr())
                    .map_err(|e| io_err(Path::new("<stderr>"), e))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version exit 0, usage errors exit 2
            e.exit();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot start {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
