//! Command-line driver for the table+text QA pipeline.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod table;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tabtext_core::synth::{GoldPlacement, SynthConfig};

use crate::commands::{Ctx, RayonMapper};
use crate::config::Config;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "tabtext", version, about = "Question answering over tables with linked passages")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Config file (default: ./tabtext.toml when present)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. --set budget=256
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Artifact directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Load artifacts even when their config hash differs
    #[arg(long, global = true)]
    pub force: bool,
    #[command(flatten)]
    pub toggles: ToggleFlags,
    /// No progress output
    #[arg(short, long, global = true)]
    pub quiet: bool,
    /// More logging (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Debug, Args)]
pub struct ToggleFlags {
    /// Passage filtering by question similarity
    #[arg(long, global = true, overrides_with = "no_pf")]
    pub pf: bool,
    #[arg(long, global = true)]
    pub no_pf: bool,
    /// Retriever feedback when building extraction data
    #[arg(long, global = true, overrides_with = "no_rf")]
    pub rf: bool,
    #[arg(long, global = true)]
    pub no_rf: bool,
    /// Multi-span training
    #[arg(long, global = true, overrides_with = "first_span")]
    pub mst: bool,
    /// Train on the first answer occurrence only
    #[arg(long, global = true)]
    pub first_span: bool,
    /// Multi-instance row loss
    #[arg(long, global = true, overrides_with = "naive")]
    pub mil: bool,
    /// Treat every positive row as gold
    #[arg(long, global = true)]
    pub naive: bool,
    /// Joint row/span reranking
    #[arg(long, global = true, overrides_with = "no_rsr")]
    pub rsr: bool,
    #[arg(long, global = true)]
    pub no_rsr: bool,
}

impl ToggleFlags {
    fn apply(&self, cfg: &mut Config) {
        let pick = |on: bool, off: bool, cur: bool| if on { true } else if off { false } else { cur };
        cfg.pf = pick(self.pf, self.no_pf, cfg.pf);
        cfg.rf = pick(self.rf, self.no_rf, cfg.rf);
        cfg.mst = pick(self.mst, self.first_span, cfg.mst);
        cfg.mil = pick(self.mil, self.naive, cfg.mil);
        cfg.rsr = pick(self.rsr, self.no_rsr, cfg.rsr);
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the input files and store them as artifacts
    Ingest,
    /// Supervision ambiguity and context-length statistics
    Stats,
    /// Generate a synthetic benchmark
    Synth(SynthArgs),
    /// Build the BM25 table index
    IndexTables,
    /// Retrieve tables for every question
    Retrieve,
    /// Link table cells to passages with BM25
    Link,
    /// Find answer-bearing rows and spans
    Supervise,
    /// Train the row retriever
    TrainRr,
    /// Train the answer extractor
    TrainAe,
    /// Grid-search reranker weights on dev
    TuneReranker,
    /// Answer the test questions
    Predict,
    /// Score predictions
    Eval,
    /// Run the pipeline once per toggle set
    Ablate {
        /// Toggle sets such as none, mil+rf, all (default: config `ablate`)
        #[arg(long, value_delimiter = ' ', num_args = 1..)]
        toggles: Vec<String>,
    },
    /// Every stage from ingest to eval
    Run,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for the generated files
    pub dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tables: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub columns: Option<usize>,
    #[arg(long)]
    pub vocab: Option<usize>,
    #[arg(long)]
    pub p_multirow: Option<f64>,
    #[arg(long)]
    pub p_multispan: Option<f64>,
    #[arg(long)]
    pub dissimilarity: Option<f64>,
    /// Never place the gold occurrence first among repeated answers
    #[arg(long)]
    pub never_first: bool,
    #[arg(long)]
    pub p_answer_in_cell: Option<f64>,
    #[arg(long)]
    pub extra_passages: Option<usize>,
    #[arg(long)]
    pub dev_fraction: Option<f64>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

impl SynthArgs {
    pub fn to_config(&self) -> SynthConfig {
        let mut c = SynthConfig::default();
        macro_rules! set {
            ($($arg:ident => $field:ident),*) => {
                $(if let Some(v) = self.$arg { c.$field = v; })*
            };
        }
        set!(seed => seed, tables => n_tables, rows => rows_per_table, columns => columns,
             vocab => vocab_size, p_multirow => p_multirow, p_multispan => p_multispan,
             dissimilarity => dissimilarity, p_answer_in_cell => p_answer_in_cell,
             extra_passages => extra_passages, dev_fraction => dev_fraction,
             test_fraction => test_fraction);
        if self.never_first {
            c.placement = GoldPlacement::NeverFirst;
        }
        c
    }
}

fn load_config(g: &Global) -> CliResult<Config> {
    let mut cfg = Config::load(g.config.as_deref(), &g.overrides)?;
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    if let Some(b) = g.budget {
        cfg.budget = b;
    }
    if let Some(j) = g.jobs {
        cfg.jobs = j;
    }
    g.toggles.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn execute(cli: Cli) -> CliResult<()> {
    init_logging(cli.global.verbose);
    commands::set_quiet(cli.global.quiet);
    if let Command::Synth(args) = &cli.command {
        return commands::synth(&args.dir, &args.to_config());
    }
    let cfg = load_config(&cli.global)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let mapper = RayonMapper;
    pool.install(|| match &cli.command {
        Command::Ablate { toggles } => commands::ablate(&cfg, toggles, &mapper),
        Command::Run => {
            let ctx = Ctx::new(cfg.clone(), cli.global.force);
            for stage in commands::stages(cfg.open_domain) {
                commands::run_stage(&ctx, stage, &mapper)?;
            }
            Ok(())
        }
        cmd => {
            let stage = match cmd {
                Command::Ingest => "ingest",
                Command::Stats => "stats",
                Command::IndexTables => "index-tables",
                Command::Retrieve => "retrieve",
                Command::Link => "link",
                Command::Supervise => "supervise",
                Command::TrainRr => "train-rr",
                Command::TrainAe => "train-ae",
                Command::TuneReranker => "tune-reranker",
                Command::Predict => "predict",
                Command::Eval => "eval",
                Command::Synth(_) | Command::Ablate { .. } | Command::Run => unreachable!(),
            };
            commands::run_stage(&Ctx::new(cfg.clone(), cli.global.force), stage, &mapper)
        }
    })
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
