mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use skf_core::eval::EmMode;

use config::PipelineConfig;

#[derive(Parser, Debug)]
#[command(name = "skf", version, about = "Schema-knowledge corpora and Text-to-SQL evaluation")]
struct Cli {
    /// TOML config file; `SKF_*` environment variables and flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Spider-layout database root (`<root>/<db_id>/<db_id>.sqlite`).
    #[arg(long, global = true)]
    db_root: Option<PathBuf>,
    /// Spider `tables.json` selecting and naming the databases.
    #[arg(long, global = true)]
    tables_json: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Global seed for sampling and generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump database schemas as JSON.
    Extract {
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Show the representative subtables and value samples of one database.
    Sample {
        #[arg(long)]
        db: String,
        /// Restrict to one table.
        #[arg(long)]
        table: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the training corpus: corpus.jsonl, contexts.jsonl and stats.json.
    Generate(GenerateArgs),
    /// Score predictions against gold SQL.
    Evaluate(EvaluateArgs),
    /// Corpus statistics and checks, AST and schema dumps.
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Template pack file.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Instances per task kind per database.
    #[arg(long)]
    quota: Option<usize>,
    /// Keep schema-task quotas as configured instead of balancing objectives.
    #[arg(long)]
    no_balance: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Gold file in Spider `dev.json` layout.
    #[arg(long)]
    gold: PathBuf,
    /// Predictions: one SQL per line, or JSONL `{"index", "sql"}`.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_parser = parse_em_mode)]
    em_mode: Option<EmMode>,
    #[arg(long)]
    timeout_secs: Option<f64>,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-example verdicts as JSONL.
    #[arg(long)]
    verdicts: Option<PathBuf>,
}

fn parse_em_mode(s: &str) -> Result<EmMode, String> {
    s.parse()
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["corpus", "parse", "schema"])))]
struct StatsArgs {
    /// Corpus JSONL to recount and validate.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Stats JSON to compare the recount with.
    #[arg(long, requires = "corpus")]
    stats: Option<PathBuf>,
    /// Fill contexts sidecar; enables the answer re-derivation check.
    #[arg(long, requires = "corpus")]
    contexts: Option<PathBuf>,
    /// Template pack the corpus was generated with.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Print the parsed AST of one SQL query.
    #[arg(long)]
    parse: Option<String>,
    /// Print the schema of one database.
    #[arg(long)]
    schema: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("SKF_LOG")
        .target(env_logger::Target::Stderr)
        .init();
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, failure::Failure> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref()).map_err(failure::Failure::Input)?;
    if let Some(p) = &cli.db_root {
        cfg.db_root = p.clone();
    }
    if let Some(p) = &cli.tables_json {
        cfg.tables_json = Some(p.clone());
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(s) = cli.seed {
        cfg.generation.seed = s;
        cfg.sampler.rng_seed = s;
    }
    match &cli.command {
        Command::Generate(a) => {
            if let Some(p) = &a.out_dir {
                cfg.output_path = p.clone();
            }
            if let Some(p) = &a.templates {
                cfg.templates_path = Some(p.clone());
            }
            if let Some(q) = a.quota {
                cfg.generation.default_quota = q;
            }
            if a.no_balance {
                cfg.generation.balance_objectives = false;
            }
        }
        Command::Evaluate(a) => {
            if let Some(m) = a.em_mode {
                cfg.eval.em_mode = m;
            }
            if let Some(t) = a.timeout_secs {
                cfg.eval.timeout_secs = t;
            }
        }
        Command::Stats(a) => {
            if let Some(p) = &a.templates {
                cfg.templates_path = Some(p.clone());
            }
        }
        _ => {}
    }
    cfg.eval.jobs = cfg.jobs;
    cfg.validate().map_err(failure::Failure::Input)?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), failure::Failure> {
    let cfg = build_config(cli)?;
    match &cli.command {
        Command::Extract { out } => commands::extract(&cfg, out.as_deref()),
        Command::Sample { db, table, out } => commands::sample(&cfg, db, table.as_deref(), out.as_deref()),
        Command::Generate(_) => commands::generate(&cfg),
        Command::Evaluate(a) => commands::evaluate(&cfg, &a.gold, &a.pred, a.out.as_deref(), a.verdicts.as_deref()),
        Command::Stats(a) => {
            if let Some(sql) = &a.parse {
                commands::dump_ast(sql, a.out.as_deref())
            } else if let Some(db) = &a.schema {
                commands::dump_schema(&cfg, db, a.out.as_deref())
            } else {
                let corpus = a.corpus.as_deref().expect("clap enforces one mode");
                commands::stats(&cfg, corpus, a.stats.as_deref(), a.contexts.as_deref(), a.out.as_deref())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("skf: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
