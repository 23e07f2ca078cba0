use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use roadsignal::corpus::to_jsonl;
use roadsignal::pipeline::{self, RunConfig, RunManifest, DATA_STAGES};
use roadsignal::synthetic::{generate, SyntheticConfig};
use roadsignal::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_STAGE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "roadsignal", version, about = "Transportation event detection and geocoding for short messages")]
struct Cli {
    /// key = value run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output root; runs land in <out>/<run_id>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override any config key, e.g. `--set replicates=10`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load the corpus and report skipped records.
    Ingest,
    /// Tokenize and clean every message.
    Preprocess,
    /// Fit the tier-1 featurizer on the training split.
    Featurize,
    /// Fit the featurizer and train the tier-1 SVM.
    Train,
    /// Apply a trained tier-1 model to every message.
    Classify,
    /// Score a trained tier-1 model on the held-out split.
    Evaluate,
    /// Compare L-LDA, SVM and hybrid over seeded replicates.
    Replicates,
    /// Tier-1 accuracy for each T-SVD rank.
    RankSweep {
        /// Comma-separated ranks.
        #[arg(long, value_delimiter = ',', required = true)]
        ranks: Vec<usize>,
    },
    /// Extract, match and resolve locations for every message.
    Geocode,
    /// Run every stage end to end.
    Pipeline,
    /// Write a seeded synthetic corpus as JSON Lines.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 120)]
        per_class: usize,
        #[arg(long, default_value_t = 200)]
        non_transportation: usize,
    },
    /// Re-hash every file listed in a run manifest.
    Audit {
        run_dir: PathBuf,
    },
}

fn config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Stage { stage, .. } if DATA_STAGES.contains(&stage.as_str()) => EXIT_DATA,
        Error::Stage { .. } => EXIT_STAGE,
        Error::InvalidInput(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn summary(m: &RunManifest, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "run_id": m.run_id,
        "command": m.command,
        "stages": m.stages.iter().map(|s| &s.name).collect::<Vec<_>>(),
        "files": m.files.len(),
        "result": extra,
    })
}

fn run(cli: &Cli, cfg: &RunConfig) -> Result<serde_json::Value, Error> {
    let none = serde_json::Value::Null;
    Ok(match &cli.command {
        Command::Ingest => summary(&pipeline::cmd_ingest(cfg)?, none),
        Command::Preprocess => summary(&pipeline::cmd_preprocess(cfg)?, none),
        Command::Featurize => summary(&pipeline::cmd_featurize(cfg)?, none),
        Command::Train => summary(&pipeline::cmd_train(cfg)?, none),
        Command::Classify => summary(&pipeline::cmd_classify(cfg)?, none),
        Command::Evaluate => summary(&pipeline::cmd_evaluate(cfg)?, none),
        Command::Replicates => {
            let (m, s) = pipeline::cmd_replicates(cfg)?;
            let means: serde_json::Map<_, _> = s
                .set
                .run_accuracies
                .keys()
                .map(|k| (k.clone(), json!(s.set.mean(k))))
                .collect();
            summary(&m, json!({ "mean_accuracy": means }))
        }
        Command::RankSweep { ranks } => {
            let (m, rows) = pipeline::cmd_rank_sweep(cfg, ranks)?;
            summary(&m, json!(rows))
        }
        Command::Geocode => {
            let (m, g) = pipeline::cmd_geocode(cfg)?;
            summary(&m, json!({ "messages": g.messages, "resolved": g.resolved, "validated": g.validated }))
        }
        Command::Pipeline => {
            let (m, s) = pipeline::cmd_pipeline(cfg)?;
            summary(
                &m,
                json!({
                    "tier1_accuracy": s.tier1.accuracy,
                    "tier2_mean_accuracy": s.tier2.set.run_accuracies.keys()
                        .map(|k| (k.clone(), json!(s.tier2.set.mean(k))))
                        .collect::<serde_json::Map<_, _>>(),
                    "geocoded": s.geo.messages,
                    "resolved": s.geo.resolved,
                }),
            )
        }
        Command::Synth { .. } | Command::Audit { .. } => unreachable!("handled without a config"),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match &cli.command {
        Command::Synth {
            output,
            per_class,
            non_transportation,
        } => {
            let cfg = SyntheticConfig {
                seed: cli.seed.unwrap_or(SyntheticConfig::default().seed),
                per_class: *per_class,
                non_transportation: *non_transportation,
                ..SyntheticConfig::default()
            };
            let corpus = generate(&cfg);
            if let Err(e) = std::fs::write(output, to_jsonl(corpus.messages())) {
                eprintln!("error: cannot write {}: {e}", output.display());
                return ExitCode::from(EXIT_DATA);
            }
            println!("{}", json!({ "messages": corpus.len(), "output": output }));
            return ExitCode::SUCCESS;
        }
        Command::Audit { run_dir } => {
            return match pipeline::audit(run_dir) {
                Ok(bad) if bad.is_empty() => {
                    println!("{}", json!({ "ok": true }));
                    ExitCode::SUCCESS
                }
                Ok(bad) => {
                    println!("{}", json!({ "ok": false, "mismatched": bad }));
                    ExitCode::from(EXIT_DATA)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_DATA)
                }
            };
        }
        _ => {}
    }
    let cfg = match config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(&cli, &cfg) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
