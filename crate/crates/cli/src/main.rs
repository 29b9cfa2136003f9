use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use scamgraph_core::eval::Report;
use scamgraph_core::pipeline::{
    validate_config, ModelKind, Pipeline, PipelineConfig, PipelineError, ResampleScope, Stage, REPORT_FILE,
};

#[derive(Parser)]
#[command(name = "scamgraph", version, about = "Scam-contract detection on Ethereum transaction graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic transaction world into the configured data paths.
    Synth(Common),
    /// Parse transactions, build and prune the graph.
    Ingest(Common),
    /// Compute and normalize node features.
    Featurize(Common),
    /// Aggregate features onto contracts and build the contract graph.
    Contractize(Common),
    /// Split labeled contracts and rebalance with SMOTE-ENN.
    Resample(Common),
    /// Train one model.
    Train {
        #[arg(value_parser = parse_model)]
        model: ModelKind,
        #[command(flatten)]
        common: Common,
    },
    /// Score trained models on the held-out contracts.
    Evaluate(Common),
    /// Score contracts with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Contract dataset to score (default: `contracts.json` in the output directory).
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run every stage from ingest to evaluate.
    Pipeline(Common),
    /// Check a config document and list rule violations.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the default config document.
    DefaultConfig,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_parser = parse_scope)]
    resample_scope: Option<ResampleScope>,
    #[arg(long)]
    smote_k: Option<usize>,
    #[arg(long)]
    enn_k: Option<usize>,
    #[arg(long)]
    target_ratio: Option<f64>,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn parse_scope(s: &str) -> Result<ResampleScope, String> {
    s.parse()
}

impl Common {
    fn pipeline(&self) -> Result<Pipeline, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        if let Some(s) = self.resample_scope {
            cfg.resample.scope = s;
        }
        if let Some(k) = self.smote_k {
            cfg.resample.smote_k = k;
        }
        if let Some(k) = self.enn_k {
            cfg.resample.enn_k = k;
        }
        if let Some(r) = self.target_ratio {
            cfg.resample.target_ratio = r;
        }
        Pipeline::new(cfg, &self.out)
    }
}

/// Writes to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_report(p: &Pipeline, report: &Report) {
    emit(&report.metrics_csv());
    emit(&format!("report written to {}\n", p.path(REPORT_FILE).display()));
}

fn done(p: &Pipeline, stage: Stage) {
    println!("{}: wrote {}", stage.name(), p.path(&stage.manifest_file()).display());
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth(c) => {
            let p = c.pipeline()?;
            p.synth()?;
            let d = &p.config.data;
            println!("synth: wrote {}, {}, {}", d.transactions.display(), d.kinds.display(), d.labels.display());
            done(&p, Stage::Synth);
        }
        Command::Ingest(c) => {
            let p = c.pipeline()?;
            p.ingest()?;
            done(&p, Stage::Ingest);
        }
        Command::Featurize(c) => {
            let p = c.pipeline()?;
            p.featurize()?;
            done(&p, Stage::Featurize);
        }
        Command::Contractize(c) => {
            let p = c.pipeline()?;
            p.contractize()?;
            done(&p, Stage::Contractize);
        }
        Command::Resample(c) => {
            let p = c.pipeline()?;
            p.resample()?;
            done(&p, Stage::Resample);
        }
        Command::Train { model, common } => {
            let p = common.pipeline()?;
            let bundle = p.train(model)?;
            let loss = bundle.history.loss.last().copied().unwrap_or(f64::NAN);
            println!("train {}: final loss {loss:.6}", bundle.params.kind());
            done(
                &p,
                match model {
                    ModelKind::Mlp => Stage::TrainMlp,
                    ModelKind::Gcn => Stage::TrainGcn,
                },
            );
        }
        Command::Evaluate(c) => {
            let p = c.pipeline()?;
            print_report(&p, &p.evaluate()?);
        }
        Command::Predict { model, input, common } => {
            let p = common.pipeline()?;
            let out = p.predict(&model, input.as_deref())?;
            println!("predict: wrote {}", out.display());
        }
        Command::Pipeline(c) => {
            let p = c.pipeline()?;
            print_report(&p, &p.run_all()?);
        }
        Command::ValidateConfig { config } => validate(&config)?,
        Command::DefaultConfig => emit(&PipelineConfig::default().to_json()),
    }
    Ok(())
}

fn validate(path: &Path) -> anyhow::Result<()> {
    if !path.exists() {
        return Err(PipelineError::MissingFile(path.to_path_buf()).into());
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let violations = validate_config(&text);
    if violations.is_empty() {
        println!("{}: ok", path.display());
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(PipelineError::Config(violations).into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<PipelineError>().map_or(1, PipelineError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
