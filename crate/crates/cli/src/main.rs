use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use evavos::harness::{
    format_report, prepare_models, read_csv, run_experiment, summarize, train_at_for, train_policy_for, train_qnet_for, write_csv,
    write_mask_track, ExperimentConfig,
};
use evavos::selection::QNet;
use evavos::synthworld::generate_video;

#[derive(Parser)]
#[command(name = "evavos", version, about = "Simulated budget-aware video mask annotation")]
struct Cli {
    /// Experiment configuration (INI); built-in defaults if omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: $EVAVOS_OUT or ./out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads [default: all cores].
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the ground-truth mask tracks of the evaluation worlds.
    Gen,
    /// Train the quality network and save it as qnet.txt.
    TrainQnet,
    /// Train the type policy and the type baselines.
    TrainPolicy,
    /// Run the method matrix and write results.csv.
    Run,
    /// Summarize a results CSV as a table.
    Report {
        /// Results file [default: <out>/results.csv].
        csv: Option<PathBuf>,
    },
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn classify(e: evavos::Error) -> Failure {
    Failure { code: if e.is_config() { 1 } else { 2 }, error: e.into() }
}

fn runtime(e: anyhow::Error) -> Failure {
    Failure { code: 2, error: e }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().or_else(|| std::env::var_os("EVAVOS_OUT").map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display())).map_err(|e| Failure { code: 1, error: e })
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).map_err(classify)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.jobs == Some(0) {
        return Err(Failure { code: 1, error: anyhow::anyhow!("--jobs must be at least 1") });
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let out = out_dir(cli);
    match &cli.command {
        Command::Gen => {
            let dir = out.join("world");
            ensure_dir(&dir)?;
            for (i, w) in cfg.eval_worlds().iter().enumerate() {
                let video = generate_video(w).map_err(classify)?;
                for (o, track) in video.gt.iter().enumerate() {
                    let path = dir.join(format!("video{i:03}_obj{o}.txt"));
                    let text = write_mask_track(track).map_err(classify)?;
                    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display())).map_err(runtime)?;
                }
            }
            println!("wrote {} videos to {}", cfg.videos, dir.display());
        }
        Command::TrainQnet => {
            ensure_dir(&out)?;
            let (qnet, report) = train_qnet_for(&cfg).map_err(classify)?;
            let path = out.join("qnet.txt");
            qnet.save(&path).map_err(classify)?;
            println!(
                "qnet: {} training rows, {} validation rows, validation accuracy {:.4}; saved {}",
                report.train_rows,
                report.validation_rows,
                report.validation_accuracy,
                path.display()
            );
        }
        Command::TrainPolicy => {
            ensure_dir(&out)?;
            let qnet = match &cfg.models.qnet {
                Some(p) => QNet::load(p).map_err(classify)?,
                None => train_qnet_for(&cfg).map_err(classify)?.0,
            };
            let (policy, report) = train_policy_for(&cfg, &qnet).map_err(classify)?;
            let path = out.join("policy.txt");
            policy.save(&path).map_err(classify)?;
            let at = train_at_for(&cfg, &qnet).map_err(classify)?;
            at.save(&out, "at").map_err(classify)?;
            let last = report.mean_returns.last().copied().unwrap_or(0.0);
            println!("policy: {} episodes, final mean return {last:.5}; saved {} and type baselines", report.episodes, path.display());
        }
        Command::Run => {
            ensure_dir(&out)?;
            let models = prepare_models(&cfg).map_err(classify)?;
            let curves = run_experiment(&cfg, &models, cli.jobs).map_err(classify)?;
            let path = out.join("results.csv");
            write_csv(&path, &curves).map_err(classify)?;
            println!("wrote {} curves to {}", curves.len(), path.display());
        }
        Command::Report { csv } => {
            let path = csv.clone().unwrap_or_else(|| out.join("results.csv"));
            let rows = read_csv(&path).map_err(classify)?;
            let cap = cli.config.as_ref().map(|_| cfg.budget);
            let summary = summarize(&rows, &cfg.thresholds, cap).map_err(classify)?;
            let cap = cap.unwrap_or_else(|| rows.iter().map(|r| r.elapsed_seconds).fold(0.0, f64::max));
            print!("{}", format_report(&summary, &cfg.thresholds, cap));
        }
    }
    Ok(())
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
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
