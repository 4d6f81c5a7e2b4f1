use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use guided_rl::approx::{Mlp, MlpSpec};
use guided_rl::harness::record::{checkpoint_config, read_checkpoint, seed_dir, write_aggregate};
use guided_rl::harness::report::render;
use guided_rl::harness::{
    aggregate, evaluate, normalized_score, references, report_dirs, train_with_diagnostics, write_report, write_run,
    RunConfig, RunSummary,
};
use guided_rl::{Error, Result};

#[derive(Parser)]
#[command(
    name = "guided-rl",
    version,
    about = "Guided actor-critic on small exactly solvable MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one seed, or every configured seed when --seed is omitted.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
    },
    /// Score a saved actor with the raw policy (no search).
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train every seed for each value of one config key, then report.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long, default_value = "runs/sweep")]
        out: PathBuf,
    },
    /// Compare finished runs grouped by their label.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::RunDir {
        path: path.to_path_buf(),
        message: format!("cannot read config: {e}"),
    })?;
    RunConfig::parse(&text)
}

fn train_one(cfg: &RunConfig, dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(dir)?;
    let outcome = train_with_diagnostics(cfg, Some(dir))?;
    write_run(dir, cfg, &outcome)?;
    let summary = RunSummary::from_record(&outcome.record);
    eprintln!(
        "{} seed {}: normalized {:.3} (raw {:.3}) after {} steps, {} guide calls, {:.1}s",
        summary.label,
        cfg.seed,
        summary.final_normalized,
        summary.final_raw,
        summary.env_steps,
        summary.guide_calls,
        outcome.record.total_seconds()
    );
    Ok(summary)
}

fn train_seeds(cfg: &RunConfig, out: &Path) -> Result<()> {
    let mut runs = Vec::new();
    for seed in cfg.seed..cfg.seed + cfg.seeds {
        let cfg = RunConfig { seed, ..cfg.clone() };
        runs.push(train_one(&cfg, &seed_dir(out, seed))?);
    }
    std::fs::write(out.join("config.resolved"), cfg.to_text())?;
    let agg = aggregate(&cfg.name, &runs)?;
    write_aggregate(out, &agg)?;
    println!(
        "{}: iqm {:.3}, optimality gap {:.3} over {} seeds",
        agg.label, agg.iqm, agg.optimality_gap, agg.runs
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let cfg = load_config(&config)?;
            match seed {
                Some(seed) => {
                    let cfg = RunConfig { seed, ..cfg };
                    let s = train_one(&cfg, &out)?;
                    println!("{}", serde_json::to_string(&s)?);
                    Ok(())
                }
                None => train_seeds(&cfg, &out),
            }
        }
        Command::Evaluate {
            checkpoint,
            episodes,
            seed,
        } => {
            let ckpt = read_checkpoint(&checkpoint)?;
            let cfg = checkpoint_config(&ckpt)?;
            let mdp = cfg.env_spec()?.build(cfg.gamma, cfg.time_limit)?;
            let policy = Mlp::new(MlpSpec {
                input_dim: mdp.num_states(),
                hidden_dim: cfg.hidden,
                output_dim: mdp.num_actions(),
                num_hidden_layers: cfg.layers,
                activation: cfg.activation,
            })?;
            if policy.layout() != &ckpt.params.layout {
                return Err(Error::Checkpoint(
                    "parameter layout does not match the stored config".into(),
                ));
            }
            let scores = evaluate(
                &policy,
                &ckpt.params,
                &mdp,
                episodes,
                &mut ChaCha8Rng::seed_from_u64(seed),
            )?;
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            let refs = references(&mdp)?;
            println!(
                "{}",
                serde_json::json!({
                    "env": cfg.env_spec()?.label(),
                    "episodes": episodes,
                    "mean": mean,
                    "normalized": normalized_score(mean, refs.random, refs.expert)?,
                    "scores": scores,
                })
            );
            Ok(())
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let base = load_config(&config)?;
            if values.is_empty() {
                return Err(Error::InvalidArgument("--values is empty".into()));
            }
            let mut dirs = Vec::new();
            for v in &values {
                let mut cfg = base.clone();
                cfg.set(&param, v)?;
                cfg.name = format!("{}-{param}={v}", base.name);
                cfg.validate()?;
                let dir = out.join(format!("{param}={v}"));
                train_seeds(&cfg, &dir)?;
                dirs.push(dir);
            }
            let report = report_dirs(&dirs)?;
            write_report(&out, &report)?;
            print!("{}", render(&report));
            Ok(())
        }
        Command::Report { runs, out } => {
            let report = report_dirs(&runs)?;
            if let Some(out) = out {
                write_report(&out, &report)?;
            }
            print!("{}", render(&report));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
