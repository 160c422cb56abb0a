use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use surf::envs::EnvKind;
use surf::feedback_api::FeedbackServer;
use surf::runner::{
    evaluate, format_table, run_ablation, run_sweep, write_table_csv, Checkpoint, ExperimentConfig, StatusHandle,
    SweepParam, TeacherKind, Trainer, Variant,
};
use surf::teacher::HumanLabelInbox;
use surf::{Error, Result};

#[derive(Parser)]
#[command(name = "surf", version, about = "Preference-based reward learning with semi-supervision and temporal cropping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        env: Option<EnvKind>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        teacher: Option<TeacherKind>,
        /// Total preference queries.
        #[arg(long)]
        budget: Option<usize>,
        /// on|off
        #[arg(long)]
        ssl: Option<String>,
        /// on|off
        #[arg(long)]
        tda: Option<String>,
        /// Serve the labelling API on this address, e.g. 127.0.0.1:8080.
        #[arg(long)]
        serve: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra `key=value` overrides, applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run every ablation variant, or one hyperparameter sweep, over seeds.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Comma-separated variants, default all.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<Variant>,
        #[arg(long)]
        sweep: Option<SweepParam>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Evaluate a saved policy.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, env, seed, teacher, budget, ssl, tda, serve, out, overrides } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(e) = env {
                cfg.env = e;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = teacher {
                cfg.teacher = t;
            }
            if let Some(b) = budget {
                cfg.max_budget = b;
            }
            if let Some(v) = ssl {
                cfg.set("ssl", &v)?;
            }
            if let Some(v) = tda {
                cfg.set("tda", &v)?;
            }
            if out.is_some() {
                cfg.out_dir = out;
            }
            apply_overrides(&mut cfg, &overrides)?;
            let inbox = HumanLabelInbox::new();
            let status = StatusHandle::default();
            let server = match &serve {
                Some(addr) => {
                    let s = FeedbackServer::start(addr, cfg.env, inbox.clone(), status.clone())?;
                    eprintln!("labelling API at {}/api/", s.url());
                    Some(s)
                }
                None => {
                    if cfg.teacher == TeacherKind::Human {
                        return Err(Error::Config("a human teacher needs --serve".into()));
                    }
                    None
                }
            };
            let mut trainer = Trainer::with_channels(cfg, inbox, status)?;
            let summary = trainer.run()?;
            drop(server);
            println!("final return      {:.3}", summary.final_return);
            println!("labels used       {}", summary.labels_used);
            println!("sessions          {}", summary.sessions);
            if let Some(a) = summary.heldout_accuracy {
                println!("held-out accuracy {a:.3}");
            }
            if let Some(r) = summary.retained_fraction {
                println!("retained fraction {r:.3}");
            }
            Ok(())
        }
        Command::Ablate { config, seeds, variants, sweep, out, overrides } => {
            let mut cfg = load(config.as_ref())?;
            apply_overrides(&mut cfg, &overrides)?;
            let seeds: Vec<u64> = (0..seeds).map(|i| cfg.seed + i).collect();
            let progress = |label: &str, seed: u64, s: &surf::runner::RunSummary| {
                eprintln!("{label:<16} seed {seed:<3} return {:.3}", s.final_return)
            };
            let rows = match sweep {
                Some(p) => run_sweep(&cfg, p, &seeds, progress)?,
                None => {
                    let vs = if variants.is_empty() { Variant::ALL.to_vec() } else { variants };
                    run_ablation(&cfg, &vs, &seeds, progress)?
                }
            };
            print!("{}", format_table(&rows));
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                let name = sweep.map_or("ablation.csv".to_string(), |p| format!("sweep_{}.csv", p.name()));
                write_table_csv(&dir.join(name), &rows)?;
            }
            Ok(())
        }
        Command::Eval { checkpoint, episodes, seed } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let agent = ck.agent()?;
            let ret = evaluate(&agent, ck.env, episodes, seed)?;
            println!("{} mean return over {episodes} episodes: {ret:.3}", ck.env.name());
            Ok(())
        }
    }
}
