//! `rftforge`: command-line entry points for data synthesis, training runs,
//! evaluation, screen rendering and the networked collection broker.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use rftforge_core::broker::{run_worker, serve, Broker, TaskTicket, TcpClient};
use rftforge_core::datapipe::{synth_offline, OfflineBundle, SynthConfig, TrajectoryStore};
use rftforge_core::env::{Difficulty, EnvSpec};
use rftforge_core::evalkit::{difficulty_table, eval_offline, eval_online, MatchRule};
use rftforge_core::pipeline::{self, PipelineConfig, Variant};
use rftforge_core::policy::TabularModel;
use rftforge_core::ui::{annotate, render_ppm};
use rftforge_core::{seed, UiScreen};

#[derive(Parser, Debug)]
#[command(name = "rftforge", version, about = "Reinforce fine-tuning for app-control agents")]
struct Cli {
    /// Master seed; every command is deterministic given it.
    #[arg(long, global = true, env = "RFTFORGE_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the broker and policy server until interrupted.
    Serve {
        #[arg(long, env = "RFTFORGE_ADDR", default_value = "127.0.0.1:7878")]
        addr: String,
        #[arg(long, env = "RFTFORGE_MODEL")]
        model: PathBuf,
        /// Tickets to enqueue per template at startup.
        #[arg(long, default_value_t = 0)]
        repeats: usize,
        #[arg(long, default_value_t = 1.5)]
        temperature: f64,
        /// Append kept trajectories to this JSONL file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Pull and run tickets from a broker until its queue is empty.
    Worker {
        #[arg(long, env = "RFTFORGE_ADDR", default_value = "127.0.0.1:7878")]
        addr: String,
        #[arg(long, default_value = "worker-0")]
        id: String,
    },
    /// Write the offline demonstration dataset and its splits.
    SynthOffline {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SynthConfig::default().episodes_per_template)]
        episodes: usize,
        #[arg(long, default_value_t = SynthConfig::default().holdout_episodes)]
        holdout: usize,
    },
    /// Run a full training pipeline with an in-process broker.
    Pipeline {
        #[arg(long, value_enum, default_value_t = VariantArg::Full)]
        variant: VariantArg,
        #[arg(long, env = "RFTFORGE_ITERS", default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        iters: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of online evaluation seeds.
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        eval_seeds: u64,
        #[arg(long, env = "RFTFORGE_WORKERS", default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
        workers: u64,
    },
    /// Action accuracy on the hold-out splits of an offline dataset.
    EvalOffline {
        #[arg(long, env = "RFTFORGE_MODEL")]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = RuleArg::Center)]
        rule: RuleArg,
        #[arg(long)]
        json: bool,
    },
    /// Online success rate per difficulty.
    EvalOnline {
        #[arg(long, env = "RFTFORGE_MODEL")]
        model: PathBuf,
        /// Number of seeds, starting at --seed.
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
        #[arg(long, value_enum)]
        difficulty: Option<DifficultyArg>,
        #[arg(long)]
        json: bool,
    },
    /// Rasterise an annotated screen to a plain PPM image.
    Render {
        #[arg(long)]
        screen: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Task counts per difficulty for the shipped registry.
    Difficulty {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Full,
    RftOnly,
    Awo,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Full => Variant::Full,
            VariantArg::RftOnly => Variant::RftOnly,
            VariantArg::Awo => Variant::Awo,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RuleArg {
    Center,
    FullBox,
    Strict,
}

impl From<RuleArg> for MatchRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Center => MatchRule::Center,
            RuleArg::FullBox => MatchRule::FullBox,
            RuleArg::Strict => MatchRule::Strict,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DifficultyArg {
    Easy,
    Medium,
    Hard,
}

impl From<DifficultyArg> for Difficulty {
    fn from(d: DifficultyArg) -> Self {
        match d {
            DifficultyArg::Easy => Difficulty::Easy,
            DifficultyArg::Medium => Difficulty::Medium,
            DifficultyArg::Hard => Difficulty::Hard,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid usage");
            eprintln!("{}", line.trim());
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_model(path: &Path) -> Result<TabularModel> {
    TabularModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn execute(cli: Cli) -> Result<()> {
    let env = EnvSpec::standard();
    match cli.command {
        Command::Serve { addr, model, repeats, temperature, log } => {
            anyhow::ensure!(temperature >= 0.0, "temperature must be non-negative");
            let model = load_model(&model)?;
            let store = match log {
                Some(path) => TrajectoryStore::with_log(&path)?,
                None => TrajectoryStore::new(),
            };
            let broker = Arc::new(Broker::new(Arc::new(model), cli.seed, Arc::new(store)));
            let tickets: Vec<TaskTicket> = env
                .templates()
                .iter()
                .flat_map(|t| {
                    (0..repeats).map(move |k| TaskTicket {
                        ticket_id: format!("serve-{}-{k:03}", t.id),
                        template_id: t.id.to_string(),
                        seed: seed::derive(cli.seed, &format!("serve/{}", t.id), k as u64),
                        temperature,
                        max_steps: t.default_max_steps(),
                        attempt: 0,
                    })
                })
                .collect();
            broker.submit(tickets)?;
            let handle = serve(broker, addr.as_str()).with_context(|| format!("binding {addr}"))?;
            println!("listening on {}", handle.addr());
            std::io::stdout().flush()?;
            handle.wait();
        }
        Command::Worker { addr, id } => {
            let mut client = TcpClient::new(addr);
            let done = run_worker(&id, &mut client, &env)?;
            println!("{id}: {done} episodes reported");
        }
        Command::SynthOffline { out, episodes, holdout } => {
            let cfg = SynthConfig { episodes_per_template: episodes, holdout_episodes: holdout, ..Default::default() };
            let bundle = synth_offline(&env, cli.seed, &cfg);
            bundle.write(&out)?;
            for (split, eps) in &bundle.splits {
                println!("{split:<12} {:>5} episodes", eps.len());
            }
        }
        Command::Pipeline { variant, iters, out, eval_seeds, workers } => {
            let mut cfg = PipelineConfig {
                variant: variant.into(),
                iterations: iters as usize,
                eval_seeds: (cli.seed..cli.seed + eval_seeds).collect(),
                ..Default::default()
            };
            cfg.collect.workers = workers as usize;
            let record = pipeline::run(&cfg, cli.seed)?;
            if let Some(dir) = out {
                record.write(&dir)?;
                eprintln!("run record written to {}", dir.join("record.json").display());
            }
            print!("{}", record.summary());
        }
        Command::EvalOffline { model, data, rule, json } => {
            let model = load_model(&model)?;
            let bundle = OfflineBundle::read(&data)?;
            let report = eval_offline(&model, &bundle, rule.into())?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report.to_json())?);
            } else {
                print!("{report}");
            }
        }
        Command::EvalOnline { model, seeds, difficulty, json } => {
            let model = load_model(&model)?;
            let seeds: Vec<u64> = (cli.seed..cli.seed + seeds).collect();
            let report = eval_online(&model, &env, &seeds, difficulty.map(Into::into))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report.to_json(true))?);
            } else {
                print!("{report}");
            }
        }
        Command::Render { screen, out } => {
            let text = fs::read_to_string(&screen).with_context(|| format!("reading {}", screen.display()))?;
            let parsed: UiScreen = serde_json::from_str(&text).context("parsing screen")?;
            parsed.validate()?;
            let image = render_ppm(&parsed, &annotate(&parsed))?;
            fs::write(&out, image).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Difficulty { json } => {
            let table = difficulty_table(&env);
            if json {
                println!("{}", serde_json::to_string_pretty(&table.to_json())?);
            } else {
                print!("{table}");
            }
        }
    }
    Ok(())
}
