//! The training loop: supervised fine-tuning on demonstrations, iterated
//! collect-and-retrain on the agent's own successes, and a final fine-tune of
//! the base model on everything collected. Also the two ablations.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::broker::{run_worker, Broker, BrokerError, LocalClient, TaskTicket};
use crate::datapipe::{
    filter_duplicates, rebalance, synth_offline, to_examples, CollectConfig, DataError, OfflineBundle, OnlineDataset,
    Split, SynthConfig, TrajectoryStore,
};
use crate::env::{EnvSpec, Trajectory};
use crate::evalkit::{eval_offline, eval_online, EvalError, MatchRule, OfflineEvalReport, OnlineEvalReport};
use crate::policy::{PolicyError, TabularModel, TrainConfig};
use crate::seed;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("no collected trajectories to train on")]
    EmptyStore,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("broker unreachable: {0}")]
    Broker(#[from] BrokerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<PipelineError>,
        /// Everything recorded before the failure.
        record: Box<PipelineRunRecord>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// SFT, the RFT chain, then a final SFT of the base on all collected data.
    Full,
    /// SFT and the RFT chain; the last chain model is the result.
    RftOnly,
    /// No demonstrations: the chain starts from an empty model and the final
    /// SFT also starts from empty.
    Awo,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::RftOnly, Variant::Awo];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::RftOnly => "rft-only",
            Variant::Awo => "awo",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL.into_iter().find(|v| v.as_str() == s).ok_or_else(|| format!("unknown variant `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub variant: Variant,
    /// Number of collect-and-retrain iterations.
    pub iterations: usize,
    pub collect: CollectConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub eval_seeds: Vec<u64>,
    pub match_rule: MatchRule,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            variant: Variant::Full,
            iterations: 3,
            collect: CollectConfig::default(),
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
            eval_seeds: crate::evalkit::DEFAULT_EVAL_SEEDS.to_vec(),
            match_rule: MatchRule::Center,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::BadConfig(m.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if self.collect.tau == 0 {
            return bad("tau must be at least 1");
        }
        if self.collect.workers == 0 || self.collect.rounds == 0 {
            return bad("workers and rounds must be at least 1");
        }
        if self.collect.temperature.is_nan() || self.collect.temperature < 0.0 {
            return bad("temperature must be non-negative");
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 {
            return bad("epochs and batch size must be positive");
        }
        if self.eval_seeds.is_empty() {
            return bad("at least one evaluation seed is required");
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "collect": self.collect,
            "eval-seeds": self.eval_seeds,
            "iterations": self.iterations,
            "match-rule": self.match_rule,
            "synth": self.synth,
            "train": { "batch-size": self.train.batch_size, "epochs": self.train.epochs },
            "variant": self.variant,
        })
    }
}

/// Evaluations and bookkeeping after one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    /// `sft`, `rft-1` … `rft-N` or `final-sft`.
    pub name: String,
    pub online: OnlineEvalReport,
    pub offline: OfflineEvalReport,
    /// Size of the cumulative online dataset after this stage's collection.
    pub online_dataset: Option<usize>,
    /// Successes stored by this stage's collection.
    pub collected: Option<usize>,
    pub model_keys: usize,
}

impl StageRecord {
    fn to_json(&self) -> Value {
        json!({
            "collected": self.collected,
            "model-keys": self.model_keys,
            "name": self.name,
            "offline": self.offline.to_json(),
            "online": self.online.to_json(false),
            "online-dataset": self.online_dataset,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRunRecord {
    pub config: PipelineConfig,
    pub master_seed: u64,
    pub stages: Vec<StageRecord>,
    /// `(stage name, model)` for every trained stage.
    pub checkpoints: Vec<(String, TabularModel)>,
    /// Name of the stage whose model is the run's result.
    pub result_stage: Option<String>,
}

impl PipelineRunRecord {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// The chain stages `rft-1` … `rft-N` in order.
    pub fn rft_stages(&self) -> Vec<&StageRecord> {
        self.stages.iter().filter(|s| s.name.starts_with("rft-")).collect()
    }

    pub fn result(&self) -> Option<&StageRecord> {
        self.result_stage.as_deref().and_then(|n| self.stage(n))
    }

    pub fn checkpoint(&self, name: &str) -> Option<&TabularModel> {
        self.checkpoints.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    /// Sorted-key JSON without timing, so equal runs give equal text.
    pub fn to_json(&self) -> Value {
        json!({
            "config": self.config.to_json(),
            "master-seed": self.master_seed,
            "result-stage": self.result_stage,
            "stages": self.stages.iter().map(StageRecord::to_json).collect::<Vec<_>>(),
        })
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("record encoding") + "\n"
    }

    /// Writes `record.json` and one `{stage}.model` file per checkpoint.
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        let io = |e: std::io::Error| DataError::Io { path: dir.display().to_string(), message: e.to_string() };
        fs::create_dir_all(dir).map_err(io)?;
        fs::write(dir.join("record.json"), self.to_text()).map_err(io)?;
        for (name, model) in &self.checkpoints {
            model.save(&dir.join(format!("{name}.model")))?;
        }
        Ok(())
    }

    /// Compact per-stage table of online and offline results.
    pub fn summary(&self) -> String {
        let mut rows = Vec::new();
        for s in &self.stages {
            rows.push(vec![
                s.name.clone(),
                s.online_dataset.map_or("-".into(), |n| n.to_string()),
                format!("{:.1}", 100.0 * s.online.overall.rate()),
                s.offline.accuracy(Split::Idd).map_or("-".into(), |a| format!("{:.1}", 100.0 * a)),
            ]);
        }
        let mut out = String::new();
        let header = ["Stage", "D_on", "Online SR", "IDD Acc"];
        let _ = crate::evalkit::write_table(&mut out, &[], &header, &rows);
        out
    }
}

/// Clone of `base` trained on every step of `dataset`.
pub fn sft(base: &TabularModel, dataset: &[Trajectory], cfg: TrainConfig) -> Result<TabularModel, PipelineError> {
    let examples = to_examples(dataset);
    if examples.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    Ok(base.train(&examples, cfg)?)
}

/// Runs `model` through the in-process broker. Round 0 enqueues
/// `initial_repeats` tickets per template; each later round re-enqueues the
/// templates this collection has solved fewer than tau times. Returns the
/// stored successes ordered by ticket id.
pub fn collect(
    model: &TabularModel,
    cfg: &CollectConfig,
    env: &EnvSpec,
    master_seed: u64,
    iteration: usize,
) -> Result<Vec<Trajectory>, PipelineError> {
    let store = Arc::new(TrajectoryStore::new());
    let policy_seed = seed::derive(master_seed, "policy", iteration as u64);
    let broker = Arc::new(Broker::new(Arc::new(model.clone()), policy_seed, Arc::clone(&store)));
    for round in 0..cfg.rounds {
        let counts = store.success_counts();
        let tickets: Vec<TaskTicket> = env
            .templates()
            .iter()
            .filter(|t| round == 0 || counts.get(t.id).copied().unwrap_or(0) < cfg.tau)
            .flat_map(|t| {
                let label = format!("collect/it{iteration}/r{round}/{}", t.id);
                (0..cfg.initial_repeats).map(move |k| TaskTicket {
                    ticket_id: format!("it{iteration}-r{round}-{}-{k:03}", t.id),
                    template_id: t.id.to_string(),
                    seed: seed::derive(master_seed, &label, k as u64),
                    temperature: cfg.temperature,
                    max_steps: t.default_max_steps(),
                    attempt: 0,
                })
            })
            .collect();
        if tickets.is_empty() {
            break;
        }
        broker.submit(tickets)?;
        let results: Vec<Result<usize, BrokerError>> = thread::scope(|s| {
            let handles: Vec<_> = (0..cfg.workers)
                .map(|w| {
                    let mut client = LocalClient(Arc::clone(&broker));
                    s.spawn(move || run_worker(&format!("worker-{w}"), &mut client, env))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker thread panicked")).collect()
        });
        for r in results {
            r?;
        }
        log::debug!("iteration {iteration} round {round}: {} stored", store.len());
    }
    broker.shutdown();
    Ok(store.snapshot().into_iter().map(|e| e.trajectory).collect())
}

/// Duplicate-filtered, rebalanced training set built from `d_on`.
pub fn prepare(d_on: &OnlineDataset, cfg: &CollectConfig) -> Result<OnlineDataset, PipelineError> {
    if d_on.is_empty() {
        return Err(PipelineError::EmptyStore);
    }
    let mut filtered = OnlineDataset::new();
    for e in d_on.entries() {
        filtered.extend(e.iteration, [filter_duplicates(&e.trajectory)]);
    }
    Ok(rebalance(&filtered, cfg.tau, cfg.rule)?)
}

/// One improvement step: `model` trained further on the prepared `d_on`.
pub fn rft_iteration(
    model: &TabularModel,
    d_on: &OnlineDataset,
    collect: &CollectConfig,
    train: TrainConfig,
) -> Result<TabularModel, PipelineError> {
    let data = prepare(d_on, collect)?;
    Ok(model.train(&to_examples(data.trajectories()), train)?)
}

/// `base` trained on the prepared `d_on`. Never touches the chain models.
pub fn final_sft(
    base: &TabularModel,
    d_on: &OnlineDataset,
    collect: &CollectConfig,
    train: TrainConfig,
) -> Result<TabularModel, PipelineError> {
    rft_iteration(base, d_on, collect, train)
}

struct Runner<'a> {
    env: &'a EnvSpec,
    offline: &'a OfflineBundle,
    record: PipelineRunRecord,
}

impl Runner<'_> {
    fn evaluate(
        &mut self,
        name: &str,
        model: &TabularModel,
        online_dataset: Option<usize>,
        collected: Option<usize>,
    ) -> Result<(), PipelineError> {
        let cfg = &self.record.config;
        let online = eval_online(model, self.env, &cfg.eval_seeds, None)?;
        let offline = eval_offline(model, self.offline, cfg.match_rule)?;
        log::info!(
            "{name}: online {:.3}, idd accuracy {:.3}",
            online.overall.rate(),
            offline.accuracy(Split::Idd).unwrap_or(0.0)
        );
        self.record.stages.push(StageRecord {
            name: name.to_string(),
            online,
            offline,
            online_dataset,
            collected,
            model_keys: model.key_count(),
        });
        self.record.checkpoints.push((name.to_string(), model.clone()));
        Ok(())
    }

    fn fail(self, stage: &str, e: PipelineError) -> PipelineError {
        PipelineError::Stage { stage: stage.to_string(), source: Box::new(e), record: Box::new(self.record) }
    }
}

/// Runs the configured variant end to end on the standard registry. An
/// iteration whose cumulative online dataset is still empty keeps its input
/// model, as does the final SFT.
pub fn run(config: &PipelineConfig, master_seed: u64) -> Result<PipelineRunRecord, PipelineError> {
    run_on(&EnvSpec::standard(), config, master_seed)
}

pub fn run_on(env: &EnvSpec, config: &PipelineConfig, master_seed: u64) -> Result<PipelineRunRecord, PipelineError> {
    config.validate()?;
    let offline = synth_offline(env, master_seed, &config.synth);
    let mut runner = Runner {
        env,
        offline: &offline,
        record: PipelineRunRecord {
            config: config.clone(),
            master_seed,
            stages: Vec::new(),
            checkpoints: Vec::new(),
            result_stage: None,
        },
    };

    let base = match config.variant {
        Variant::Awo => TabularModel::new(),
        Variant::Full | Variant::RftOnly => {
            let step = sft(&TabularModel::new(), offline.split(Split::Train), config.train)
                .and_then(|m| runner.evaluate("sft", &m, None, None).map(|_| m));
            match step {
                Ok(m) => m,
                Err(e) => return Err(runner.fail("sft", e)),
            }
        }
    };

    let mut model = base.clone();
    let mut d_on = OnlineDataset::new();
    for i in 1..=config.iterations {
        let name = format!("rft-{i}");
        let step = collect(&model, &config.collect, env, master_seed, i).and_then(|batch| {
            let added = d_on.extend(i, batch);
            let next = if d_on.is_empty() {
                log::warn!("{name}: nothing collected yet, keeping the current model");
                model.clone()
            } else {
                rft_iteration(&model, &d_on, &config.collect, config.train)?
            };
            runner.evaluate(&name, &next, Some(d_on.len()), Some(added))?;
            Ok(next)
        });
        match step {
            Ok(next) => model = next,
            Err(e) => return Err(runner.fail(&name, e)),
        }
    }

    let result = match config.variant {
        Variant::RftOnly => format!("rft-{}", config.iterations),
        Variant::Full | Variant::Awo => {
            let trained = if d_on.is_empty() {
                log::warn!("final-sft: nothing was collected, keeping the base model");
                Ok(base.clone())
            } else {
                final_sft(&base, &d_on, &config.collect, config.train)
            };
            let step = trained
                .and_then(|m| runner.evaluate("final-sft", &m, Some(d_on.len()), None));
            if let Err(e) = step {
                return Err(runner.fail("final-sft", e));
            }
            "final-sft".to_string()
        }
    };
    runner.record.result_stage = Some(result);
    Ok(runner.record)
}
