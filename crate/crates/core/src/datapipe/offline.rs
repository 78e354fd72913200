//! Synthetic demonstration dataset with an in-domain and three
//! out-of-distribution evaluation splits.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::action::{Action, ScrollDirection};
use crate::env::{run_episode, EnvSpec, OfflineRole, ParamRange, Trajectory};
use crate::policy::OraclePolicy;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Idd,
    TaskUnseen,
    CatUnseen,
    AppUnseen,
}

impl Split {
    pub const ALL: [Split; 5] = [Split::Train, Split::Idd, Split::TaskUnseen, Split::CatUnseen, Split::AppUnseen];
    pub const HOLD_OUT: [Split; 4] = [Split::Idd, Split::TaskUnseen, Split::CatUnseen, Split::AppUnseen];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Idd => "idd",
            Split::TaskUnseen => "task-unseen",
            Split::CatUnseen => "cat-unseen",
            Split::AppUnseen => "app-unseen",
        }
    }

    fn role(self) -> OfflineRole {
        match self {
            Split::Train | Split::Idd => OfflineRole::Train,
            Split::TaskUnseen => OfflineRole::TaskUnseen,
            Split::CatUnseen => OfflineRole::CatUnseen,
            Split::AppUnseen => OfflineRole::AppUnseen,
        }
    }

    fn range(self) -> ParamRange {
        match self {
            Split::Train | Split::Idd => ParamRange::Offline,
            _ => ParamRange::Full,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL.into_iter().find(|x| x.as_str() == s).ok_or_else(|| format!("unknown split `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    #[serde(rename = "episodes-per-template")]
    pub episodes_per_template: usize,
    #[serde(rename = "holdout-episodes")]
    pub holdout_episodes: usize,
    /// Probability of one redundant scroll in a train episode.
    #[serde(rename = "scroll-rate")]
    pub scroll_rate: f64,
    /// Whether hold-out episodes also record a wait after each open-app, as
    /// demonstrators habitually do.
    #[serde(rename = "holdout-wait")]
    pub holdout_wait: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { episodes_per_template: 50, holdout_episodes: 10, scroll_rate: 0.3, holdout_wait: true }
    }
}

/// Every split of the offline dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OfflineBundle {
    pub splits: BTreeMap<Split, Vec<Trajectory>>,
}

impl OfflineBundle {
    pub fn split(&self, split: Split) -> &[Trajectory] {
        self.splits.get(&split).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `split template-id seed` lines, sorted.
    pub fn manifest(&self) -> String {
        let mut lines: Vec<String> = self
            .splits
            .iter()
            .flat_map(|(split, eps)| {
                eps.iter().map(move |t| format!("{split} {} {}", t.instance.template_id, t.instance.seed))
            })
            .collect();
        lines.sort();
        lines.into_iter().map(|l| l + "\n").collect()
    }

    pub fn write(&self, dir: &Path) -> Result<(), DataError> {
        let io = |path: &Path, e: std::io::Error| DataError::Io { path: path.display().to_string(), message: e.to_string() };
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        for split in Split::ALL {
            let path = dir.join(format!("{split}.jsonl"));
            let mut text = String::new();
            for t in self.split(split) {
                text.push_str(&serde_json::to_string(t).expect("trajectory encoding"));
                text.push('\n');
            }
            fs::write(&path, text).map_err(|e| io(&path, e))?;
        }
        let path = dir.join("manifest.txt");
        fs::write(&path, self.manifest()).map_err(|e| io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<OfflineBundle, DataError> {
        let mut bundle = OfflineBundle::default();
        for split in Split::ALL {
            let path = dir.join(format!("{split}.jsonl"));
            let display = path.display().to_string();
            let text = fs::read_to_string(&path)
                .map_err(|e| DataError::Io { path: display.clone(), message: e.to_string() })?;
            let mut episodes = Vec::new();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                episodes.push(serde_json::from_str(line).map_err(|e| DataError::Corrupt {
                    path: display.clone(),
                    line: i + 1,
                    message: e.to_string(),
                })?);
            }
            bundle.splits.insert(split, episodes);
        }
        Ok(bundle)
    }
}

/// Runs the oracle over every split. Train episodes record a wait after each
/// open-app and, with probability `scroll_rate`, one scroll that changes
/// nothing. Hold-out episodes carry no random noise.
pub fn synth_offline(env: &EnvSpec, master_seed: u64, cfg: &SynthConfig) -> OfflineBundle {
    let oracle = OraclePolicy::new(env);
    let mut bundle = OfflineBundle::default();
    for split in Split::ALL {
        let (count, waits) = match split {
            Split::Train => (cfg.episodes_per_template, true),
            _ => (cfg.holdout_episodes, cfg.holdout_wait),
        };
        let mut episodes = Vec::new();
        for template in env.templates().iter().filter(|t| t.offline_role == split.role()) {
            let label = format!("offline/{split}/{}", template.id);
            for i in 0..count as u64 {
                let inst = env
                    .instantiate_in(template.id, seed::derive(master_seed, &label, i), split.range())
                    .expect("registered template");
                let mut noise = seed::rng(master_seed, &format!("{label}/noise"), i);
                let scroll_at = (split == Split::Train && noise.gen_bool(cfg.scroll_rate))
                    .then(|| noise.gen_range(0..template.optimal_length));
                episodes.push(demonstrate(env, &oracle, &inst, waits, scroll_at));
            }
        }
        bundle.splits.insert(split, episodes);
    }
    bundle
}

fn demonstrate(
    env: &EnvSpec,
    oracle: &OraclePolicy,
    inst: &crate::env::TaskInstance,
    waits: bool,
    mut scroll_at: Option<usize>,
) -> Trajectory {
    let mut expert_steps = 0;
    let mut pending_wait = false;
    let session = env.reset(inst).expect("registered template");
    run_episode(session, |goal, screen, _| {
        if pending_wait {
            pending_wait = false;
            return Ok::<_, std::convert::Infallible>(Action::Wait);
        }
        if scroll_at == Some(expert_steps) {
            scroll_at = None;
            return Ok(Action::Scroll(ScrollDirection::Down));
        }
        let action = oracle.expert_action(goal, screen).unwrap_or(Action::Wait);
        pending_wait = waits && matches!(action, Action::OpenApp { .. });
        expert_steps += 1;
        Ok(action)
    })
    .unwrap_or_else(|never| match never {})
}
