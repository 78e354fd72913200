//! Trajectory storage and preprocessing: duplicate-observation filtering,
//! rejection sampling, oversampling of rarely solved tasks, conversion to
//! training examples, and the synthetic offline demonstration dataset.

mod offline;
mod store;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Trajectory;
use crate::policy::TrainingExample;

pub use offline::{synth_offline, OfflineBundle, Split, SynthConfig};
pub use store::{StoredEpisode, TrajectoryStore};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("no successful trajectories to build a dataset from")]
    EmptyStore,
    #[error("tau must be at least 1")]
    BadTau,
    #[error("i/o failure on {path}: {message}")]
    Io { path: String, message: String },
    #[error("corrupt record in {path} line {line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
}

/// Collection and oversampling knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectConfig {
    pub tau: usize,
    #[serde(rename = "initial-repeats")]
    pub initial_repeats: usize,
    pub rounds: usize,
    pub temperature: f64,
    /// Parallel workers per collection.
    pub workers: usize,
    pub rule: RebalanceRule,
}

impl Default for CollectConfig {
    fn default() -> Self {
        CollectConfig { tau: 10, initial_repeats: 5, rounds: 3, temperature: 1.5, workers: 4, rule: RebalanceRule::Median }
    }
}

/// How the oversampling target is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RebalanceRule {
    /// Median success count over templates with at least tau successes
    /// (rounded down), or tau when none qualifies.
    Median,
    /// Always tau.
    Tau,
}

/// A successful trajectory and the iteration that collected it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnlineEntry {
    pub iteration: usize,
    pub trajectory: Trajectory,
}

/// The online dataset. Holds only return-1 trajectories.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OnlineDataset {
    entries: Vec<OnlineEntry>,
}

impl OnlineDataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the successful trajectories of `batch`; failures are rejected.
    pub fn extend(&mut self, iteration: usize, batch: impl IntoIterator<Item = Trajectory>) -> usize {
        let before = self.entries.len();
        self.entries.extend(
            batch.into_iter().filter(Trajectory::succeeded).map(|trajectory| OnlineEntry { iteration, trajectory }),
        );
        self.entries.len() - before
    }

    pub fn entries(&self) -> &[OnlineEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn trajectories(&self) -> impl Iterator<Item = &Trajectory> + '_ {
        self.entries.iter().map(|e| &e.trajectory)
    }

    /// Successes per template id.
    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for t in self.trajectories() {
            *out.entry(t.instance.template_id.clone()).or_insert(0) += 1;
        }
        out
    }
}

/// Drops every step whose screen equals the next step's screen. Such a step's
/// action changed nothing. The last step is always kept.
pub fn filter_duplicates(t: &Trajectory) -> Trajectory {
    let steps: Vec<_> = t
        .steps
        .iter()
        .enumerate()
        .filter(|(i, s)| t.steps.get(i + 1).is_none_or(|next| next.fingerprint != s.fingerprint))
        .map(|(_, s)| s.clone())
        .collect();
    Trajectory { instance: t.instance.clone(), step_count: steps.len(), steps, ret: t.ret }
}

/// Oversampling target for the given per-template success counts.
pub fn rebalance_target(counts: &BTreeMap<String, usize>, tau: usize, rule: RebalanceRule) -> usize {
    let mut qualified: Vec<usize> = counts.values().copied().filter(|c| *c >= tau).collect();
    if rule == RebalanceRule::Tau || qualified.is_empty() {
        return tau;
    }
    qualified.sort_unstable();
    let n = qualified.len();
    if n % 2 == 1 {
        qualified[n / 2]
    } else {
        (qualified[n / 2 - 1] + qualified[n / 2]) / 2
    }
}

/// Builds the training set: templates solved fewer than `tau` times have
/// their trajectories repeated round-robin up to exactly the target of
/// [`rebalance_target`]; others contribute everything they have. Output is
/// grouped by template id, each group in input order.
pub fn rebalance(d: &OnlineDataset, tau: usize, rule: RebalanceRule) -> Result<OnlineDataset, DataError> {
    if tau == 0 {
        return Err(DataError::BadTau);
    }
    let mut groups: BTreeMap<&str, Vec<&OnlineEntry>> = BTreeMap::new();
    for e in d.entries.iter().filter(|e| e.trajectory.succeeded()) {
        groups.entry(&e.trajectory.instance.template_id).or_default().push(e);
    }
    if groups.is_empty() {
        return Err(DataError::EmptyStore);
    }
    let counts = groups.iter().map(|(k, v)| (k.to_string(), v.len())).collect();
    let target = rebalance_target(&counts, tau, rule);
    let mut entries = Vec::new();
    for group in groups.values() {
        let n = if group.len() < tau { target } else { group.len() };
        entries.extend((0..n).map(|i| group[i % group.len()].clone()));
    }
    Ok(OnlineDataset { entries })
}

/// One example per step of every successful trajectory, weighted by the
/// trajectory's return, with history rebuilt from the preceding steps.
pub fn to_examples<'a>(trajectories: impl IntoIterator<Item = &'a Trajectory>) -> Vec<TrainingExample> {
    let mut out = Vec::new();
    for t in trajectories.into_iter().filter(|t| t.ret > 0) {
        for (step, history) in t.steps.iter().zip(t.histories()) {
            out.push(TrainingExample {
                goal: t.instance.goal.clone(),
                screen: step.screen_before.clone(),
                history,
                action: step.action.clone(),
                weight: f64::from(t.ret),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::Action;
    use crate::env::{run_episode, EnvSpec};
    use crate::policy::OraclePolicy;

    fn oracle_traj(template: &str, seed: u64, waits_after_open: bool) -> Trajectory {
        let env = EnvSpec::standard();
        let oracle = OraclePolicy::new(&env);
        let inst = env.instantiate(template, seed).unwrap();
        let mut last_open = false;
        run_episode(env.reset(&inst).unwrap(), |g, s, _| {
            if waits_after_open && last_open {
                last_open = false;
                return Ok::<_, ()>(Action::Wait);
            }
            let a = oracle.expert_action(g, s).unwrap();
            last_open = matches!(a, Action::OpenApp { .. });
            Ok(a)
        })
        .unwrap()
    }

    #[test]
    fn filter_collapses_waits() {
        let t = oracle_traj("clock-timer-set", 1, true);
        assert_eq!(t.step_count, 5);
        let f = filter_duplicates(&t);
        assert_eq!(f.step_count, 4);
        assert!(f.steps.iter().all(|s| s.action != Action::Wait));
        assert_eq!(filter_duplicates(&f), f);
        let clean = oracle_traj("clock-timer-set", 1, false);
        assert_eq!(filter_duplicates(&clean), clean);
    }

    #[test]
    fn rebalance_example_profile() {
        let mut d = OnlineDataset::new();
        for (template, n) in [("clock-timer-set", 12), ("settings-wifi", 10), ("files-delete", 3)] {
            d.extend(0, (0..n).map(|s| oracle_traj(template, s, false)));
        }
        let out = rebalance(&d, 10, RebalanceRule::Median).unwrap();
        let counts = out.counts();
        assert_eq!(counts["clock-timer-set"], 12);
        assert_eq!(counts["settings-wifi"], 10);
        assert_eq!(counts["files-delete"], 11);
        let seeds: Vec<u64> =
            out.trajectories().filter(|t| t.instance.template_id == "files-delete").map(|t| t.instance.seed).collect();
        assert_eq!(seeds, vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1]);
    }

    #[test]
    fn rebalance_fallback_and_empty() {
        let mut d = OnlineDataset::new();
        assert!(matches!(rebalance(&d, 10, RebalanceRule::Median), Err(DataError::EmptyStore)));
        d.extend(0, (0..2).map(|s| oracle_traj("settings-wifi", s, false)));
        assert_eq!(rebalance(&d, 10, RebalanceRule::Median).unwrap().len(), 10);
    }

    #[test]
    fn examples_and_rejection() {
        let t = oracle_traj("sms-send", 4, false);
        let ex = to_examples([&t]);
        assert_eq!(ex.len(), 6);
        assert!(ex.iter().all(|e| e.weight == 1.0));
        for (i, e) in ex.iter().enumerate() {
            assert_eq!(e.history.len(), i.min(5));
        }
        let mut failed = t.clone();
        failed.ret = 0;
        assert!(to_examples([&failed]).is_empty());
        let mut d = OnlineDataset::new();
        assert_eq!(d.extend(0, [failed]), 0);
    }
}
