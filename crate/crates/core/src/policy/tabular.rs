//! Count-based softmax policy trained by weighted maximum likelihood.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::abstraction::{AbstractAction, ContextKey};
use super::{fallback_action, Policy, PolicyError, TrainingExample};
use crate::action::{serialize_action, Action, HistoryEntry};
use crate::ui::UiScreen;

const HEADER: &str = "tabular-model v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 3, batch_size: 64 }
    }
}

/// `context -> abstract action -> count`. Every stored action has a positive
/// count.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TabularModel {
    table: BTreeMap<ContextKey, BTreeMap<AbstractAction, f64>>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    key: ContextKey,
    action: AbstractAction,
    count: f64,
}

impl TabularModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn key_count(&self) -> usize {
        self.table.len()
    }

    pub fn counts(&self, key: &ContextKey) -> Option<&BTreeMap<AbstractAction, f64>> {
        self.table.get(key)
    }

    /// Probability of `action` at `key` under temperature 1.
    pub fn probability(&self, key: &ContextKey, action: &AbstractAction) -> f64 {
        let Some(row) = self.table.get(key) else { return 0.0 };
        let total: f64 = row.values().sum();
        row.get(action).map_or(0.0, |c| c / total)
    }

    /// A new model with counts raised by `weight × epochs` for every example.
    /// Examples whose action cannot be abstracted (a click on a missing
    /// element) carry no signal and are skipped.
    pub fn train(&self, examples: &[TrainingExample], cfg: TrainConfig) -> Result<TabularModel, PolicyError> {
        if cfg.epochs == 0 || cfg.batch_size == 0 {
            return Err(PolicyError::BadTrainConfig(cfg.epochs, cfg.batch_size));
        }
        if let Some(bad) = examples.iter().find(|e| e.weight.is_nan() || e.weight <= 0.0) {
            return Err(PolicyError::NonpositiveWeight(bad.weight));
        }
        let mut model = self.clone();
        for _ in 0..cfg.epochs {
            for batch in examples.chunks(cfg.batch_size) {
                for ex in batch {
                    let Some(action) = AbstractAction::abstract_of(&ex.action, &ex.goal, &ex.screen) else {
                        continue;
                    };
                    let key = ContextKey::new(&ex.goal, &ex.screen, &ex.history);
                    *model.table.entry(key).or_default().entry(action).or_insert(0.0) += ex.weight;
                }
            }
        }
        Ok(model)
    }

    /// Concrete candidates for `key` on `screen` with their counts, keyed by
    /// canonical action text.
    fn candidates(&self, key: &ContextKey, goal: &str, screen: &UiScreen) -> BTreeMap<String, (Action, f64)> {
        let mut out: BTreeMap<String, (Action, f64)> = BTreeMap::new();
        if let Some(row) = self.table.get(key) {
            for (abs, count) in row {
                if let Some(action) = abs.resolve(goal, screen) {
                    out.entry(serialize_action(&action)).or_insert((action, 0.0)).1 += count;
                }
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut lines: Vec<String> = self
            .table
            .iter()
            .flat_map(|(key, row)| {
                row.iter().map(move |(action, count)| {
                    serde_json::to_string(&Record { key: key.clone(), action: action.clone(), count: *count })
                        .expect("record encoding")
                })
            })
            .collect();
        lines.sort();
        let mut out = format!("{HEADER} records={}\n", lines.len());
        for line in lines {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<TabularModel, PolicyError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| PolicyError::CorruptModel("empty file".into()))?;
        let expected: usize = header
            .strip_prefix(HEADER)
            .and_then(|rest| rest.trim().strip_prefix("records="))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| PolicyError::CorruptModel(format!("bad header `{header}`")))?;
        let mut model = TabularModel::new();
        let mut seen = 0;
        for (i, line) in lines.enumerate() {
            let record: Record = serde_json::from_str(line)
                .map_err(|e| PolicyError::CorruptModel(format!("record {}: {e}", i + 1)))?;
            if record.count.is_nan() || record.count <= 0.0 {
                return Err(PolicyError::CorruptModel(format!("record {}: non-positive count", i + 1)));
            }
            model.table.entry(record.key).or_default().insert(record.action, record.count);
            seen += 1;
        }
        if seen != expected {
            return Err(PolicyError::CorruptModel(format!("expected {expected} records, found {seen}")));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        fs::write(path, self.to_text()).map_err(|e| PolicyError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<TabularModel, PolicyError> {
        let text = fs::read_to_string(path).map_err(|e| PolicyError::Io(e.to_string()))?;
        Self::from_text(&text)
    }
}

impl Policy for TabularModel {
    /// Samples with probability proportional to `count^(1/temperature)` among
    /// stored actions that resolve on `screen`. Temperature 0 takes the
    /// largest count, ties going to the smallest canonical action text.
    fn decide(
        &self,
        goal: &str,
        screen: &UiScreen,
        history: &[HistoryEntry],
        temperature: f64,
        rng: &mut ChaCha8Rng,
    ) -> Action {
        let key = ContextKey::new(goal, screen, history);
        let candidates = self.candidates(&key, goal, screen);
        if candidates.is_empty() {
            return fallback_action(screen, rng);
        }
        if temperature <= 0.0 {
            let mut best: Option<&(Action, f64)> = None;
            for c in candidates.values() {
                if best.is_none_or(|b| c.1 > b.1) {
                    best = Some(c);
                }
            }
            return best.expect("non-empty").0.clone();
        }
        let weights: Vec<f64> = candidates.values().map(|(_, c)| c.powf(1.0 / temperature)).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        for ((action, _), w) in candidates.values().zip(&weights) {
            if u < *w {
                return action.clone();
            }
            u -= w;
        }
        candidates.values().last().expect("non-empty").0.clone()
    }
}
