//! Offline action accuracy on the hold-out splits and online success rate by
//! difficulty, plus the task-difficulty table.

mod table;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::action::Action;
use crate::datapipe::{OfflineBundle, Split};
use crate::env::{run_episode, Difficulty, EnvSpec, Trajectory};
use crate::policy::{request_rng, Policy};
use crate::ui::UiScreen;

pub use table::{difficulty_table, DifficultyRow, DifficultyTable};

/// Seeds used by online evaluation unless told otherwise.
pub const DEFAULT_EVAL_SEEDS: [u64; 3] = [0, 1, 2];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("split `{0}` has no datapoints")]
    EmptySplit(String),
    #[error("no evaluation seeds given")]
    NoSeeds,
}

/// How a predicted click is compared with the ground-truth click.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchRule {
    /// The predicted element's centre lies inside the truth element.
    #[default]
    Center,
    /// The predicted element's whole box lies inside the truth element.
    FullBox,
    /// Same element index only.
    Strict,
}

/// Whether `predicted` counts as the same decision as `truth` on `screen`.
/// A prediction naming a missing element never matches.
pub fn action_match(predicted: &Action, truth: &Action, screen: &UiScreen, rule: MatchRule) -> bool {
    match (predicted, truth) {
        (Action::Click { target: p }, Action::Click { target: t })
        | (Action::LongPress { target: p }, Action::LongPress { target: t }) => {
            let (Some(pe), Some(te)) = (screen.clickable(*p), screen.clickable(*t)) else {
                return false;
            };
            match rule {
                MatchRule::Strict => p == t,
                MatchRule::Center => {
                    let (x, y) = pe.bbox.center();
                    te.bbox.contains(x, y)
                }
                MatchRule::FullBox => {
                    let (p, t) = (pe.bbox, te.bbox);
                    t.left <= p.left && t.top <= p.top && p.right <= t.right && p.bottom <= t.bottom
                }
            }
        }
        (Action::InputText { text: p }, Action::InputText { text: t }) => p.trim_end() == t.trim_end(),
        _ => predicted == truth,
    }
}

/// Accuracy on one split.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitAccuracy {
    pub datapoints: usize,
    pub matches: usize,
    /// `truth action type -> predicted action type -> count`.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
}

impl SplitAccuracy {
    pub fn accuracy(&self) -> f64 {
        if self.datapoints == 0 {
            0.0
        } else {
            self.matches as f64 / self.datapoints as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OfflineEvalReport {
    pub rule: MatchRule,
    pub splits: BTreeMap<Split, SplitAccuracy>,
}

impl OfflineEvalReport {
    pub fn accuracy(&self, split: Split) -> Option<f64> {
        self.splits.get(&split).map(SplitAccuracy::accuracy)
    }

    pub fn to_json(&self) -> Value {
        let splits: serde_json::Map<String, Value> = self
            .splits
            .iter()
            .map(|(s, a)| {
                let v = json!({
                    "accuracy": round6(a.accuracy()),
                    "confusion": a.confusion,
                    "datapoints": a.datapoints,
                    "matches": a.matches,
                });
                (s.to_string(), v)
            })
            .collect();
        json!({ "rule": self.rule, "splits": splits })
    }
}

impl fmt::Display for OfflineEvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let header: Vec<&str> = Split::HOLD_OUT.iter().map(|s| column_name(*s)).collect();
        let row: Vec<String> = Split::HOLD_OUT
            .iter()
            .map(|s| self.accuracy(*s).map_or("-".to_string(), |a| format!("{:.1}", 100.0 * a)))
            .collect();
        write_table(f, &["Action Accuracy"], &header, &[row])
    }
}

fn column_name(split: Split) -> &'static str {
    match split {
        Split::Train => "Train",
        Split::Idd => "IDD",
        Split::TaskUnseen => "Task-Unseen",
        Split::CatUnseen => "Cat-Unseen",
        Split::AppUnseen => "App-Unseen",
    }
}

/// Accuracy over every step of `episodes`, deciding greedily with each
/// step's recorded history.
pub fn eval_split(
    policy: &dyn Policy,
    split: Split,
    episodes: &[Trajectory],
    rule: MatchRule,
) -> Result<SplitAccuracy, EvalError> {
    let mut out = SplitAccuracy::default();
    for (e, t) in episodes.iter().enumerate() {
        for (i, (step, history)) in t.steps.iter().zip(t.histories()).enumerate() {
            let mut rng = request_rng(0, &format!("offline/{split}/{e}"), i as u64);
            let predicted = policy.decide(&t.instance.goal, &step.screen_before, &history, 0.0, &mut rng);
            out.datapoints += 1;
            if action_match(&predicted, &step.action, &step.screen_before, rule) {
                out.matches += 1;
            }
            *out.confusion
                .entry(step.action.action_type().to_string())
                .or_default()
                .entry(predicted.action_type().to_string())
                .or_insert(0) += 1;
        }
    }
    if out.datapoints == 0 {
        return Err(EvalError::EmptySplit(split.to_string()));
    }
    Ok(out)
}

/// [`eval_split`] over the four hold-out splits of `bundle`.
pub fn eval_offline(policy: &dyn Policy, bundle: &OfflineBundle, rule: MatchRule) -> Result<OfflineEvalReport, EvalError> {
    let mut report = OfflineEvalReport { rule, splits: BTreeMap::new() };
    for split in Split::HOLD_OUT {
        report.splits.insert(split, eval_split(policy, split, bundle.split(split), rule)?);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub episodes: usize,
    pub successes: usize,
}

impl Tally {
    pub fn rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.successes as f64 / self.episodes as f64
        }
    }

    fn add(&mut self, success: bool) {
        self.episodes += 1;
        self.successes += usize::from(success);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub template: String,
    pub seed: u64,
    pub success: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineEvalReport {
    pub per_difficulty: BTreeMap<Difficulty, Tally>,
    /// Pooled over all episodes.
    pub overall: Tally,
    /// Mean wall-clock seconds per decision.
    pub mean_inference_secs: f64,
    pub seeds: Vec<u64>,
    pub episodes: Vec<EpisodeOutcome>,
}

impl OnlineEvalReport {
    pub fn rate(&self, d: Difficulty) -> f64 {
        self.per_difficulty.get(&d).map_or(0.0, Tally::rate)
    }

    /// Sorted-key JSON. Timing is left out when `with_timing` is false so the
    /// result is reproducible.
    pub fn to_json(&self, with_timing: bool) -> Value {
        let per: serde_json::Map<String, Value> = self
            .per_difficulty
            .iter()
            .map(|(d, t)| (d.as_str().to_string(), tally_json(t)))
            .collect();
        let mut v = json!({
            "overall": tally_json(&self.overall),
            "per-difficulty": per,
            "seeds": self.seeds,
        });
        if with_timing {
            v["mean-inference-secs"] = json!(self.mean_inference_secs);
        }
        v
    }
}

fn tally_json(t: &Tally) -> Value {
    json!({ "episodes": t.episodes, "rate": round6(t.rate()), "successes": t.successes })
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

impl fmt::Display for OnlineEvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |r: f64| format!("{:.1}", 100.0 * r);
        let mut row = vec![format!("{:.6}", self.mean_inference_secs)];
        row.extend(Difficulty::ALL.iter().map(|d| pct(self.rate(*d))));
        row.push(pct(self.overall.rate()));
        write_table(f, &[], &["Average Infer. Time (s)", "Easy", "Medium", "Hard", "Overall"], &[row])
    }
}

/// One greedy episode per seed and template, optionally restricted to one
/// difficulty. The instance for seed `s` is `env.instantiate(template, s)`.
pub fn eval_online(
    policy: &dyn Policy,
    env: &EnvSpec,
    seeds: &[u64],
    difficulty: Option<Difficulty>,
) -> Result<OnlineEvalReport, EvalError> {
    if seeds.is_empty() {
        return Err(EvalError::NoSeeds);
    }
    let mut per_difficulty = BTreeMap::new();
    let mut overall = Tally::default();
    let mut episodes = Vec::new();
    let (mut decisions, mut spent) = (0usize, 0.0f64);
    for &seed in seeds {
        for template in env.templates().iter().filter(|t| difficulty.is_none_or(|d| d == t.difficulty)) {
            let instance = env.instantiate(template.id, seed).expect("registered template");
            let session = env.reset(&instance).expect("registered template");
            let label = format!("eval/{seed}/{}", template.id);
            let mut index = 0;
            let t = run_episode(session, |goal, screen, history| {
                let mut rng = request_rng(0, &label, index);
                index += 1;
                let started = Instant::now();
                let action = policy.decide(goal, screen, history, 0.0, &mut rng);
                spent += started.elapsed().as_secs_f64();
                decisions += 1;
                Ok::<_, std::convert::Infallible>(action)
            })
            .unwrap_or_else(|never| match never {});
            per_difficulty.entry(template.difficulty).or_insert_with(Tally::default).add(t.succeeded());
            overall.add(t.succeeded());
            episodes.push(EpisodeOutcome {
                template: template.id.to_string(),
                seed,
                success: t.succeeded(),
                steps: t.step_count,
            });
        }
    }
    Ok(OnlineEvalReport {
        per_difficulty,
        overall,
        mean_inference_secs: if decisions == 0 { 0.0 } else { spent / decisions as f64 },
        seeds: seeds.to_vec(),
        episodes,
    })
}

/// Writes an aligned-column table. With a `corner` label every data row is
/// prefixed by it; otherwise the first column is left-aligned.
pub(crate) fn write_table(f: &mut dyn fmt::Write, corner: &[&str], header: &[&str], rows: &[Vec<String>]) -> fmt::Result {
    let cells: Vec<Vec<String>> = std::iter::once(header.iter().map(|s| s.to_string()).collect())
        .chain(rows.iter().cloned())
        .collect();
    let columns = header.len();
    let widths: Vec<usize> =
        (0..columns).map(|c| cells.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let lead = corner.first().map_or(0, |s| s.chars().count());
    for (r, row) in cells.iter().enumerate() {
        if lead > 0 {
            let label = if r == 0 { "" } else { corner[0] };
            write!(f, "{label:<lead$}  ")?;
        }
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (s, w))| if c == 0 && lead == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
            .collect();
        writeln!(f, "{}", line.join("  ").trim_end())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::{synth_offline, SynthConfig};
    use crate::policy::{OraclePolicy, RandomPolicy};
    use crate::ui::{BBox, UiElement};

    fn screen(boxes: &[BBox]) -> UiScreen {
        UiScreen::new("s", 100, 100, boxes.iter().map(|b| UiElement::new("button", "b", *b, true)).collect())
    }

    #[test]
    fn nested_click_matches_under_center_only() {
        let s = screen(&[BBox::new(10, 10, 50, 50), BBox::new(0, 0, 60, 60), BBox::new(70, 70, 90, 90)]);
        let click = |target| Action::Click { target };
        assert!(action_match(&click(0), &click(1), &s, MatchRule::Center));
        assert!(action_match(&click(0), &click(1), &s, MatchRule::FullBox));
        assert!(action_match(&click(1), &click(0), &s, MatchRule::Center));
        assert!(!action_match(&click(1), &click(0), &s, MatchRule::FullBox));
        assert!(!action_match(&click(2), &click(0), &s, MatchRule::Center));
        assert!(!action_match(&click(9), &click(0), &s, MatchRule::Center));
        assert!(!action_match(&click(0), &Action::LongPress { target: 0 }, &s, MatchRule::Center));
        let text = |t: &str| Action::InputText { text: t.into() };
        assert!(action_match(&text("hi  "), &text("hi"), &s, MatchRule::Center));
        assert!(!action_match(&text(" hi"), &text("hi"), &s, MatchRule::Center));
        use crate::action::ScrollDirection::*;
        assert!(!action_match(&Action::Scroll(Up), &Action::Scroll(Down), &s, MatchRule::Center));
    }

    #[test]
    fn oracle_offline_is_perfect_and_random_is_poor() {
        let env = EnvSpec::standard();
        let cfg = SynthConfig { episodes_per_template: 2, holdout_episodes: 5, holdout_wait: false, ..Default::default() };
        let bundle = synth_offline(&env, 4, &cfg);
        let report = eval_offline(&OraclePolicy::new(&env), &bundle, MatchRule::Center).unwrap();
        for split in Split::HOLD_OUT {
            assert_eq!(report.accuracy(split), Some(1.0), "{split}");
        }
        let random = eval_offline(&RandomPolicy, &bundle, MatchRule::Center).unwrap();
        assert!(random.accuracy(Split::Idd).unwrap() < 0.25);
        assert!(matches!(
            eval_split(&RandomPolicy, Split::Idd, &[], MatchRule::Center),
            Err(EvalError::EmptySplit(_))
        ));
    }

    #[test]
    fn oracle_online_is_perfect_and_pooled() {
        let env = EnvSpec::standard();
        let r = eval_online(&OraclePolicy::new(&env), &env, &DEFAULT_EVAL_SEEDS, None).unwrap();
        assert_eq!(r.overall, Tally { episodes: 36, successes: 36 });
        for d in Difficulty::ALL {
            assert_eq!(r.rate(d), 1.0);
        }
        let text = r.to_string();
        for col in ["Easy", "Medium", "Hard", "Overall"] {
            assert!(text.contains(col));
        }
        let hard = eval_online(&RandomPolicy, &env, &[5], Some(Difficulty::Hard)).unwrap();
        assert_eq!(hard.overall.episodes, 2);
        assert!(eval_online(&RandomPolicy, &env, &[], None).is_err());
    }
}
