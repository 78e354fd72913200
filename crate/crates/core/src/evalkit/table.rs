use std::fmt;

use serde_json::{json, Value};

use super::write_table;
use crate::env::{Difficulty, EnvSpec};

/// Task counts per difficulty for one benchmark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifficultyRow {
    pub label: String,
    pub easy: usize,
    pub medium: usize,
    pub hard: usize,
}

impl DifficultyRow {
    pub fn new(label: impl Into<String>, easy: usize, medium: usize, hard: usize) -> Self {
        DifficultyRow { label: label.into(), easy, medium, hard }
    }

    pub fn total(&self) -> usize {
        self.easy + self.medium + self.hard
    }

    pub fn count(&self, d: Difficulty) -> usize {
        match d {
            Difficulty::Easy => self.easy,
            Difficulty::Medium => self.medium,
            Difficulty::Hard => self.hard,
        }
    }

    /// Share of the total in percent, rounded to one decimal.
    pub fn percent(&self, d: Difficulty) -> f64 {
        match self.total() {
            0 => 0.0,
            total => (1000.0 * self.count(d) as f64 / total as f64).round() / 10.0,
        }
    }

    /// `count (pp.p%)`.
    pub fn cell(&self, d: Difficulty) -> String {
        format!("{} ({:.1}%)", self.count(d), self.percent(d))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DifficultyTable {
    pub rows: Vec<DifficultyRow>,
}

impl DifficultyTable {
    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                json!({
                    "easy": r.easy,
                    "easy-percent": r.percent(Difficulty::Easy),
                    "hard": r.hard,
                    "hard-percent": r.percent(Difficulty::Hard),
                    "label": r.label,
                    "medium": r.medium,
                    "medium-percent": r.percent(Difficulty::Medium),
                    "total": r.total(),
                })
            })
            .collect();
        json!({ "rows": rows })
    }
}

impl fmt::Display for DifficultyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut cells: Vec<Vec<String>> = vec![vec![
            "Benchmark".into(),
            "Easy (%)".into(),
            "Medium (%)".into(),
            "Hard (%)".into(),
            "Total".into(),
        ]];
        for r in &self.rows {
            let mut row = vec![r.label.clone()];
            row.extend(Difficulty::ALL.iter().map(|d| r.cell(*d)));
            row.push(r.total().to_string());
            cells.push(row);
        }
        let header: Vec<&str> = cells[0].iter().map(String::as_str).collect();
        write_table(f, &[], &header, &cells[1..])
    }
}

/// Counts of the registry's templates per difficulty.
pub fn difficulty_table(env: &EnvSpec) -> DifficultyTable {
    let count = |d| env.templates().iter().filter(|t| t.difficulty == d).count();
    DifficultyTable {
        rows: vec![DifficultyRow::new(
            "Registry",
            count(Difficulty::Easy),
            count(Difficulty::Medium),
            count(Difficulty::Hard),
        )],
    }
}
