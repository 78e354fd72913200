//! The shipped task registry: twelve parameterised templates over the
//! simulated apps.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::device::{Contact, Device, Expense, CONTACT_LABELS, EXPENSE_CATEGORIES};

pub type Params = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

/// Where a template sits in the offline demonstration dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OfflineRole {
    /// Demonstrated in train; held-out seeds form the in-domain split.
    Train,
    /// Unseen goal pattern on a demonstrated app.
    TaskUnseen,
    /// Unseen task category on a demonstrated app.
    CatUnseen,
    /// App never demonstrated.
    AppUnseen,
}

/// Which slice of a parameter's value space to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamRange {
    Full,
    /// The restricted range covered by offline demonstrations.
    Offline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    PersonName,
    PhoneNumber,
    FileName,
    Amount,
    Minutes,
    ClockTime,
    Message,
    RecipeName,
    ExpenseName,
    Choice(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: GenKind,
    /// Values demonstrated offline, when narrower than the full range.
    pub offline_values: Option<&'static [&'static str]>,
}

macro_rules! param {
    ($name:literal, $kind:expr) => {
        ParamSpec { name: $name, kind: $kind, offline_values: None }
    };
    ($name:literal, $kind:expr, offline = $values:expr) => {
        ParamSpec { name: $name, kind: $kind, offline_values: Some($values) }
    };
}

/// A parameterised task. The screen graph is the shared simulated device;
/// a template contributes the goal text, initial hidden state and the
/// success predicate.
#[derive(Clone)]
pub struct TaskTemplate {
    pub id: &'static str,
    pub app: &'static str,
    pub category: &'static str,
    pub difficulty: Difficulty,
    pub offline_role: OfflineRole,
    pub params: &'static [ParamSpec],
    /// Goal text with `{name}` slots; every slot sits inside double quotes.
    pub goal_pattern: &'static str,
    pub optimal_length: usize,
    setup: fn(&mut Device, &Params, &mut ChaCha8Rng),
    success: fn(&Device, &Params) -> bool,
}

impl std::fmt::Debug for TaskTemplate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TaskTemplate")
            .field("id", &self.id)
            .field("difficulty", &self.difficulty)
            .field("optimal_length", &self.optimal_length)
            .finish_non_exhaustive()
    }
}

impl TaskTemplate {
    /// Step budget: twice the optimal length, at least 10.
    pub fn default_max_steps(&self) -> usize {
        (2 * self.optimal_length).max(10)
    }

    pub fn fill_goal(&self, params: &Params) -> String {
        let mut goal = self.goal_pattern.to_string();
        for (name, value) in params {
            goal = goal.replace(&format!("{{{name}}}"), value);
        }
        goal
    }

    pub fn sample_params(&self, rng: &mut ChaCha8Rng, range: ParamRange) -> Params {
        let mut params = Params::new();
        for spec in self.params {
            let value = loop {
                let v = match (range, spec.offline_values) {
                    (ParamRange::Offline, Some(values)) => pick(rng, values).to_string(),
                    _ => generate(spec.kind, rng),
                };
                if !params.values().any(|p| *p == v) {
                    break v;
                }
            };
            params.insert(spec.name.to_string(), value);
        }
        params
    }

    /// Whether `params` falls inside the offline-demonstrated range.
    pub fn in_offline_range(&self, params: &Params) -> bool {
        self.params.iter().all(|spec| match spec.offline_values {
            Some(values) => params.get(spec.name).is_some_and(|v| values.contains(&v.as_str())),
            None => true,
        })
    }

    pub(crate) fn setup(&self, device: &mut Device, params: &Params, rng: &mut ChaCha8Rng) {
        (self.setup)(device, params, rng)
    }

    pub(crate) fn is_solved(&self, device: &Device, params: &Params) -> bool {
        (self.success)(device, params)
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, values: &'a [&'a str]) -> &'a str {
    values.choose(rng).copied().expect("non-empty value list")
}

const FIRST_NAMES: [&str; 24] = [
    "Sofija", "Mateo", "Aisha", "Liam", "Yuki", "Noah", "Amara", "Lucas", "Ines", "Omar", "Freya",
    "Tariq", "Elena", "Kofi", "Mila", "Ravi", "Zara", "Emil", "Nadia", "Hugo", "Leila", "Jonas",
    "Priya", "Tomas",
];
const LAST_NAMES: [&str; 24] = [
    "Alves", "Novak", "Okafor", "Berg", "Tanaka", "Silva", "Haddad", "Moreau", "Kowalski", "Reyes",
    "Lindqvist", "Mensah", "Costa", "Ivanova", "Fischer", "Sato", "Nguyen", "Duarte", "Rossi",
    "Petrov", "Ahmed", "Larsen", "Quinn", "Varga",
];
const FILE_WORDS: [&str; 16] = [
    "report", "invoice", "notes", "budget", "photo", "draft", "summary", "slides", "receipt",
    "agenda", "scan", "letter", "plan", "minutes", "contract", "memo",
];
const FILE_EXTS: [&str; 4] = ["pdf", "txt", "jpg", "docx"];
const MESSAGES: [&str; 16] = [
    "Running late", "See you at noon", "Call me back", "Dinner at eight?", "Meeting moved",
    "Happy birthday", "On my way", "Got the tickets", "Thanks a lot", "Where are you?",
    "Lunch tomorrow?", "Bring the charger", "Parking is full", "Train delayed", "Good luck today",
    "Check your email",
];
const RECIPE_ADJ: [&str; 16] = [
    "Spicy", "Creamy", "Smoky", "Zesty", "Classic", "Crispy", "Herbed", "Roasted", "Tangy",
    "Golden", "Rustic", "Sweet", "Garlic", "Lemon", "Honey", "Savory",
];
const RECIPE_DISH: [&str; 16] = [
    "Tomato Soup", "Chickpea Curry", "Mushroom Risotto", "Lentil Stew", "Fish Tacos",
    "Pumpkin Pie", "Beef Stir Fry", "Veggie Lasagna", "Chicken Wings", "Quinoa Salad",
    "Pea Pesto", "Bean Chili", "Corn Fritters", "Potato Gratin", "Shrimp Noodles",
    "Apple Crumble",
];
const EXPENSE_NAMES: [&str; 16] = [
    "Groceries", "Taxi", "Coffee", "Rent", "Gym", "Books", "Cinema", "Pharmacy", "Lunch",
    "Internet", "Parking", "Flowers", "Haircut", "Electricity", "Museum", "Bakery",
];

fn generate(kind: GenKind, rng: &mut ChaCha8Rng) -> String {
    match kind {
        GenKind::PersonName => format!("{} {}", pick(rng, &FIRST_NAMES), pick(rng, &LAST_NAMES)),
        GenKind::PhoneNumber => format!(
            "+1 {:03} {:03} {:04}",
            rng.gen_range(200..1000),
            rng.gen_range(200..1000),
            rng.gen_range(0..10000)
        ),
        GenKind::FileName => format!(
            "{}_{:03}.{}",
            pick(rng, &FILE_WORDS),
            rng.gen_range(0..1000),
            pick(rng, &FILE_EXTS)
        ),
        GenKind::Amount => format!("{}.{:02}", rng.gen_range(1..500), rng.gen_range(0..100)),
        GenKind::Minutes => rng.gen_range(1..=90).to_string(),
        GenKind::ClockTime => format!("{:02}:{:02}", rng.gen_range(0..24), 5 * rng.gen_range(0..12)),
        GenKind::Message => pick(rng, &MESSAGES).to_string(),
        GenKind::RecipeName => format!("{} {}", pick(rng, &RECIPE_ADJ), pick(rng, &RECIPE_DISH)),
        GenKind::ExpenseName => pick(rng, &EXPENSE_NAMES).to_string(),
        GenKind::Choice(values) => pick(rng, values).to_string(),
    }
}

/// `n` generated values distinct from each other and from `avoid`.
fn distinct(kind: GenKind, n: usize, avoid: &[&str], rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(n);
    while out.len() < n {
        let v = generate(kind, rng);
        if !avoid.contains(&v.as_str()) && !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn p<'a>(params: &'a Params, name: &str) -> &'a str {
    params.get(name).map(String::as_str).unwrap_or("")
}

const ON_OFF: &[&str] = &["on", "off"];

pub const FILE_COUNT: usize = 6;
pub const RECIPE_COUNT: usize = 15;
const RECORDING_COUNT: usize = 2;

fn populate(device: &mut Device, rng: &mut ChaCha8Rng, avoid: &[&str]) {
    device.wifi = rng.gen_bool(0.5);
    device.bluetooth = rng.gen_bool(0.5);
    device.contacts = distinct(GenKind::PersonName, 4, avoid, rng)
        .into_iter()
        .map(|name| Contact {
            name,
            phone: generate(GenKind::PhoneNumber, rng),
            label: Some(pick(rng, &CONTACT_LABELS).to_string()),
        })
        .collect();
    device.conversations = distinct(GenKind::PersonName, 3, avoid, rng);
    device.alarms = distinct(GenKind::ClockTime, 2, avoid, rng);
    device.next_recording = rng.gen_range(10..100);
    device.recordings = (0..RECORDING_COUNT)
        .map(|i| format!("Recording_{}", device.next_recording as usize - RECORDING_COUNT + i))
        .collect();
    device.files = distinct(GenKind::FileName, FILE_COUNT, avoid, rng);
    device.recipes = distinct(GenKind::RecipeName, RECIPE_COUNT, avoid, rng);
    device.expenses = distinct(GenKind::ExpenseName, 3, avoid, rng)
        .into_iter()
        .map(|name| Expense {
            name,
            amount: generate(GenKind::Amount, rng),
            category: Some(pick(rng, &EXPENSE_CATEGORIES).to_string()),
        })
        .collect();
}

fn avoid_list(params: &Params) -> Vec<&str> {
    params.values().map(String::as_str).collect()
}

fn setup_generic(device: &mut Device, params: &Params, rng: &mut ChaCha8Rng) {
    populate(device, rng, &avoid_list(params));
}

fn setup_wifi(device: &mut Device, params: &Params, rng: &mut ChaCha8Rng) {
    setup_generic(device, params, rng);
    device.wifi = p(params, "state") != "on";
}

fn setup_bluetooth(device: &mut Device, params: &Params, rng: &mut ChaCha8Rng) {
    setup_generic(device, params, rng);
    device.bluetooth = p(params, "state") != "on";
}

fn setup_file_target(device: &mut Device, params: &Params, rng: &mut ChaCha8Rng) {
    setup_generic(device, params, rng);
    let at = rng.gen_range(0..FILE_COUNT);
    device.files[at] = p(params, "file").to_string();
}

fn setup_recipes(device: &mut Device, params: &Params, rng: &mut ChaCha8Rng) {
    setup_generic(device, params, rng);
    // first target on page 2; second on page 3 both before and after the
    // first one is removed
    let first_at = rng.gen_range(5..10);
    let second_at = rng.gen_range(11..15);
    device.recipes[first_at] = p(params, "first").to_string();
    device.recipes[second_at] = p(params, "second").to_string();
}

fn solved_wifi(d: &Device, params: &Params) -> bool {
    d.wifi == (p(params, "state") == "on")
}

fn solved_bluetooth(d: &Device, params: &Params) -> bool {
    d.bluetooth == (p(params, "state") == "on")
}

fn solved_timer(d: &Device, params: &Params) -> bool {
    d.timer.as_deref() == Some(p(params, "minutes"))
}

fn solved_alarm(d: &Device, params: &Params) -> bool {
    d.alarms.iter().any(|a| a == p(params, "time"))
}

fn solved_file_delete(d: &Device, params: &Params) -> bool {
    d.files.len() == FILE_COUNT - 1 && !d.files.iter().any(|f| f == p(params, "file"))
}

fn solved_file_rename(d: &Device, params: &Params) -> bool {
    d.files.len() == FILE_COUNT
        && d.files.iter().any(|f| f == p(params, "new_name"))
        && !d.files.iter().any(|f| f == p(params, "file"))
}

fn solved_record(d: &Device, _: &Params) -> bool {
    d.recordings.len() > RECORDING_COUNT
}

fn solved_record_named(d: &Device, params: &Params) -> bool {
    d.recordings.iter().any(|r| r == p(params, "name"))
}

fn solved_contact(d: &Device, params: &Params) -> bool {
    d.contacts.iter().any(|c| {
        c.name == p(params, "name")
            && c.phone == p(params, "phone")
            && c.label.as_deref() == Some(p(params, "label"))
    })
}

fn solved_sms(d: &Device, params: &Params) -> bool {
    d.sent.iter().any(|(to, body)| to == p(params, "phone") && body == p(params, "message"))
}

fn solved_expense(d: &Device, params: &Params) -> bool {
    d.expenses.iter().any(|e| {
        e.name == p(params, "name")
            && e.amount == p(params, "amount")
            && e.category.as_deref() == Some(p(params, "category"))
    })
}

fn solved_recipes(d: &Device, params: &Params) -> bool {
    d.recipes.len() == RECIPE_COUNT - 2
        && !d.recipes.iter().any(|r| r == p(params, "first") || r == p(params, "second"))
}

/// The shipped registry, sorted by template id.
pub fn standard_templates() -> Vec<TaskTemplate> {
    use Difficulty::*;
    use OfflineRole::*;
    let mut templates = vec![
        TaskTemplate {
            id: "clock-alarm-add",
            app: "Clock",
            category: "create",
            difficulty: Easy,
            offline_role: Train,
            params: &[param!("time", GenKind::ClockTime)],
            goal_pattern: "Set an alarm for \"{time}\".",
            optimal_length: 5,
            setup: setup_generic,
            success: solved_alarm,
        },
        TaskTemplate {
            id: "clock-timer-set",
            app: "Clock",
            category: "configure",
            difficulty: Easy,
            offline_role: Train,
            params: &[param!("minutes", GenKind::Minutes)],
            goal_pattern: "Start a timer for \"{minutes}\" minutes.",
            optimal_length: 4,
            setup: setup_generic,
            success: solved_timer,
        },
        TaskTemplate {
            id: "contacts-add",
            app: "Contacts",
            category: "create",
            difficulty: Medium,
            offline_role: Train,
            params: &[
                param!("name", GenKind::PersonName),
                param!("phone", GenKind::PhoneNumber),
                param!("label", GenKind::Choice(&CONTACT_LABELS), offline = &["Mobile"]),
            ],
            goal_pattern:
                "Create a new contact for \"{name}\" with phone number \"{phone}\" and label \"{label}\".",
            optimal_length: 8,
            setup: setup_generic,
            success: solved_contact,
        },
        TaskTemplate {
            id: "expense-add",
            app: "Expenses",
            category: "create",
            difficulty: Medium,
            offline_role: Train,
            params: &[
                param!("name", GenKind::ExpenseName),
                param!("amount", GenKind::Amount),
                param!("category", GenKind::Choice(&EXPENSE_CATEGORIES), offline = &["Food", "Travel"]),
            ],
            goal_pattern: "Add an expense \"{name}\" of \"{amount}\" in category \"{category}\".",
            optimal_length: 8,
            setup: setup_generic,
            success: solved_expense,
        },
        TaskTemplate {
            id: "files-delete",
            app: "Files",
            category: "delete",
            difficulty: Easy,
            offline_role: Train,
            params: &[param!("file", GenKind::FileName)],
            goal_pattern: "Delete the file \"{file}\" from the Files app.",
            optimal_length: 4,
            setup: setup_file_target,
            success: solved_file_delete,
        },
        TaskTemplate {
            id: "files-rename",
            app: "Files",
            category: "edit",
            difficulty: Medium,
            offline_role: CatUnseen,
            params: &[param!("file", GenKind::FileName), param!("new_name", GenKind::FileName)],
            goal_pattern: "Rename the file \"{file}\" to \"{new_name}\".",
            optimal_length: 5,
            setup: setup_file_target,
            success: solved_file_rename,
        },
        TaskTemplate {
            id: "recipe-delete",
            app: "Recipes",
            category: "delete",
            difficulty: Hard,
            offline_role: AppUnseen,
            params: &[param!("first", GenKind::RecipeName), param!("second", GenKind::RecipeName)],
            goal_pattern: "Delete the recipes \"{first}\" and \"{second}\".",
            optimal_length: 10,
            setup: setup_recipes,
            success: solved_recipes,
        },
        TaskTemplate {
            id: "recorder-record",
            app: "Audio Recorder",
            category: "create",
            difficulty: Easy,
            offline_role: AppUnseen,
            params: &[],
            goal_pattern: "Record an audio clip and save it.",
            optimal_length: 4,
            setup: setup_generic,
            success: solved_record,
        },
        TaskTemplate {
            id: "recorder-save-named",
            app: "Audio Recorder",
            category: "create",
            difficulty: Hard,
            offline_role: AppUnseen,
            params: &[param!("name", GenKind::FileName)],
            goal_pattern: "Record an audio clip and save it as \"{name}\".",
            optimal_length: 8,
            setup: setup_generic,
            success: solved_record_named,
        },
        TaskTemplate {
            id: "settings-bluetooth",
            app: "Settings",
            category: "configure",
            difficulty: Easy,
            offline_role: TaskUnseen,
            params: &[param!("state", GenKind::Choice(ON_OFF))],
            goal_pattern: "Turn Bluetooth \"{state}\".",
            optimal_length: 3,
            setup: setup_bluetooth,
            success: solved_bluetooth,
        },
        TaskTemplate {
            id: "settings-wifi",
            app: "Settings",
            category: "configure",
            difficulty: Easy,
            offline_role: Train,
            params: &[param!("state", GenKind::Choice(ON_OFF), offline = &["on"])],
            goal_pattern: "Turn Wi-Fi \"{state}\".",
            optimal_length: 3,
            setup: setup_wifi,
            success: solved_wifi,
        },
        TaskTemplate {
            id: "sms-send",
            app: "Messages",
            category: "communicate",
            difficulty: Medium,
            offline_role: Train,
            params: &[param!("phone", GenKind::PhoneNumber), param!("message", GenKind::Message)],
            goal_pattern: "Send a text message to \"{phone}\" saying \"{message}\".",
            optimal_length: 6,
            setup: setup_generic,
            success: solved_sms,
        },
    ];
    templates.sort_by_key(|t| t.id);
    templates
}
