//! The simulated phone: hidden app state, the current view, screen rendering
//! and the transition function.

use crate::action::{GroundedAction, ScrollDirection};
use crate::ui::{BBox, UiElement, UiScreen};

pub const SCREEN_WIDTH: u32 = 1080;
pub const SCREEN_HEIGHT: u32 = 2400;

/// Launcher order.
pub const APPS: [&str; 8] = [
    "Audio Recorder",
    "Clock",
    "Contacts",
    "Expenses",
    "Files",
    "Messages",
    "Recipes",
    "Settings",
];

pub const CONTACT_LABELS: [&str; 3] = ["Mobile", "Home", "Work"];
pub const EXPENSE_CATEGORIES: [&str; 4] = ["Food", "Travel", "Bills", "Other"];

const PAGE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockTab {
    Alarm,
    Clock,
    Timer,
    Stopwatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
enum TextMenu {
    #[default]
    Closed,
    Edit,
    Selection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum View {
    Home,
    SettingsRoot,
    SettingsNetwork,
    SettingsConnected,
    SettingsPage(&'static str, SettingsParent),
    Clock(ClockTab),
    TimerRunning,
    AlarmNew,
    ContactsRoot,
    ContactsNew,
    ContactsLabel,
    MessagesRoot,
    MessagesNew,
    MessagesThread,
    ExpensesRoot,
    ExpensesNew,
    ExpensesCategory,
    FilesRoot,
    FilesSelected(usize),
    FileDetail(usize),
    FileDelete(usize),
    FileRename(usize),
    RecorderRoot,
    RecorderRecording,
    RecorderSave,
    RecipesRoot(usize),
    RecipeDetail(usize),
    RecipeDelete(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SettingsParent {
    Root,
    Network,
    Connected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contact {
    pub name: String,
    pub phone: String,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expense {
    pub name: String,
    pub amount: String,
    pub category: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Form {
    fields: Vec<(&'static str, String)>,
    focus: Option<usize>,
    choice: Option<String>,
    menu: TextMenu,
}

impl Form {
    fn new(fields: &[&'static str]) -> Self {
        Form {
            fields: fields.iter().map(|k| (*k, String::new())).collect(),
            focus: Some(0),
            choice: None,
            menu: TextMenu::Closed,
        }
    }

    fn value(&self, i: usize) -> &str {
        self.fields.get(i).map(|(_, v)| v.as_str()).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Op {
    Noop,
    Go(View),
    Launch(&'static str),
    Focus(usize),
    ToggleWifi,
    ToggleBluetooth,
    StartTimer,
    StopTimer,
    NewAlarm,
    SaveAlarm,
    NewContact,
    SaveContact,
    ChooseLabel(&'static str),
    NewMessage,
    SendMessage,
    NewExpense,
    SaveExpense,
    ChooseCategory(&'static str),
    SelectFile(usize),
    RenameFile(usize),
    CommitRename(usize),
    DeleteFile(usize),
    StopRecording,
    SaveRecording,
    OpenFieldMenu,
    SelectAll,
    ClearField,
    CloseMenu,
    DeleteRecipe(usize),
}

/// All hidden state of the simulated phone. Task templates seed it and read
/// it back in their success predicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Device {
    view: View,
    form: Form,
    pub wifi: bool,
    pub bluetooth: bool,
    pub contacts: Vec<Contact>,
    pub conversations: Vec<String>,
    pub sent: Vec<(String, String)>,
    pub timer: Option<String>,
    pub alarms: Vec<String>,
    pub recordings: Vec<String>,
    pub next_recording: u32,
    pub files: Vec<String>,
    pub recipes: Vec<String>,
    pub expenses: Vec<Expense>,
}

impl Default for Device {
    fn default() -> Self {
        Device {
            view: View::Home,
            form: Form::default(),
            wifi: false,
            bluetooth: false,
            contacts: Vec::new(),
            conversations: Vec::new(),
            sent: Vec::new(),
            timer: None,
            alarms: Vec::new(),
            recordings: Vec::new(),
            next_recording: 1,
            files: Vec::new(),
            recipes: Vec::new(),
            expenses: Vec::new(),
        }
    }
}

/// A rendered screen plus the effect of clicking or long-pressing each of its
/// clickable elements (indexed like the clickable list).
pub(crate) struct Rendered {
    pub screen: UiScreen,
    click: Vec<Op>,
    long_press: Vec<Op>,
}

const fn row(i: u32) -> BBox {
    BBox::new(40, 220 + 160 * i, 1040, 360 + 160 * i)
}

const TITLE: BBox = BBox::new(40, 60, 1040, 180);

struct Builder {
    id: &'static str,
    elements: Vec<UiElement>,
    click: Vec<Op>,
    long_press: Vec<Op>,
}

impl Builder {
    fn new(id: &'static str, title: &str) -> Self {
        let mut b = Builder { id, elements: Vec::new(), click: Vec::new(), long_press: Vec::new() };
        if !title.is_empty() {
            b.text("title", title, TITLE);
        }
        b
    }

    fn text(&mut self, kind: &str, text: &str, bbox: BBox) {
        self.elements.push(UiElement::new(kind, text, bbox, false));
    }

    fn clickable(&mut self, kind: &str, text: &str, bbox: BBox, click: Op) {
        self.clickable_full(kind, text, bbox, click, Op::Noop, false);
    }

    fn clickable_full(&mut self, kind: &str, text: &str, bbox: BBox, click: Op, long: Op, focused: bool) {
        self.elements.push(UiElement::new(kind, text, bbox, true).with_focus(focused));
        self.click.push(click);
        self.long_press.push(long);
    }

    fn field(&mut self, form: &Form, i: usize, bbox: BBox, long: Op) {
        let Some((kind, value)) = form.fields.get(i) else { return };
        let focused = form.focus == Some(i);
        self.clickable_full(kind, value, bbox, Op::Focus(i), long, focused);
    }

    fn bar(&mut self, buttons: Vec<(&str, Op)>) {
        let n = buttons.len() as u32;
        let width = 1000 / n.max(1);
        for (i, (text, op)) in buttons.into_iter().enumerate() {
            let left = 40 + width * i as u32;
            self.clickable("button", text, BBox::new(left, 2200, left + width - 20, 2340), op);
        }
    }

    fn finish(self) -> Rendered {
        Rendered {
            screen: UiScreen::new(self.id, SCREEN_WIDTH, SCREEN_HEIGHT, self.elements),
            click: self.click,
            long_press: self.long_press,
        }
    }
}

impl Device {
    pub fn screen(&self) -> UiScreen {
        self.render().screen
    }

    fn enter_app(&mut self, app: &str) -> bool {
        let view = match app {
            "Audio Recorder" => View::RecorderRoot,
            "Clock" => View::Clock(ClockTab::Clock),
            "Contacts" => View::ContactsRoot,
            "Expenses" => View::ExpensesRoot,
            "Files" => View::FilesRoot,
            "Messages" => View::MessagesRoot,
            "Recipes" => View::RecipesRoot(0),
            "Settings" => View::SettingsRoot,
            _ => return false,
        };
        self.form = Form::default();
        self.view = view;
        true
    }

    /// Applies one grounded action. Actions that do not apply to the current
    /// screen leave the device untouched.
    pub fn apply(&mut self, action: &GroundedAction) {
        match action {
            GroundedAction::OpenApp { app_name } => {
                self.enter_app(app_name);
            }
            GroundedAction::Click { x, y } | GroundedAction::LongPress { x, y } => {
                let rendered = self.render();
                let hit = rendered
                    .screen
                    .clickables()
                    .enumerate()
                    .filter(|(_, e)| e.bbox.contains(*x, *y))
                    .map(|(i, _)| i)
                    .last();
                if let Some(i) = hit {
                    let op = if matches!(action, GroundedAction::Click { .. }) {
                        rendered.click[i].clone()
                    } else {
                        rendered.long_press[i].clone()
                    };
                    self.run(op);
                }
            }
            GroundedAction::InputText { text } => {
                if let Some(i) = self.form.focus.filter(|i| *i < self.form.fields.len()) {
                    if self.has_visible_fields() {
                        self.form.fields[i].1.push_str(text);
                        self.form.menu = TextMenu::Closed;
                    }
                }
            }
            GroundedAction::Scroll(dir) => self.scroll(*dir),
            GroundedAction::NavigateHome => {
                self.view = View::Home;
                self.form = Form::default();
            }
            GroundedAction::NavigateBack => self.back(),
            GroundedAction::Wait => {}
        }
    }

    fn has_visible_fields(&self) -> bool {
        matches!(
            self.view,
            View::Clock(ClockTab::Timer)
                | View::AlarmNew
                | View::ContactsNew
                | View::MessagesNew
                | View::ExpensesNew
                | View::FileRename(_)
                | View::RecorderSave
        )
    }

    fn scroll(&mut self, dir: ScrollDirection) {
        if let View::RecipesRoot(page) = self.view {
            match dir {
                ScrollDirection::Down if (page + 1) * PAGE < self.recipes.len() => {
                    self.view = View::RecipesRoot(page + 1)
                }
                ScrollDirection::Up if page > 0 => self.view = View::RecipesRoot(page - 1),
                _ => {}
            }
        }
    }

    fn back(&mut self) {
        let next = match self.view {
            View::Home => View::Home,
            View::SettingsRoot
            | View::Clock(_)
            | View::ContactsRoot
            | View::MessagesRoot
            | View::ExpensesRoot
            | View::FilesRoot
            | View::RecorderRoot
            | View::RecipesRoot(_) => View::Home,
            View::SettingsNetwork | View::SettingsConnected => View::SettingsRoot,
            View::SettingsPage(_, parent) => match parent {
                SettingsParent::Root => View::SettingsRoot,
                SettingsParent::Network => View::SettingsNetwork,
                SettingsParent::Connected => View::SettingsConnected,
            },
            View::TimerRunning => View::Clock(ClockTab::Timer),
            View::AlarmNew => View::Clock(ClockTab::Alarm),
            View::ContactsNew => View::ContactsRoot,
            View::ContactsLabel => View::ContactsNew,
            View::MessagesNew | View::MessagesThread => View::MessagesRoot,
            View::ExpensesNew => View::ExpensesRoot,
            View::ExpensesCategory => View::ExpensesNew,
            View::FilesSelected(_) | View::FileDetail(_) | View::FileRename(_) => View::FilesRoot,
            View::FileDelete(i) => View::FileDetail(i),
            View::RecorderRecording => View::RecorderRoot,
            View::RecorderSave => {
                if self.form.menu != TextMenu::Closed {
                    self.form.menu = TextMenu::Closed;
                    return;
                }
                View::RecorderRoot
            }
            View::RecipeDetail(_) => View::RecipesRoot(0),
            View::RecipeDelete(i) => View::RecipeDetail(i),
        };
        if matches!(next, View::Home | View::ContactsRoot | View::ExpensesRoot | View::FilesRoot)
            || matches!(next, View::Clock(_) | View::MessagesRoot | View::RecorderRoot)
        {
            self.form = Form::default();
        }
        if next == View::Clock(ClockTab::Timer) {
            self.form = Form::new(&["minutes-field"]);
        }
        self.view = next;
    }

    fn run(&mut self, op: Op) {
        match op {
            Op::Noop => {}
            Op::Go(view) => {
                if let View::Clock(ClockTab::Timer) = view {
                    self.form = Form::new(&["minutes-field"]);
                }
                self.view = view;
            }
            Op::Launch(app) => {
                self.enter_app(app);
            }
            Op::Focus(i) => self.form.focus = Some(i),
            Op::ToggleWifi => self.wifi = !self.wifi,
            Op::ToggleBluetooth => self.bluetooth = !self.bluetooth,
            Op::StartTimer => {
                let minutes = self.form.value(0).to_string();
                if !minutes.is_empty() {
                    self.timer = Some(minutes);
                    self.view = View::TimerRunning;
                }
            }
            Op::StopTimer => {
                self.timer = None;
                self.form = Form::new(&["minutes-field"]);
                self.view = View::Clock(ClockTab::Timer);
            }
            Op::NewAlarm => {
                self.form = Form::new(&["time-field"]);
                self.view = View::AlarmNew;
            }
            Op::SaveAlarm => {
                let time = self.form.value(0).to_string();
                if !time.is_empty() {
                    self.alarms.push(time);
                    self.form = Form::default();
                    self.view = View::Clock(ClockTab::Alarm);
                }
            }
            Op::NewContact => {
                self.form = Form::new(&["name-field", "phone-field"]);
                self.view = View::ContactsNew;
            }
            Op::SaveContact => {
                if !self.form.value(0).is_empty() {
                    self.contacts.push(Contact {
                        name: self.form.value(0).to_string(),
                        phone: self.form.value(1).to_string(),
                        label: self.form.choice.clone(),
                    });
                    self.form = Form::default();
                    self.view = View::ContactsRoot;
                }
            }
            Op::ChooseLabel(label) => {
                self.form.choice = Some(label.to_string());
                self.view = View::ContactsNew;
            }
            Op::NewMessage => {
                self.form = Form::new(&["to-field", "message-field"]);
                self.view = View::MessagesNew;
            }
            Op::SendMessage => {
                let (to, body) = (self.form.value(0), self.form.value(1));
                if !to.is_empty() && !body.is_empty() {
                    self.sent.push((to.to_string(), body.to_string()));
                    self.form = Form::default();
                    self.view = View::MessagesThread;
                }
            }
            Op::NewExpense => {
                self.form = Form::new(&["name-field", "amount-field"]);
                self.view = View::ExpensesNew;
            }
            Op::SaveExpense => {
                if !self.form.value(0).is_empty() && !self.form.value(1).is_empty() {
                    self.expenses.push(Expense {
                        name: self.form.value(0).to_string(),
                        amount: self.form.value(1).to_string(),
                        category: self.form.choice.clone(),
                    });
                    self.form = Form::default();
                    self.view = View::ExpensesRoot;
                }
            }
            Op::ChooseCategory(category) => {
                self.form.choice = Some(category.to_string());
                self.view = View::ExpensesNew;
            }
            Op::SelectFile(i) => self.view = View::FilesSelected(i),
            Op::RenameFile(i) => {
                self.form = Form::new(&["filename-field"]);
                self.view = View::FileRename(i);
            }
            Op::CommitRename(i) => {
                let name = self.form.value(0).to_string();
                if !name.is_empty() && i < self.files.len() {
                    self.files[i] = name;
                    self.form = Form::default();
                    self.view = View::FilesRoot;
                }
            }
            Op::DeleteFile(i) => {
                if i < self.files.len() {
                    self.files.remove(i);
                }
                self.view = View::FilesRoot;
            }
            Op::StopRecording => {
                let mut form = Form::new(&["filename-field"]);
                form.fields[0].1 = format!("Recording_{}", self.next_recording);
                self.form = form;
                self.view = View::RecorderSave;
            }
            Op::SaveRecording => {
                let name = self.form.value(0).to_string();
                if !name.is_empty() {
                    self.recordings.push(name);
                    self.next_recording += 1;
                    self.form = Form::default();
                    self.view = View::RecorderRoot;
                }
            }
            Op::OpenFieldMenu => {
                if !self.form.value(0).is_empty() {
                    self.form.menu = TextMenu::Edit;
                }
            }
            Op::SelectAll => self.form.menu = TextMenu::Selection,
            Op::ClearField => {
                if let Some((_, v)) = self.form.fields.get_mut(0) {
                    v.clear();
                }
                self.form.menu = TextMenu::Closed;
            }
            Op::CloseMenu => self.form.menu = TextMenu::Closed,
            Op::DeleteRecipe(i) => {
                if i < self.recipes.len() {
                    self.recipes.remove(i);
                }
                self.view = View::RecipesRoot(0);
            }
        }
    }

    pub(crate) fn render(&self) -> Rendered {
        match self.view {
            View::Home => {
                let mut b = Builder::new("home", "");
                b.text("text", "12:00", BBox::new(40, 100, 1040, 300));
                for (i, app) in APPS.iter().enumerate() {
                    let (c, r) = (i as u32 % 4, i as u32 / 4);
                    let bbox = BBox::new(40 + 260 * c, 400 + 300 * r, 260 + 260 * c, 620 + 300 * r);
                    b.clickable("app-icon", app, bbox, Op::Launch(app));
                }
                b.finish()
            }
            View::SettingsRoot => {
                let mut b = Builder::new("settings", "Settings");
                let items: [(&str, Op); 5] = [
                    ("Network & internet", Op::Go(View::SettingsNetwork)),
                    ("Connected devices", Op::Go(View::SettingsConnected)),
                    ("Display", Op::Go(View::SettingsPage("Display", SettingsParent::Root))),
                    ("Sound", Op::Go(View::SettingsPage("Sound", SettingsParent::Root))),
                    ("Battery", Op::Go(View::SettingsPage("Battery", SettingsParent::Root))),
                ];
                for (i, (text, op)) in items.into_iter().enumerate() {
                    b.clickable("menu-item", text, row(i as u32), op);
                }
                b.finish()
            }
            View::SettingsNetwork => {
                let mut b = Builder::new("settings-network", "Network & internet");
                let page = |name| Op::Go(View::SettingsPage(name, SettingsParent::Network));
                b.clickable("menu-item", "Internet", row(0), page("Internet"));
                b.clickable("menu-item", "SIMs", row(1), page("SIMs"));
                b.clickable("switch", "Wi-Fi", BBox::new(40, 540, 760, 680), Op::ToggleWifi);
                b.text("status", on_off(self.wifi), BBox::new(800, 540, 1040, 680));
                b.clickable("menu-item", "Hotspot & tethering", row(3), page("Hotspot & tethering"));
                b.finish()
            }
            View::SettingsConnected => {
                let mut b = Builder::new("settings-connected", "Connected devices");
                let page = |name| Op::Go(View::SettingsPage(name, SettingsParent::Connected));
                b.clickable("menu-item", "Pair new device", row(0), page("Pair new device"));
                b.clickable("switch", "Bluetooth", BBox::new(40, 380, 760, 520), Op::ToggleBluetooth);
                b.text("status", on_off(self.bluetooth), BBox::new(800, 380, 1040, 520));
                b.clickable("menu-item", "Connection preferences", row(2), page("Connection preferences"));
                b.finish()
            }
            View::SettingsPage(name, _) => {
                let mut b = Builder::new("settings-page", name);
                b.text("text", "Nothing to configure", row(0));
                b.finish()
            }
            View::Clock(tab) => self.render_clock(tab),
            View::TimerRunning => {
                let mut b = Builder::new("clock-timer-running", "Timer");
                b.text("text", "Timer running", row(0));
                b.bar(vec![("Stop", Op::StopTimer)]);
                b.finish()
            }
            View::AlarmNew => {
                let mut b = Builder::new("clock-alarm-new", "New alarm");
                b.field(&self.form, 0, row(0), Op::Noop);
                b.bar(vec![("Cancel", Op::Go(View::Clock(ClockTab::Alarm))), ("OK", Op::SaveAlarm)]);
                b.finish()
            }
            View::ContactsRoot => {
                let mut b = Builder::new("contacts", "Contacts");
                for (i, c) in self.contacts.iter().take(PAGE + 1).enumerate() {
                    b.clickable("list-item", &c.name, row(i as u32), Op::Noop);
                }
                b.bar(vec![("Create contact", Op::NewContact)]);
                b.finish()
            }
            View::ContactsNew => {
                let mut b = Builder::new("contacts-new", "Create contact");
                b.field(&self.form, 0, row(0), Op::Noop);
                b.field(&self.form, 1, row(1), Op::Noop);
                let label = self.form.choice.as_deref().unwrap_or("Label");
                b.clickable("dropdown", label, row(2), Op::Go(View::ContactsLabel));
                b.bar(vec![("Cancel", Op::Go(View::ContactsRoot)), ("Save", Op::SaveContact)]);
                b.finish()
            }
            View::ContactsLabel => {
                let mut b = Builder::new("contacts-label", "Label");
                for (i, label) in CONTACT_LABELS.iter().enumerate() {
                    b.clickable("menu-item", label, row(i as u32), Op::ChooseLabel(label));
                }
                b.finish()
            }
            View::MessagesRoot => {
                let mut b = Builder::new("messages", "Messages");
                for (i, c) in self.conversations.iter().take(PAGE).enumerate() {
                    b.clickable("list-item", c, row(i as u32), Op::Noop);
                }
                b.bar(vec![("Start chat", Op::NewMessage)]);
                b.finish()
            }
            View::MessagesNew => {
                let mut b = Builder::new("messages-new", "New conversation");
                b.field(&self.form, 0, row(0), Op::Noop);
                b.field(&self.form, 1, row(1), Op::Noop);
                b.bar(vec![("Send", Op::SendMessage)]);
                b.finish()
            }
            View::MessagesThread => {
                let mut b = Builder::new("messages-thread", "Conversation");
                b.text("text", "Message sent", row(0));
                b.finish()
            }
            View::ExpensesRoot => {
                let mut b = Builder::new("expenses", "Expenses");
                for (i, e) in self.expenses.iter().take(PAGE).enumerate() {
                    b.clickable("list-item", &e.name, row(i as u32), Op::Noop);
                }
                b.bar(vec![("Add expense", Op::NewExpense)]);
                b.finish()
            }
            View::ExpensesNew => {
                let mut b = Builder::new("expenses-new", "New expense");
                b.field(&self.form, 0, row(0), Op::Noop);
                b.field(&self.form, 1, row(1), Op::Noop);
                let category = self.form.choice.as_deref().unwrap_or("Category");
                b.clickable("dropdown", category, row(2), Op::Go(View::ExpensesCategory));
                b.bar(vec![("Cancel", Op::Go(View::ExpensesRoot)), ("Save", Op::SaveExpense)]);
                b.finish()
            }
            View::ExpensesCategory => {
                let mut b = Builder::new("expenses-category", "Category");
                for (i, c) in EXPENSE_CATEGORIES.iter().enumerate() {
                    b.clickable("menu-item", c, row(i as u32), Op::ChooseCategory(c));
                }
                b.finish()
            }
            View::FilesRoot | View::FilesSelected(_) => {
                let selected = match self.view {
                    View::FilesSelected(i) => Some(i),
                    _ => None,
                };
                let title = if selected.is_some() { "1 selected" } else { "Files" };
                let id = if selected.is_some() { "files-selected" } else { "files" };
                let mut b = Builder::new(id, title);
                for (i, f) in self.files.iter().take(8).enumerate() {
                    let click = if selected.is_some() { Op::SelectFile(i) } else { Op::Go(View::FileDetail(i)) };
                    b.clickable_full("list-item", f, row(i as u32), click, Op::SelectFile(i), false);
                }
                if let Some(i) = selected {
                    b.bar(vec![
                        ("Cancel", Op::Go(View::FilesRoot)),
                        ("Rename", Op::RenameFile(i)),
                        ("Delete", Op::Go(View::FileDelete(i))),
                    ]);
                }
                b.finish()
            }
            View::FileDetail(i) => {
                let mut b = Builder::new("files-detail", "File");
                b.text("content", self.files.get(i).map(String::as_str).unwrap_or(""), row(0));
                b.text("text", "Size: 12 KB", row(1));
                b.bar(vec![
                    ("Share", Op::Noop),
                    ("Rename", Op::RenameFile(i)),
                    ("Delete", Op::Go(View::FileDelete(i))),
                ]);
                b.finish()
            }
            View::FileDelete(i) => {
                let mut b = Builder::new("files-delete", "Delete file?");
                b.text("content", self.files.get(i).map(String::as_str).unwrap_or(""), row(0));
                b.bar(vec![("Cancel", Op::Go(View::FileDetail(i))), ("OK", Op::DeleteFile(i))]);
                b.finish()
            }
            View::FileRename(i) => {
                let mut b = Builder::new("files-rename", "Rename");
                b.field(&self.form, 0, row(0), Op::Noop);
                b.bar(vec![("Cancel", Op::Go(View::FilesRoot)), ("OK", Op::CommitRename(i))]);
                b.finish()
            }
            View::RecorderRoot => {
                let mut b = Builder::new("recorder", "Audio Recorder");
                for (i, r) in self.recordings.iter().take(PAGE).enumerate() {
                    b.clickable("list-item", r, row(i as u32), Op::Noop);
                }
                b.bar(vec![("Record", Op::Go(View::RecorderRecording))]);
                b.finish()
            }
            View::RecorderRecording => {
                let mut b = Builder::new("recorder-recording", "Recording");
                b.text("text", "Recording...", row(0));
                b.bar(vec![("Stop", Op::StopRecording)]);
                b.finish()
            }
            View::RecorderSave => {
                let mut b = Builder::new("recorder-save", "Save recording");
                b.field(&self.form, 0, row(0), Op::OpenFieldMenu);
                let menu: &[(&str, Op)] = match self.form.menu {
                    TextMenu::Closed => &[],
                    TextMenu::Edit => &[("Select all", Op::SelectAll), ("Paste", Op::CloseMenu)],
                    TextMenu::Selection => {
                        &[("Cut", Op::ClearField), ("Copy", Op::CloseMenu), ("Delete", Op::ClearField)]
                    }
                };
                for (i, (text, op)) in menu.iter().enumerate() {
                    let left = 40 + 330 * i as u32;
                    b.clickable("menu-item", text, BBox::new(left, 380, left + 310, 480), op.clone());
                }
                b.bar(vec![("Cancel", Op::Go(View::RecorderRoot)), ("Save", Op::SaveRecording)]);
                b.finish()
            }
            View::RecipesRoot(page) => {
                let mut b = Builder::new("recipes", "Recipes");
                for (slot, i) in (page * PAGE..self.recipes.len().min((page + 1) * PAGE)).enumerate() {
                    b.clickable("list-item", &self.recipes[i], row(slot as u32), Op::Go(View::RecipeDetail(i)));
                }
                b.bar(vec![("Add recipe", Op::Noop)]);
                b.finish()
            }
            View::RecipeDetail(i) => {
                let mut b = Builder::new("recipes-detail", "Recipe");
                b.text("content", self.recipes.get(i).map(String::as_str).unwrap_or(""), row(0));
                b.text("text", "Ingredients", row(1));
                b.bar(vec![("Edit", Op::Noop), ("Delete", Op::Go(View::RecipeDelete(i)))]);
                b.finish()
            }
            View::RecipeDelete(i) => {
                let mut b = Builder::new("recipes-delete", "Delete recipe?");
                b.text("content", self.recipes.get(i).map(String::as_str).unwrap_or(""), row(0));
                b.bar(vec![("Cancel", Op::Go(View::RecipeDetail(i))), ("OK", Op::DeleteRecipe(i))]);
                b.finish()
            }
        }
    }

    fn render_clock(&self, tab: ClockTab) -> Rendered {
        let id = match tab {
            ClockTab::Alarm => "clock-alarm",
            ClockTab::Clock => "clock-clock",
            ClockTab::Timer => "clock-timer",
            ClockTab::Stopwatch => "clock-stopwatch",
        };
        let mut b = Builder::new(id, "Clock");
        let tabs = [
            ("Alarm", ClockTab::Alarm),
            ("Clock", ClockTab::Clock),
            ("Timer", ClockTab::Timer),
            ("Stopwatch", ClockTab::Stopwatch),
        ];
        for (i, (text, t)) in tabs.into_iter().enumerate() {
            let left = 40 + 250 * i as u32;
            b.clickable("tab", text, BBox::new(left, 220, left + 240, 360), Op::Go(View::Clock(t)));
        }
        match tab {
            ClockTab::Alarm => {
                for (i, a) in self.alarms.iter().take(PAGE).enumerate() {
                    b.clickable("list-item", a, row(i as u32 + 1), Op::Noop);
                }
                b.bar(vec![("Add alarm", Op::NewAlarm)]);
            }
            ClockTab::Clock => b.text("text", "12:00", row(1)),
            ClockTab::Timer => {
                b.field(&self.form, 0, row(1), Op::Noop);
                b.bar(vec![("Start", Op::StartTimer)]);
            }
            ClockTab::Stopwatch => {
                b.text("text", "00:00.00", row(1));
                b.bar(vec![("Start", Op::Noop)]);
            }
        }
        b.finish()
    }
}

fn on_off(v: bool) -> &'static str {
    if v {
        "on"
    } else {
        "off"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{ground_action, Action};

    fn act(d: &mut Device, a: Action) {
        let g = ground_action(&a, &d.screen()).expect("valid target");
        d.apply(&g);
    }

    fn tap(d: &mut Device, kind: &str, text: &str) {
        let target = find(d, kind, text);
        act(d, Action::Click { target });
    }

    fn find(d: &Device, kind: &str, text: &str) -> usize {
        d.screen()
            .clickables()
            .position(|e| e.kind == kind && e.text == text)
            .unwrap_or_else(|| panic!("{kind} '{text}' not on {}", d.screen().screen_id))
    }

    #[test]
    fn all_screens_are_valid() {
        let mut d = Device {
            files: vec!["a.txt".into(), "b.txt".into()],
            recipes: (0..12).map(|i| format!("r{i}")).collect(),
            ..Device::default()
        };
        for app in APPS {
            act(&mut d, Action::OpenApp { app_name: app.into() });
            d.screen().validate().unwrap();
            for i in 0..d.screen().clickable_count() {
                let mut probe = d.clone();
                act(&mut probe, Action::Click { target: i });
                probe.screen().validate().unwrap();
                if probe.screen().clickable_count() > 0 {
                    act(&mut probe, Action::LongPress { target: 0 });
                    probe.screen().validate().unwrap();
                }
            }
        }
    }

    #[test]
    fn open_app_and_back() {
        let mut d = Device::default();
        act(&mut d, Action::OpenApp { app_name: "Settings".into() });
        assert_eq!(d.screen().screen_id, "settings");
        act(&mut d, Action::OpenApp { app_name: "Nope".into() });
        assert_eq!(d.screen().screen_id, "settings");
        act(&mut d, Action::NavigateBack);
        assert_eq!(d.screen().screen_id, "home");
    }

    #[test]
    fn input_goes_to_focused_field_only() {
        let mut d = Device::default();
        let before = d.screen();
        act(&mut d, Action::InputText { text: "x".into() });
        assert_eq!(d.screen(), before);

        act(&mut d, Action::OpenApp { app_name: "Contacts".into() });
        tap(&mut d, "button", "Create contact");
        act(&mut d, Action::InputText { text: "Ann".into() });
        tap(&mut d, "phone-field", "");
        act(&mut d, Action::InputText { text: "555".into() });
        let s = d.screen();
        assert_eq!(s.clickable(0).unwrap().text, "Ann");
        assert_eq!(s.clickable(1).unwrap().text, "555");
        assert!(s.clickable(1).unwrap().focused);
    }

    #[test]
    fn recorder_prefill_requires_clearing() {
        let mut d = Device { next_recording: 7, ..Device::default() };
        act(&mut d, Action::OpenApp { app_name: "Audio Recorder".into() });
        tap(&mut d, "button", "Record");
        tap(&mut d, "button", "Stop");
        assert_eq!(d.screen().clickable(0).unwrap().text, "Recording_7");

        let mut naive = d.clone();
        act(&mut naive, Action::InputText { text: "memo".into() });
        assert_eq!(naive.screen().clickable(0).unwrap().text, "Recording_7memo");

        act(&mut d, Action::LongPress { target: 0 });
        tap(&mut d, "menu-item", "Select all");
        tap(&mut d, "menu-item", "Delete");
        act(&mut d, Action::InputText { text: "memo".into() });
        tap(&mut d, "button", "Save");
        assert_eq!(d.recordings, vec!["memo".to_string()]);
    }

    #[test]
    fn recipe_scrolling_pages() {
        let mut d = Device { recipes: (0..12).map(|i| format!("r{i}")).collect(), ..Device::default() };
        act(&mut d, Action::OpenApp { app_name: "Recipes".into() });
        let page0 = d.screen();
        act(&mut d, Action::Scroll(ScrollDirection::Up));
        assert_eq!(d.screen(), page0);
        act(&mut d, Action::Scroll(ScrollDirection::Down));
        act(&mut d, Action::Scroll(ScrollDirection::Down));
        assert_eq!(d.screen().clickable(0).unwrap().text, "r10");
        let last = d.screen();
        act(&mut d, Action::Scroll(ScrollDirection::Down));
        assert_eq!(d.screen(), last);
    }
}
