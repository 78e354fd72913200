//! Client-server collection: a task queue, an action-request queue in front
//! of a single policy thread, and the worker loop that drives sessions.
//!
//! Workers pull [`TaskTicket`]s, run an episode by sending one [`ActRequest`]
//! per step and finish with an [`EpisodeReport`]. Policy requests are served
//! strictly one at a time in arrival order.

mod wire;

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{Action, HistoryEntry};
use crate::datapipe::{DataError, TrajectoryStore};
use crate::env::{run_episode, EnvError, EnvSpec, Trajectory};
use crate::policy::{request_rng, Policy};
use crate::ui::{UiScreen, HISTORY_CAP};

pub use wire::{serve, ServerHandle, TcpClient};

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error("ticket `{0}` was already submitted")]
    DuplicateTicket(String),
    #[error("ticket `{0}` was never delivered")]
    UnknownTicket(String),
    #[error("policy server unavailable")]
    PolicyUnavailable,
    #[error("malformed request: {0}")]
    MalformedRequest(String),
    #[error("connection failure: {0}")]
    Connection(String),
    #[error("server error {code}: {message}")]
    Remote { code: String, message: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Store(#[from] DataError),
}

impl BrokerError {
    /// Stable error code used on the wire.
    pub fn code(&self) -> &str {
        match self {
            BrokerError::DuplicateTicket(_) => "duplicate-ticket",
            BrokerError::UnknownTicket(_) => "unknown-ticket",
            BrokerError::PolicyUnavailable => "policy-unavailable",
            BrokerError::MalformedRequest(_) => "malformed-request",
            BrokerError::Connection(_) => "connection",
            BrokerError::Remote { code, .. } => code,
            BrokerError::Env(_) => "env",
            BrokerError::Store(_) => "store",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTicket {
    #[serde(rename = "ticket-id")]
    pub ticket_id: String,
    #[serde(rename = "template-id")]
    pub template_id: String,
    pub seed: u64,
    pub temperature: f64,
    #[serde(rename = "max-steps")]
    pub max_steps: usize,
    pub attempt: u32,
}

impl TaskTicket {
    /// The same task under a fresh id, for re-running an abandoned episode.
    pub fn retry(&self) -> TaskTicket {
        let base = self.ticket_id.split('~').next().unwrap_or(&self.ticket_id);
        TaskTicket { ticket_id: format!("{base}~{}", self.attempt + 1), attempt: self.attempt + 1, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActRequest {
    #[serde(rename = "episode-id")]
    pub episode_id: String,
    /// Index of this request within its episode.
    pub step: u64,
    pub goal: String,
    pub screen: UiScreen,
    pub history: Vec<HistoryEntry>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    #[serde(rename = "ticket-id")]
    pub ticket_id: String,
    pub trajectory: Trajectory,
    #[serde(rename = "wall-time")]
    pub wall_time: f64,
    #[serde(rename = "inference-times")]
    pub inference_times: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AckStatus {
    Fresh,
    Duplicate,
}

#[derive(Debug, Default)]
struct TaskState {
    queue: VecDeque<TaskTicket>,
    known: HashSet<String>,
    delivered: HashMap<String, String>,
    reported: HashSet<String>,
    deliveries: Vec<(String, String)>,
}

struct Job {
    seq: u64,
    request: ActRequest,
    reply: Sender<Action>,
}

struct Arrivals {
    next: u64,
    sender: Option<Sender<Job>>,
}

/// Task queue, report intake and the sequential policy server.
pub struct Broker {
    tasks: Mutex<TaskState>,
    arrivals: Mutex<Arrivals>,
    processed: Arc<Mutex<Vec<u64>>>,
    policy_thread: Mutex<Option<JoinHandle<()>>>,
    store: Arc<TrajectoryStore>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Broker {
    /// Starts the policy thread. Decisions draw randomness from
    /// `(policy_seed, episode-id, step)` so results do not depend on how
    /// requests from different workers interleave.
    pub fn new(policy: Arc<dyn Policy>, policy_seed: u64, store: Arc<TrajectoryStore>) -> Self {
        let (sender, receiver) = mpsc::channel::<Job>();
        let processed = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&processed);
        let handle = thread::Builder::new()
            .name("policy-server".into())
            .spawn(move || policy_loop(policy, policy_seed, receiver, log))
            .expect("spawn policy thread");
        Broker {
            tasks: Mutex::new(TaskState::default()),
            arrivals: Mutex::new(Arrivals { next: 0, sender: Some(sender) }),
            processed,
            policy_thread: Mutex::new(Some(handle)),
            store,
        }
    }

    pub fn store(&self) -> &Arc<TrajectoryStore> {
        &self.store
    }

    /// Enqueues all tickets or none.
    pub fn submit(&self, tickets: Vec<TaskTicket>) -> Result<usize, BrokerError> {
        let mut state = lock(&self.tasks);
        let mut batch = HashSet::new();
        for t in &tickets {
            if state.known.contains(&t.ticket_id) || !batch.insert(t.ticket_id.as_str()) {
                return Err(BrokerError::DuplicateTicket(t.ticket_id.clone()));
            }
        }
        let n = tickets.len();
        for t in tickets {
            state.known.insert(t.ticket_id.clone());
            state.queue.push_back(t);
        }
        Ok(n)
    }

    pub fn pull_task(&self, worker_id: &str) -> Option<TaskTicket> {
        let mut state = lock(&self.tasks);
        let ticket = state.queue.pop_front()?;
        state.delivered.insert(ticket.ticket_id.clone(), worker_id.to_string());
        state.deliveries.push((ticket.ticket_id.clone(), worker_id.to_string()));
        Some(ticket)
    }

    /// Queues `r` behind every earlier request and waits for the answer.
    pub fn request_action(&self, r: ActRequest) -> Result<Action, BrokerError> {
        if r.history.len() > HISTORY_CAP {
            return Err(BrokerError::MalformedRequest(format!(
                "history holds {} entries, at most {HISTORY_CAP} allowed",
                r.history.len()
            )));
        }
        if r.temperature.is_nan() || r.temperature < 0.0 {
            return Err(BrokerError::MalformedRequest("temperature must be non-negative".into()));
        }
        let (reply, answer) = mpsc::channel();
        {
            let mut arrivals = lock(&self.arrivals);
            let seq = arrivals.next;
            let sender = arrivals.sender.as_ref().ok_or(BrokerError::PolicyUnavailable)?;
            sender.send(Job { seq, request: r, reply }).map_err(|_| BrokerError::PolicyUnavailable)?;
            arrivals.next += 1;
        }
        answer.recv().map_err(|_| BrokerError::PolicyUnavailable)
    }

    pub fn report(&self, e: EpisodeReport) -> Result<AckStatus, BrokerError> {
        {
            let mut state = lock(&self.tasks);
            if !state.delivered.contains_key(&e.ticket_id) {
                return Err(BrokerError::UnknownTicket(e.ticket_id));
            }
            if !state.reported.insert(e.ticket_id.clone()) {
                log::warn!("duplicate report for ticket {}", e.ticket_id);
                return Ok(AckStatus::Duplicate);
            }
        }
        self.store.append(&e.ticket_id, e.trajectory)?;
        Ok(AckStatus::Fresh)
    }

    pub fn queued(&self) -> usize {
        lock(&self.tasks).queue.len()
    }

    /// `(ticket-id, worker-id)` in delivery order.
    pub fn deliveries(&self) -> Vec<(String, String)> {
        lock(&self.tasks).deliveries.clone()
    }

    pub fn reported(&self) -> HashSet<String> {
        lock(&self.tasks).reported.clone()
    }

    /// Arrival numbers of requests in the order the policy served them.
    pub fn processing_log(&self) -> Vec<u64> {
        lock(&self.processed).clone()
    }

    pub fn arrivals(&self) -> u64 {
        lock(&self.arrivals).next
    }

    /// Stops the policy thread after it drains pending requests.
    pub fn shutdown(&self) {
        lock(&self.arrivals).sender = None;
        if let Some(handle) = lock(&self.policy_thread).take() {
            let _ = handle.join();
        }
    }
}

impl Drop for Broker {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn policy_loop(policy: Arc<dyn Policy>, policy_seed: u64, jobs: Receiver<Job>, log: Arc<Mutex<Vec<u64>>>) {
    for job in jobs {
        let r = &job.request;
        let mut rng = request_rng(policy_seed, &r.episode_id, r.step);
        let action = policy.decide(&r.goal, &r.screen, &r.history, r.temperature, &mut rng);
        lock(&log).push(job.seq);
        let _ = job.reply.send(action);
    }
}

/// What a worker needs from the broker, locally or over the network.
pub trait BrokerClient {
    fn submit(&mut self, tickets: Vec<TaskTicket>) -> Result<usize, BrokerError>;
    fn pull_task(&mut self, worker_id: &str) -> Result<Option<TaskTicket>, BrokerError>;
    fn request_action(&mut self, r: ActRequest) -> Result<Action, BrokerError>;
    fn report(&mut self, e: EpisodeReport) -> Result<AckStatus, BrokerError>;
}

/// In-process client sharing the broker directly.
#[derive(Clone)]
pub struct LocalClient(pub Arc<Broker>);

impl BrokerClient for LocalClient {
    fn submit(&mut self, tickets: Vec<TaskTicket>) -> Result<usize, BrokerError> {
        self.0.submit(tickets)
    }

    fn pull_task(&mut self, worker_id: &str) -> Result<Option<TaskTicket>, BrokerError> {
        Ok(self.0.pull_task(worker_id))
    }

    fn request_action(&mut self, r: ActRequest) -> Result<Action, BrokerError> {
        self.0.request_action(r)
    }

    fn report(&mut self, e: EpisodeReport) -> Result<AckStatus, BrokerError> {
        self.0.report(e)
    }
}

/// Pulls and runs tickets until the queue is empty. Returns the number of
/// episodes reported. An episode whose policy connection fails is abandoned
/// and its ticket re-submitted with the attempt counter raised.
pub fn run_worker(worker_id: &str, client: &mut dyn BrokerClient, env: &EnvSpec) -> Result<usize, BrokerError> {
    let stop = AtomicBool::new(false);
    run_worker_until(worker_id, client, env, &stop)
}

/// [`run_worker`] that also returns once `stop` is set.
pub fn run_worker_until(
    worker_id: &str,
    client: &mut dyn BrokerClient,
    env: &EnvSpec,
    stop: &AtomicBool,
) -> Result<usize, BrokerError> {
    let mut completed = 0;
    while !stop.load(Ordering::Relaxed) {
        let Some(ticket) = client.pull_task(worker_id)? else { break };
        match run_ticket(&ticket, client, env) {
            Ok(report) => {
                client.report(report)?;
                completed += 1;
            }
            Err(BrokerError::Connection(message)) => {
                log::warn!("{worker_id}: abandoning {} ({message})", ticket.ticket_id);
                client.submit(vec![ticket.retry()])?;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(completed)
}

fn run_ticket(ticket: &TaskTicket, client: &mut dyn BrokerClient, env: &EnvSpec) -> Result<EpisodeReport, BrokerError> {
    let started = Instant::now();
    let mut instance = env.instantiate(&ticket.template_id, ticket.seed)?;
    instance.max_steps = ticket.max_steps.max(1);
    let session = env.reset(&instance)?;
    let mut inference_times = Vec::new();
    let mut step = 0;
    let trajectory = run_episode(session, |goal, screen, history| {
        let asked = Instant::now();
        let action = client.request_action(ActRequest {
            episode_id: ticket.ticket_id.clone(),
            step,
            goal: goal.to_string(),
            screen: screen.clone(),
            history: history.to_vec(),
            temperature: ticket.temperature,
        })?;
        inference_times.push(asked.elapsed().as_secs_f64());
        step += 1;
        Ok::<_, BrokerError>(action)
    })?;
    Ok(EpisodeReport {
        ticket_id: ticket.ticket_id.clone(),
        trajectory,
        wall_time: started.elapsed().as_secs_f64(),
        inference_times,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{OraclePolicy, RandomPolicy};

    fn ticket(id: &str, template: &str, seed: u64) -> TaskTicket {
        TaskTicket {
            ticket_id: id.into(),
            template_id: template.into(),
            seed,
            temperature: 0.0,
            max_steps: 20,
            attempt: 0,
        }
    }

    fn broker(policy: Arc<dyn Policy>) -> Arc<Broker> {
        Arc::new(Broker::new(policy, 1, Arc::new(TrajectoryStore::new())))
    }

    #[test]
    fn submit_pull_fifo() {
        let b = broker(Arc::new(RandomPolicy));
        assert_eq!(b.submit(vec![]).unwrap(), 0);
        assert_eq!(b.submit(vec![ticket("a", "settings-wifi", 1), ticket("b", "settings-wifi", 2)]).unwrap(), 2);
        assert!(matches!(b.submit(vec![ticket("a", "settings-wifi", 3)]), Err(BrokerError::DuplicateTicket(_))));
        assert_eq!(b.pull_task("w").unwrap().ticket_id, "a");
        assert_eq!(b.pull_task("w").unwrap().ticket_id, "b");
        assert!(b.pull_task("w").is_none());
    }

    #[test]
    fn reports_are_idempotent() {
        let env = EnvSpec::standard();
        let b = broker(Arc::new(OraclePolicy::new(&env)));
        b.submit(vec![ticket("t", "clock-timer-set", 4)]).unwrap();
        let t = b.pull_task("w").unwrap();
        let mut client = LocalClient(Arc::clone(&b));
        let report = run_ticket(&t, &mut client, &env).unwrap();
        assert_eq!(report.inference_times.len(), report.trajectory.step_count);
        assert_eq!(b.report(report.clone()).unwrap(), AckStatus::Fresh);
        assert_eq!(b.report(report.clone()).unwrap(), AckStatus::Duplicate);
        let mut stray = report;
        stray.ticket_id = "never".into();
        assert!(matches!(b.report(stray), Err(BrokerError::UnknownTicket(_))));
        assert_eq!(b.store().len(), 1);
    }

    #[test]
    fn history_cap_enforced() {
        let b = broker(Arc::new(RandomPolicy));
        let entry = HistoryEntry { action_type: "wait".into(), target_descriptor: None, text_payload: None };
        let r = ActRequest {
            episode_id: "e".into(),
            step: 0,
            goal: "g".into(),
            screen: UiScreen::new("s", 10, 10, vec![]),
            history: vec![entry; 6],
            temperature: 0.0,
        };
        assert!(matches!(b.request_action(r), Err(BrokerError::MalformedRequest(_))));
    }

    #[test]
    fn oracle_worker_solves_everything() {
        let env = EnvSpec::standard();
        let b = broker(Arc::new(OraclePolicy::new(&env)));
        let tickets: Vec<_> =
            (0..10).map(|i| ticket(&format!("t{i:02}"), env.templates()[i % 12].id, i as u64)).collect();
        b.submit(tickets).unwrap();
        let n = run_worker("w0", &mut LocalClient(Arc::clone(&b)), &env).unwrap();
        assert_eq!(n, 10);
        assert_eq!(b.store().len(), 10);
        assert_eq!(b.processing_log(), (0..b.arrivals()).collect::<Vec<_>>());
    }

    #[test]
    fn invalid_target_is_an_ineffective_step() {
        struct Bad;
        impl Policy for Bad {
            fn decide(&self, _: &str, _: &UiScreen, _: &[HistoryEntry], _: f64, _: &mut rand_chacha::ChaCha8Rng) -> Action {
                Action::Click { target: 999 }
            }
        }
        let env = EnvSpec::standard();
        let b = broker(Arc::new(Bad));
        b.submit(vec![ticket("x", "settings-wifi", 1)]).unwrap();
        assert_eq!(run_worker("w", &mut LocalClient(Arc::clone(&b)), &env).unwrap(), 1);
        assert_eq!(b.store().rejected(), 1);
    }
}
