//! Newline-delimited JSON protocol over TCP. Each line is one object whose
//! `kind` field names the message.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AckStatus, ActRequest, Broker, BrokerClient, BrokerError, EpisodeReport, TaskTicket};
use crate::action::{parse_action, serialize_action, Action};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Request {
    PullTask {
        #[serde(rename = "worker-id")]
        worker_id: String,
    },
    Act(ActRequest),
    Report {
        report: EpisodeReport,
    },
    Submit {
        tickets: Vec<TaskTicket>,
    },
}

const REQUEST_KINDS: [&str; 4] = ["pull-task", "act", "report", "submit"];

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Response {
    Task { ticket: TaskTicket },
    Empty,
    Action { action: String },
    Ack { status: AckStatus },
    Accepted { count: usize },
    Error { code: String, message: String },
}

fn error_response(code: &str, message: impl Into<String>) -> Response {
    Response::Error { code: code.to_string(), message: message.into() }
}

fn handle_line(broker: &Broker, line: &str) -> Response {
    let value: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return error_response("malformed-request", e.to_string()),
    };
    let kind = value.get("kind").and_then(Value::as_str).unwrap_or("");
    if !REQUEST_KINDS.contains(&kind) {
        return error_response("unknown-kind", format!("unknown message kind `{kind}`"));
    }
    let request: Request = match serde_json::from_value(value) {
        Ok(r) => r,
        Err(e) => return error_response("malformed-request", e.to_string()),
    };
    let result = match request {
        Request::PullTask { worker_id } => Ok(match broker.pull_task(&worker_id) {
            Some(ticket) => Response::Task { ticket },
            None => Response::Empty,
        }),
        Request::Act(r) => broker.request_action(r).map(|a| Response::Action { action: serialize_action(&a) }),
        Request::Report { report } => broker.report(report).map(|status| Response::Ack { status }),
        Request::Submit { tickets } => broker.submit(tickets).map(|count| Response::Accepted { count }),
    };
    result.unwrap_or_else(|e| error_response(e.code(), e.to_string()))
}

fn handle_connection(broker: Arc<Broker>, stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut reply = serde_json::to_string(&handle_line(&broker, &line)).expect("response encoding");
        reply.push('\n');
        writer.write_all(reply.as_bytes())?;
    }
    Ok(())
}

/// A running server. Dropping it leaves the server running; call
/// [`ServerHandle::stop`] to shut it down.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting connections. Open connections finish on their own.
    pub fn stop(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    /// Blocks until the accept loop ends.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Binds `addr` and serves `broker` on a background thread, one thread per
/// connection.
pub fn serve(broker: Arc<Broker>, addr: impl ToSocketAddrs) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    let thread = thread::Builder::new().name("broker-accept".into()).spawn(move || {
        for stream in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            match stream {
                Ok(stream) => {
                    let broker = Arc::clone(&broker);
                    thread::spawn(move || {
                        if let Err(e) = handle_connection(broker, stream) {
                            log::debug!("connection closed: {e}");
                        }
                    });
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
    })?;
    Ok(ServerHandle { addr, stop, thread: Some(thread) })
}

/// Networked [`BrokerClient`]. Each call is retried up to three times with
/// doubling backoff, reconnecting in between.
pub struct TcpClient {
    addr: String,
    conn: Option<(BufReader<TcpStream>, TcpStream)>,
    attempts: u32,
    backoff: Duration,
}

impl TcpClient {
    pub fn new(addr: impl Into<String>) -> Self {
        TcpClient { addr: addr.into(), conn: None, attempts: 3, backoff: Duration::from_millis(50) }
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    /// Sends one raw line and returns the raw reply line.
    pub fn raw(&mut self, line: &str) -> Result<String, BrokerError> {
        let mut last = String::new();
        for attempt in 0..self.attempts {
            match self.try_raw(line) {
                Ok(reply) => return Ok(reply),
                Err(e) => {
                    self.conn = None;
                    last = e.to_string();
                    if attempt + 1 < self.attempts {
                        thread::sleep(self.backoff * 2u32.pow(attempt));
                    }
                }
            }
        }
        Err(BrokerError::Connection(format!("{}: {last}", self.addr)))
    }

    fn try_raw(&mut self, line: &str) -> io::Result<String> {
        if self.conn.is_none() {
            let stream = TcpStream::connect(&self.addr)?;
            stream.set_nodelay(true)?;
            self.conn = Some((BufReader::new(stream.try_clone()?), stream));
        }
        let (reader, writer) = self.conn.as_mut().expect("connected");
        writer.write_all(format!("{line}\n").as_bytes())?;
        let mut reply = String::new();
        if reader.read_line(&mut reply)? == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "server closed the connection"));
        }
        Ok(reply)
    }

    fn call(&mut self, request: &Request) -> Result<Response, BrokerError> {
        let line = serde_json::to_string(request).expect("request encoding");
        let reply = self.raw(&line)?;
        let response: Response =
            serde_json::from_str(&reply).map_err(|e| BrokerError::Connection(format!("bad reply: {e}")))?;
        match response {
            Response::Error { code, message } => Err(match code.as_str() {
                "duplicate-ticket" => BrokerError::DuplicateTicket(message),
                "unknown-ticket" => BrokerError::UnknownTicket(message),
                "policy-unavailable" => BrokerError::PolicyUnavailable,
                "malformed-request" => BrokerError::MalformedRequest(message),
                _ => BrokerError::Remote { code, message },
            }),
            other => Ok(other),
        }
    }
}

fn unexpected(r: Response) -> BrokerError {
    BrokerError::Connection(format!("unexpected reply {r:?}"))
}

impl BrokerClient for TcpClient {
    fn submit(&mut self, tickets: Vec<TaskTicket>) -> Result<usize, BrokerError> {
        match self.call(&Request::Submit { tickets })? {
            Response::Accepted { count } => Ok(count),
            r => Err(unexpected(r)),
        }
    }

    fn pull_task(&mut self, worker_id: &str) -> Result<Option<TaskTicket>, BrokerError> {
        match self.call(&Request::PullTask { worker_id: worker_id.to_string() })? {
            Response::Task { ticket } => Ok(Some(ticket)),
            Response::Empty => Ok(None),
            r => Err(unexpected(r)),
        }
    }

    fn request_action(&mut self, r: ActRequest) -> Result<Action, BrokerError> {
        match self.call(&Request::Act(r))? {
            Response::Action { action } => {
                parse_action(&action).map_err(|e| BrokerError::Connection(format!("bad action: {e}")))
            }
            r => Err(unexpected(r)),
        }
    }

    fn report(&mut self, e: EpisodeReport) -> Result<AckStatus, BrokerError> {
        match self.call(&Request::Report { report: e })? {
            Response::Ack { status } => Ok(status),
            r => Err(unexpected(r)),
        }
    }
}
