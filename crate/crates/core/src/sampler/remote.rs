//! Client side of the remote sampler protocol.
//!
//! One connection is shared by all callers and at most one request is in
//! flight. A reader thread turns incoming lines into a channel so both
//! transports get the same timeout handling. Responses carrying an id other
//! than the pending one (late answers to requests that already timed out)
//! are discarded.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{Request, Response};
use super::{Sample, SampleSet, Sampler, SamplerError};
use crate::qubo::Qubo;
use crate::scalar::Scalar;

/// Returned energies must match local recomputation to this relative
/// tolerance.
pub const ENERGY_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

/// `HOST:PORT` (or `tcp://HOST:PORT`) for a TCP service, or
/// `stdio:PROGRAM ARGS...` to spawn a bridge and talk over its stdin/stdout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RemoteEndpoint {
    Tcp(String),
    Command(Vec<String>),
}

impl FromStr for RemoteEndpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(cmd) = s.strip_prefix("stdio:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err("stdio endpoint needs a program".into());
            }
            return Ok(Self::Command(argv));
        }
        let addr = s.strip_prefix("tcp://").unwrap_or(s);
        if !addr.contains(':') {
            return Err(format!("endpoint {s:?} is neither HOST:PORT nor stdio:PROGRAM"));
        }
        Ok(Self::Tcp(addr.to_string()))
    }
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn spawn_reader<R: BufRead + Send + 'static>(reader: R) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in reader.lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });
    rx
}

fn transport(e: impl std::fmt::Display) -> SamplerError {
    SamplerError::Transport(e.to_string())
}

impl Connection {
    fn open(endpoint: &RemoteEndpoint, timeout: Duration) -> Result<Self, SamplerError> {
        match endpoint {
            RemoteEndpoint::Tcp(addr) => {
                let mut last = None;
                for a in addr.to_socket_addrs().map_err(transport)? {
                    match TcpStream::connect_timeout(&a, timeout) {
                        Ok(stream) => {
                            stream.set_nodelay(true).map_err(transport)?;
                            let read = stream.try_clone().map_err(transport)?;
                            return Ok(Self {
                                writer: Box::new(stream),
                                lines: spawn_reader(BufReader::new(read)),
                                child: None,
                            });
                        }
                        Err(e) => last = Some(e),
                    }
                }
                Err(match last {
                    Some(e) => transport(format!("connect {addr}: {e}")),
                    None => transport(format!("{addr} resolved to no address")),
                })
            }
            RemoteEndpoint::Command(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| transport(format!("spawn {}: {e}", argv[0])))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Ok(Self {
                    writer: Box::new(stdin),
                    lines: spawn_reader(BufReader::new(stdout)),
                    child: Some(child),
                })
            }
        }
    }
}

pub struct RemoteSampler {
    endpoint: RemoteEndpoint,
    pub num_reads: usize,
    pub timeout: Duration,
    next_id: AtomicU64,
    conn: Mutex<Option<Connection>>,
}

impl RemoteSampler {
    pub fn new(endpoint: RemoteEndpoint) -> Self {
        Self {
            endpoint,
            num_reads: super::anneal::DEFAULT_NUM_READS,
            timeout: DEFAULT_TIMEOUT,
            next_id: AtomicU64::new(1),
            conn: Mutex::new(None),
        }
    }

    pub fn endpoint(&self) -> &RemoteEndpoint {
        &self.endpoint
    }

    /// Opens the connection if it is not already open.
    pub fn connect(&self) -> Result<(), SamplerError> {
        let mut guard = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(Connection::open(&self.endpoint, self.timeout)?);
        }
        Ok(())
    }

    fn exchange(&self, request: &Request) -> Result<Response, SamplerError> {
        let mut guard = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(Connection::open(&self.endpoint, self.timeout)?);
        }
        let conn = guard.as_mut().expect("connection opened above");
        let result = Self::round_trip(conn, request, self.timeout);
        if matches!(result, Err(SamplerError::Transport(_))) {
            // Broken pipe or closed stream: reconnect on the next call.
            *guard = None;
        }
        result
    }

    fn round_trip(
        conn: &mut Connection,
        request: &Request,
        timeout: Duration,
    ) -> Result<Response, SamplerError> {
        let mut line = serde_json::to_vec(request).map_err(transport)?;
        line.push(b'\n');
        conn.writer.write_all(&line).map_err(transport)?;
        conn.writer.flush().map_err(transport)?;
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let text = match conn.lines.recv_timeout(left) {
                Ok(Ok(text)) => text,
                Ok(Err(e)) => return Err(transport(e)),
                Err(RecvTimeoutError::Timeout) => return Err(SamplerError::Timeout(timeout)),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(transport("connection closed by remote"))
                }
            };
            if text.trim().is_empty() {
                continue;
            }
            let response: Response = serde_json::from_str(&text)
                .map_err(|e| SamplerError::Malformed(format!("{e}: {text}")))?;
            match response.id() {
                Some(id) if id == request.id => return Ok(response),
                // An error the server could not attribute is taken to be ours.
                None => return Ok(response),
                Some(_) => continue,
            }
        }
    }
}

impl<T: Scalar> Sampler<T> for RemoteSampler {
    fn name(&self) -> &str {
        "remote"
    }

    fn sample(&self, qubo: &Qubo<T>, _seed: u64) -> Result<SampleSet<T>, SamplerError> {
        let id = format!("r{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let request = Request {
            id,
            qubo: qubo.to_wire(),
            num_reads: self.num_reads,
        };
        match self.exchange(&request)? {
            Response::Error { error, .. } => Err(SamplerError::Backend(error)),
            Response::Samples { samples, .. } => {
                let samples = samples
                    .into_iter()
                    .map(|s| Sample {
                        bits: s.bits,
                        energy: T::of(s.energy),
                        count: s.count,
                    })
                    .collect();
                SampleSet::verified(qubo, samples, ENERGY_TOLERANCE)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_forms() {
        assert_eq!(
            "127.0.0.1:9".parse::<RemoteEndpoint>().unwrap(),
            RemoteEndpoint::Tcp("127.0.0.1:9".into())
        );
        assert_eq!(
            "tcp://localhost:9".parse::<RemoteEndpoint>().unwrap(),
            RemoteEndpoint::Tcp("localhost:9".into())
        );
        assert_eq!(
            "stdio:bridge --backend local".parse::<RemoteEndpoint>().unwrap(),
            RemoteEndpoint::Command(vec!["bridge".into(), "--backend".into(), "local".into()])
        );
        assert!("nowhere".parse::<RemoteEndpoint>().is_err());
        assert!("stdio:".parse::<RemoteEndpoint>().is_err());
    }

    #[test]
    fn unreachable_tcp_is_transport_error() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let s = RemoteSampler::new(RemoteEndpoint::Tcp(addr.to_string()));
        assert!(matches!(s.connect(), Err(SamplerError::Transport(_))));
    }
}
