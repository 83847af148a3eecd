//! Topic name registry: maps topic names to publisher endpoints.
//!
//! Line-oriented text protocol, one request per line, one reply line each:
//!
//! ```text
//! REGISTER <topic> <host:port>    -> OK
//! UNREGISTER <topic> <host:port>  -> OK
//! LOOKUP <topic>                  -> OK <n> <ep1> ... <epn>
//! LIST                            -> OK <n> <topic1> ... <topicn>
//! anything else                   -> ERR <reason>
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use log::{debug, warn};
use streamlabel_core::TopicName;

use super::BusError;

pub const DEFAULT_REGISTRY: &str = "127.0.0.1:11411";
pub const REGISTRY_ENV: &str = "STREAMLABEL_REGISTRY";

/// Registry address from `STREAMLABEL_REGISTRY`, else the default.
pub fn registry_addr() -> String {
    std::env::var(REGISTRY_ENV)
        .ok()
        .filter(|s| !s.trim().is_empty())
        .unwrap_or_else(|| DEFAULT_REGISTRY.to_string())
}

fn valid_endpoint(ep: &str) -> bool {
    match ep.rsplit_once(':') {
        Some((host, port)) => !host.is_empty() && port.parse::<u16>().is_ok(),
        None => false,
    }
}

/// The registry state and protocol, independent of any socket.
#[derive(Debug, Default, Clone)]
pub struct RegistryTable {
    topics: BTreeMap<String, Vec<String>>,
}

impl RegistryTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lookup(&self, topic: &str) -> &[String] {
        self.topics.get(topic).map_or(&[], Vec::as_slice)
    }

    /// Executes one request line and returns the reply without newline.
    pub fn handle_line(&mut self, line: &str) -> String {
        let words: Vec<&str> = line.split_whitespace().collect();
        let Some((&cmd, args)) = words.split_first() else {
            return "ERR empty request".into();
        };
        match (cmd, args) {
            ("REGISTER" | "UNREGISTER", [topic, ep]) => {
                if let Err(e) = TopicName::new(topic) {
                    return format!("ERR {e}");
                }
                if !valid_endpoint(ep) {
                    return format!("ERR invalid endpoint {ep}");
                }
                if cmd == "REGISTER" {
                    let eps = self.topics.entry(topic.to_string()).or_default();
                    if !eps.iter().any(|e| e == ep) {
                        eps.push(ep.to_string());
                    }
                } else if let Some(eps) = self.topics.get_mut(*topic) {
                    eps.retain(|e| e != ep);
                    if eps.is_empty() {
                        self.topics.remove(*topic);
                    }
                }
                "OK".into()
            }
            ("REGISTER" | "UNREGISTER", _) => format!("ERR usage: {cmd} <topic> <host:port>"),
            ("LOOKUP", [topic]) => {
                if let Err(e) = TopicName::new(topic) {
                    return format!("ERR {e}");
                }
                let eps = self.lookup(topic);
                let mut reply = format!("OK {}", eps.len());
                for ep in eps {
                    reply.push(' ');
                    reply.push_str(ep);
                }
                reply
            }
            ("LOOKUP", _) => "ERR usage: LOOKUP <topic>".into(),
            ("LIST", []) => {
                let mut reply = format!("OK {}", self.topics.len());
                for t in self.topics.keys() {
                    reply.push(' ');
                    reply.push_str(t);
                }
                reply
            }
            ("LIST", _) => "ERR usage: LIST".into(),
            _ => format!("ERR unknown command {cmd}"),
        }
    }
}

/// Registry listening on a TCP socket. Stops when dropped.
pub struct RegistryServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    table: Arc<Mutex<RegistryTable>>,
    thread: Option<JoinHandle<()>>,
}

impl RegistryServer {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn bind(addr: &str) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let table = Arc::new(Mutex::new(RegistryTable::new()));
        let thread = {
            let shutdown = shutdown.clone();
            let table = table.clone();
            std::thread::Builder::new()
                .name("registry".into())
                .spawn(move || accept_loop(listener, shutdown, table))?
        };
        debug!("registry listening on {addr}");
        Ok(Self {
            addr,
            shutdown,
            table,
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn snapshot(&self) -> RegistryTable {
        self.table.lock().expect("registry lock").clone()
    }

    /// Blocks until the accept loop exits.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for RegistryServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_millis(200));
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn accept_loop(listener: TcpListener, shutdown: Arc<AtomicBool>, table: Arc<Mutex<RegistryTable>>) {
    for stream in listener.incoming() {
        if shutdown.load(Ordering::SeqCst) {
            break;
        }
        match stream {
            Ok(stream) => {
                let table = table.clone();
                let _ = std::thread::Builder::new()
                    .name("registry-conn".into())
                    .spawn(move || serve_connection(stream, table));
            }
            Err(e) => warn!("registry accept failed: {e}"),
        }
    }
}

fn serve_connection(stream: TcpStream, table: Arc<Mutex<RegistryTable>>) {
    let Ok(mut writer) = stream.try_clone() else {
        return;
    };
    for line in BufReader::new(stream).lines() {
        let Ok(line) = line else { break };
        let reply = table.lock().expect("registry lock").handle_line(&line);
        if writeln!(writer, "{reply}").is_err() {
            break;
        }
    }
}

/// Client side of the registry protocol. One connection per request.
#[derive(Debug, Clone)]
pub struct RegistryClient {
    addr: String,
    timeout: Duration,
}

impl RegistryClient {
    pub fn new(addr: impl Into<String>) -> Self {
        Self {
            addr: addr.into(),
            timeout: Duration::from_secs(2),
        }
    }

    /// Client for [`registry_addr`].
    pub fn from_env() -> Self {
        Self::new(registry_addr())
    }

    pub fn addr(&self) -> &str {
        &self.addr
    }

    /// Sends one raw request line and returns the raw reply line.
    pub fn request(&self, line: &str) -> Result<String, BusError> {
        let unreachable = |source| BusError::RegistryUnreachable {
            addr: self.addr.clone(),
            source,
        };
        let sock = self
            .addr
            .to_socket_addrs()
            .map_err(unreachable)?
            .next()
            .ok_or_else(|| {
                unreachable(std::io::Error::new(
                    std::io::ErrorKind::InvalidInput,
                    "address resolves to nothing",
                ))
            })?;
        let mut stream = TcpStream::connect_timeout(&sock, self.timeout).map_err(unreachable)?;
        stream.set_read_timeout(Some(self.timeout)).map_err(unreachable)?;
        writeln!(stream, "{line}").map_err(unreachable)?;
        let mut reply = String::new();
        BufReader::new(stream)
            .read_line(&mut reply)
            .map_err(unreachable)?;
        Ok(reply.trim_end().to_string())
    }

    fn expect_ok(&self, line: &str) -> Result<Vec<String>, BusError> {
        let reply = self.request(line)?;
        let mut words = reply.split_whitespace();
        if words.next() != Some("OK") {
            return Err(BusError::RegistryReply(reply));
        }
        Ok(words.map(str::to_string).collect())
    }

    pub fn register(&self, topic: &TopicName, endpoint: &str) -> Result<(), BusError> {
        self.expect_ok(&format!("REGISTER {topic} {endpoint}")).map(drop)
    }

    pub fn unregister(&self, topic: &TopicName, endpoint: &str) -> Result<(), BusError> {
        self.expect_ok(&format!("UNREGISTER {topic} {endpoint}")).map(drop)
    }

    pub fn lookup(&self, topic: &TopicName) -> Result<Vec<String>, BusError> {
        counted(self.expect_ok(&format!("LOOKUP {topic}"))?)
    }

    pub fn list(&self) -> Result<Vec<String>, BusError> {
        counted(self.expect_ok("LIST")?)
    }
}

fn counted(words: Vec<String>) -> Result<Vec<String>, BusError> {
    let bad = || BusError::RegistryReply(format!("OK {}", words.join(" ")));
    let (n, rest) = words.split_first().ok_or_else(bad)?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if rest.len() != n {
        return Err(bad());
    }
    Ok(rest.to_vec())
}
