//! Socket transport.
//!
//! Every advertised topic listens on its own TCP port and registers
//! `host:port` with the registry. A subscriber looks the topic up, connects
//! to each endpoint and sends `SUB <topic>\n`; the publisher answers `OK\n`
//! only after the connection joined its fan-out list, so a returned
//! subscription never misses a later publish. Messages then flow as
//! `u32` little-endian length + encoded payload.
//!
//! Subscribers re-query the registry periodically to pick up publishers
//! that appear later.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use log::{debug, warn};
use streamlabel_core::codec::frame;
use streamlabel_core::TopicName;

use super::mailbox::{Mailbox, Subscription};
use super::registry::RegistryClient;
use super::{BusError, Publisher, Sink, Transport};

/// Frames above this size are treated as a corrupt stream.
pub const MAX_FRAME_LEN: usize = 1 << 30;

const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(2);

/// Transport over TCP sockets with registry-based discovery.
pub struct TcpBus {
    registry: RegistryClient,
    host: String,
    poll_interval: Duration,
    endpoints: Mutex<HashMap<TopicName, Arc<Endpoint>>>,
}

impl TcpBus {
    pub fn new(registry: RegistryClient) -> Self {
        Self {
            registry,
            host: "127.0.0.1".into(),
            poll_interval: Duration::from_millis(500),
            endpoints: Mutex::new(HashMap::new()),
        }
    }

    /// How often subscribers re-query the registry for new publishers.
    pub fn with_poll_interval(mut self, every: Duration) -> Self {
        self.poll_interval = every;
        self
    }

    pub fn registry(&self) -> &RegistryClient {
        &self.registry
    }
}

impl Transport for TcpBus {
    fn advertise(&self, topic: &TopicName) -> Result<Publisher, BusError> {
        let mut endpoints = self.endpoints.lock().expect("endpoint table lock");
        if let Some(ep) = endpoints.get(topic) {
            return Ok(Publisher {
                topic: topic.clone(),
                sink: Sink::Tcp(ep.clone()),
            });
        }
        let ep = Arc::new(Endpoint::open(topic.clone(), &self.host, self.registry.clone())?);
        endpoints.insert(topic.clone(), ep.clone());
        Ok(Publisher {
            topic: topic.clone(),
            sink: Sink::Tcp(ep),
        })
    }

    fn subscribe(&self, topic: &TopicName, queue_capacity: usize) -> Result<Subscription, BusError> {
        if queue_capacity == 0 {
            return Err(BusError::ZeroCapacity);
        }
        let mailbox = Arc::new(Mailbox::new(queue_capacity));
        let link = SubscriberLink::start(
            topic.clone(),
            mailbox.clone(),
            self.registry.clone(),
            self.poll_interval,
        )?;
        Ok(Subscription::new(topic.clone(), mailbox, Some(link)))
    }
}

/// Publishing side of one topic.
pub(crate) struct Endpoint {
    topic: TopicName,
    addr: SocketAddr,
    advertised_as: String,
    sinks: Arc<Mutex<Vec<TcpStream>>>,
    shutdown: Arc<AtomicBool>,
    registry: RegistryClient,
    accept: Mutex<Option<JoinHandle<()>>>,
}

impl Endpoint {
    fn open(topic: TopicName, host: &str, registry: RegistryClient) -> Result<Self, BusError> {
        let listener = TcpListener::bind((host, 0))?;
        let addr = listener.local_addr()?;
        let advertised_as = format!("{host}:{}", addr.port());
        registry.register(&topic, &advertised_as)?;

        let sinks = Arc::new(Mutex::new(Vec::new()));
        let shutdown = Arc::new(AtomicBool::new(false));
        let accept = {
            let (topic, sinks, shutdown) = (topic.clone(), sinks.clone(), shutdown.clone());
            std::thread::Builder::new()
                .name(format!("pub-{topic}"))
                .spawn(move || accept_loop(listener, topic, sinks, shutdown))?
        };
        debug!("advertised {topic} at {advertised_as}");
        Ok(Self {
            topic,
            addr,
            advertised_as,
            sinks,
            shutdown,
            registry,
            accept: Mutex::new(Some(accept)),
        })
    }

    pub(crate) fn deliver(&self, payload: &[u8]) -> usize {
        let framed = frame(payload);
        let mut sinks = self.sinks.lock().expect("sink list lock");
        sinks.retain_mut(|s| match s.write_all(&framed) {
            Ok(()) => true,
            Err(e) => {
                warn!("{}: dropping subscriber: {e}", self.topic);
                false
            }
        });
        sinks.len()
    }
}

impl Drop for Endpoint {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Err(e) = self.registry.unregister(&self.topic, &self.advertised_as) {
            debug!("{}: unregister failed: {e}", self.topic);
        }
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_millis(200));
        if let Some(t) = self.accept.lock().expect("accept handle lock").take() {
            let _ = t.join();
        }
        for s in self.sinks.lock().expect("sink list lock").drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

fn accept_loop(
    listener: TcpListener,
    topic: TopicName,
    sinks: Arc<Mutex<Vec<TcpStream>>>,
    shutdown: Arc<AtomicBool>,
) {
    for stream in listener.incoming() {
        if shutdown.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        if let Err(e) = accept_subscriber(stream, &topic, &sinks) {
            debug!("{topic}: handshake failed: {e}");
        }
    }
}

fn accept_subscriber(
    stream: TcpStream,
    topic: &TopicName,
    sinks: &Mutex<Vec<TcpStream>>,
) -> std::io::Result<()> {
    stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT))?;
    let mut line = String::new();
    BufReader::new(stream.try_clone()?).read_line(&mut line)?;
    let mut writer = stream;
    if line.trim_end() != format!("SUB {topic}") {
        writeln!(writer, "ERR wrong topic")?;
        return Ok(());
    }
    writer.set_read_timeout(None)?;
    writer.set_nodelay(true)?;
    // Ack under the lock: no publish can slip between joining and the ack.
    let mut list = sinks.lock().expect("sink list lock");
    writer.write_all(b"OK\n")?;
    list.push(writer);
    Ok(())
}

/// Background machinery of one TCP subscription; stops on drop.
pub(crate) struct SubscriberLink {
    alive: Arc<AtomicBool>,
    streams: Arc<Mutex<Vec<TcpStream>>>,
    discovery: Option<JoinHandle<()>>,
}

struct LinkShared {
    topic: TopicName,
    mailbox: Arc<Mailbox>,
    alive: Arc<AtomicBool>,
    streams: Arc<Mutex<Vec<TcpStream>>>,
    connected: Mutex<HashSet<String>>,
}

impl SubscriberLink {
    fn start(
        topic: TopicName,
        mailbox: Arc<Mailbox>,
        registry: RegistryClient,
        poll: Duration,
    ) -> Result<Self, BusError> {
        let shared = Arc::new(LinkShared {
            topic,
            mailbox,
            alive: Arc::new(AtomicBool::new(true)),
            streams: Arc::new(Mutex::new(Vec::new())),
            connected: Mutex::new(HashSet::new()),
        });
        // The first lookup is synchronous so the caller sees registry errors
        // and is attached to every publisher known right now.
        for ep in registry.lookup(&shared.topic)? {
            connect_endpoint(&shared, &ep);
        }
        let discovery = {
            let shared = shared.clone();
            std::thread::Builder::new()
                .name(format!("sub-{}", shared.topic))
                .spawn(move || {
                    while shared.alive.load(Ordering::SeqCst) {
                        std::thread::park_timeout(poll);
                        if !shared.alive.load(Ordering::SeqCst) {
                            break;
                        }
                        match registry.lookup(&shared.topic) {
                            Ok(eps) => eps.iter().for_each(|ep| connect_endpoint(&shared, ep)),
                            Err(e) => debug!("{}: discovery failed: {e}", shared.topic),
                        }
                    }
                })?
        };
        Ok(Self {
            alive: shared.alive.clone(),
            streams: shared.streams.clone(),
            discovery: Some(discovery),
        })
    }
}

impl Drop for SubscriberLink {
    fn drop(&mut self) {
        self.alive.store(false, Ordering::SeqCst);
        for s in self.streams.lock().expect("stream list lock").iter() {
            let _ = s.shutdown(Shutdown::Both);
        }
        if let Some(t) = self.discovery.take() {
            t.thread().unpark();
            let _ = t.join();
        }
    }
}

fn connect_endpoint(shared: &Arc<LinkShared>, ep: &str) {
    if !shared.connected.lock().expect("endpoint set lock").insert(ep.to_string()) {
        return;
    }
    match handshake(shared, ep) {
        Ok(reader) => {
            let topic = shared.topic.clone();
            let shared = shared.clone();
            let ep = ep.to_string();
            let spawned = std::thread::Builder::new()
                .name(format!("sub-{topic}-rx"))
                .spawn(move || {
                    if let Err(e) = read_frames(reader, &shared.mailbox) {
                        debug!("{}: stream from {ep} ended: {e}", shared.topic);
                    }
                    shared.connected.lock().expect("endpoint set lock").remove(&ep);
                });
            if let Err(e) = spawned {
                warn!("{topic}: cannot spawn reader: {e}");
            }
        }
        Err(e) => {
            debug!("{}: cannot attach to {ep}: {e}", shared.topic);
            shared.connected.lock().expect("endpoint set lock").remove(ep);
        }
    }
}

fn handshake(shared: &LinkShared, ep: &str) -> std::io::Result<BufReader<TcpStream>> {
    let addr = ep
        .to_socket_addrs()?
        .next()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "no address"))?;
    let mut stream = TcpStream::connect_timeout(&addr, HANDSHAKE_TIMEOUT)?;
    stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT))?;
    writeln!(stream, "SUB {}", shared.topic)?;
    shared
        .streams
        .lock()
        .expect("stream list lock")
        .push(stream.try_clone()?);
    let mut reader = BufReader::new(stream);
    let mut ack = String::new();
    reader.read_line(&mut ack)?;
    if ack.trim_end() != "OK" {
        return Err(std::io::Error::other(format!("publisher refused: {}", ack.trim_end())));
    }
    reader.get_ref().set_read_timeout(None)?;
    Ok(reader)
}

fn read_frames(mut reader: BufReader<TcpStream>, mailbox: &Mailbox) -> std::io::Result<()> {
    loop {
        let mut len = [0u8; 4];
        reader.read_exact(&mut len)?;
        let len = u32::from_le_bytes(len) as usize;
        if len > MAX_FRAME_LEN {
            return Err(std::io::Error::other(format!("frame of {len} bytes")));
        }
        let mut payload = vec![0u8; len];
        reader.read_exact(&mut payload)?;
        mailbox.push(payload.into());
    }
}
