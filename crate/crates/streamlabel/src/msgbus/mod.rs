//! A small publish/subscribe bus in the style of a robot middleware.
//!
//! Nodes exchange [`FrameMessage`]s over named topics. Publishers hold no
//! knowledge of subscribers; a subscriber only sees messages published after
//! its subscription was established. Two transports implement [`Transport`]:
//!
//! * [`InProcessBus`] shares encoded payloads between threads.
//! * [`TcpBus`] gives each advertised topic a TCP endpoint, announces it to a
//!   [registry](registry), and streams length-prefixed frames to every
//!   connected subscriber.
//!
//! Both deliver the same encoded bytes for the same publish sequence.

mod inproc;
mod mailbox;
pub mod registry;
mod tcp;

use std::sync::Arc;

use streamlabel_core::{encode_message, CodecError, FrameMessage, TopicError, TopicName};
use thiserror::Error;

pub use inproc::InProcessBus;
pub use mailbox::{Payload, Subscription};
pub use registry::{RegistryClient, RegistryServer, RegistryTable};
pub use tcp::TcpBus;

#[derive(Debug, Error)]
pub enum BusError {
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("queue capacity must be at least 1")]
    ZeroCapacity,
    #[error("registry unreachable at {addr}: {source}")]
    RegistryUnreachable {
        addr: String,
        source: std::io::Error,
    },
    #[error("registry replied: {0}")]
    RegistryReply(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A way of wiring publishers to subscribers.
pub trait Transport: Send + Sync {
    /// Declares that this node publishes on `topic`. Repeated calls for the
    /// same topic return handles to the same endpoint.
    fn advertise(&self, topic: &TopicName) -> Result<Publisher, BusError>;

    /// Starts receiving messages published on `topic` from now on.
    fn subscribe(&self, topic: &TopicName, queue_capacity: usize)
        -> Result<Subscription, BusError>;
}

/// Handle for publishing on one topic.
#[derive(Clone)]
pub struct Publisher {
    topic: TopicName,
    sink: Sink,
}

#[derive(Clone)]
enum Sink {
    InProcess(Arc<inproc::BusInner>),
    Tcp(Arc<tcp::Endpoint>),
}

impl Publisher {
    pub fn topic(&self) -> &TopicName {
        &self.topic
    }

    /// Encodes and delivers `msg`. Returns the number of subscriptions it
    /// was handed to.
    pub fn publish(&self, msg: &FrameMessage) -> Result<usize, BusError> {
        let bytes = encode_message(msg)?;
        Ok(self.publish_raw(bytes.into()))
    }

    /// Delivers an already encoded payload without checking it.
    pub fn publish_raw(&self, payload: Payload) -> usize {
        match &self.sink {
            Sink::InProcess(bus) => bus.deliver(&self.topic, payload),
            Sink::Tcp(ep) => ep.deliver(&payload),
        }
    }
}

impl std::fmt::Debug for Publisher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.sink {
            Sink::InProcess(_) => "in-process",
            Sink::Tcp(_) => "tcp",
        };
        f.debug_struct("Publisher")
            .field("topic", &self.topic)
            .field("transport", &kind)
            .finish()
    }
}
