use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use streamlabel_core::{decode_message, FrameMessage, TopicName};

use super::{tcp, BusError};

/// An encoded message as it travels on the bus.
pub type Payload = Arc<[u8]>;

/// Bounded delivery queue; when full the oldest entry is dropped.
pub(crate) struct Mailbox {
    capacity: usize,
    state: Mutex<Queue>,
    ready: Condvar,
}

#[derive(Default)]
struct Queue {
    items: VecDeque<Payload>,
    dropped: u64,
}

impl Mailbox {
    pub(crate) fn new(capacity: usize) -> Self {
        Self {
            capacity,
            state: Mutex::new(Queue::default()),
            ready: Condvar::new(),
        }
    }

    pub(crate) fn push(&self, payload: Payload) {
        let mut q = self.state.lock().expect("mailbox lock");
        if q.items.len() == self.capacity {
            q.items.pop_front();
            q.dropped += 1;
        }
        q.items.push_back(payload);
        drop(q);
        self.ready.notify_one();
    }

    fn pop(&self, timeout: Duration) -> Option<Payload> {
        let deadline = Instant::now() + timeout;
        let mut q = self.state.lock().expect("mailbox lock");
        loop {
            if let Some(p) = q.items.pop_front() {
                return Some(p);
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return None;
            }
            q = self.ready.wait_timeout(q, left).expect("mailbox lock").0;
        }
    }
}

/// Receiving end of a topic.
///
/// Dropping it detaches from the topic.
pub struct Subscription {
    topic: TopicName,
    pub(crate) mailbox: Arc<Mailbox>,
    pub(crate) _link: Option<tcp::SubscriberLink>,
}

impl Subscription {
    pub(crate) fn new(topic: TopicName, mailbox: Arc<Mailbox>, link: Option<tcp::SubscriberLink>) -> Self {
        Self {
            topic,
            mailbox,
            _link: link,
        }
    }

    pub fn topic(&self) -> &TopicName {
        &self.topic
    }

    pub fn capacity(&self) -> usize {
        self.mailbox.capacity
    }

    /// Pops the oldest payload, waiting up to `timeout`.
    pub fn take_raw(&self, timeout: Duration) -> Option<Payload> {
        self.mailbox.pop(timeout)
    }

    /// Pops and decodes the oldest message. `Ok(None)` means the timeout
    /// elapsed; a payload that fails to decode is consumed and reported.
    pub fn take(&self, timeout: Duration) -> Result<Option<FrameMessage>, BusError> {
        match self.take_raw(timeout) {
            None => Ok(None),
            Some(p) => Ok(Some(decode_message(&p)?)),
        }
    }

    pub fn len(&self) -> usize {
        self.mailbox.state.lock().expect("mailbox lock").items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Messages discarded because the queue was full.
    pub fn dropped(&self) -> u64 {
        self.mailbox.state.lock().expect("mailbox lock").dropped
    }
}

impl std::fmt::Debug for Subscription {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Subscription")
            .field("topic", &self.topic)
            .field("capacity", &self.mailbox.capacity)
            .finish()
    }
}
