use std::collections::HashMap;
use std::sync::{Arc, Mutex, Weak};

use streamlabel_core::TopicName;

use super::mailbox::{Mailbox, Payload, Subscription};
use super::{BusError, Publisher, Sink, Transport};

/// Transport connecting nodes inside one process.
///
/// Cloning yields another handle to the same topic table.
#[derive(Clone, Default)]
pub struct InProcessBus {
    inner: Arc<BusInner>,
}

#[derive(Default)]
pub(crate) struct BusInner {
    topics: Mutex<HashMap<TopicName, TopicEntry>>,
}

#[derive(Default)]
struct TopicEntry {
    advertised: bool,
    subscribers: Vec<Weak<Mailbox>>,
}

impl BusInner {
    pub(crate) fn deliver(&self, topic: &TopicName, payload: Payload) -> usize {
        let targets: Vec<Arc<Mailbox>> = {
            let mut topics = self.topics.lock().expect("topic table lock");
            let Some(entry) = topics.get_mut(topic) else {
                return 0;
            };
            entry.subscribers.retain(|w| w.strong_count() > 0);
            entry.subscribers.iter().filter_map(Weak::upgrade).collect()
        };
        for mb in &targets {
            mb.push(payload.clone());
        }
        targets.len()
    }
}

impl InProcessBus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Topics that have been advertised, sorted.
    pub fn advertised_topics(&self) -> Vec<TopicName> {
        let topics = self.inner.topics.lock().expect("topic table lock");
        let mut names: Vec<_> = topics
            .iter()
            .filter(|(_, e)| e.advertised)
            .map(|(n, _)| n.clone())
            .collect();
        names.sort();
        names
    }

    /// Live subscriptions on `topic`.
    pub fn subscriber_count(&self, topic: &TopicName) -> usize {
        let topics = self.inner.topics.lock().expect("topic table lock");
        topics.get(topic).map_or(0, |e| {
            e.subscribers.iter().filter(|w| w.strong_count() > 0).count()
        })
    }
}

impl Transport for InProcessBus {
    fn advertise(&self, topic: &TopicName) -> Result<Publisher, BusError> {
        let mut topics = self.inner.topics.lock().expect("topic table lock");
        topics.entry(topic.clone()).or_default().advertised = true;
        Ok(Publisher {
            topic: topic.clone(),
            sink: Sink::InProcess(self.inner.clone()),
        })
    }

    fn subscribe(&self, topic: &TopicName, queue_capacity: usize) -> Result<Subscription, BusError> {
        if queue_capacity == 0 {
            return Err(BusError::ZeroCapacity);
        }
        let mailbox = Arc::new(Mailbox::new(queue_capacity));
        let mut topics = self.inner.topics.lock().expect("topic table lock");
        topics
            .entry(topic.clone())
            .or_default()
            .subscribers
            .push(Arc::downgrade(&mailbox));
        Ok(Subscription::new(topic.clone(), mailbox, None))
    }
}
