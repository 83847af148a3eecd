use alloc::collections::VecDeque;

/// Bounded queue of 32-bit words with transfer counters.
///
/// A producer facing a full FIFO must wait; words are never dropped, so
/// `words_in == words_out + len()` holds at all times.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fifo {
    capacity: usize,
    queue: VecDeque<u32>,
    words_in: u64,
    words_out: u64,
    stalls: u64,
    peak: usize,
}

impl Fifo {
    /// # Panics
    ///
    /// Panics if `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "FIFO capacity must be positive");
        Self {
            capacity,
            queue: VecDeque::with_capacity(capacity.min(1 << 16)),
            words_in: 0,
            words_out: 0,
            stalls: 0,
            peak: 0,
        }
    }

    /// Enqueues `word`, or returns it back when full.
    pub fn push(&mut self, word: u32) -> Result<(), u32> {
        if self.is_full() {
            return Err(word);
        }
        self.queue.push_back(word);
        self.words_in += 1;
        self.peak = self.peak.max(self.queue.len());
        Ok(())
    }

    pub fn pop(&mut self) -> Option<u32> {
        let w = self.queue.pop_front()?;
        self.words_out += 1;
        Some(w)
    }

    /// Counts one cycle in which the producer was blocked by a full queue.
    pub fn note_stall(&mut self) {
        self.stalls += 1;
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.queue.len() >= self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn words_in(&self) -> u64 {
        self.words_in
    }

    pub fn words_out(&self) -> u64 {
        self.words_out
    }

    pub fn stalls(&self) -> u64 {
        self.stalls
    }

    pub fn peak_occupancy(&self) -> usize {
        self.peak
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_fifo_refuses_and_keeps_order() {
        let mut f = Fifo::new(2);
        assert_eq!(f.push(1), Ok(()));
        assert_eq!(f.push(2), Ok(()));
        assert_eq!(f.push(3), Err(3));
        assert_eq!(f.pop(), Some(1));
        assert_eq!(f.push(3), Ok(()));
        assert_eq!(f.pop(), Some(2));
        assert_eq!(f.pop(), Some(3));
        assert_eq!(f.pop(), None);
        assert_eq!((f.words_in(), f.words_out(), f.peak_occupancy()), (3, 3, 2));
    }
}
