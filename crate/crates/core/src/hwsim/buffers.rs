use alloc::vec;
use alloc::vec::Vec;

/// On-chip memories addressed by the datapath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Memory {
    /// One line of input pixels.
    Img,
    /// `label_data0` or `label_data1`.
    Label(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessKind {
    Read,
    Write,
}

/// Which block issued an access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Agent {
    InputController,
    LabelGenerator,
    OutputDrain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Access {
    pub cycle: u64,
    /// Image line the access belongs to.
    pub line: usize,
    pub memory: Memory,
    pub kind: AccessKind,
    pub agent: Agent,
    pub addr: usize,
}

/// `memory_img` plus the ping-pong pair `label_data0` / `label_data1`.
///
/// For each line the generator writes `label_data[parity]` and reads the
/// previous line from `label_data[1 - parity]`; parity flips at end of line.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LineBuffers {
    img: Vec<u32>,
    labels: [Vec<u32>; 2],
    parity: u8,
    log: Option<Vec<Access>>,
}

impl LineBuffers {
    pub fn new(capacity: usize, record_accesses: bool) -> Self {
        Self {
            img: vec![0; capacity],
            labels: [vec![0; capacity], vec![0; capacity]],
            parity: 0,
            log: record_accesses.then(Vec::new),
        }
    }

    pub fn capacity(&self) -> usize {
        self.img.len()
    }

    /// Index of the label buffer written by the current line.
    pub fn parity(&self) -> u8 {
        self.parity
    }

    pub fn write_target(&self) -> u8 {
        self.parity
    }

    pub fn read_source(&self) -> u8 {
        1 - self.parity
    }

    pub fn flip(&mut self) {
        self.parity ^= 1;
    }

    pub fn accesses(&self) -> &[Access] {
        self.log.as_deref().unwrap_or(&[])
    }

    fn record(&mut self, a: Access) {
        if let Some(log) = &mut self.log {
            log.push(a);
        }
    }

    pub(crate) fn write_img(&mut self, at: Stamp, addr: usize, word: u32) {
        self.img[addr] = word;
        self.record(at.access(Memory::Img, AccessKind::Write, Agent::InputController, addr));
    }

    pub(crate) fn read_img(&mut self, at: Stamp, addr: usize) -> u32 {
        self.record(at.access(Memory::Img, AccessKind::Read, Agent::LabelGenerator, addr));
        self.img[addr]
    }

    pub(crate) fn read_label(&mut self, at: Stamp, agent: Agent, buf: u8, addr: usize) -> u32 {
        self.record(at.access(Memory::Label(buf), AccessKind::Read, agent, addr));
        self.labels[buf as usize][addr]
    }

    pub(crate) fn write_label(&mut self, at: Stamp, buf: u8, addr: usize, label: u32) {
        self.labels[buf as usize][addr] = label;
        self.record(at.access(
            Memory::Label(buf),
            AccessKind::Write,
            Agent::LabelGenerator,
            addr,
        ));
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Stamp {
    pub cycle: u64,
    pub line: usize,
}

impl Stamp {
    fn access(self, memory: Memory, kind: AccessKind, agent: Agent, addr: usize) -> Access {
        Access {
            cycle: self.cycle,
            line: self.line,
            memory,
            kind,
            agent,
            addr,
        }
    }
}
