//! Cycle-accurate behavioral model of the line-buffered labeling datapath.
//!
//! The model has five blocks: the input FIFO fed by the host, the input
//! controller that fills `memory_img` with one line, the label generator
//! running on a fixed group cadence (by default 4 pixels every 5 clocks), the
//! ping-pong label buffers, and an output drain that streams each finished
//! line into the output FIFO read by the host.
//!
//! FIFOs are registered: a word pushed in cycle `t` is visible to the
//! consumer from cycle `t + 1`, and a slot freed by a pop in cycle `t` is
//! usable by the producer from cycle `t + 1`. A one-word FIFO therefore
//! moves at most one word every two cycles.

mod buffers;
mod fifo;
mod sim;

use alloc::format;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

pub use buffers::{Access, AccessKind, Agent, LineBuffers, Memory};
pub use fifo::Fifo;
pub use sim::{Phase, Simulator};

use crate::image::BinaryImage;
use crate::labeling::{FirstPassResult, LabelError, LabelerConfig};

/// Words per cycle as a fraction `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rate {
    pub num: u32,
    pub den: u32,
}

impl Rate {
    pub const ONE: Rate = Rate { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Option<Self> {
        (num > 0 && den > 0).then_some(Self { num, den })
    }
}

impl Default for Rate {
    fn default() -> Self {
        Self::ONE
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvalidRate;

impl fmt::Display for InvalidRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("rate must be a positive integer or fraction like 3/4")
    }
}

impl core::error::Error for InvalidRate {}

impl FromStr for Rate {
    type Err = InvalidRate;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        let num = n.trim().parse().map_err(|_| InvalidRate)?;
        let den = d.trim().parse().map_err(|_| InvalidRate)?;
        Rate::new(num, den).ok_or(InvalidRate)
    }
}

/// Clocking parameters of the datapath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimingModel {
    pub pixels_per_group: u32,
    pub cycles_per_group: u32,
    pub clock_period_ns: u32,
    /// Host transfer throughput per direction. The default of one word per
    /// cycle is a placeholder, not a measured DMA bandwidth.
    pub dma_words_per_cycle: Rate,
}

impl Default for TimingModel {
    fn default() -> Self {
        Self {
            pixels_per_group: 4,
            cycles_per_group: 5,
            clock_period_ns: 10,
            dma_words_per_cycle: Rate::ONE,
        }
    }
}

impl TimingModel {
    /// Cycles the generator spends on one line of `width` pixels.
    pub fn line_cycles(&self, width: usize) -> u64 {
        (width as u64).div_ceil(self.pixels_per_group as u64) * self.cycles_per_group as u64
    }

    fn validate(&self) -> Result<(), SimError> {
        let ok = self.pixels_per_group > 0
            && self.cycles_per_group > 0
            && self.clock_period_ns > 0
            && self.pixels_per_group <= self.cycles_per_group;
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidTiming(*self))
        }
    }
}

/// `ceil(width / pixels_per_group) * cycles_per_group * height`.
pub fn estimate_cycles(width: usize, height: usize, model: &TimingModel) -> u64 {
    model.line_cycles(width) * height as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SimConfig {
    /// Words per FIFO, both directions.
    pub fifo_capacity: usize,
    /// Words per line memory; bounds the image width.
    pub line_buffer_capacity: usize,
    /// Keep a log of every line-memory access.
    pub record_accesses: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            fifo_capacity: 4096,
            line_buffer_capacity: 1920,
            record_accesses: false,
        }
    }
}

impl SimConfig {
    pub fn with_fifo_capacity(mut self, words: usize) -> Self {
        self.fifo_capacity = words;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    LineBufferCapacityExceeded { width: usize, capacity: usize },
    InvalidTiming(TimingModel),
    ZeroFifoCapacity,
    InputLength { expected: usize, actual: usize },
    NoInput,
    Label(LabelError),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::LineBufferCapacityExceeded { width, capacity } => write!(
                f,
                "line buffer capacity exceeded: width {width} > {capacity} words"
            ),
            SimError::InvalidTiming(m) => write!(
                f,
                "invalid timing model: {} pixels per {} cycles at {} ns",
                m.pixels_per_group, m.cycles_per_group, m.clock_period_ns
            ),
            SimError::ZeroFifoCapacity => f.write_str("FIFO capacity must be at least one word"),
            SimError::InputLength { expected, actual } => {
                write!(f, "input stream has {actual} words, frame needs {expected}")
            }
            SimError::NoInput => f.write_str("no input frame loaded"),
            SimError::Label(e) => fmt::Display::fmt(e, f),
        }
    }
}

impl core::error::Error for SimError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            SimError::Label(e) => Some(e),
            _ => None,
        }
    }
}

impl From<LabelError> for SimError {
    fn from(e: LabelError) -> Self {
        SimError::Label(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FifoStats {
    pub capacity: usize,
    pub words_in: u64,
    pub words_out: u64,
    /// Cycles the producer was blocked on a full queue.
    pub producer_stalls: u64,
    pub peak_occupancy: usize,
}

impl From<&Fifo> for FifoStats {
    fn from(f: &Fifo) -> Self {
        Self {
            capacity: f.capacity(),
            words_in: f.words_in(),
            words_out: f.words_out(),
            producer_stalls: f.stalls(),
            peak_occupancy: f.peak_occupancy(),
        }
    }
}

/// Cycle accounting for one simulated frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SimReport {
    pub width: usize,
    pub height: usize,
    /// Cycles the label generator spent on its group cadence.
    pub compute_cycles: u64,
    /// Every other cycle: loading lines, waiting on FIFOs, draining output.
    pub transfer_cycles: u64,
    pub total_cycles: u64,
    pub cycles_per_line: u64,
    pub clock_period_ns: u32,
    pub input_fifo: FifoStats,
    pub output_fifo: FifoStats,
}

impl SimReport {
    /// Labeling time of one frame on the datapath: `compute_cycles` clocks.
    pub fn frame_time_ns(&self) -> u64 {
        self.compute_cycles * self.clock_period_ns as u64
    }

    /// Wall time of the whole simulated run, transfers included.
    pub fn total_time_ns(&self) -> u64 {
        self.total_cycles * self.clock_period_ns as u64
    }

    /// One `key=value` record, keys in a fixed order.
    pub fn to_kv(&self) -> String {
        format!(
            "compute_cycles={} frame_time_ms={} transfer_cycles={} total_cycles={} total_time_ms={} \
             cycles_per_line={} width={} height={} clock_period_ns={} input_words={} output_words={} \
             input_stalls={} output_stalls={}",
            self.compute_cycles,
            ns_as_ms(self.frame_time_ns()),
            self.transfer_cycles,
            self.total_cycles,
            ns_as_ms(self.total_time_ns()),
            self.cycles_per_line,
            self.width,
            self.height,
            self.clock_period_ns,
            self.input_fifo.words_in,
            self.output_fifo.words_out,
            self.input_fifo.producer_stalls,
            self.output_fifo.producer_stalls,
        )
    }
}

impl fmt::Display for SimReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "frame           {}x{}", self.width, self.height)?;
        writeln!(f, "cycles/line     {}", self.cycles_per_line)?;
        writeln!(f, "compute cycles  {}", self.compute_cycles)?;
        writeln!(f, "transfer cycles {}", self.transfer_cycles)?;
        writeln!(f, "total cycles    {}", self.total_cycles)?;
        writeln!(
            f,
            "frame time      {} ms @ {} ns clock",
            ns_as_ms(self.frame_time_ns()),
            self.clock_period_ns
        )?;
        writeln!(f, "total time      {} ms", ns_as_ms(self.total_time_ns()))?;
        writeln!(
            f,
            "input fifo      {} words, {} stalls, peak {}/{}",
            self.input_fifo.words_in,
            self.input_fifo.producer_stalls,
            self.input_fifo.peak_occupancy,
            self.input_fifo.capacity
        )?;
        write!(
            f,
            "output fifo     {} words, {} stalls, peak {}/{}",
            self.output_fifo.words_out,
            self.output_fifo.producer_stalls,
            self.output_fifo.peak_occupancy,
            self.output_fifo.capacity
        )
    }
}

/// Exact decimal milliseconds with trailing zeros trimmed (`25920000` ns is
/// `"25.92"`).
pub fn ns_as_ms(ns: u64) -> String {
    let whole = ns / 1_000_000;
    let frac = ns % 1_000_000;
    if frac == 0 {
        return format!("{whole}");
    }
    let digits = format!("{frac:06}");
    format!("{whole}.{}", digits.trim_end_matches('0'))
}

/// Simulates one frame through the datapath with default line buffers.
pub fn run_frame(
    img: &BinaryImage,
    cfg: &LabelerConfig,
    model: &TimingModel,
    fifo_capacity: usize,
) -> Result<(FirstPassResult, SimReport), SimError> {
    run_frame_with(img, cfg, model, &SimConfig::default().with_fifo_capacity(fifo_capacity))
}

pub fn run_frame_with(
    img: &BinaryImage,
    cfg: &LabelerConfig,
    model: &TimingModel,
    sim_cfg: &SimConfig,
) -> Result<(FirstPassResult, SimReport), SimError> {
    let mut sim = Simulator::new(img.width(), img.height(), cfg.clone(), *model, *sim_cfg)?;
    sim.load_input(img.pixels().iter().map(|&p| p as u32).collect())?;
    sim.run()
}
