use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::buffers::{Agent, LineBuffers, Stamp};
use super::{Fifo, FifoStats, Rate, SimConfig, SimError, SimReport, TimingModel};
use crate::image::LabelImage;
use crate::labeling::{FirstPassRecorder, FirstPassResult, LabelError, LabelerConfig, MAX_REFS};

/// Controller state of the input controller and label generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Copying line `y` from the input FIFO into `memory_img`.
    Load { y: usize, x: usize },
    /// Line `y` is loaded; waiting for its target label buffer to drain.
    Gate { y: usize },
    /// Labeling line `y`; `cycle` counts cadence cycles spent so far.
    Compute { y: usize, cycle: u64 },
    /// All lines labeled.
    Idle,
}

/// Host-side transfer engine for one direction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
struct Dma {
    credit: u64,
}

impl Dma {
    /// Adds one cycle of credit and returns how many words may move.
    fn accrue(&mut self, rate: Rate) -> u64 {
        self.credit += rate.num as u64;
        self.credit / rate.den as u64
    }

    fn spend(&mut self, rate: Rate, words: u64) {
        self.credit -= words * rate.den as u64;
        // Banked credit is limited to a single cycle's worth.
        self.credit = self.credit.min(rate.num as u64 + rate.den as u64 - 1);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
struct Drain {
    /// Finished lines waiting to be streamed out: (line, label buffer).
    pending: VecDeque<(usize, u8)>,
    x: usize,
}

/// One frame in flight through the simulated datapath.
///
/// Drive it with [`step_cycle`](Simulator::step_cycle) or
/// [`run`](Simulator::run). The simulator has no time source of its own; a
/// cycle advances only when stepped.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Simulator {
    width: usize,
    height: usize,
    cfg: LabelerConfig,
    model: TimingModel,
    line_cycles: u64,

    host_in: Vec<u32>,
    host_in_next: usize,
    host_in_dma: Dma,
    host_out: Vec<u32>,
    host_out_dma: Dma,
    input: Fifo,
    output: Fifo,

    buffers: LineBuffers,
    phase: Phase,
    // recent[k] holds the label of pixel x - 1 - k on the current line.
    recent: Vec<u32>,
    recorder: FirstPassRecorder,
    drain: Drain,

    cycle: u64,
    compute_cycles: u64,
    lines_done: usize,
    error: Option<LabelError>,
}

impl Simulator {
    pub fn new(
        width: usize,
        height: usize,
        cfg: LabelerConfig,
        model: TimingModel,
        sim_cfg: SimConfig,
    ) -> Result<Self, SimError> {
        model.validate()?;
        if sim_cfg.fifo_capacity == 0 {
            return Err(SimError::ZeroFifoCapacity);
        }
        if width > sim_cfg.line_buffer_capacity {
            return Err(SimError::LineBufferCapacityExceeded {
                width,
                capacity: sim_cfg.line_buffer_capacity,
            });
        }
        let depth = cfg.ref_set.current_line_depth();
        Ok(Self {
            width,
            height,
            line_cycles: model.line_cycles(width),
            cfg,
            model,
            host_in: Vec::new(),
            host_in_next: 0,
            host_in_dma: Dma::default(),
            host_out: Vec::with_capacity(width * height),
            host_out_dma: Dma::default(),
            input: Fifo::new(sim_cfg.fifo_capacity),
            output: Fifo::new(sim_cfg.fifo_capacity),
            buffers: LineBuffers::new(sim_cfg.line_buffer_capacity, sim_cfg.record_accesses),
            phase: Phase::Load { y: 0, x: 0 },
            recent: vec![0; depth],
            recorder: FirstPassRecorder::new(),
            drain: Drain::default(),
            cycle: 0,
            compute_cycles: 0,
            lines_done: 0,
            error: None,
        })
    }

    /// Hands the host-side writer the frame's pixel words in raster order.
    pub fn load_input(&mut self, words: Vec<u32>) -> Result<(), SimError> {
        let expected = self.width * self.height;
        if words.len() != expected {
            return Err(SimError::InputLength {
                expected,
                actual: words.len(),
            });
        }
        self.host_in = words;
        self.host_in_next = 0;
        Ok(())
    }

    pub fn is_done(&self) -> bool {
        self.error.is_some() || self.host_out.len() == self.width * self.height
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn compute_cycles(&self) -> u64 {
        self.compute_cycles
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn lines_done(&self) -> usize {
        self.lines_done
    }

    pub fn buffers(&self) -> &LineBuffers {
        &self.buffers
    }

    pub fn input_fifo(&self) -> &Fifo {
        &self.input
    }

    pub fn output_fifo(&self) -> &Fifo {
        &self.output
    }

    /// Words the host has read back so far.
    pub fn output_words(&self) -> &[u32] {
        &self.host_out
    }

    pub fn error(&self) -> Option<&LabelError> {
        self.error.as_ref()
    }

    /// Advances one clock. A finished simulator is left unchanged.
    pub fn step_cycle(&mut self) {
        if self.is_done() {
            return;
        }
        let rate = self.model.dma_words_per_cycle;
        // Registered FIFOs: every decision below uses start-of-cycle levels.
        let in_level = self.input.len();
        let out_level = self.output.len();
        let draining: [Option<u8>; 2] = [
            self.drain.pending.front().map(|p| p.1),
            self.drain.pending.get(1).map(|p| p.1),
        ];

        // Host reader.
        let allowed = self.host_out_dma.accrue(rate).min(out_level as u64);
        for _ in 0..allowed {
            let w = self.output.pop().expect("level checked");
            self.host_out.push(w);
        }
        self.host_out_dma.spend(rate, allowed);

        self.drain_step(out_level);
        self.controller_step(in_level, draining);

        // Host writer.
        let remaining = (self.host_in.len() - self.host_in_next) as u64;
        let credit = self.host_in_dma.accrue(rate);
        let space = (self.input.capacity() - in_level) as u64;
        let moved = credit.min(space).min(remaining);
        for _ in 0..moved {
            let w = self.host_in[self.host_in_next];
            self.input.push(w).expect("space checked");
            self.host_in_next += 1;
        }
        if moved < remaining && moved < credit && space == 0 {
            self.input.note_stall();
        }
        self.host_in_dma.spend(rate, moved);

        self.cycle += 1;
    }

    fn drain_step(&mut self, out_level: usize) {
        let Some(&(line, buf)) = self.drain.pending.front() else {
            return;
        };
        if out_level >= self.output.capacity() {
            self.output.note_stall();
            return;
        }
        let at = Stamp {
            cycle: self.cycle,
            line,
        };
        let word = self.buffers.read_label(at, Agent::OutputDrain, buf, self.drain.x);
        self.output.push(word).expect("level checked");
        self.drain.x += 1;
        if self.drain.x == self.width {
            self.drain.x = 0;
            self.drain.pending.pop_front();
        }
    }

    fn controller_step(&mut self, in_level: usize, draining: [Option<u8>; 2]) {
        match self.phase {
            Phase::Load { y, x } => {
                if in_level == 0 {
                    return;
                }
                let word = self.input.pop().expect("level checked");
                self.buffers
                    .write_img(Stamp { cycle: self.cycle, line: y }, x, word);
                self.phase = if x + 1 == self.width {
                    Phase::Gate { y }
                } else {
                    Phase::Load { y, x: x + 1 }
                };
            }
            Phase::Gate { y } => {
                let target = self.buffers.write_target();
                if !draining.contains(&Some(target)) {
                    self.recent.iter_mut().for_each(|r| *r = 0);
                    self.phase = Phase::Compute { y, cycle: 0 };
                    self.compute_step();
                }
            }
            Phase::Compute { .. } => self.compute_step(),
            Phase::Idle => {}
        }
    }

    fn compute_step(&mut self) {
        let Phase::Compute { y, cycle } = self.phase else {
            unreachable!("compute_step outside Compute")
        };
        self.compute_cycles += 1;
        let ppg = self.model.pixels_per_group as u64;
        let cpg = self.model.cycles_per_group as u64;
        let slot = cycle % cpg;
        let x = (cycle / cpg * ppg + slot) as usize;
        if slot < ppg && x < self.width {
            if let Err(e) = self.label_one(y, x) {
                self.error = Some(e);
                return;
            }
        }

        let cycle = cycle + 1;
        if cycle < self.line_cycles {
            self.phase = Phase::Compute { y, cycle };
            return;
        }
        self.drain
            .pending
            .push_back((y, self.buffers.write_target()));
        self.buffers.flip();
        self.lines_done += 1;
        self.phase = if y + 1 == self.height {
            Phase::Idle
        } else {
            Phase::Load { y: y + 1, x: 0 }
        };
    }

    fn label_one(&mut self, y: usize, x: usize) -> Result<(), LabelError> {
        let at = Stamp {
            cycle: self.cycle,
            line: y,
        };
        let word = self.buffers.read_img(at, x);
        let pixel = word.min(255) as u8;
        let read = self.buffers.read_source();
        let mut refs = [0u32; MAX_REFS];
        let n = self.cfg.ref_set.len();
        for (slot, o) in refs.iter_mut().zip(self.cfg.ref_set.offsets()) {
            *slot = if o.dy == 0 {
                self.recent[(-o.dx - 1) as usize]
            } else {
                let nx = x as i64 + o.dx as i64;
                if nx < 0 || nx >= self.width as i64 {
                    0
                } else {
                    self.buffers
                        .read_label(at, Agent::LabelGenerator, read, nx as usize)
                }
            };
        }
        let label = self.recorder.step(pixel, &refs[..n], &self.cfg)?;
        let write = self.buffers.write_target();
        self.buffers.write_label(at, write, x, label);
        if !self.recent.is_empty() {
            self.recent.rotate_right(1);
            self.recent[0] = label;
        }
        Ok(())
    }

    /// Steps `n` cycles, stopping early once done.
    pub fn run_cycles(&mut self, n: u64) {
        for _ in 0..n {
            if self.is_done() {
                break;
            }
            self.step_cycle();
        }
    }

    /// Runs to completion and returns the label stream read back by the host
    /// together with the cycle report.
    pub fn run(mut self) -> Result<(FirstPassResult, SimReport), SimError> {
        if self.host_in.len() != self.width * self.height {
            return Err(SimError::NoInput);
        }
        while !self.is_done() {
            self.step_cycle();
        }
        self.finish()
    }

    /// Packages a completed run.
    pub fn finish(self) -> Result<(FirstPassResult, SimReport), SimError> {
        if let Some(e) = self.error {
            return Err(SimError::Label(e));
        }
        debug_assert!(self.is_done());
        let report = self.report();
        let labels = LabelImage::new(self.width, self.height, self.host_out)
            .expect("dimensions validated on construction");
        Ok((self.recorder.finish(labels), report))
    }

    pub fn report(&self) -> SimReport {
        SimReport {
            width: self.width,
            height: self.height,
            compute_cycles: self.compute_cycles,
            transfer_cycles: self.cycle - self.compute_cycles,
            total_cycles: self.cycle,
            cycles_per_line: self.line_cycles,
            clock_period_ns: self.model.clock_period_ns,
            input_fifo: FifoStats::from(&self.input),
            output_fifo: FifoStats::from(&self.output),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hwsim::{estimate_cycles, run_frame, AccessKind, Memory};
    use crate::image::BinaryImage;
    use crate::labeling::{first_pass, Connectivity, OverflowPolicy};

    fn checker(w: usize, h: usize) -> BinaryImage {
        let mask: Vec<bool> = (0..w * h).map(|i| !(i % w + i / w).is_multiple_of(3)).collect();
        BinaryImage::from_mask(w, h, &mask).unwrap()
    }

    fn sim_for(img: &BinaryImage, cap: usize, log: bool) -> Simulator {
        let sim_cfg = SimConfig {
            fifo_capacity: cap,
            line_buffer_capacity: 64,
            record_accesses: log,
        };
        let mut sim = Simulator::new(
            img.width(),
            img.height(),
            LabelerConfig::default(),
            TimingModel::default(),
            sim_cfg,
        )
        .unwrap();
        sim.load_input(img.pixels().iter().map(|&p| p as u32).collect())
            .unwrap();
        sim
    }

    #[test]
    fn matches_first_pass_and_formula() {
        let img = checker(13, 7);
        for c in Connectivity::ALL {
            let cfg = LabelerConfig::new(c.ref_set());
            let (fp, rep) = run_frame(&img, &cfg, &TimingModel::default(), 8).unwrap();
            assert_eq!(fp, first_pass(&img, &cfg).unwrap());
            assert_eq!(rep.compute_cycles, estimate_cycles(13, 7, &TimingModel::default()));
            assert_eq!(rep.total_cycles, rep.compute_cycles + rep.transfer_cycles);
        }
    }

    #[test]
    fn finished_sim_is_a_fixpoint() {
        let img = checker(5, 2);
        let mut sim = sim_for(&img, 4, false);
        sim.run_cycles(u64::MAX);
        assert!(sim.is_done());
        let before = sim.clone();
        sim.step_cycle();
        assert_eq!(sim, before);
    }

    #[test]
    fn stepping_decomposes() {
        let img = checker(9, 4);
        let mut a = sim_for(&img, 2, false);
        let mut b = a.clone();
        for _ in 0..37 {
            a.step_cycle();
        }
        b.run_cycles(20);
        b.run_cycles(17);
        assert_eq!(a, b);
    }

    #[test]
    fn parity_flips_after_each_line() {
        let img = checker(6, 2);
        let mut sim = sim_for(&img, 16, false);
        assert_eq!(sim.buffers().parity(), 0);
        while sim.lines_done() == 0 {
            sim.step_cycle();
        }
        assert_eq!(sim.buffers().parity(), 1);
        while sim.lines_done() == 1 {
            sim.step_cycle();
        }
        assert_eq!(sim.buffers().parity(), 0);
    }

    #[test]
    fn fifo_conservation_every_cycle() {
        let img = checker(11, 5);
        let mut sim = sim_for(&img, 3, false);
        while !sim.is_done() {
            sim.step_cycle();
            for f in [sim.input_fifo(), sim.output_fifo()] {
                assert_eq!(f.words_in(), f.words_out() + f.len() as u64);
                assert!(f.len() <= f.capacity());
            }
        }
        assert_eq!(sim.input_fifo().words_in(), 55);
        assert_eq!(sim.output_fifo().words_out(), 55);
    }

    #[test]
    fn one_word_fifo_halves_throughput() {
        let img = checker(8, 3);
        let slow = sim_for(&img, 1, false).run().unwrap();
        let fast = sim_for(&img, 4096, false).run().unwrap();
        assert_eq!(slow.0, fast.0);
        assert!(slow.1.total_cycles > fast.1.total_cycles);
        assert!(slow.1.input_fifo.producer_stalls > 0);
    }

    #[test]
    fn ping_pong_exclusive_per_cycle() {
        let img = checker(7, 6);
        let mut sim = sim_for(&img, 1, true);
        sim.run_cycles(u64::MAX);
        let log = sim.buffers().accesses();
        assert!(!log.is_empty());
        for a in log.iter().filter(|a| a.kind == AccessKind::Write) {
            if let Memory::Label(buf) = a.memory {
                assert!(
                    !log.iter().any(|r| r.cycle == a.cycle
                        && r.kind == AccessKind::Read
                        && r.memory == Memory::Label(buf)),
                    "cycle {} reads the buffer it writes",
                    a.cycle
                );
                assert_eq!(buf as usize, a.line % 2);
            }
        }
    }

    #[test]
    fn width_beyond_line_buffer_is_rejected() {
        let err = Simulator::new(
            65,
            1,
            LabelerConfig::default(),
            TimingModel::default(),
            SimConfig {
                line_buffer_capacity: 64,
                ..SimConfig::default()
            },
        )
        .unwrap_err();
        assert_eq!(
            err,
            SimError::LineBufferCapacityExceeded {
                width: 65,
                capacity: 64
            }
        );
        assert!(alloc::format!("{err}").contains("line buffer capacity exceeded"));
    }

    #[test]
    fn overflow_error_stops_sim() {
        let mask: Vec<bool> = (0..600).map(|i| i % 2 == 0).collect();
        let img = BinaryImage::from_mask(600, 1, &mask).unwrap();
        let cfg = LabelerConfig::default();
        let err = run_frame(&img, &cfg, &TimingModel::default(), 64).unwrap_err();
        assert!(matches!(err, SimError::Label(LabelError::CapacityExceeded { bits: 8 })));
        let sat = cfg.with_overflow(OverflowPolicy::Saturate);
        let (fp, _) = run_frame(&img, &sat, &TimingModel::default(), 64).unwrap();
        assert!(fp.overflowed);
    }

    #[test]
    fn slow_dma_adds_transfer_time_only() {
        let img = checker(10, 4);
        let cfg = LabelerConfig::default();
        let slow = TimingModel {
            dma_words_per_cycle: Rate::new(1, 3).unwrap(),
            ..TimingModel::default()
        };
        let (fp_slow, r_slow) = run_frame(&img, &cfg, &slow, 64).unwrap();
        let (fp_fast, r_fast) = run_frame(&img, &cfg, &TimingModel::default(), 64).unwrap();
        assert_eq!(fp_slow, fp_fast);
        assert_eq!(r_slow.compute_cycles, r_fast.compute_cycles);
        assert!(r_slow.total_cycles > r_fast.total_cycles);
    }
}
