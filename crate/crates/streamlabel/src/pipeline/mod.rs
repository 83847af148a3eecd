//! The node graph around the labeling datapath.
//!
//! ```text
//! input_image --data_input--> write2fpga --> fpga_sim --> read4fpga --data_output--> display_result
//! ```
//!
//! `input_image` and `display_result` are the caller's side of [`NodeGraph`];
//! `write2fpga`, `fpga_sim` and `read4fpga` run on their own threads. The two
//! topics travel over a [`Transport`]; the device-side hops use channels that
//! stand in for the host/FPGA FIFOs.
//!
//! Every frame is stamped at six points on a monotonic clock:
//!
//! | stamp | where                                                   |
//! |-------|---------------------------------------------------------|
//! | t0    | `input_image`, before encoding and publishing           |
//! | t1    | `write2fpga`, after the message was dequeued and decoded |
//! | t2    | `write2fpga`, after the word stream was handed over      |
//! | t3    | `read4fpga`, when the first output word is read          |
//! | t4    | `read4fpga`, right before the publish call              |
//! | t5    | `display_result`, after dequeue and decode               |
//!
//! Serialization therefore counts towards segments 1 and 5.

mod bench;
mod nodes;

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use log::warn;
use streamlabel_core::hwsim::{SimConfig, SimError, SimReport, TimingModel};
use streamlabel_core::{
    canonicalize, resolve_from_labels, BinaryImage, FrameMessage, ImageError, LabelError, LabelImage,
    LabelerConfig, RefSet, TopicName,
};
use thiserror::Error;

use crate::msgbus::{BusError, InProcessBus, Publisher, RegistryClient, Subscription, TcpBus, Transport};
use crate::source::{ImageSource, SourceError};

pub use bench::{bench, BenchStats, SegmentStats};

pub const DATA_INPUT: &str = "data_input";
pub const DATA_OUTPUT: &str = "data_output";

/// Which implementation labels the frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    /// The first pass computed directly in software.
    Software,
    /// The cycle-accurate datapath model.
    #[default]
    SimulatedHw,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Software => "sw",
            Engine::SimulatedHw => "sim",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sw" | "software" => Ok(Engine::Software),
            "sim" | "hw" | "simulated_hw" => Ok(Engine::SimulatedHw),
            other => Err(format!("unknown engine {other:?} (expected sw or sim)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TransportKind {
    #[default]
    InProcess,
    /// Sockets, discovering peers through the registry at this address.
    Tcp { registry: String },
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub threshold: u8,
    pub labeler: LabelerConfig,
    pub timing: TimingModel,
    pub sim: SimConfig,
    pub transport: TransportKind,
    /// Subscriber queue depth on both topics.
    pub queue_capacity: usize,
    /// How long the caller waits for a frame to come out of the graph.
    pub frame_timeout: Duration,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            threshold: 128,
            labeler: LabelerConfig::default(),
            timing: TimingModel::default(),
            sim: SimConfig::default(),
            transport: TransportKind::InProcess,
            queue_capacity: 8,
            frame_timeout: Duration::from_secs(120),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error("{node}: {source}")]
    Bus {
        node: &'static str,
        #[source]
        source: BusError,
    },
    #[error("{node}: {source}")]
    Sim {
        node: &'static str,
        #[source]
        source: SimError,
    },
    #[error("{node}: {source}")]
    Label {
        node: &'static str,
        #[source]
        source: LabelError,
    },
    #[error("{node}: {source}")]
    Image {
        node: &'static str,
        #[source]
        source: ImageError,
    },
    #[error("input_image: {0}")]
    TooLarge(String),
    #[error("display_result: no output for frame {frame_id} within {timeout:?}")]
    Timeout { frame_id: i32, timeout: Duration },
    #[error("{node}: node stopped unexpectedly")]
    NodeDown { node: &'static str },
}

/// Wall-clock time spent in each hop of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LatencyBreakdown {
    pub seg1_pub_sub_in: Duration,
    pub seg2_pre_label: Duration,
    pub seg3_label: Duration,
    pub seg4_post_label: Duration,
    pub seg5_pub_sub_out: Duration,
    /// Measured independently as `t5 - t0`.
    pub total: Duration,
}

impl LatencyBreakdown {
    pub const SEGMENT_NAMES: [&'static str; 5] = [
        "seg1_pub_sub_in",
        "seg2_pre_label",
        "seg3_label",
        "seg4_post_label",
        "seg5_pub_sub_out",
    ];

    fn from_stamps(t: &[Instant; 6]) -> Self {
        Self {
            seg1_pub_sub_in: t[1] - t[0],
            seg2_pre_label: t[2] - t[1],
            seg3_label: t[3] - t[2],
            seg4_post_label: t[4] - t[3],
            seg5_pub_sub_out: t[5] - t[4],
            total: t[5].duration_since(t[0]),
        }
    }

    pub fn segments(&self) -> [Duration; 5] {
        [
            self.seg1_pub_sub_in,
            self.seg2_pre_label,
            self.seg3_label,
            self.seg4_post_label,
            self.seg5_pub_sub_out,
        ]
    }

    pub fn segment_sum(&self) -> Duration {
        self.segments().iter().sum()
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (name, d) in Self::SEGMENT_NAMES.iter().zip(self.segments()) {
            s.push_str(&format!("{name}_ms={:.3} ", ms(d)));
        }
        s.push_str(&format!("total_ms={:.3}", ms(self.total)));
        s
    }
}

pub(crate) fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// What `display_result` makes of a labeled frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub frame_id: i32,
    pub width: usize,
    pub height: usize,
    pub components: usize,
    pub white_pixels: usize,
    /// Component sizes, largest first, at most [`Summary::TOP`] entries.
    pub largest: Vec<usize>,
}

impl Summary {
    pub const TOP: usize = 5;

    pub fn of(frame_id: i32, labels: &LabelImage) -> Self {
        let mut sizes = vec![0usize; labels.max_label() as usize + 1];
        for &l in labels.labels() {
            sizes[l as usize] += 1;
        }
        let white_pixels = labels.labels().len() - sizes[0];
        let mut largest: Vec<usize> = sizes[1..].iter().copied().filter(|&n| n > 0).collect();
        let components = largest.len();
        largest.sort_unstable_by(|a, b| b.cmp(a));
        largest.truncate(Self::TOP);
        Self {
            frame_id,
            width: labels.width(),
            height: labels.height(),
            components,
            white_pixels,
            largest,
        }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "frame_id={} width={} height={} components={} white_pixels={} largest={}",
            self.frame_id,
            self.width,
            self.height,
            self.components,
            self.white_pixels,
            self.largest.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        )
    }
}

/// One frame as received by `display_result`.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// The `data_output` message: provisional labels as produced by the engine.
    pub message: FrameMessage,
    /// Labels after equivalence resolution, numbered in raster order.
    pub labels: LabelImage,
    pub latency: LatencyBreakdown,
    /// Present for the simulated engine.
    pub sim_report: Option<SimReport>,
    pub summary: Summary,
}

type StampTable = Arc<Mutex<HashMap<i32, [Option<Instant>; 6]>>>;

fn stamp(table: &StampTable, frame_id: i32, idx: usize) {
    let now = Instant::now();
    table.lock().expect("stamp table lock").entry(frame_id).or_default()[idx] = Some(now);
}

/// A running graph. Nodes stop when it is dropped.
pub struct NodeGraph {
    engine: Engine,
    ref_set: RefSet,
    timeout: Duration,
    input: Publisher,
    display: Subscription,
    stamps: StampTable,
    reports: Receiver<nodes::DeviceOutcome>,
    stop: Arc<AtomicBool>,
    errors: Arc<AtomicU64>,
    threads: Vec<JoinHandle<()>>,
    // Keeps the transport (and its sockets) alive as long as the graph.
    _transport: Arc<dyn Transport>,
}

impl NodeGraph {
    /// Builds the transport named in `cfg` and starts the nodes.
    pub fn start(engine: Engine, cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let transport: Arc<dyn Transport> = match &cfg.transport {
            TransportKind::InProcess => Arc::new(InProcessBus::new()),
            TransportKind::Tcp { registry } => {
                Arc::new(TcpBus::new(RegistryClient::new(registry.clone())))
            }
        };
        Self::start_on(transport, engine, cfg)
    }

    /// Starts the nodes on an existing transport.
    pub fn start_on(
        transport: Arc<dyn Transport>,
        engine: Engine,
        cfg: &PipelineConfig,
    ) -> Result<Self, PipelineError> {
        let data_input = TopicName::new(DATA_INPUT).expect("valid topic");
        let data_output = TopicName::new(DATA_OUTPUT).expect("valid topic");
        let bus = |node| move |source| PipelineError::Bus { node, source };

        // Publishers first so that socket subscribers find them on lookup.
        let input = transport.advertise(&data_input).map_err(bus("input_image"))?;
        let output = transport.advertise(&data_output).map_err(bus("read4fpga"))?;
        let write_sub = transport
            .subscribe(&data_input, cfg.queue_capacity)
            .map_err(bus("write2fpga"))?;
        let display = transport
            .subscribe(&data_output, cfg.queue_capacity)
            .map_err(bus("display_result"))?;

        let stamps = StampTable::default();
        let stop = Arc::new(AtomicBool::new(false));
        let errors = Arc::new(AtomicU64::new(0));
        let (reports_tx, reports) = mpsc::channel();
        let ctx = nodes::NodeContext {
            engine,
            labeler: cfg.labeler.clone(),
            timing: cfg.timing,
            sim: cfg.sim,
            stamps: stamps.clone(),
            stop: stop.clone(),
            errors: errors.clone(),
            outcomes: reports_tx,
        };
        let threads = nodes::spawn(ctx, write_sub, output).map_err(|e| PipelineError::Bus {
            node: "fpga_sim",
            source: e.into(),
        })?;
        Ok(Self {
            engine,
            ref_set: cfg.labeler.ref_set.clone(),
            timeout: cfg.frame_timeout,
            input,
            display,
            stamps,
            reports,
            stop,
            errors,
            threads,
            _transport: transport,
        })
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    /// Frames that a node rejected and skipped so far.
    pub fn error_count(&self) -> u64 {
        self.errors.load(Ordering::SeqCst)
    }

    /// Publisher handle of `input_image`, e.g. for injecting raw payloads.
    pub fn input_publisher(&self) -> &Publisher {
        &self.input
    }

    /// Runs one frame through the graph and waits for `display_result`.
    pub fn process(&self, frame_id: i32, img: &BinaryImage) -> Result<PipelineOutput, PipelineError> {
        let (width, height) = (img.width(), img.height());
        let too_large = || PipelineError::TooLarge(format!("{width}x{height} exceeds the 16-bit message fields"));
        let msg = FrameMessage {
            frame_id,
            width: u16::try_from(width).map_err(|_| too_large())?,
            height: u16::try_from(height).map_err(|_| too_large())?,
            pixels: img.pixels().iter().map(|&p| i32::from(p)).collect(),
        };
        self.drain_stale();

        stamp(&self.stamps, frame_id, 0);
        self.input.publish(&msg).map_err(|source| PipelineError::Bus {
            node: "input_image",
            source,
        })?;

        let deadline = Instant::now() + self.timeout;
        let mut sim_report = None;
        let mut device_done = false;
        loop {
            // Device-side failures never reach data_output; surface them here.
            if !device_done {
                match self.reports.try_recv() {
                    Ok(o) if o.frame_id == frame_id => {
                        sim_report = o.result?;
                        device_done = true;
                    }
                    Ok(_) => {}
                    Err(mpsc::TryRecvError::Empty) => {}
                    Err(mpsc::TryRecvError::Disconnected) => {
                        return Err(PipelineError::NodeDown { node: "fpga_sim" })
                    }
                }
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(PipelineError::Timeout {
                    frame_id,
                    timeout: self.timeout,
                });
            }
            let slice = left.min(Duration::from_millis(20));
            let received = match self.display.take(slice) {
                Ok(m) => m,
                Err(e) => {
                    self.errors.fetch_add(1, Ordering::SeqCst);
                    warn!("display_result: dropping malformed message: {e}");
                    continue;
                }
            };
            let Some(out) = received else { continue };
            if out.frame_id != frame_id {
                warn!("display_result: ignoring stale frame {}", out.frame_id);
                continue;
            }
            stamp(&self.stamps, frame_id, 5);
            if !device_done {
                let o = self
                    .reports
                    .recv_timeout(left)
                    .map_err(|_| PipelineError::NodeDown { node: "fpga_sim" })?;
                sim_report = o.result?;
            }
            return self.finish_frame(out, sim_report);
        }
    }

    fn finish_frame(
        &self,
        out: FrameMessage,
        sim_report: Option<SimReport>,
    ) -> Result<PipelineOutput, PipelineError> {
        let frame_id = out.frame_id;
        let stamps = self
            .stamps
            .lock()
            .expect("stamp table lock")
            .remove(&frame_id)
            .unwrap_or_default();
        let stamps = match stamps {
            [Some(a), Some(b), Some(c), Some(d), Some(e), Some(f)] => [a, b, c, d, e, f],
            _ => return Err(PipelineError::NodeDown { node: "display_result" }),
        };
        let provisional = LabelImage::new(
            out.width as usize,
            out.height as usize,
            out.pixels.iter().map(|&p| p as u32).collect(),
        )
        .map_err(|source| PipelineError::Image {
            node: "display_result",
            source,
        })?;
        let labels = canonicalize(&resolve_from_labels(&provisional, &self.ref_set));
        let summary = Summary::of(frame_id, &labels);
        Ok(PipelineOutput {
            message: out,
            labels,
            latency: LatencyBreakdown::from_stamps(&stamps),
            sim_report,
            summary,
        })
    }

    fn drain_stale(&self) {
        while self.reports.try_recv().is_ok() {}
    }
}

impl Drop for NodeGraph {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

/// Loads `source`, runs it through a fresh graph once and tears it down.
pub fn run_pipeline(
    source: &ImageSource,
    engine: Engine,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput, PipelineError> {
    let img = source.load_binary(cfg.threshold)?;
    let graph = NodeGraph::start(engine, cfg)?;
    graph.process(0, &img)
}
