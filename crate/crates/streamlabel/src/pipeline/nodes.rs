//! Thread bodies of `write2fpga`, `fpga_sim` and `read4fpga`.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use log::{debug, warn};
use streamlabel_core::hwsim::{SimConfig, SimReport, Simulator, TimingModel};
use streamlabel_core::image::WHITE;
use streamlabel_core::{first_pass, BinaryImage, FrameMessage, LabelerConfig};

use super::{stamp, Engine, PipelineError, StampTable};
use crate::msgbus::{Publisher, Subscription};

const POLL: Duration = Duration::from_millis(20);

pub(super) struct NodeContext {
    pub engine: Engine,
    pub labeler: LabelerConfig,
    pub timing: TimingModel,
    pub sim: SimConfig,
    pub stamps: StampTable,
    pub stop: Arc<AtomicBool>,
    pub errors: Arc<AtomicU64>,
    pub outcomes: Sender<DeviceOutcome>,
}

/// How the device finished a frame; consumed by the graph owner.
pub(super) struct DeviceOutcome {
    pub frame_id: i32,
    pub result: Result<Option<SimReport>, PipelineError>,
}

enum Device {
    Loaded(Box<Simulator>),
    Frame(BinaryImage),
}

struct Job {
    frame_id: i32,
    width: u16,
    height: u16,
    device: Device,
}

struct Labeled {
    frame_id: i32,
    width: u16,
    height: u16,
    words: Vec<u32>,
}

pub(super) fn spawn(
    ctx: NodeContext,
    input: Subscription,
    output: Publisher,
) -> std::io::Result<Vec<JoinHandle<()>>> {
    let ctx = Arc::new(ctx);
    let (job_tx, job_rx) = mpsc::sync_channel::<Job>(1);
    let (out_tx, out_rx) = mpsc::sync_channel::<Labeled>(1);
    let mut threads = Vec::with_capacity(3);
    let c = ctx.clone();
    threads.push(
        std::thread::Builder::new()
            .name("write2fpga".into())
            .spawn(move || write2fpga(&c, &input, &job_tx))?,
    );
    let c = ctx.clone();
    threads.push(
        std::thread::Builder::new()
            .name("fpga_sim".into())
            .spawn(move || fpga_sim(&c, &job_rx, &out_tx))?,
    );
    threads.push(
        std::thread::Builder::new()
            .name("read4fpga".into())
            .spawn(move || read4fpga(&ctx, &out_rx, &output))?,
    );
    Ok(threads)
}

impl NodeContext {
    fn running(&self) -> bool {
        !self.stop.load(Ordering::SeqCst)
    }

    fn reject(&self, node: &str, what: impl std::fmt::Display) {
        self.errors.fetch_add(1, Ordering::SeqCst);
        warn!("{node}: skipping frame: {what}");
    }

    fn fail(&self, frame_id: i32, err: PipelineError) {
        self.errors.fetch_add(1, Ordering::SeqCst);
        warn!("{err}");
        let _ = self.outcomes.send(DeviceOutcome {
            frame_id,
            result: Err(err),
        });
    }
}

fn write2fpga(ctx: &NodeContext, input: &Subscription, jobs: &mpsc::SyncSender<Job>) {
    while ctx.running() {
        let msg = match input.take(POLL) {
            Ok(Some(m)) => m,
            Ok(None) => continue,
            Err(e) => {
                ctx.reject("write2fpga", e);
                continue;
            }
        };
        stamp(&ctx.stamps, msg.frame_id, 1);
        let frame_id = msg.frame_id;
        match load_device(ctx, msg) {
            Ok(job) => {
                stamp(&ctx.stamps, frame_id, 2);
                if jobs.send(job).is_err() {
                    break;
                }
            }
            Err(LoadFailure::Malformed(why)) => ctx.reject("write2fpga", why),
            Err(LoadFailure::Device(e)) => ctx.fail(frame_id, e),
        }
    }
    debug!("write2fpga stopped");
}

enum LoadFailure {
    Malformed(String),
    Device(PipelineError),
}

/// Turns a message into the 32-bit word stream for the device.
fn load_device(ctx: &NodeContext, msg: FrameMessage) -> Result<Job, LoadFailure> {
    let (width, height) = (msg.width as usize, msg.height as usize);
    let mut words = Vec::with_capacity(msg.pixels.len());
    for (i, &p) in msg.pixels.iter().enumerate() {
        if p != 0 && p != i32::from(WHITE) {
            return Err(LoadFailure::Malformed(format!(
                "frame {}: pixel {i} has value {p}, expected 0 or {WHITE}",
                msg.frame_id
            )));
        }
        words.push(p as u32);
    }
    let device = match ctx.engine {
        Engine::SimulatedHw => {
            let node = "write2fpga";
            let sim_err = |source| LoadFailure::Device(PipelineError::Sim { node, source });
            let mut sim = Simulator::new(width, height, ctx.labeler.clone(), ctx.timing, ctx.sim)
                .map_err(sim_err)?;
            sim.load_input(words).map_err(sim_err)?;
            Device::Loaded(Box::new(sim))
        }
        Engine::Software => {
            let bytes = words.into_iter().map(|w| w as u8).collect();
            let img = BinaryImage::new(width, height, bytes).map_err(|source| {
                LoadFailure::Device(PipelineError::Image {
                    node: "write2fpga",
                    source,
                })
            })?;
            Device::Frame(img)
        }
    };
    Ok(Job {
        frame_id: msg.frame_id,
        width: msg.width,
        height: msg.height,
        device,
    })
}

fn fpga_sim(ctx: &NodeContext, jobs: &Receiver<Job>, out: &mpsc::SyncSender<Labeled>) {
    while ctx.running() {
        let job = match jobs.recv_timeout(POLL) {
            Ok(j) => j,
            Err(RecvTimeoutError::Timeout) => continue,
            Err(RecvTimeoutError::Disconnected) => break,
        };
        let node = "fpga_sim";
        let result = match job.device {
            Device::Loaded(sim) => sim
                .run()
                .map(|(fp, report)| (fp.labels.into_labels(), Some(report)))
                .map_err(|source| PipelineError::Sim { node, source }),
            Device::Frame(img) => first_pass(&img, &ctx.labeler)
                .map(|fp| (fp.labels.into_labels(), None))
                .map_err(|source| PipelineError::Label { node, source }),
        };
        match result {
            Ok((words, report)) => {
                let labeled = Labeled {
                    frame_id: job.frame_id,
                    width: job.width,
                    height: job.height,
                    words,
                };
                if out.send(labeled).is_err() {
                    break;
                }
                let _ = ctx.outcomes.send(DeviceOutcome {
                    frame_id: job.frame_id,
                    result: Ok(report),
                });
            }
            Err(e) => ctx.fail(job.frame_id, e),
        }
    }
    debug!("fpga_sim stopped");
}

fn read4fpga(ctx: &NodeContext, labeled: &Receiver<Labeled>, output: &Publisher) {
    while ctx.running() {
        let frame = match labeled.recv_timeout(POLL) {
            Ok(f) => f,
            Err(RecvTimeoutError::Timeout) => continue,
            Err(RecvTimeoutError::Disconnected) => break,
        };
        // The conversion below reads the first word straight away.
        stamp(&ctx.stamps, frame.frame_id, 3);
        let pixels: Vec<i32> = frame.words.into_iter().map(|w| w as i32).collect();
        let msg = FrameMessage {
            frame_id: frame.frame_id,
            width: frame.width,
            height: frame.height,
            pixels,
        };
        stamp(&ctx.stamps, frame.frame_id, 4);
        if let Err(e) = output.publish(&msg) {
            ctx.reject("read4fpga", e);
        }
    }
    debug!("read4fpga stopped");
}
