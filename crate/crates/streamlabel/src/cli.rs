//! The `streamlabel` command line.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O (files, sockets, registry),
//! 3 data (undecodable image, frame too wide, label overflow).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use streamlabel_core::hwsim::{run_frame_with, Rate, SimConfig, SimError, TimingModel};
use streamlabel_core::{
    canonicalize, first_pass, resolve, Connectivity, LabelBits, LabelImage, LabelerConfig,
    OverflowPolicy,
};
use thiserror::Error;

use crate::imaging::{render_labels, LoadError};
use crate::msgbus::registry::{registry_addr, RegistryServer};
use crate::msgbus::BusError;
use crate::pipeline::{
    bench, run_pipeline, Engine, PipelineConfig, PipelineError, TransportKind,
};
use crate::source::{ImageSource, SourceError};

#[derive(Debug, Parser)]
#[command(name = "streamlabel", version, about = "Streaming connected-component labeling toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label an image in software and write the resolved labels as PPM.
    Label(LabelCmd),
    /// Run an image through the cycle-accurate datapath model.
    Simulate(SimulateCmd),
    /// Run one frame through the node graph.
    Pipeline(PipelineCmd),
    /// Repeat the pipeline and report per-segment latency statistics.
    Bench(BenchCmd),
    /// Serve the topic registry until interrupted.
    Registry(RegistryCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConnectivityArg {
    /// Left, up and up-right neighbors.
    Paper3,
    /// Left and up neighbors.
    Conn4,
    /// Left, up-left, up and up-right neighbors.
    Conn8,
}

impl From<ConnectivityArg> for Connectivity {
    fn from(c: ConnectivityArg) -> Self {
        match c {
            ConnectivityArg::Paper3 => Connectivity::Paper3,
            ConnectivityArg::Conn4 => Connectivity::Conn4,
            ConnectivityArg::Conn8 => Connectivity::Conn8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OverflowArg {
    /// Abort the frame when labels run out.
    Error,
    /// Keep the largest label and flag the frame.
    Saturate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    /// Software first pass.
    Sw,
    /// Cycle-accurate datapath model.
    Sim,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Sw => Engine::Software,
            EngineArg::Sim => Engine::SimulatedHw,
        }
    }
}

fn parse_label_bits(s: &str) -> Result<LabelBits, String> {
    s.parse::<u32>()
        .ok()
        .and_then(LabelBits::from_bits)
        .ok_or_else(|| format!("{s:?} is not one of 8, 16, 32"))
}

fn parse_source(s: &str) -> Result<ImageSource, String> {
    s.parse().map_err(|e: SourceError| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct LabelerArgs {
    /// Input image (PGM or BMP) or `pattern:<kind>:<W>x<H>[:params]`.
    #[arg(value_parser = parse_source)]
    pub input: ImageSource,
    /// Gray levels at or above this become white.
    #[arg(long, default_value_t = 128)]
    pub threshold: u8,
    #[arg(long, value_enum, default_value_t = ConnectivityArg::Paper3)]
    pub connectivity: ConnectivityArg,
    /// Width of the label register: 8, 16 or 32.
    #[arg(long, default_value = "8", value_parser = parse_label_bits)]
    pub label_bits: LabelBits,
    #[arg(long, value_enum, default_value_t = OverflowArg::Error)]
    pub overflow: OverflowArg,
    /// Write the resolved labels as a color PPM.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the resolved labels as text, one image row per line.
    #[arg(long)]
    pub dump_labels: Option<PathBuf>,
}

impl LabelerArgs {
    pub fn labeler(&self) -> LabelerConfig {
        LabelerConfig::new(Connectivity::from(self.connectivity).ref_set())
            .with_label_bits(self.label_bits)
            .with_overflow(match self.overflow {
                OverflowArg::Error => OverflowPolicy::Error,
                OverflowArg::Saturate => OverflowPolicy::Saturate,
            })
    }
}

#[derive(Debug, Clone, Args)]
pub struct DeviceArgs {
    /// Words per host/device FIFO.
    #[arg(long, default_value_t = 4096, value_parser = clap::value_parser!(u32).range(1..))]
    pub fifo_capacity: u32,
    /// Words per line memory; frames wider than this are rejected.
    #[arg(long, default_value_t = 1920, value_parser = clap::value_parser!(u32).range(1..))]
    pub line_buffer: u32,
    /// Host transfer rate in words per cycle, e.g. `1` or `3/4`.
    #[arg(long, default_value = "1")]
    pub dma_rate: Rate,
    /// Clock period in nanoseconds.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub clock_ns: u32,
}

impl DeviceArgs {
    pub fn timing(&self) -> TimingModel {
        TimingModel {
            clock_period_ns: self.clock_ns,
            dma_words_per_cycle: self.dma_rate,
            ..TimingModel::default()
        }
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            fifo_capacity: self.fifo_capacity as usize,
            line_buffer_capacity: self.line_buffer as usize,
            ..SimConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct LabelCmd {
    #[command(flatten)]
    pub labeler: LabelerArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateCmd {
    #[command(flatten)]
    pub labeler: LabelerArgs,
    #[command(flatten)]
    pub device: DeviceArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    #[arg(long, value_enum, default_value_t = EngineArg::Sim)]
    pub engine: EngineArg,
    /// Connect the nodes over TCP instead of in-process queues.
    #[arg(long)]
    pub tcp: bool,
    /// Registry address for `--tcp` [default: $STREAMLABEL_REGISTRY or 127.0.0.1:11411].
    #[arg(long)]
    pub registry: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineCmd {
    #[command(flatten)]
    pub labeler: LabelerArgs,
    #[command(flatten)]
    pub device: DeviceArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchCmd {
    #[command(flatten)]
    pub labeler: LabelerArgs,
    #[command(flatten)]
    pub device: DeviceArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Number of frames to time.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub iterations: u32,
}

#[derive(Debug, Clone, Args)]
pub struct RegistryCmd {
    /// TCP port to listen on.
    #[arg(long, default_value_t = 11411)]
    pub port: u16,
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error("labeling failed: {0}")]
    Label(#[from] streamlabel_core::LabelError),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("registry: {0}")]
    Registry(std::io::Error),
    #[error(transparent)]
    Stdout(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Source(e) => source_code(e),
            CliError::Label(_) => 3,
            CliError::Sim(e) => sim_code(e),
            CliError::Pipeline(e) => match e {
                PipelineError::Source(e) => source_code(e),
                PipelineError::Sim { source, .. } => sim_code(source),
                PipelineError::Label { .. } | PipelineError::Image { .. } | PipelineError::TooLarge(_) => 3,
                PipelineError::Bus { source, .. } => match source {
                    BusError::Codec(_) => 3,
                    BusError::Topic(_) | BusError::ZeroCapacity => 1,
                    _ => 2,
                },
                PipelineError::Timeout { .. } | PipelineError::NodeDown { .. } => 2,
            },
            CliError::Write { .. } | CliError::Registry(_) | CliError::Stdout(_) => 2,
        }
    }
}

fn source_code(e: &SourceError) -> u8 {
    match e {
        SourceError::BadPattern { .. } => 1,
        SourceError::Load(LoadError::Io { .. }) => 2,
        SourceError::Load(LoadError::Decode { .. }) | SourceError::Image(_) => 3,
    }
}

fn sim_code(e: &SimError) -> u8 {
    match e {
        SimError::InvalidTiming(_) | SimError::ZeroFifoCapacity => 1,
        _ => 3,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Text dump: one line per row, labels separated by spaces.
pub fn dump_labels(lbl: &LabelImage) -> String {
    let mut s = String::with_capacity(lbl.labels().len() * 2);
    for row in lbl.labels().chunks(lbl.width().max(1)) {
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

fn write_outputs(args: &LabelerArgs, lbl: &LabelImage) -> Result<(), CliError> {
    if let Some(p) = &args.out {
        write_file(p, &render_labels(lbl))?;
    }
    if let Some(p) = &args.dump_labels {
        write_file(p, dump_labels(lbl).as_bytes())?;
    }
    Ok(())
}

fn pipeline_config(labeler: &LabelerArgs, device: &DeviceArgs, graph: &GraphArgs) -> PipelineConfig {
    PipelineConfig {
        threshold: labeler.threshold,
        labeler: labeler.labeler(),
        timing: device.timing(),
        sim: device.sim(),
        transport: if graph.tcp {
            TransportKind::Tcp {
                registry: graph.registry.clone().unwrap_or_else(registry_addr),
            }
        } else {
            TransportKind::InProcess
        },
        ..PipelineConfig::default()
    }
}

/// Executes a parsed command, writing human output to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let w = |r: std::io::Result<()>| r.map_err(CliError::Stdout);
    match cli.command {
        Command::Label(cmd) => {
            let img = cmd.labeler.input.load_binary(cmd.labeler.threshold)?;
            let fp = first_pass(&img, &cmd.labeler.labeler())?;
            let lbl = canonicalize(&resolve(&fp));
            write_outputs(&cmd.labeler, &lbl)?;
            w(writeln!(out, "components: {}", lbl.component_count()))?;
            w(writeln!(
                out,
                "provisional_labels={} overflowed={}",
                fp.labels_issued, fp.overflowed
            ))?;
        }
        Command::Simulate(cmd) => {
            let img = cmd.labeler.input.load_binary(cmd.labeler.threshold)?;
            let (fp, report) =
                run_frame_with(&img, &cmd.labeler.labeler(), &cmd.device.timing(), &cmd.device.sim())?;
            let lbl = canonicalize(&resolve(&fp));
            write_outputs(&cmd.labeler, &lbl)?;
            w(writeln!(out, "{}", report.to_kv()))?;
            w(writeln!(out, "components: {}", lbl.component_count()))?;
        }
        Command::Pipeline(cmd) => {
            let cfg = pipeline_config(&cmd.labeler, &cmd.device, &cmd.graph);
            let result = run_pipeline(&cmd.labeler.input, cmd.graph.engine.into(), &cfg)?;
            write_outputs(&cmd.labeler, &result.labels)?;
            w(writeln!(out, "{}", result.summary))?;
            w(writeln!(out, "components: {}", result.summary.components))?;
            w(writeln!(out, "{}", result.latency.to_kv()))?;
            if let Some(r) = &result.sim_report {
                w(writeln!(out, "{}", r.to_kv()))?;
            }
        }
        Command::Bench(cmd) => {
            let cfg = pipeline_config(&cmd.labeler, &cmd.device, &cmd.graph);
            let stats = bench(
                &cmd.labeler.input,
                cmd.graph.engine.into(),
                cmd.iterations as usize,
                &cfg,
            )?;
            w(write!(out, "{}", stats.table()))?;
            w(writeln!(out))?;
            w(write!(out, "{}", stats.to_kv()))?;
            if cmd.labeler.out.is_some() || cmd.labeler.dump_labels.is_some() {
                let img = cmd.labeler.input.load_binary(cmd.labeler.threshold)?;
                let lbl = canonicalize(&resolve(&first_pass(&img, &cfg.labeler)?));
                write_outputs(&cmd.labeler, &lbl)?;
            }
        }
        Command::Registry(cmd) => {
            let server =
                RegistryServer::bind(&format!("{}:{}", cmd.bind, cmd.port)).map_err(CliError::Registry)?;
            w(writeln!(out, "registry listening on {}", server.local_addr()))?;
            w(out.flush())?;
            server.wait();
        }
    }
    Ok(())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "streamlabel: {e}");
            e.exit_code()
        }
    }
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    ExitCode::from(code)
}
