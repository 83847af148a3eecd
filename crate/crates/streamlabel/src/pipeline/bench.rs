use std::fmt::Write as _;
use std::time::Duration;

use streamlabel_core::hwsim::{ns_as_ms, SimReport};

use super::{ms, Engine, LatencyBreakdown, NodeGraph, PipelineConfig, PipelineError};
use crate::source::ImageSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentStats {
    pub min: Duration,
    pub mean: Duration,
    pub max: Duration,
}

impl SegmentStats {
    fn over(samples: impl Iterator<Item = Duration> + Clone) -> Self {
        let n = samples.clone().count() as u32;
        let sum: Duration = samples.clone().sum();
        Self {
            min: samples.clone().min().unwrap_or_default(),
            mean: sum / n.max(1),
            max: samples.max().unwrap_or_default(),
        }
    }
}

/// Per-segment statistics over repeated runs of one frame.
#[derive(Debug, Clone)]
pub struct BenchStats {
    pub engine: Engine,
    pub source: String,
    pub iterations: usize,
    pub runs: Vec<LatencyBreakdown>,
    pub segments: [SegmentStats; 5],
    pub total: SegmentStats,
    /// Cycle report of the last run, simulated engine only.
    pub sim_report: Option<SimReport>,
}

impl BenchStats {
    pub fn from_runs(
        engine: Engine,
        source: String,
        runs: Vec<LatencyBreakdown>,
        sim_report: Option<SimReport>,
    ) -> Self {
        let segments = std::array::from_fn(|i| SegmentStats::over(runs.iter().map(|r| r.segments()[i])));
        let total = SegmentStats::over(runs.iter().map(|r| r.total));
        Self {
            engine,
            source,
            iterations: runs.len(),
            runs,
            segments,
            total,
            sim_report,
        }
    }

    /// Aligned table: one row per run with the stacked segments, then
    /// min/mean/max per segment.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "engine: {}  source: {}  iterations: {}",
            self.engine, self.source, self.iterations
        );
        if let Some(r) = &self.sim_report {
            let _ = writeln!(
                out,
                "device: compute_cycles={} frame_time_ms={} total_cycles={}",
                r.compute_cycles,
                ns_as_ms(r.frame_time_ns()),
                r.total_cycles
            );
        }
        let _ = writeln!(out);
        let _ = write!(out, "{:>5}", "run");
        for i in 1..=5 {
            let _ = write!(out, " {:>10}", format!("seg{i}_ms"));
        }
        let _ = writeln!(out, " {:>10}", "total_ms");
        for (i, r) in self.runs.iter().enumerate() {
            let _ = write!(out, "{:>5}", i + 1);
            for d in r.segments() {
                let _ = write!(out, " {:>10.3}", ms(d));
            }
            let _ = writeln!(out, " {:>10.3}", ms(r.total));
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<18} {:>10} {:>10} {:>10} {:>7}",
            "segment", "min_ms", "mean_ms", "max_ms", "share"
        );
        let mean_total = ms(self.total.mean);
        let rows = LatencyBreakdown::SEGMENT_NAMES
            .iter()
            .zip(self.segments.iter())
            .chain(std::iter::once((&"total", &self.total)));
        for (name, s) in rows {
            let share = if mean_total > 0.0 {
                100.0 * ms(s.mean) / mean_total
            } else {
                0.0
            };
            let _ = writeln!(
                out,
                "{:<18} {:>10.3} {:>10.3} {:>10.3} {:>6.1}%",
                name,
                ms(s.min),
                ms(s.mean),
                ms(s.max),
                share
            );
        }
        out
    }

    /// `key=value` records: one per run, one per segment, one summary.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (i, r) in self.runs.iter().enumerate() {
            let _ = writeln!(out, "record=run run={} {}", i + 1, r.to_kv());
        }
        let rows = LatencyBreakdown::SEGMENT_NAMES
            .iter()
            .zip(self.segments.iter())
            .chain(std::iter::once((&"total", &self.total)));
        for (name, s) in rows {
            let _ = writeln!(
                out,
                "record=segment segment={name} min_ms={:.3} mean_ms={:.3} max_ms={:.3}",
                ms(s.min),
                ms(s.mean),
                ms(s.max)
            );
        }
        let _ = write!(
            out,
            "record=bench engine={} iterations={}",
            self.engine, self.iterations
        );
        if let Some(r) = &self.sim_report {
            let _ = write!(out, " {}", r.to_kv());
        }
        out.push('\n');
        out
    }
}

/// Runs the frame `iterations` times through one graph and aggregates the
/// latency breakdowns.
pub fn bench(
    source: &ImageSource,
    engine: Engine,
    iterations: usize,
    cfg: &PipelineConfig,
) -> Result<BenchStats, PipelineError> {
    assert!(iterations >= 1, "bench needs at least one iteration");
    let img = source.load_binary(cfg.threshold)?;
    let graph = NodeGraph::start(engine, cfg)?;
    let mut runs = Vec::with_capacity(iterations);
    let mut sim_report = None;
    for i in 0..iterations {
        let out = graph.process(i as i32, &img)?;
        runs.push(out.latency);
        sim_report = out.sim_report;
    }
    Ok(BenchStats::from_runs(engine, source.to_string(), runs, sim_report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn breakdown(ms: [u64; 5]) -> LatencyBreakdown {
        let d = ms.map(Duration::from_millis);
        LatencyBreakdown {
            seg1_pub_sub_in: d[0],
            seg2_pre_label: d[1],
            seg3_label: d[2],
            seg4_post_label: d[3],
            seg5_pub_sub_out: d[4],
            total: d.iter().sum(),
        }
    }

    #[test]
    fn stats_are_ordered_and_exact() {
        let runs = vec![breakdown([1, 2, 3, 4, 5]), breakdown([3, 2, 1, 4, 9])];
        let s = BenchStats::from_runs(Engine::Software, "x".into(), runs, None);
        assert_eq!(s.segments[0].min, Duration::from_millis(1));
        assert_eq!(s.segments[0].mean, Duration::from_millis(2));
        assert_eq!(s.segments[0].max, Duration::from_millis(3));
        assert_eq!(s.segments[4].mean, Duration::from_millis(7));
        assert_eq!(s.total.min, Duration::from_millis(15));
        assert_eq!(s.total.max, Duration::from_millis(19));
    }

    #[test]
    fn single_run_collapses() {
        let s = BenchStats::from_runs(Engine::SimulatedHw, "x".into(), vec![breakdown([5, 0, 2, 1, 1])], None);
        for seg in s.segments.iter().chain([&s.total]) {
            assert_eq!(seg.min, seg.mean);
            assert_eq!(seg.mean, seg.max);
        }
    }

    #[test]
    fn outputs_have_one_line_per_run_and_segment() {
        let runs = (0..10).map(|i| breakdown([i, 1, 2, 3, 4])).collect();
        let s = BenchStats::from_runs(Engine::Software, "pattern:black:4x4".into(), runs, None);
        let kv = s.to_kv();
        assert_eq!(kv.lines().filter(|l| l.starts_with("record=run ")).count(), 10);
        assert_eq!(kv.lines().filter(|l| l.starts_with("record=segment ")).count(), 6);
        let table = s.table();
        assert!(table.contains("seg3_label"));
        assert_eq!(table.lines().filter(|l| l.trim_start().starts_with("10 ")).count(), 1);
    }
}
