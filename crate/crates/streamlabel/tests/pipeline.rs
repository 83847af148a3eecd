mod common;

use std::sync::Arc;
use std::time::Duration;

use proptest::prelude::*;
use streamlabel::pipeline::{
    bench, run_pipeline, Engine, NodeGraph, PipelineConfig, PipelineError, TransportKind,
};
use streamlabel::source::{generate, ImageSource, Pattern};
use streamlabel_core::hwsim::run_frame;
use streamlabel_core::{
    canonicalize, encode_message, first_pass, flood_fill_oracle, resolve, BinaryImage, Connectivity,
    FrameMessage, LabelBits, LabelerConfig, OverflowPolicy, TimingModel,
};

use common::Bus;

/// Random frames need more provisional labels than an 8-bit register holds.
fn wide() -> PipelineConfig {
    PipelineConfig {
        labeler: LabelerConfig::default().with_label_bits(LabelBits::ThirtyTwo),
        ..PipelineConfig::default()
    }
}

fn random(w: usize, h: usize, density: f64, seed: u64) -> BinaryImage {
    generate(&Pattern::Random { density, seed }, w, h).unwrap()
}

#[test]
fn both_engines_agree_on_a_random_frame() {
    let cfg = wide();
    let img = random(64, 64, 0.5, 11);
    let sw = NodeGraph::start(Engine::Software, &cfg).unwrap().process(3, &img).unwrap();
    let sim = NodeGraph::start(Engine::SimulatedHw, &cfg).unwrap().process(3, &img).unwrap();
    assert_eq!(sw.message, sim.message);
    assert_eq!(sw.labels, sim.labels);
    assert!(sw.sim_report.is_none());
    assert!(sim.sim_report.is_some());
    assert_eq!(sim.labels, flood_fill_oracle(&img, &cfg.labeler.ref_set));
}

#[test]
fn published_labels_are_the_device_output() {
    let cfg = wide();
    let img = random(40, 30, 0.6, 5);
    let out = NodeGraph::start(Engine::SimulatedHw, &cfg).unwrap().process(-7, &img).unwrap();
    let (fp, report) = run_frame(&img, &cfg.labeler, &cfg.timing, cfg.sim.fifo_capacity).unwrap();
    let expected: Vec<i32> = fp.labels.labels().iter().map(|&l| l as i32).collect();
    assert_eq!(out.message.pixels, expected);
    assert_eq!((out.message.frame_id, out.message.width, out.message.height), (-7, 40, 30));
    assert_eq!(out.sim_report, Some(report));
    assert_eq!(out.labels, canonicalize(&resolve(&fp)));
}

#[test]
fn black_frame_still_reports_a_labeling_segment() {
    let src: ImageSource = "pattern:black:32x8".parse().unwrap();
    let out = run_pipeline(&src, Engine::SimulatedHw, &PipelineConfig::default()).unwrap();
    assert!(out.labels.labels().iter().all(|&l| l == 0));
    assert_eq!(out.summary.components, 0);
    assert!(out.latency.seg3_label > Duration::ZERO);
}

#[test]
fn segments_account_for_the_total() {
    let src: ImageSource = "pattern:random:128x64:0.4:9".parse().unwrap();
    for engine in [Engine::Software, Engine::SimulatedHw] {
        let out = run_pipeline(&src, engine, &wide()).unwrap();
        let lat = out.latency;
        let diff = lat.total.abs_diff(lat.segment_sum());
        assert!(diff <= Duration::from_millis(1), "{engine}: {lat:?}");
    }
}

#[test]
fn malformed_input_is_skipped_and_counted() {
    let graph = NodeGraph::start(Engine::SimulatedHw, &wide()).unwrap();
    graph.input_publisher().publish_raw(vec![1, 2, 3].into());
    let not_binary = FrameMessage {
        frame_id: 99,
        width: 1,
        height: 1,
        pixels: vec![17],
    };
    graph
        .input_publisher()
        .publish_raw(encode_message(&not_binary).unwrap().into());
    let img = random(16, 16, 0.5, 1);
    let out = graph.process(1, &img).unwrap();
    assert_eq!(out.message.frame_id, 1);
    assert_eq!(graph.error_count(), 2);
}

#[test]
fn device_errors_name_the_node_and_the_graph_survives() {
    let cfg = PipelineConfig {
        labeler: LabelerConfig::default().with_overflow(OverflowPolicy::Error),
        ..PipelineConfig::default()
    };
    let graph = NodeGraph::start(Engine::SimulatedHw, &cfg).unwrap();
    let dots = generate(&Pattern::Dots, 64, 64).unwrap();
    let err = graph.process(1, &dots).unwrap_err();
    assert!(matches!(err, PipelineError::Sim { node: "fpga_sim", .. }), "{err}");
    assert!(err.to_string().contains("label capacity exceeded"));

    let wide = BinaryImage::black(2000, 1).unwrap();
    let err = graph.process(2, &wide).unwrap_err();
    assert!(err.to_string().starts_with("write2fpga: line buffer capacity exceeded"), "{err}");

    assert!(graph.process(3, &random(8, 8, 0.5, 2)).is_ok());
}

#[test]
fn tcp_pipeline_matches_in_process() {
    let bus = Bus::tcp();
    let tcp_cfg = PipelineConfig {
        transport: TransportKind::Tcp {
            registry: bus.registry_addr(),
        },
        ..wide()
    };
    let src: ImageSource = "pattern:random:96x48:0.5:3".parse().unwrap();
    let tcp = run_pipeline(&src, Engine::SimulatedHw, &tcp_cfg).unwrap();
    let local = run_pipeline(&src, Engine::SimulatedHw, &wide()).unwrap();
    assert_eq!(tcp.message, local.message);
    assert_eq!(tcp.labels, local.labels);
}

#[test]
fn graph_runs_on_a_shared_transport() {
    let bus = Bus::in_process();
    let graph = NodeGraph::start_on(Arc::clone(&bus.transport), Engine::Software, &wide()).unwrap();
    for id in 0..5 {
        let out = graph.process(id, &random(10, 10, 0.5, id as u64)).unwrap();
        assert_eq!(out.message.frame_id, id);
    }
}

#[test]
fn bench_collects_exactly_n_runs() {
    let src: ImageSource = "pattern:checker:64x32:4".parse().unwrap();
    let stats = bench(&src, Engine::SimulatedHw, 10, &PipelineConfig::default()).unwrap();
    assert_eq!(stats.iterations, 10);
    assert_eq!(stats.runs.len(), 10);
    for s in stats.segments.iter().chain([&stats.total]) {
        assert!(s.min <= s.mean && s.mean <= s.max);
    }
    for r in &stats.runs {
        assert!(r.total.abs_diff(r.segment_sum()) <= Duration::from_millis(1));
    }
    let one = bench(&src, Engine::Software, 1, &PipelineConfig::default()).unwrap();
    assert_eq!(one.total.min, one.total.max);
    assert_eq!(one.total.min, one.total.mean);
}

#[test]
fn connectivity_reaches_the_resolution_step() {
    // Two diagonal pixels: one component under conn8, two under conn4.
    let img = BinaryImage::from_mask(2, 2, &[true, false, false, true]).unwrap();
    for (conn, k) in [(Connectivity::Conn8, 1), (Connectivity::Conn4, 2)] {
        let cfg = PipelineConfig {
            labeler: LabelerConfig::new(conn.ref_set()),
            ..PipelineConfig::default()
        };
        let out = NodeGraph::start(Engine::SimulatedHw, &cfg).unwrap().process(0, &img).unwrap();
        assert_eq!(out.summary.components, k, "{conn}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn engine_equivalence(w in 1usize..48, h in 1usize..24, density in 0.1f64..0.9, seed in any::<u64>()) {
        let img = random(w, h, density, seed);
        let cfg = wide();
        let sw = NodeGraph::start(Engine::Software, &cfg).unwrap().process(0, &img).unwrap();
        let sim = NodeGraph::start(Engine::SimulatedHw, &cfg).unwrap().process(0, &img).unwrap();
        prop_assert_eq!(&sw.message, &sim.message);
        let fp = first_pass(&img, &cfg.labeler).unwrap();
        prop_assert_eq!(sw.labels, canonicalize(&resolve(&fp)));
        prop_assert_eq!(sim.sim_report.unwrap().compute_cycles,
            streamlabel_core::estimate_cycles(w, h, &TimingModel::default()));
    }
}
