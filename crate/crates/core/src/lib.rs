//! Core algorithms for a streaming image-labeling component.
//!
//! This crate is `no_std` (it needs `alloc`) and carries no IO. It holds:
//!
//! * [`image`]: gray, binary and label pixel grids plus binarization and
//!   canonical relabeling.
//! * [`labeling`]: the per-pixel label generator rule, the raster first pass,
//!   equivalence resolution and an independent flood-fill oracle.
//! * [`hwsim`]: a cycle-accurate behavioral model of the line-buffered
//!   labeling datapath (FIFOs, line memory, ping-pong label buffers).
//! * [`codec`]: the bit-exact frame message wire format.
//! * [`topic`]: topic name validation for the message bus.
//!
//! File formats, transports, the node pipeline and the CLI live in the
//! `streamlabel` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod codec;
pub mod hwsim;
pub mod image;
pub mod labeling;
pub mod topic;

pub use codec::{decode_message, encode_message, CodecError, FrameMessage};
pub use hwsim::{estimate_cycles, run_frame, SimConfig, SimError, SimReport, Simulator, TimingModel};
pub use image::{binarize, canonicalize, BinaryImage, GrayImage, ImageError, LabelImage};
pub use labeling::{
    first_pass, flood_fill_oracle, label_pixel, resolve, resolve_from_labels, Connectivity,
    EquivalenceSet, FirstPassResult, LabelBits, LabelError, LabelGeneratorState, LabelerConfig,
    Offset, OverflowPolicy, PixelOutput, RefSet,
};
pub use topic::{TopicError, TopicName};
