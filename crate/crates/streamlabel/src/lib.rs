//! Host side of the streaming labeler: image files, generated test patterns,
//! a small publish/subscribe bus, the node pipeline around the simulated
//! datapath, and the `streamlabel` command line tool.

pub mod cli;
pub mod imaging;
pub mod msgbus;
pub mod pipeline;
pub mod source;

pub use streamlabel_core as core;
