#![allow(dead_code)]

use std::sync::Arc;
use std::time::{Duration, Instant};

use streamlabel::msgbus::{InProcessBus, RegistryClient, RegistryServer, TcpBus, Transport};

/// A transport plus whatever must outlive it.
pub struct Bus {
    pub transport: Arc<dyn Transport>,
    pub registry: Option<RegistryServer>,
}

impl Bus {
    pub fn in_process() -> Self {
        Self {
            transport: Arc::new(InProcessBus::new()),
            registry: None,
        }
    }

    /// TCP transport with a private registry on an ephemeral port.
    pub fn tcp() -> Self {
        let registry = RegistryServer::bind("127.0.0.1:0").expect("bind registry");
        let client = RegistryClient::new(registry.local_addr().to_string());
        Self {
            transport: Arc::new(TcpBus::new(client).with_poll_interval(Duration::from_millis(50))),
            registry: Some(registry),
        }
    }

    pub fn both() -> [(&'static str, Bus); 2] {
        [("in-process", Bus::in_process()), ("tcp", Bus::tcp())]
    }

    pub fn registry_addr(&self) -> String {
        self.registry.as_ref().expect("tcp bus").local_addr().to_string()
    }
}

/// Polls `cond` until it holds or `timeout` passes.
pub fn eventually(timeout: Duration, mut cond: impl FnMut() -> bool) -> bool {
    let deadline = Instant::now() + timeout;
    loop {
        if cond() {
            return true;
        }
        if Instant::now() >= deadline {
            return false;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
}

/// Uncompressed BMP with a 40-byte info header. Palette entries and 24-bit
/// pixels are in file order (blue, green, red).
pub fn bmp(width: i32, height: i32, bpp: u16, palette: &[[u8; 3]], rows_top_down: &[Vec<u8>]) -> Vec<u8> {
    let row_bytes = (width as usize * bpp as usize / 8).div_ceil(4) * 4;
    let offset = 14 + 40 + 4 * palette.len();
    let size = offset + row_bytes * rows_top_down.len();
    let mut out = Vec::with_capacity(size);
    out.extend_from_slice(b"BM");
    out.extend_from_slice(&(size as u32).to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&(offset as u32).to_le_bytes());
    out.extend_from_slice(&40u32.to_le_bytes());
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&bpp.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&((row_bytes * rows_top_down.len()) as u32).to_le_bytes());
    out.extend_from_slice(&2835u32.to_le_bytes());
    out.extend_from_slice(&2835u32.to_le_bytes());
    out.extend_from_slice(&(palette.len() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for [b, g, r] in palette {
        out.extend_from_slice(&[*b, *g, *r, 0]);
    }
    let mut emit = |row: &Vec<u8>| {
        let mut padded = row.clone();
        padded.resize(row_bytes, 0);
        out.extend_from_slice(&padded);
    };
    if height > 0 {
        rows_top_down.iter().rev().for_each(&mut emit);
    } else {
        rows_top_down.iter().for_each(&mut emit);
    }
    out
}

/// Binary P5 graymap.
pub fn pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}
