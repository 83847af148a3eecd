//! Breadth-first connected components, used to check the streaming labeler.
//!
//! Shares no code with the first pass; only the reference offsets are
//! borrowed, and they are symmetrized here.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::RefSet;
use crate::image::{BinaryImage, LabelImage};

/// Labels the white components of `img` under the symmetric closure of
/// `ref_set`, numbering components `1..=K` by first raster appearance.
pub fn flood_fill_oracle(img: &BinaryImage, ref_set: &RefSet) -> LabelImage {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut steps: Vec<(i64, i64)> = Vec::new();
    for o in ref_set.offsets() {
        for s in [(o.dx as i64, o.dy as i64), (-(o.dx as i64), -(o.dy as i64))] {
            if !steps.contains(&s) {
                steps.push(s);
            }
        }
    }

    let px = img.pixels();
    let mut out = vec![0u32; px.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..px.len() {
        if px[start] == 0 || out[start] != 0 {
            continue;
        }
        next += 1;
        out[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i as i64) % w, (i as i64) / w);
            for &(dx, dy) in &steps {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let j = (ny * w + nx) as usize;
                if px[j] != 0 && out[j] == 0 {
                    out[j] = next;
                    queue.push_back(j);
                }
            }
        }
    }
    LabelImage::new(img.width(), img.height(), out).expect("dimensions come from a valid image")
}
