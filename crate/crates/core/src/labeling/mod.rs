//! Raster-scan labeling: the first pass that mirrors the label generator
//! circuit, and the second step that merges split regions.

mod generator;
mod oracle;
mod refset;
mod unionfind;

use alloc::vec;
use alloc::vec::Vec;

pub use generator::{
    label_pixel, LabelBits, LabelError, LabelGeneratorState, LabelerConfig, OverflowPolicy,
    PixelOutput,
};
pub use oracle::flood_fill_oracle;
pub use refset::{Connectivity, Offset, RefSet, RefSetError, UnknownConnectivity, MAX_REFS};
pub use unionfind::EquivalenceSet;

use crate::image::{canonicalize, BinaryImage, LabelImage};

/// Output of the first pass.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FirstPassResult {
    /// Provisional labels; one region may carry several.
    pub labels: LabelImage,
    pub equivalences: EquivalenceSet,
    /// Final value of the Current Label register.
    pub labels_issued: u32,
    pub overflowed: bool,
}

/// Running first-pass bookkeeping shared by the raster scan and the
/// simulated datapath: generator registers plus equivalence recording.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FirstPassRecorder {
    state: LabelGeneratorState,
    equivalences: EquivalenceSet,
}

impl FirstPassRecorder {
    pub fn new() -> Self {
        Self {
            state: LabelGeneratorState::default(),
            equivalences: EquivalenceSet::new(),
        }
    }

    /// Labels one pixel and records its equivalences.
    pub fn step(
        &mut self,
        new_pixel: u8,
        refs: &[u32],
        cfg: &LabelerConfig,
    ) -> Result<u32, LabelError> {
        let out = label_pixel(new_pixel, refs, &mut self.state, cfg)?;
        if out.fresh {
            self.equivalences.grow_to(out.label);
        }
        for (a, b) in out.pairs() {
            self.equivalences.union(a, b);
        }
        Ok(out.label)
    }

    pub fn state(&self) -> &LabelGeneratorState {
        &self.state
    }

    pub fn finish(self, labels: LabelImage) -> FirstPassResult {
        FirstPassResult {
            labels,
            equivalences: self.equivalences,
            labels_issued: self.state.current_label,
            overflowed: self.state.overflowed,
        }
    }
}

/// Raster-scans `img`, labeling each pixel from already-written labels.
pub fn first_pass(img: &BinaryImage, cfg: &LabelerConfig) -> Result<FirstPassResult, LabelError> {
    let (w, h) = (img.width(), img.height());
    let offsets = cfg.ref_set.offsets();
    let mut labels = vec![0u32; w * h];
    let mut refs = [0u32; MAX_REFS];
    let mut rec = FirstPassRecorder::new();

    for y in 0..h {
        for x in 0..w {
            for (slot, o) in refs.iter_mut().zip(offsets) {
                let nx = x as i64 + o.dx as i64;
                let ny = y as i64 + o.dy as i64;
                *slot = if nx < 0 || ny < 0 || nx >= w as i64 {
                    0
                } else {
                    labels[ny as usize * w + nx as usize]
                };
            }
            labels[y * w + x] = rec.step(img.get(x, y), &refs[..offsets.len()], cfg)?;
        }
    }
    let labels = LabelImage::new(w, h, labels).expect("dimensions come from a valid image");
    Ok(rec.finish(labels))
}

/// Replaces every provisional label with its class representative and
/// renumbers classes `1..=K` by first raster appearance.
pub fn resolve(fp: &FirstPassResult) -> LabelImage {
    let rep = fp.equivalences.representatives();
    let merged: Vec<u32> = fp
        .labels
        .labels()
        .iter()
        .map(|&l| rep.get(l as usize).copied().unwrap_or(l))
        .collect();
    let merged = LabelImage::new(fp.labels.width(), fp.labels.height(), merged)
        .expect("same dimensions as the first pass");
    canonicalize(&merged)
}

/// Second step from a provisional label image alone: neighbors under
/// `ref_set` that both carry labels are merged.
///
/// This is what a consumer of published first-pass labels runs, since the
/// equivalence table does not travel with the frame.
pub fn resolve_from_labels(lbl: &LabelImage, ref_set: &RefSet) -> LabelImage {
    let compact = canonicalize(lbl);
    let (w, h) = (compact.width() as i64, compact.height() as i64);
    let labels = compact.labels();
    let mut eq = EquivalenceSet::new();
    eq.grow_to(compact.max_label());
    for y in 0..h {
        for x in 0..w {
            let here = labels[(y * w + x) as usize];
            if here == 0 {
                continue;
            }
            for o in ref_set.offsets() {
                let (nx, ny) = (x + o.dx as i64, y + o.dy as i64);
                if nx < 0 || ny < 0 || nx >= w {
                    continue;
                }
                let there = labels[(ny * w + nx) as usize];
                if there != 0 {
                    eq.union(here, there);
                }
            }
        }
    }
    let rep = eq.representatives();
    let merged = labels.iter().map(|&l| rep[l as usize]).collect();
    canonicalize(&LabelImage::new(compact.width(), compact.height(), merged).expect("same dimensions"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, px: &[u8]) -> BinaryImage {
        BinaryImage::new(w, h, px.to_vec()).unwrap()
    }

    #[test]
    fn single_run() {
        let fp = first_pass(&img(3, 1, &[255, 255, 255]), &LabelerConfig::default()).unwrap();
        assert_eq!(fp.labels.labels(), &[1, 1, 1]);
        assert!(fp.equivalences.merges().is_empty());
        assert_eq!(fp.labels_issued, 1);
    }

    #[test]
    fn main_diagonal_stays_split_with_three_refs() {
        let fp = first_pass(&img(2, 2, &[255, 0, 0, 255]), &LabelerConfig::default()).unwrap();
        assert_eq!(fp.labels.labels(), &[1, 0, 0, 2]);
        assert!(fp.equivalences.merges().is_empty());
    }

    #[test]
    fn u_shape_records_merge() {
        let u = img(3, 3, &[255, 0, 255, 255, 0, 255, 255, 255, 255]);
        let fp = first_pass(&u, &LabelerConfig::default()).unwrap();
        // Hand trace: row 0 issues 1 and 2, row 2 sees left=1 and up-right=2.
        assert_eq!(fp.labels.labels(), &[1, 0, 2, 1, 0, 2, 1, 1, 1]);
        assert_eq!(fp.equivalences.merges(), &[(1, 2)]);
        let resolved = resolve(&fp);
        assert_eq!(resolved.labels(), &[1, 0, 1, 1, 0, 1, 1, 1, 1]);
        assert_eq!(resolved, flood_fill_oracle(&u, &Connectivity::Paper3.ref_set()));
    }

    #[test]
    fn resolve_without_equivalences_canonicalizes() {
        let fp = first_pass(&img(3, 1, &[255, 0, 255]), &LabelerConfig::default()).unwrap();
        assert_eq!(resolve(&fp), canonicalize(&fp.labels));
    }

    #[test]
    fn all_black_resolves_to_zero() {
        let black = BinaryImage::black(4, 3).unwrap();
        let fp = first_pass(&black, &LabelerConfig::default()).unwrap();
        assert!(resolve(&fp).labels().iter().all(|&l| l == 0));
        assert_eq!(fp.labels_issued, 0);
    }

    #[test]
    fn resolve_from_labels_matches_table_resolution() {
        let u = img(3, 3, &[255, 0, 255, 255, 0, 255, 255, 255, 255]);
        let cfg = LabelerConfig::default();
        let fp = first_pass(&u, &cfg).unwrap();
        assert_eq!(resolve_from_labels(&fp.labels, &cfg.ref_set), resolve(&fp));
    }

    #[test]
    fn overflow_policies() {
        // 300 isolated pixels on one row.
        let mask: Vec<bool> = (0..600).map(|i| i % 2 == 0).collect();
        let row = BinaryImage::from_mask(600, 1, &mask).unwrap();
        let err = first_pass(&row, &LabelerConfig::default()).unwrap_err();
        assert_eq!(err, LabelError::CapacityExceeded { bits: 8 });
        let sat = LabelerConfig::default().with_overflow(OverflowPolicy::Saturate);
        let fp = first_pass(&row, &sat).unwrap();
        assert!(fp.overflowed);
        assert_eq!(fp.labels_issued, 255);
        let wide = LabelerConfig::default().with_label_bits(LabelBits::Sixteen);
        let fp = first_pass(&row, &wide).unwrap();
        assert_eq!(fp.labels_issued, 300);
        assert!(!fp.overflowed);
    }
}
