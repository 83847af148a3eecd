//! The per-pixel label generator rule.

use core::fmt;

use super::refset::{RefSet, MAX_REFS};

/// Width of the label output and of the Current Label register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LabelBits {
    #[default]
    Eight,
    Sixteen,
    ThirtyTwo,
}

impl LabelBits {
    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            8 => Some(LabelBits::Eight),
            16 => Some(LabelBits::Sixteen),
            32 => Some(LabelBits::ThirtyTwo),
            _ => None,
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            LabelBits::Eight => 8,
            LabelBits::Sixteen => 16,
            LabelBits::ThirtyTwo => 32,
        }
    }

    /// `2^bits - 1`.
    pub fn max_label(self) -> u32 {
        match self {
            LabelBits::Eight => u8::MAX as u32,
            LabelBits::Sixteen => u16::MAX as u32,
            LabelBits::ThirtyTwo => u32::MAX,
        }
    }
}

/// What to do when a fresh label would exceed the register width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OverflowPolicy {
    #[default]
    Error,
    /// Keep issuing the maximum label and raise the overflow flag.
    Saturate,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LabelerConfig {
    pub ref_set: RefSet,
    pub label_bits: LabelBits,
    pub overflow: OverflowPolicy,
}

impl LabelerConfig {
    pub fn new(ref_set: RefSet) -> Self {
        Self {
            ref_set,
            ..Self::default()
        }
    }

    pub fn with_label_bits(mut self, bits: LabelBits) -> Self {
        self.label_bits = bits;
        self
    }

    pub fn with_overflow(mut self, policy: OverflowPolicy) -> Self {
        self.overflow = policy;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LabelError {
    /// A fresh label was needed but the register is at `2^bits - 1`.
    CapacityExceeded { bits: u32 },
}

impl fmt::Display for LabelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelError::CapacityExceeded { bits } => {
                write!(f, "label capacity exceeded (2^{bits} \u{2212} 1)")
            }
        }
    }
}

impl core::error::Error for LabelError {}

/// Registers of the label generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LabelGeneratorState {
    /// Last freshly issued label; 0 before the first white pixel.
    pub current_label: u32,
    /// Set once a fresh label was requested at capacity under `Saturate`.
    pub overflowed: bool,
}

impl LabelGeneratorState {
    pub fn with_current(current_label: u32) -> Self {
        Self {
            current_label,
            overflowed: false,
        }
    }
}

/// Result of labeling one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelOutput {
    pub label: u32,
    /// A new label was issued (or the saturated maximum reissued).
    pub fresh: bool,
    distinct: [u32; MAX_REFS],
    n_distinct: usize,
}

impl PixelOutput {
    /// Distinct nonzero reference labels in reference order.
    pub fn distinct_refs(&self) -> &[u32] {
        &self.distinct[..self.n_distinct]
    }

    /// Every pair of distinct nonzero reference labels.
    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let refs = self.distinct_refs();
        (0..refs.len()).flat_map(move |i| ((i + 1)..refs.len()).map(move |j| (refs[i], refs[j])))
    }
}

/// Applies the label generator rule to one pixel.
///
/// `refs` holds the labels at `cfg.ref_set` positions in order, 0 for
/// off-image neighbors. A black pixel yields 0. A white pixel with all-zero
/// references takes `current_label + 1`; otherwise it takes the smallest
/// nonzero reference, and all distinct nonzero references become
/// equivalence pairs.
///
/// On [`LabelError`] the state is left untouched.
pub fn label_pixel(
    new_pixel: u8,
    refs: &[u32],
    state: &mut LabelGeneratorState,
    cfg: &LabelerConfig,
) -> Result<PixelOutput, LabelError> {
    debug_assert_eq!(refs.len(), cfg.ref_set.len(), "one label per reference offset");
    let mut out = PixelOutput {
        label: 0,
        fresh: false,
        distinct: [0; MAX_REFS],
        n_distinct: 0,
    };
    if new_pixel == 0 {
        return Ok(out);
    }

    for &r in refs {
        if r != 0 && !out.distinct[..out.n_distinct].contains(&r) {
            out.distinct[out.n_distinct] = r;
            out.n_distinct += 1;
        }
    }

    if let Some(&min) = out.distinct_refs().iter().min() {
        out.label = min;
        return Ok(out);
    }

    let max = cfg.label_bits.max_label();
    out.fresh = true;
    if state.current_label >= max {
        match cfg.overflow {
            OverflowPolicy::Error => {
                return Err(LabelError::CapacityExceeded {
                    bits: cfg.label_bits.bits(),
                })
            }
            OverflowPolicy::Saturate => {
                state.current_label = max;
                state.overflowed = true;
                out.label = max;
            }
        }
    } else {
        state.current_label += 1;
        out.label = state.current_label;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn cfg() -> LabelerConfig {
        LabelerConfig::default()
    }

    #[test]
    fn black_pixel_outputs_zero() {
        let mut st = LabelGeneratorState::with_current(5);
        let out = label_pixel(0, &[9, 9, 9], &mut st, &cfg()).unwrap();
        assert_eq!(out.label, 0);
        assert_eq!(st.current_label, 5);
        assert_eq!(out.pairs().count(), 0);
    }

    #[test]
    fn isolated_white_pixel_increments() {
        let mut st = LabelGeneratorState::with_current(5);
        let out = label_pixel(255, &[0, 0, 0], &mut st, &cfg()).unwrap();
        assert_eq!((out.label, st.current_label, out.fresh), (6, 6, true));
    }

    #[test]
    fn touching_pixel_takes_minimum() {
        let mut st = LabelGeneratorState::with_current(5);
        let out = label_pixel(255, &[0, 3, 2], &mut st, &cfg()).unwrap();
        assert_eq!(out.label, 2);
        assert_eq!(st.current_label, 5);
        assert_eq!(out.pairs().collect::<Vec<_>>(), [(3, 2)]);
    }

    #[test]
    fn repeated_refs_form_no_pair() {
        let mut st = LabelGeneratorState::with_current(4);
        let out = label_pixel(1, &[4, 0, 4], &mut st, &cfg()).unwrap();
        assert_eq!(out.label, 4);
        assert_eq!(out.pairs().count(), 0);
    }

    #[test]
    fn saturate_at_capacity() {
        let cfg = cfg().with_overflow(OverflowPolicy::Saturate);
        let mut st = LabelGeneratorState::with_current(255);
        let out = label_pixel(255, &[0, 0, 0], &mut st, &cfg).unwrap();
        assert_eq!(out.label, 255);
        assert_eq!(st.current_label, 255);
        assert!(st.overflowed);
    }

    #[test]
    fn error_at_capacity_leaves_state() {
        let mut st = LabelGeneratorState::with_current(255);
        let err = label_pixel(255, &[0, 0, 0], &mut st, &cfg()).unwrap_err();
        assert_eq!(err, LabelError::CapacityExceeded { bits: 8 });
        assert_eq!(
            alloc::format!("{err}"),
            "label capacity exceeded (2^8 \u{2212} 1)"
        );
        assert_eq!(st, LabelGeneratorState::with_current(255));
    }

    #[test]
    fn label_bits_bounds() {
        assert_eq!(LabelBits::Sixteen.max_label(), 65535);
        assert_eq!(LabelBits::from_bits(32), Some(LabelBits::ThirtyTwo));
        assert_eq!(LabelBits::from_bits(12), None);
    }
}
