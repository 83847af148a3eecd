use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

/// Most reference inputs a label generator may have.
pub const MAX_REFS: usize = 8;

/// Position of a reference neighbor relative to the current pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Offset {
    pub dx: i32,
    pub dy: i32,
}

impl Offset {
    pub const LEFT: Offset = Offset { dx: -1, dy: 0 };
    pub const UP_LEFT: Offset = Offset { dx: -1, dy: -1 };
    pub const UP: Offset = Offset { dx: 0, dy: -1 };
    pub const UP_RIGHT: Offset = Offset { dx: 1, dy: -1 };

    pub const fn new(dx: i32, dy: i32) -> Self {
        Self { dx, dy }
    }

    /// True when the neighbor is scanned before the current pixel and lies
    /// on the current or previous line.
    pub fn precedes(&self) -> bool {
        self.dy == -1 || (self.dy == 0 && self.dx < 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefSetError {
    /// The offset is not on the previous line or left on the current line.
    NotPreceding(Offset),
    Duplicate(Offset),
    TooMany(usize),
}

impl fmt::Display for RefSetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefSetError::NotPreceding(o) => write!(
                f,
                "offset ({}, {}) does not precede the current pixel",
                o.dx, o.dy
            ),
            RefSetError::Duplicate(o) => write!(f, "offset ({}, {}) listed twice", o.dx, o.dy),
            RefSetError::TooMany(n) => write!(f, "{n} offsets exceeds the limit of {MAX_REFS}"),
        }
    }
}

impl core::error::Error for RefSetError {}

/// Ordered reference neighbors feeding the label generator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RefSet {
    offsets: Vec<Offset>,
}

impl RefSet {
    pub fn new(offsets: Vec<Offset>) -> Result<Self, RefSetError> {
        if offsets.len() > MAX_REFS {
            return Err(RefSetError::TooMany(offsets.len()));
        }
        for (i, o) in offsets.iter().enumerate() {
            if !o.precedes() {
                return Err(RefSetError::NotPreceding(*o));
            }
            if offsets[..i].contains(o) {
                return Err(RefSetError::Duplicate(*o));
            }
        }
        Ok(Self { offsets })
    }

    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Largest `-dx` among current-line offsets: how many recent outputs of
    /// the current line must be kept.
    pub fn current_line_depth(&self) -> usize {
        self.offsets
            .iter()
            .filter(|o| o.dy == 0)
            .map(|o| (-o.dx) as usize)
            .max()
            .unwrap_or(0)
    }
}

impl Default for RefSet {
    fn default() -> Self {
        Connectivity::Paper3.ref_set()
    }
}

/// Named reference-set presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Connectivity {
    /// Three references: left, up, up-right.
    #[default]
    Paper3,
    /// Left and up.
    Conn4,
    /// Left, up-left, up, up-right.
    Conn8,
}

impl Connectivity {
    pub const ALL: [Connectivity; 3] = [Connectivity::Paper3, Connectivity::Conn4, Connectivity::Conn8];

    pub fn ref_set(self) -> RefSet {
        let offsets = match self {
            Connectivity::Paper3 => alloc::vec![Offset::LEFT, Offset::UP, Offset::UP_RIGHT],
            Connectivity::Conn4 => alloc::vec![Offset::LEFT, Offset::UP],
            Connectivity::Conn8 => {
                alloc::vec![Offset::LEFT, Offset::UP_LEFT, Offset::UP, Offset::UP_RIGHT]
            }
        };
        RefSet { offsets }
    }

    pub fn name(self) -> &'static str {
        match self {
            Connectivity::Paper3 => "paper3",
            Connectivity::Conn4 => "conn4",
            Connectivity::Conn8 => "conn8",
        }
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Connectivity {
    type Err = UnknownConnectivity;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Connectivity::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or(UnknownConnectivity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownConnectivity;

impl fmt::Display for UnknownConnectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("expected one of paper3, conn4, conn8")
    }
}

impl core::error::Error for UnknownConnectivity {}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn presets_are_valid() {
        for c in Connectivity::ALL {
            let rs = c.ref_set();
            assert_eq!(RefSet::new(rs.offsets().to_vec()).unwrap(), rs);
            assert_eq!(c.name().parse::<Connectivity>(), Ok(c));
        }
        assert_eq!(Connectivity::Paper3.ref_set().len(), 3);
    }

    #[test]
    fn rejects_future_and_duplicate_offsets() {
        assert_eq!(
            RefSet::new(vec![Offset::new(1, 0)]),
            Err(RefSetError::NotPreceding(Offset::new(1, 0)))
        );
        assert_eq!(
            RefSet::new(vec![Offset::new(0, 1)]),
            Err(RefSetError::NotPreceding(Offset::new(0, 1)))
        );
        assert_eq!(
            RefSet::new(vec![Offset::LEFT, Offset::LEFT]),
            Err(RefSetError::Duplicate(Offset::LEFT))
        );
    }

    #[test]
    fn current_line_depth() {
        assert_eq!(Connectivity::Paper3.ref_set().current_line_depth(), 1);
        let rs = RefSet::new(vec![Offset::UP, Offset::new(-3, 0)]).unwrap();
        assert_eq!(rs.current_line_depth(), 3);
        assert_eq!(RefSet::new(vec![Offset::UP]).unwrap().current_line_depth(), 0);
    }
}
