use alloc::vec;
use alloc::vec::Vec;

/// Union-find over provisional labels `1..=len`.
///
/// Roots are always the smallest label of their class, so every parent
/// pointer satisfies `parent[l] <= l`. [`representatives`] relies on that to
/// flatten the forest in one ascending sweep without mutation.
///
/// [`representatives`]: EquivalenceSet::representatives
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct EquivalenceSet {
    // Index 0 is the background slot and is never linked.
    parent: Vec<u32>,
    // Pairs whose union merged two previously distinct classes, in order.
    merges: Vec<(u32, u32)>,
}

impl EquivalenceSet {
    pub fn new() -> Self {
        Self {
            parent: vec![0],
            merges: Vec::new(),
        }
    }

    /// Creates singleton classes for every label up to `label`.
    pub fn grow_to(&mut self, label: u32) {
        let next = self.parent.len() as u32;
        if label >= next {
            self.parent.extend(next..=label);
        }
    }

    /// Highest label known to the structure.
    pub fn len(&self) -> u32 {
        self.parent.len() as u32 - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Representative (smallest member) of the class holding `label`.
    ///
    /// # Panics
    ///
    /// Panics on label 0 or on a label that was never issued.
    pub fn find(&mut self, label: u32) -> u32 {
        assert!(label != 0, "background never enters the equivalence set");
        let mut x = label as usize;
        while self.parent[x] as usize != x {
            let grand = self.parent[self.parent[x] as usize];
            self.parent[x] = grand;
            x = grand as usize;
        }
        x as u32
    }

    /// Merges the classes of `a` and `b`. Returns true when they were
    /// distinct.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        self.merges.push((a, b));
        true
    }

    pub fn equivalent(&mut self, a: u32, b: u32) -> bool {
        self.find(a) == self.find(b)
    }

    /// The pairs that actually merged two classes, in recording order.
    pub fn merges(&self) -> &[(u32, u32)] {
        &self.merges
    }

    /// Lookup table mapping each label (and 0) to its class representative.
    pub fn representatives(&self) -> Vec<u32> {
        let mut rep = vec![0u32; self.parent.len()];
        for l in 1..self.parent.len() {
            let p = self.parent[l] as usize;
            rep[l] = if p == l { l as u32 } else { rep[p] };
        }
        rep
    }
}
