//! Fixed-width operator subsets.
//!
//! A block holds at most 64 operators, so a subset of one block's operators
//! fits in a single machine word. Bit `i` refers to the operator with dense
//! index `i` inside its block (dense indices are the ascending sort of the
//! block's operator ids).

/// A subset of one block's operators, as a 64-bit mask over dense indices.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct OpSet(u64);

impl OpSet {
    pub const EMPTY: OpSet = OpSet(0);

    /// The set containing the `n` lowest indices.
    pub fn full(n: usize) -> OpSet {
        debug_assert!(n <= 64);
        if n == 64 {
            OpSet(u64::MAX)
        } else {
            OpSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(index: usize) -> OpSet {
        debug_assert!(index < 64);
        OpSet(1u64 << index)
    }

    pub fn from_bits(bits: u64) -> OpSet {
        OpSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, index: usize) -> bool {
        index < 64 && self.0 & (1u64 << index) != 0
    }

    pub fn insert(&mut self, index: usize) {
        debug_assert!(index < 64);
        self.0 |= 1u64 << index;
    }

    pub fn remove(&mut self, index: usize) {
        self.0 &= !(1u64 << index);
    }

    pub fn union(self, other: OpSet) -> OpSet {
        OpSet(self.0 | other.0)
    }

    pub fn intersect(self, other: OpSet) -> OpSet {
        OpSet(self.0 & other.0)
    }

    /// Set difference `self - other`.
    pub fn minus(self, other: OpSet) -> OpSet {
        OpSet(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: OpSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersects(self, other: OpSet) -> bool {
        self.0 & other.0 != 0
    }

    /// Lowest set index, if any.
    pub fn min_index(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros() as usize)
        }
    }

    /// Iterate set indices in ascending order.
    pub fn iter(self) -> BitIter {
        BitIter(self.0)
    }
}

impl std::fmt::Debug for OpSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "OpSet{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<usize> for OpSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        let mut s = OpSet::EMPTY;
        for i in iter {
            s.insert(i);
        }
        s
    }
}

pub struct BitIter(u64);

impl Iterator for BitIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }
}
