//! Compact vertex sets. Stored as bit blocks internally; iteration and
//! serialization always follow ascending vertex order, so identical sets
//! compare and print identically.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VSet {
    n: usize,
    blocks: Vec<u64>,
}

impl VSet {
    pub fn empty(n: usize) -> Self {
        VSet {
            n,
            blocks: vec![0; n.div_ceil(64)],
        }
    }

    pub fn full(n: usize) -> Self {
        let mut s = Self::empty(n);
        for v in 0..n {
            s.insert(v);
        }
        s
    }

    pub fn from_iter<I: IntoIterator<Item = usize>>(n: usize, it: I) -> Self {
        let mut s = Self::empty(n);
        for v in it {
            s.insert(v);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, v: usize) {
        debug_assert!(v < self.n);
        self.blocks[v / 64] |= 1u64 << (v % 64);
    }

    pub fn remove(&mut self, v: usize) {
        self.blocks[v / 64] &= !(1u64 << (v % 64));
    }

    pub fn contains(&self, v: usize) -> bool {
        v < self.n && self.blocks[v / 64] >> (v % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.iter().all(|&b| b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&v| self.contains(v))
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn union(&self, other: &VSet) -> VSet {
        self.zip(other, |a, b| a | b)
    }

    pub fn intersect(&self, other: &VSet) -> VSet {
        self.zip(other, |a, b| a & b)
    }

    pub fn diff(&self, other: &VSet) -> VSet {
        self.zip(other, |a, b| a & !b)
    }

    pub fn complement(&self) -> VSet {
        let mut out = Self::full(self.n);
        for (o, s) in out.blocks.iter_mut().zip(&self.blocks) {
            *o &= !s;
        }
        out
    }

    pub fn is_subset(&self, other: &VSet) -> bool {
        self.blocks.iter().zip(&other.blocks).all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &VSet) -> bool {
        self.blocks.iter().zip(&other.blocks).any(|(a, b)| a & b != 0)
    }

    /// True when the two sets cross: both differences and the intersection
    /// are nonempty.
    pub fn crosses(&self, other: &VSet) -> bool {
        self.intersects(other)
            && !self.is_subset(other)
            && !other.is_subset(self)
    }

    /// Laminar compatibility: nested one way or the other, or disjoint.
    pub fn laminar_with(&self, other: &VSet) -> bool {
        !self.crosses(other)
    }

    fn zip(&self, other: &VSet, f: impl Fn(u64, u64) -> u64) -> VSet {
        debug_assert_eq!(self.n, other.n);
        VSet {
            n: self.n,
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl fmt::Debug for VSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}
