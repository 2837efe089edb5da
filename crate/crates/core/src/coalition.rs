use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

/// Hard cap on the number of spans for exact coalition enumeration.
pub const MAX_SPANS: usize = 8;

/// A set of span indices, stored as a bitmask so equal sets compare equal.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coalition(u32);

impl Coalition {
    pub const fn empty() -> Self {
        Self(0)
    }

    /// The grand coalition `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        assert!(n < 32, "coalition width {n} too large");
        Self((1u32 << n) - 1)
    }

    pub fn from_bits(bits: u32) -> Self {
        Self(bits)
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I, n: usize) -> Result<Self> {
        let mut bits = 0u32;
        for k in members {
            if k >= n || k >= 32 {
                return Err(GameError::SpanOutOfRange { index: k, spans: n });
            }
            bits |= 1 << k;
        }
        Ok(Self(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, k: usize) -> bool {
        k < 32 && self.0 & (1 << k) != 0
    }

    #[must_use]
    pub fn with(self, k: usize) -> Self {
        Self(self.0 | (1 << k))
    }

    #[must_use]
    pub fn without(self, k: usize) -> Self {
        Self(self.0 & !(1 << k))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Whether every member lies in `0..n`.
    pub fn fits(self, n: usize) -> bool {
        n >= 32 || self.0 >> n == 0
    }

    /// Members in ascending order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |&k| bits & (1 << k) != 0)
    }

    /// Every coalition over `n` players, in bitmask order.
    pub fn all(n: usize) -> impl Iterator<Item = Self> {
        (0..1u32 << n).map(Self)
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_equality() {
        let a = Coalition::from_members([2, 0], 3).unwrap();
        let b = Coalition::empty().with(0).with(2);
        assert_eq!(a, b);
        assert_eq!(a.members().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn range_checks() {
        assert!(Coalition::from_members([3], 3).is_err());
        assert!(Coalition::full(3).fits(3));
        assert!(!Coalition::full(4).fits(3));
    }

    #[test]
    fn enumerates_power_set() {
        assert_eq!(Coalition::all(3).count(), 8);
        assert_eq!(Coalition::all(0).collect::<Vec<_>>(), vec![Coalition::empty()]);
    }
}
