//! Sets of 1-based states.

use std::fmt;

/// A subset of the state space `{1, ..., n}`.
///
/// States are 1-based everywhere in this crate. Membership is kept sorted and
/// deduplicated, so two sets with the same members compare equal. Range checks
/// against a concrete `n` happen where a set meets a model or hypergraph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct StateSet(Vec<u32>);

impl StateSet {
    pub fn empty() -> Self {
        StateSet(Vec::new())
    }

    /// Builds a set from arbitrary 1-based members (duplicates collapse).
    pub fn new(members: impl IntoIterator<Item = u32>) -> Self {
        let mut v: Vec<u32> = members.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        StateSet(v)
    }

    pub fn singleton(state: u32) -> Self {
        StateSet(vec![state])
    }

    /// The full state space `{1, ..., n}`.
    pub fn full(n: usize) -> Self {
        StateSet((1..=n as u32).collect())
    }

    /// Decodes a bitmask where bit `i` stands for state `i + 1`. Only usable
    /// for state spaces with at most 64 states.
    pub fn from_mask(mask: u64) -> Self {
        let mut v = Vec::with_capacity(mask.count_ones() as usize);
        let mut m = mask;
        while m != 0 {
            let bit = m.trailing_zeros();
            v.push(bit + 1);
            m &= m - 1;
        }
        StateSet(v)
    }

    /// Encodes the set as a bitmask (state `i` -> bit `i - 1`).
    ///
    /// Panics if any member exceeds 64; enumeration-based routines that rely
    /// on masks check `n` up front.
    pub fn to_mask(&self) -> u64 {
        let mut m = 0u64;
        for &s in &self.0 {
            assert!((1..=64).contains(&s), "state {s} out of mask range");
            m |= 1u64 << (s - 1);
        }
        m
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, state: u32) -> bool {
        self.0.binary_search(&state).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn is_subset_of(&self, other: &StateSet) -> bool {
        // Both sorted: single merge pass.
        let mut it = other.0.iter();
        'outer: for &s in &self.0 {
            for &t in it.by_ref() {
                if t == s {
                    continue 'outer;
                }
                if t > s {
                    return false;
                }
            }
            return false;
        }
        true
    }

    pub fn is_disjoint_from(&self, other: &StateSet) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        StateSet::new(self.iter().chain(other.iter()))
    }

    /// Complement within `{1, ..., n}`.
    pub fn complement(&self, n: usize) -> StateSet {
        StateSet((1..=n as u32).filter(|s| !self.contains(*s)).collect())
    }

    /// True when every member lies in `{1, ..., n}`.
    pub fn in_range(&self, n: usize) -> bool {
        self.0.iter().all(|&s| s >= 1 && s as usize <= n)
    }

    /// Indicator vector: `alpha` on members, `0` elsewhere.
    pub fn scaled_indicator(&self, n: usize, alpha: f64) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for &s in &self.0 {
            x[(s - 1) as usize] = alpha;
        }
        x
    }
}

impl fmt::Display for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, s) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<u32> for StateSet {
    fn from_iter<T: IntoIterator<Item = u32>>(iter: T) -> Self {
        StateSet::new(iter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_round_trip() {
        let s = StateSet::new([3, 1, 3, 7]);
        assert_eq!(s.as_slice(), &[1, 3, 7]);
        assert_eq!(StateSet::from_mask(s.to_mask()), s);
    }

    #[test]
    fn subset_and_disjoint() {
        let a = StateSet::new([1, 3]);
        let b = StateSet::new([1, 2, 3]);
        assert!(a.is_subset_of(&b));
        assert!(!b.is_subset_of(&a));
        assert!(a.is_disjoint_from(&StateSet::new([2, 4])));
        assert!(!a.is_disjoint_from(&StateSet::new([3])));
        assert!(StateSet::empty().is_subset_of(&a));
    }

    #[test]
    fn complement_within_range() {
        let a = StateSet::new([2]);
        assert_eq!(a.complement(3), StateSet::new([1, 3]));
        assert_eq!(StateSet::empty().complement(2), StateSet::full(2));
    }

    #[test]
    fn display_is_braced() {
        assert_eq!(StateSet::new([2, 1]).to_string(), "{1, 2}");
        assert_eq!(StateSet::empty().to_string(), "{}");
    }
}
