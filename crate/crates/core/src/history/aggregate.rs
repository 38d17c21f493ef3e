// SPDX-License-Identifier: Apache-2.0

//! Constant-size history slots for token counting on a ring.
//!
//! Instead of full partial configurations, each slot holds two arcs around
//! the owner: a left arm `[i - j, i]` and a right arm `[i, i + j]` at depth
//! `j`. An arm records how many tokens (capped at two) sit on the adjacent
//! pairs it covers, plus its two end bits so neighbouring arms can be
//! stitched. At depth `d = (n - 1) / 2` the two arms cover the whole ring and
//! their union answers "exactly one token?".

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::NodeId;

/// Number of tokens, saturating at two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TokenCount {
    Zero,
    One,
    Many,
}

impl TokenCount {
    pub fn from_count(count: usize) -> Self {
        match count {
            0 => Self::Zero,
            1 => Self::One,
            _ => Self::Many,
        }
    }

    pub fn saturating_add(self, other: Self) -> Self {
        Self::from_count(self as usize + other as usize)
    }

    fn bump(self, token: bool) -> Self {
        if token {
            self.saturating_add(Self::One)
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("aggregates over rings of {0} and {1} nodes")]
    RingMismatch(usize, usize),
    #[error("arcs are neither adjacent nor nested")]
    Disjoint,
    #[error("arcs overlap in more than one node")]
    Overlap,
}

/// Capped token count over a contiguous arc of a ring.
///
/// A token at node `k` is the pair `(k - 1, k)` holding equal bits; an arc
/// `[s, s + len - 1]` covers the pairs strictly inside it. An arc spanning
/// every node also covers the wrap-around pair and is then `closed`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenAggregate {
    n: usize,
    start: NodeId,
    len: usize,
    count: TokenCount,
    start_bit: bool,
    end_bit: bool,
    closed: bool,
}

impl TokenAggregate {
    pub fn single(n: usize, id: NodeId, bit: bool) -> Self {
        Self {
            n,
            start: id % n,
            len: 1,
            count: TokenCount::Zero,
            start_bit: bit,
            end_bit: bit,
            closed: false,
        }
        .close_if_full()
    }

    /// Aggregate of `bits` over `[start, start + len - 1]`, computed directly.
    pub fn over(bits: &[bool], start: NodeId, len: usize) -> Self {
        let n = bits.len();
        assert!(len >= 1 && len <= n, "arc length {len} on a ring of {n}");
        let at = |k: usize| bits[(start + k) % n];
        let inner = (1..len).filter(|&k| at(k) == at(k - 1)).count();
        Self {
            n,
            start: start % n,
            len,
            count: TokenCount::from_count(inner),
            start_bit: at(0),
            end_bit: at(len - 1),
            closed: false,
        }
        .close_if_full()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn start(&self) -> NodeId {
        self.start
    }

    pub fn end(&self) -> NodeId {
        (self.start + self.len - 1) % self.n
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn count(&self) -> TokenCount {
        self.count
    }

    pub fn start_bit(&self) -> bool {
        self.start_bit
    }

    pub fn end_bit(&self) -> bool {
        self.end_bit
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    fn close_if_full(mut self) -> Self {
        if self.len == self.n && !self.closed {
            self.count = self.count.bump(self.end_bit == self.start_bit);
            self.closed = true;
        }
        self
    }

    fn offset(&self, id: NodeId) -> usize {
        (id + self.n - self.start) % self.n
    }

    fn contains(&self, other: &Self) -> bool {
        self.len == self.n || self.offset(other.start) + other.len <= self.len
    }

    /// `a` followed by `b`, sharing a's end node or starting right after it.
    fn join(a: &Self, b: &Self) -> Option<Self> {
        let n = a.n;
        let a_end = a.end();
        if b.start == a_end {
            let total = a.len + b.len - 1;
            if total == n + 1 && b.end() == a.start {
                // Both ends shared: every pair is already covered. End bits
                // are never read once an arc is closed.
                return Some(Self {
                    n,
                    start: a.start,
                    len: n,
                    count: a.count.saturating_add(b.count),
                    start_bit: a.start_bit,
                    end_bit: b.end_bit,
                    closed: true,
                });
            }
            if total > n {
                return None;
            }
            return Some(
                Self {
                    n,
                    start: a.start,
                    len: total,
                    count: a.count.saturating_add(b.count),
                    start_bit: a.start_bit,
                    end_bit: b.end_bit,
                    closed: false,
                }
                .close_if_full(),
            );
        }
        if b.start == (a_end + 1) % n {
            let total = a.len + b.len;
            if total > n {
                return None;
            }
            let stitched = a
                .count
                .saturating_add(b.count)
                .bump(a.end_bit == b.start_bit);
            return Some(
                Self {
                    n,
                    start: a.start,
                    len: total,
                    count: stitched,
                    start_bit: a.start_bit,
                    end_bit: b.end_bit,
                    closed: false,
                }
                .close_if_full(),
            );
        }
        None
    }
}

/// Union of two arcs that are nested, adjacent, or share exactly one end
/// node. Counts are added (saturating) plus a token at any stitch pair.
pub fn agg_merge(a: &TokenAggregate, b: &TokenAggregate) -> Result<TokenAggregate, AggregateError> {
    if a.n != b.n {
        return Err(AggregateError::RingMismatch(a.n, b.n));
    }
    if a.contains(b) {
        return Ok(*a);
    }
    if b.contains(a) {
        return Ok(*b);
    }
    if let Some(m) = TokenAggregate::join(a, b).or_else(|| TokenAggregate::join(b, a)) {
        return Ok(m);
    }
    // Do the node sets intersect at all?
    let touches = (0..b.len).any(|k| a.offset((b.start + k) % a.n) < a.len);
    if touches {
        Err(AggregateError::Overlap)
    } else {
        Err(AggregateError::Disjoint)
    }
}

/// Left and right arms of one history slot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmPair {
    pub left: Option<TokenAggregate>,
    pub right: Option<TokenAggregate>,
}

impl ArmPair {
    /// The owner's bit at this slot's round, read off either arm.
    fn own_bit(&self) -> Option<bool> {
        self.left
            .map(|l| l.end_bit)
            .or_else(|| self.right.map(|r| r.start_bit))
    }
}

/// Aggregated history: `d + 1` arm pairs, slot `j` describing `j` rounds ago.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmHistory {
    slots: Vec<ArmPair>,
}

impl ArmHistory {
    pub fn empty(depth: usize) -> Self {
        Self {
            slots: vec![ArmPair::default(); depth + 1],
        }
    }

    pub fn from_slots(slots: Vec<ArmPair>) -> Self {
        assert!(!slots.is_empty());
        Self { slots }
    }

    pub fn depth(&self) -> usize {
        self.slots.len() - 1
    }

    pub fn slot(&self, j: usize) -> &ArmPair {
        &self.slots[j]
    }

    pub fn slots(&self) -> &[ArmPair] {
        &self.slots
    }

    /// Drops the deepest slot and starts slot 0 with the owner's bit.
    pub fn shift_insert(&mut self, n: usize, id: NodeId, bit: bool) {
        let own = TokenAggregate::single(n, id, bit);
        self.slots.pop();
        self.slots.insert(
            0,
            ArmPair {
                left: Some(own),
                right: Some(own),
            },
        );
    }

    /// Rebuilds slots `1..=d` of a freshly shifted history from the arrays
    /// the left and right neighbours sent this round.
    ///
    /// The new left arm at depth `j` is the left neighbour's left arm at
    /// depth `j` (which ends at `id - 1`) extended by the owner's bit from
    /// its own depth-`j` slot; the right arm mirrors this. Arms of the wrong
    /// shape are dropped, so corrupted slots drain out within `d` rounds.
    pub fn extend(
        &mut self,
        n: usize,
        id: NodeId,
        from_left: Option<&ArmHistory>,
        from_right: Option<&ArmHistory>,
    ) {
        let depth = self.depth();
        for j in 1..=depth {
            let own_bit = self.slots[j].own_bit();
            let arm = |nbr: Option<&ArmHistory>, left: bool| -> Option<TokenAggregate> {
                let bit = own_bit?;
                let theirs = nbr?.slots.get(j)?;
                let theirs = if left { theirs.left? } else { theirs.right? };
                let own = TokenAggregate::single(n, id, bit);
                let merged = if left {
                    agg_merge(&theirs, &own)
                } else {
                    agg_merge(&own, &theirs)
                }
                .ok()?;
                let want_start = if left { (id + n - j) % n } else { id };
                (merged.n == n && merged.len == (j + 1).min(n) && merged.start == want_start)
                    .then_some(merged)
            };
            let left = arm(from_left, true);
            let right = arm(from_right, false);
            self.slots[j] = ArmPair { left, right };
        }
    }

    /// `true` iff the depth-`d` arms cover the ring and see exactly one token.
    pub fn detect(&self) -> bool {
        let deepest = &self.slots[self.depth()];
        match (deepest.left, deepest.right) {
            (Some(l), Some(r)) => {
                matches!(agg_merge(&l, &r), Ok(m) if m.closed && m.count == TokenCount::One)
            }
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herman::{tokens, RingBits};

    fn all_bits(n: usize) -> impl Iterator<Item = Vec<bool>> {
        (0u32..1 << n).map(move |m| (0..n).map(|i| m >> i & 1 == 1).collect())
    }

    /// Token count over the pairs strictly inside the arc, computed from the
    /// ring's token set rather than the aggregate code.
    fn oracle_count(bits: &[bool], start: usize, len: usize) -> TokenCount {
        let n = bits.len();
        let ring = RingBits::new(bits.to_vec()).unwrap();
        let toks = tokens(&ring);
        if len == n {
            return TokenCount::from_count(toks.len());
        }
        TokenCount::from_count(
            (1..len)
                .filter(|k| toks.contains(&((start + k) % n)))
                .count(),
        )
    }

    #[test]
    fn saturating_counts() {
        assert_eq!(
            TokenCount::Many.saturating_add(TokenCount::Zero),
            TokenCount::Many
        );
        assert_eq!(
            TokenCount::One.saturating_add(TokenCount::One),
            TokenCount::Many
        );
        assert_eq!(
            TokenCount::Zero.saturating_add(TokenCount::One),
            TokenCount::One
        );
    }

    #[test]
    fn stitch_example_on_five_ring() {
        // bits 0,0,1,0,1: token at 1 only; pair (4, 0) unequal.
        let bits = [false, false, true, false, true];
        let a = TokenAggregate::over(&bits, 0, 3);
        let b = TokenAggregate::over(&bits, 2, 3);
        assert_eq!(a.count(), TokenCount::One);
        assert_eq!(b.count(), TokenCount::Zero);
        let m = agg_merge(&a, &b).unwrap();
        assert_eq!((m.start(), m.len(), m.count()), (0, 5, TokenCount::One));
        assert!(m.is_closed());
    }

    #[test]
    fn many_absorbs() {
        let bits = [true; 7];
        let a = TokenAggregate::over(&bits, 0, 4);
        assert_eq!(a.count(), TokenCount::Many);
        let b = TokenAggregate::over(&[true, false, true, false, true, false, true], 4, 2);
        assert_eq!(agg_merge(&a, &b).unwrap().count(), TokenCount::Many);
    }

    #[test]
    fn disjoint_and_overlapping_are_refused() {
        let bits = [false; 7];
        let a = TokenAggregate::over(&bits, 0, 2);
        let b = TokenAggregate::over(&bits, 4, 2);
        assert_eq!(agg_merge(&a, &b), Err(AggregateError::Disjoint));
        let c = TokenAggregate::over(&bits, 1, 3);
        assert_eq!(agg_merge(&a, &c).unwrap().len(), 4);
        let d = TokenAggregate::over(&bits, 0, 4);
        let e = TokenAggregate::over(&bits, 2, 4);
        assert_eq!(agg_merge(&d, &e), Err(AggregateError::Overlap));
    }

    /// Every way of covering the ring with two mergeable arcs agrees with the
    /// direct token count, for every bit assignment of n = 3, 5, 7.
    #[test]
    fn whole_ring_merge_matches_direct_count() {
        for n in [3usize, 5, 7] {
            for bits in all_bits(n) {
                let truth = oracle_count(&bits, 0, n);
                for start in 0..n {
                    for la in 1..=n {
                        // shared end node and plain adjacency
                        for (sb, lb) in [
                            ((start + la - 1) % n, n + 1 - la),
                            ((start + la) % n, n - la),
                        ] {
                            if lb == 0 || lb > n {
                                continue;
                            }
                            let a = TokenAggregate::over(&bits, start, la);
                            let b = TokenAggregate::over(&bits, sb, lb);
                            let m = agg_merge(&a, &b).unwrap();
                            assert!(m.is_closed(), "{bits:?} {start} {la} {sb} {lb}");
                            assert_eq!(m.count(), truth, "{bits:?} {start} {la} {sb} {lb}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn partial_merges_match_direct_count() {
        let n = 7;
        for bits in all_bits(n) {
            for start in 0..n {
                for la in 1..n {
                    for lb in 1..n - la {
                        let a = TokenAggregate::over(&bits, start, la);
                        let b = TokenAggregate::over(&bits, (start + la) % n, lb);
                        let m = agg_merge(&a, &b).unwrap();
                        assert_eq!(m.count(), oracle_count(&bits, start, la + lb));
                        assert_eq!(m.len(), la + lb);
                    }
                }
            }
        }
    }

    #[test]
    fn arms_detect_after_depth_rounds() {
        // Drive ArmHistory by hand on a static 5-ring configuration.
        let bits = [false, true, false, true, true];
        let n = 5;
        let depth = 2;
        let mut arms: Vec<ArmHistory> = (0..n).map(|_| ArmHistory::empty(depth)).collect();
        for round in 0..=depth {
            for (i, a) in arms.iter_mut().enumerate() {
                a.shift_insert(n, i, bits[i]);
            }
            let sent = arms.clone();
            for (i, a) in arms.iter_mut().enumerate() {
                a.extend(n, i, Some(&sent[(i + n - 1) % n]), Some(&sent[(i + 1) % n]));
            }
            let all = arms.iter().all(ArmHistory::detect);
            assert_eq!(all, round >= depth, "round {round}");
        }
    }
}
