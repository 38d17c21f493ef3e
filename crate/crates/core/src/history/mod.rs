// SPDX-License-Identifier: Apache-2.0

//! Self-stabilizing history collection.
//!
//! Every node keeps `d + 1` partial configurations, `d` being the diameter.
//! Slot `j` describes the system `j` rounds in the past. Each round a node
//! shifts its array one slot deeper, puts its own current state alone in slot
//! 0, sends the array to its neighbours and merges what it receives. After
//! exactly `d` rounds slot `d` holds the full, correct configuration `d` rounds
//! back, whatever the arrays initially contained.

mod aggregate;
mod rand_store;

pub use aggregate::{AggregateError, ArmHistory, ArmPair, TokenAggregate, TokenCount};
pub use rand_store::{weak_rand, RandStore};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{NodeId, Round};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HistoryError {
    #[error("history lengths differ: {mine} vs {theirs}")]
    LengthMismatch { mine: usize, theirs: usize },
    #[error("histories describe {mine} and {theirs} nodes")]
    NodeCountMismatch { mine: usize, theirs: usize },
    #[error("node {0} is out of range")]
    UnknownNode(NodeId),
}

/// Known states of some nodes at one intended round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialConfiguration<S> {
    pub round: Round,
    entries: Vec<Option<S>>,
}

impl<S: Clone> PartialConfiguration<S> {
    pub fn empty(n: usize, round: Round) -> Self {
        Self {
            round,
            entries: vec![None; n],
        }
    }

    pub fn singleton(n: usize, round: Round, id: NodeId, state: S) -> Self {
        let mut p = Self::empty(n, round);
        p.entries[id] = Some(state);
        p
    }

    pub fn full(round: Round, states: Vec<S>) -> Self {
        Self {
            round,
            entries: states.into_iter().map(Some).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, id: NodeId) -> Option<&S> {
        self.entries.get(id).and_then(Option::as_ref)
    }

    pub fn insert(&mut self, id: NodeId, state: S) -> Result<(), HistoryError> {
        let slot = self
            .entries
            .get_mut(id)
            .ok_or(HistoryError::UnknownNode(id))?;
        *slot = Some(state);
        Ok(())
    }

    pub fn remove(&mut self, id: NodeId) {
        if let Some(slot) = self.entries.get_mut(id) {
            *slot = None;
        }
    }

    pub fn known(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn is_full(&self) -> bool {
        self.entries.iter().all(Option::is_some)
    }

    /// All states, if every node's entry is present.
    pub fn states(&self) -> Option<Vec<S>> {
        self.entries.iter().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &S)> {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.as_ref().map(|s| (i, s)))
    }

    /// Adds every entry of `theirs` this one lacks; existing entries win.
    fn absorb(&mut self, theirs: &Self) {
        for (mine, other) in self.entries.iter_mut().zip(&theirs.entries) {
            if mine.is_none() {
                mine.clone_from(other);
            }
        }
    }
}

/// A node's view of the last `d + 1` configurations; slot `j` is `j` rounds
/// in the past.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryArray<S> {
    slots: Vec<PartialConfiguration<S>>,
}

/// One `(slot, node, state)` entry of the wire encoding.
pub type HistoryTriple<S> = (usize, NodeId, S);

impl<S: Clone> HistoryArray<S> {
    /// An array of `depth + 1` empty slots for `n` nodes.
    pub fn empty(n: usize, depth: usize) -> Self {
        Self {
            slots: (0..=depth)
                .map(|_| PartialConfiguration::empty(n, 0))
                .collect(),
        }
    }

    pub fn from_slots(slots: Vec<PartialConfiguration<S>>) -> Self {
        assert!(!slots.is_empty(), "a history holds at least one slot");
        Self { slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Deepest slot index, equal to the diameter the array was built for.
    pub fn depth(&self) -> usize {
        self.slots.len() - 1
    }

    pub fn n(&self) -> usize {
        self.slots[0].n()
    }

    pub fn slot(&self, j: usize) -> &PartialConfiguration<S> {
        &self.slots[j]
    }

    pub fn slot_mut(&mut self, j: usize) -> &mut PartialConfiguration<S> {
        &mut self.slots[j]
    }

    pub fn slots(&self) -> &[PartialConfiguration<S>] {
        &self.slots
    }

    /// Deepens every slot by one, drops the deepest, and starts slot 0 with
    /// only `self_state`. Intended rounds are restamped from the slot index.
    pub fn shift_insert(&mut self, self_state: S, self_id: NodeId, round: Round) {
        let n = self.n();
        // reuse the dropped slot's buffer
        let mut fresh = self
            .slots
            .pop()
            .filter(|s| s.n() == n)
            .unwrap_or_else(|| PartialConfiguration::empty(n, round));
        fresh.entries.fill(None);
        fresh.entries[self_id] = Some(self_state);
        self.slots.insert(0, fresh);
        for (j, slot) in self.slots.iter_mut().enumerate() {
            slot.round = round.saturating_sub(j as Round);
        }
    }

    /// Slot-wise union; on conflict the receiver's entry is kept.
    pub fn merge(&mut self, theirs: &Self) -> Result<(), HistoryError> {
        if self.len() != theirs.len() {
            return Err(HistoryError::LengthMismatch {
                mine: self.len(),
                theirs: theirs.len(),
            });
        }
        if self.n() != theirs.n() {
            return Err(HistoryError::NodeCountMismatch {
                mine: self.n(),
                theirs: theirs.n(),
            });
        }
        for (mine, other) in self.slots.iter_mut().zip(&theirs.slots) {
            mine.absorb(other);
        }
        Ok(())
    }

    /// `true` iff slot `d` is full and `is_safe` accepts it.
    pub fn hist_detect(&self, is_safe: impl Fn(&[S]) -> bool) -> bool {
        self.slots[self.depth()]
            .states()
            .is_some_and(|states| is_safe(&states))
    }

    /// Wire form: one `(slot, node, state)` triple per known entry.
    pub fn to_triples(&self) -> Vec<HistoryTriple<S>> {
        self.slots
            .iter()
            .enumerate()
            .flat_map(|(j, slot)| slot.iter().map(move |(id, s)| (j, id, s.clone())))
            .collect()
    }

    /// Rebuilds an array from wire triples. Out-of-range slots or nodes are
    /// dropped; the slot rounds are recomputed from `round`.
    pub fn from_triples(
        n: usize,
        depth: usize,
        round: Round,
        triples: &[HistoryTriple<S>],
    ) -> Self {
        let mut h = Self::empty(n, depth);
        for (j, slot) in h.slots.iter_mut().enumerate() {
            slot.round = round.saturating_sub(j as Round);
        }
        for (j, id, s) in triples {
            if *j <= depth && *id < n {
                h.slots[*j].entries[*id] = Some(s.clone());
            }
        }
        h
    }
}

/// Free-function form of [`HistoryArray::shift_insert`].
pub fn shift_insert<S: Clone>(
    mut history: HistoryArray<S>,
    self_state: S,
    self_id: NodeId,
    round: Round,
) -> HistoryArray<S> {
    history.shift_insert(self_state, self_id, round);
    history
}

/// Free-function form of [`HistoryArray::merge`].
pub fn merge<S: Clone>(
    mut mine: HistoryArray<S>,
    theirs: &HistoryArray<S>,
) -> Result<HistoryArray<S>, HistoryError> {
    mine.merge(theirs)?;
    Ok(mine)
}

pub fn hist_detect<S: Clone>(history: &HistoryArray<S>, is_safe: impl Fn(&[S]) -> bool) -> bool {
    history.hist_detect(is_safe)
}
