// SPDX-License-Identifier: Apache-2.0

//! Random words collected alongside the history.
//!
//! A node whose detector reports `false` draws one word for every node of
//! the system and stores the batch in slot 0 of its store. The store is
//! shifted and merged exactly like a [`HistoryArray`](super::HistoryArray),
//! so after `d` rounds every node holds every generator's batch from `d`
//! rounds back, and node `p` XORs the words addressed to it.

use serde::{Deserialize, Serialize};

use crate::engine::NodeId;
use crate::randomness::{xor_combine, RandWord};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandStore {
    n: usize,
    depth: usize,
    /// `batches[j * n + g]`: generator `g`'s batch from `j` rounds ago, one
    /// word per node.
    batches: Vec<Option<Vec<RandWord>>>,
}

impl RandStore {
    pub fn empty(n: usize, depth: usize) -> Self {
        Self {
            n,
            depth,
            batches: vec![None; (depth + 1) * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn slot(&self, depth: usize) -> &[Option<Vec<RandWord>>] {
        &self.batches[depth * self.n..(depth + 1) * self.n]
    }

    pub fn batch(&self, depth: usize, generator: NodeId) -> Option<&[RandWord]> {
        if depth > self.depth || generator >= self.n {
            return None;
        }
        self.slot(depth)[generator].as_deref()
    }

    /// Stores `batch` as `generator`'s words at `depth`. Batches of the wrong
    /// length are rejected.
    pub fn put(&mut self, depth: usize, generator: NodeId, batch: Vec<RandWord>) -> bool {
        if batch.len() != self.n || generator >= self.n || depth > self.depth {
            return false;
        }
        self.batches[depth * self.n + generator] = Some(batch);
        true
    }

    /// Shifts one slot deeper; slot 0 holds only the owner's batch, if it
    /// drew one this round.
    pub fn shift_insert(&mut self, owner: NodeId, batch: Option<Vec<RandWord>>) {
        let n = self.n;
        self.batches.truncate(self.depth * n);
        self.batches.splice(0..0, std::iter::repeat_n(None, n));
        if let Some(b) = batch.filter(|b| b.len() == n) {
            self.batches[owner] = Some(b);
        }
    }

    /// Slot-wise union keeping the receiver's batch on conflict. Stores of a
    /// different shape are ignored.
    pub fn merge(&mut self, theirs: &RandStore) {
        if theirs.n != self.n || theirs.depth != self.depth {
            return;
        }
        for (m, o) in self.batches.iter_mut().zip(&theirs.batches) {
            if m.is_none() {
                if let Some(batch) = o.as_ref().filter(|b| b.len() == self.n) {
                    *m = Some(batch.clone());
                }
            }
        }
    }

    /// Whether any generator left a batch at the deepest slot.
    pub fn has_words(&self) -> bool {
        self.slot(self.depth).iter().any(Option::is_some)
    }
}

/// XOR of every generator's depth-`d` word addressed to `p`; generators
/// without a batch contribute the zero word.
pub fn weak_rand(store: &RandStore, p: NodeId) -> RandWord {
    let words: Vec<RandWord> = store
        .slot(store.depth)
        .iter()
        .filter_map(|b| b.as_ref().and_then(|b| b.get(p)).copied())
        .collect();
    xor_combine(&words)
}
