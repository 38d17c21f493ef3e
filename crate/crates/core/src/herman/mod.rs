// SPDX-License-Identifier: Apache-2.0

//! Herman's token circulation on an odd ring.
//!
//! Every node holds one bit. Node `i` holds a token when its bit equals its
//! left neighbour's. Each round a node without a token copies its left
//! neighbour's bit and a token holder takes a coin flip. On an odd ring the
//! number of tokens is always odd and never grows; once a single token is
//! left it either stays put or moves to `i + 1`, whatever the coins say.

mod adaptive;

pub use adaptive::{
    AdaptiveHerman, AdaptiveNode, BitSupply, DetectorKind, HermanMsg, InputPolicy, Verdicts,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Inbox, NodeCtx, NodeId, Protocol, ProtocolFault};
use crate::randomness::{draw, BitSource, RandInput, RandMeter};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HermanError {
    #[error("ring of {0} nodes: Herman's algorithm needs an odd ring of at least 3")]
    BadRing(usize),
    #[error("no coin for token holder {0}")]
    MissingCoin(NodeId),
    #[error("configuration holds {0} tokens, expected exactly one")]
    NotSafe(usize),
    #[error("rings of different sizes")]
    SizeMismatch,
}

/// The bits of an odd ring, node `i` at index `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingBits {
    bits: Vec<bool>,
}

impl RingBits {
    pub fn new(bits: Vec<bool>) -> Result<Self, HermanError> {
        if bits.len() < 3 || bits.len().is_multiple_of(2) {
            return Err(HermanError::BadRing(bits.len()));
        }
        Ok(Self { bits })
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse(s: &str) -> Result<Self, HermanError> {
        let bits: Vec<bool> = s
            .chars()
            .filter(|c| *c == '0' || *c == '1')
            .map(|c| c == '1')
            .collect();
        Self::new(bits)
    }

    /// All `2^n` rings of size `n`.
    pub fn all(n: usize) -> impl Iterator<Item = RingBits> {
        assert!(n < 32);
        (0u32..1 << n)
            .filter_map(move |m| Self::new((0..n).map(|i| m >> i & 1 == 1).collect()).ok())
    }

    pub fn n(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }
}

impl std::fmt::Display for RingBits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.bits {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn token_positions(bits: &[bool]) -> impl Iterator<Item = NodeId> + '_ {
    let n = bits.len();
    (0..n).filter(move |&i| bits[i] == bits[(i + n - 1) % n])
}

/// Nodes holding a token: `{ i : bits[i] == bits[i - 1] }`.
pub fn tokens(state: &RingBits) -> Vec<NodeId> {
    token_positions(&state.bits).collect()
}

pub fn token_count(bits: &[bool]) -> usize {
    token_positions(bits).count()
}

/// Exactly one token, on a raw bit slice.
pub fn is_safe_bits(bits: &[bool]) -> bool {
    let mut it = token_positions(bits);
    it.next().is_some() && it.next().is_none()
}

pub fn is_safe_tc(state: &RingBits) -> bool {
    is_safe_bits(&state.bits)
}

/// Node-local rule: copy the left bit unless holding a token, in which case
/// take the coin.
pub fn next_bit(own: bool, left: bool, coin: bool) -> bool {
    if own != left {
        left
    } else {
        coin
    }
}

/// One synchronous Herman round. Coins are only read at token holders.
pub fn herman_step(
    state: &RingBits,
    coins: &BTreeMap<NodeId, bool>,
) -> Result<RingBits, HermanError> {
    let n = state.n();
    let bits = &state.bits;
    let next = (0..n)
        .map(|i| {
            let left = bits[(i + n - 1) % n];
            if bits[i] != left {
                Ok(left)
            } else {
                coins.get(&i).copied().ok_or(HermanError::MissingCoin(i))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RingBits { bits: next })
}

/// The unique token holder of a safe configuration.
pub fn leader(state: &RingBits) -> Result<NodeId, HermanError> {
    let t = tokens(state);
    match t.as_slice() {
        [one] => Ok(*one),
        _ => Err(HermanError::NotSafe(t.len())),
    }
}

/// Whether the single token stayed put or moved from `i` to `i + 1`.
pub fn legal_transition(before: &RingBits, after: &RingBits) -> Result<bool, HermanError> {
    if before.n() != after.n() {
        return Err(HermanError::SizeMismatch);
    }
    let from = leader(before)?;
    let to = leader(after)?;
    Ok(to == from || to == (from + 1) % before.n())
}

/// Herman's algorithm as an engine protocol: every node draws one coin per
/// round and sends its bit to its right neighbour.
#[derive(Clone, Copy, Debug, Default)]
pub struct HermanProtocol;

impl Protocol for HermanProtocol {
    type State = bool;
    type Message = bool;

    fn draw(
        &self,
        ctx: NodeCtx<'_>,
        _: &bool,
        source: &mut BitSource,
        meter: &mut RandMeter,
    ) -> RandInput {
        vec![draw(source, 1, meter, ctx.id)]
    }

    fn send(&self, ctx: NodeCtx<'_>, state: &bool, _: &RandInput) -> Vec<(NodeId, bool)> {
        vec![(ctx.topology.right(ctx.id), *state)]
    }

    fn transition(
        &self,
        ctx: NodeCtx<'_>,
        state: &bool,
        inbox: &Inbox<bool>,
        rand: &RandInput,
    ) -> Result<bool, ProtocolFault> {
        let left = ctx.topology.left(ctx.id);
        let left_bit = *inbox
            .get(&left)
            .ok_or_else(|| ProtocolFault::new(format!("no bit from left neighbour {left}")))?;
        let coin = rand
            .first()
            .ok_or_else(|| ProtocolFault::new("no coin"))?
            .low_bit();
        Ok(next_bit(*state, left_bit, coin))
    }

    fn wire_size(&self, _: &bool) -> usize {
        1
    }
}
