// SPDX-License-Identifier: Apache-2.0

//! Randomization adaptive Herman: detector-gated coins over history
//! collection over Herman's rule.
//!
//! Round `r` at node `i`:
//!
//! 1. read the verdict of the detector instance that ran in round `r - 1`;
//!    draw a fresh coin if it was `false`, otherwise use the post-convergence
//!    input,
//! 2. shift the history, put `{i: bit}` in slot 0, send it (with the bit) to
//!    both neighbours,
//! 3. merge what arrived, run the detector on slot `d`, apply Herman's rule.
//!
//! With [`BitSupply::Collected`] a node with a `false` verdict instead draws
//! one coin for every node and ships the batch through its history; node `p`
//! then uses the XOR of the coins addressed to it `d` rounds back.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{is_safe_bits, next_bit, RingBits};
use crate::engine::{Configuration, Inbox, NodeCtx, NodeId, Protocol, ProtocolFault, Round};
use crate::history::{
    weak_rand, ArmHistory, ArmPair, HistoryArray, PartialConfiguration, RandStore, TokenAggregate,
};
use crate::randomness::{
    draw, gated_draw, BitSource, Pipeline, PostConvergenceInput, RandInput, RandMeter, RandWord,
};

/// Coin fed to a token holder after convergence is detected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputPolicy {
    /// The holder's own bit: the token moves every round.
    #[default]
    KeepBit,
    /// Always 1: the token pauses one round whenever the holder's bit is 0.
    Ones,
    Zeros,
}

impl InputPolicy {
    fn input(self, bit: bool) -> PostConvergenceInput {
        match self {
            Self::KeepBit => PostConvergenceInput::Keep(RandWord::from_bit(bit)),
            Self::Ones => PostConvergenceInput::Ones,
            Self::Zeros => PostConvergenceInput::Zeros,
        }
    }
}

/// Which detector gates the coins. Both are always computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    /// Full depth-`d` configuration from the history array.
    #[default]
    Full,
    /// Capped token count from the arm aggregates.
    Aggregated,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BitSupply {
    /// Each node draws its own coin.
    #[default]
    Local,
    /// Coins for everyone are drawn by undetected nodes and collected with
    /// the history.
    Collected,
}

/// Outputs of one detector instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub full: bool,
    pub aggregated: bool,
}

impl Verdicts {
    pub fn pick(&self, kind: DetectorKind) -> bool {
        match kind {
            DetectorKind::Full => self.full,
            DetectorKind::Aggregated => self.aggregated,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptiveNode {
    pub bit: bool,
    pub history: HistoryArray<bool>,
    pub arms: ArmHistory,
    pub store: RandStore,
    pub verdicts: Pipeline<Verdicts>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
/// Payloads are shared between the copies sent to each neighbour.
pub struct HermanMsg {
    pub bit: bool,
    pub history: Arc<HistoryArray<bool>>,
    pub arms: Arc<ArmHistory>,
    pub store: Option<Arc<RandStore>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AdaptiveHerman {
    pub policy: InputPolicy,
    pub detector: DetectorKind,
    pub supply: BitSupply,
}

impl AdaptiveHerman {
    pub fn new(policy: InputPolicy, detector: DetectorKind, supply: BitSupply) -> Self {
        Self {
            policy,
            detector,
            supply,
        }
    }

    /// Clean node: empty history, no detector output yet.
    pub fn fresh_node(n: usize, bit: bool) -> AdaptiveNode {
        let depth = n / 2;
        AdaptiveNode {
            bit,
            history: HistoryArray::empty(n, depth),
            arms: ArmHistory::empty(depth),
            store: RandStore::empty(n, depth),
            verdicts: Pipeline::new(0),
        }
    }

    pub fn initial(bits: &RingBits) -> Configuration<AdaptiveNode> {
        let n = bits.n();
        Configuration::initial(
            bits.bits()
                .iter()
                .map(|&b| Self::fresh_node(n, b))
                .collect(),
        )
    }

    /// Keeps the bits of `config` and fills every history structure and
    /// detector output with seeded junk.
    pub fn corrupt(config: &Configuration<AdaptiveNode>, seed: u64) -> Configuration<AdaptiveNode> {
        let n = config.n();
        let depth = n / 2;
        let mut src = BitSource::new(seed, u64::MAX - 1);
        let mut coin = || src.next_bit();
        let states = config
            .states
            .iter()
            .map(|node| {
                let mut history = HistoryArray::empty(n, depth);
                for j in 0..=depth {
                    let slot = history.slot_mut(j);
                    slot.round = config.round.wrapping_sub(j as u64 + 1);
                    for id in 0..n {
                        if coin() || coin() {
                            slot.insert(id, coin()).expect("id in range");
                        }
                    }
                }
                let junk_arm = |coin: &mut dyn FnMut() -> bool| -> Option<TokenAggregate> {
                    if !coin() {
                        return None;
                    }
                    let bits: Vec<bool> = (0..n).map(|_| coin()).collect();
                    let start = (0..4).fold(0, |acc, _| acc * 2 + coin() as usize) % n;
                    let len = 1 + (0..4).fold(0, |acc, _| acc * 2 + coin() as usize) % n;
                    Some(TokenAggregate::over(&bits, start, len))
                };
                let arms = ArmHistory::from_slots(
                    (0..=depth)
                        .map(|_| ArmPair {
                            left: junk_arm(&mut coin),
                            right: junk_arm(&mut coin),
                        })
                        .collect(),
                );
                let mut store = RandStore::empty(n, depth);
                for j in 0..=depth {
                    for g in 0..n {
                        if coin() && coin() {
                            store.put(j, g, (0..n).map(|_| RandWord::from_bit(coin())).collect());
                        }
                    }
                }
                let verdicts = if coin() {
                    Pipeline::with_output(
                        0,
                        config.round.saturating_sub(1),
                        Verdicts {
                            full: coin(),
                            aggregated: coin(),
                        },
                    )
                } else {
                    Pipeline::new(0)
                };
                AdaptiveNode {
                    bit: node.bit,
                    history,
                    arms,
                    store,
                    verdicts,
                }
            })
            .collect();
        Configuration::new(config.round, states)
    }

    pub fn bits(config: &Configuration<AdaptiveNode>) -> Vec<bool> {
        config.states.iter().map(|s| s.bit).collect()
    }

    /// The verdict gating round `round`'s coin; `false` when no instance has
    /// terminated yet.
    pub fn last_verdict(&self, state: &AdaptiveNode, round: Round) -> bool {
        state
            .verdicts
            .consume(round)
            .is_some_and(|p| p.output.pick(self.detector))
    }

    fn shifted(
        &self,
        ctx: NodeCtx<'_>,
        state: &AdaptiveNode,
        rand: &RandInput,
    ) -> (HistoryArray<bool>, ArmHistory, Option<RandStore>) {
        let n = ctx.topology.n();
        let mut history = state.history.clone();
        history.shift_insert(state.bit, ctx.id, ctx.round);
        let mut arms = state.arms.clone();
        arms.shift_insert(n, ctx.id, state.bit);
        let store = match self.supply {
            BitSupply::Local => None,
            BitSupply::Collected => {
                let mut store = state.store.clone();
                let batch = (rand.len() == n).then(|| rand.clone());
                store.shift_insert(ctx.id, batch);
                Some(store)
            }
        };
        (history, arms, store)
    }

    fn post_convergence_coin(&self, bit: bool) -> bool {
        self.policy.input(bit).word(1).low_bit()
    }
}

impl Protocol for AdaptiveHerman {
    type State = AdaptiveNode;
    type Message = HermanMsg;

    fn draw(
        &self,
        ctx: NodeCtx<'_>,
        state: &AdaptiveNode,
        source: &mut BitSource,
        meter: &mut RandMeter,
    ) -> RandInput {
        let verdict = self.last_verdict(state, ctx.round);
        match self.supply {
            BitSupply::Local => vec![gated_draw(
                verdict,
                source,
                &self.policy.input(state.bit),
                1,
                meter,
                ctx.id,
            )],
            BitSupply::Collected if verdict => RandInput::new(),
            BitSupply::Collected => (0..ctx.topology.n())
                .map(|_| draw(source, 1, meter, ctx.id))
                .collect(),
        }
    }

    fn send(
        &self,
        ctx: NodeCtx<'_>,
        state: &AdaptiveNode,
        rand: &RandInput,
    ) -> Vec<(NodeId, HermanMsg)> {
        let (history, arms, store) = self.shifted(ctx, state, rand);
        let msg = HermanMsg {
            bit: state.bit,
            history: Arc::new(history),
            arms: Arc::new(arms),
            store: store.map(Arc::new),
        };
        ctx.topology
            .neighbors(ctx.id)
            .into_iter()
            .map(|to| (to, msg.clone()))
            .collect()
    }

    fn transition(
        &self,
        ctx: NodeCtx<'_>,
        state: &AdaptiveNode,
        inbox: &Inbox<HermanMsg>,
        rand: &RandInput,
    ) -> Result<AdaptiveNode, ProtocolFault> {
        let n = ctx.topology.n();
        let (left, right) = (ctx.topology.left(ctx.id), ctx.topology.right(ctx.id));
        let (mut history, mut arms, mut store) = self.shifted(ctx, state, rand);
        for msg in inbox.values() {
            history
                .merge(&msg.history)
                .map_err(|e| ProtocolFault::new(e.to_string()))?;
            if let (Some(mine), Some(theirs)) = (store.as_mut(), msg.store.as_ref()) {
                mine.merge(theirs);
            }
        }
        arms.extend(
            n,
            ctx.id,
            inbox.get(&left).map(|m| &*m.arms),
            inbox.get(&right).map(|m| &*m.arms),
        );

        let left_bit = inbox
            .get(&left)
            .ok_or_else(|| ProtocolFault::new(format!("no message from left neighbour {left}")))?
            .bit;
        let coin = match (&store, self.supply) {
            (Some(store), BitSupply::Collected) => {
                if store.has_words() {
                    weak_rand(store, ctx.id).low_bit()
                } else {
                    self.post_convergence_coin(state.bit)
                }
            }
            _ => rand
                .first()
                .ok_or_else(|| ProtocolFault::new("no coin supplied"))?
                .low_bit(),
        };

        let verdicts = Verdicts {
            full: history.hist_detect(is_safe_bits),
            aggregated: arms.detect(),
        };
        let mut pipeline = state.verdicts;
        pipeline.record(ctx.round, verdicts);

        Ok(AdaptiveNode {
            bit: next_bit(state.bit, left_bit, coin),
            history,
            arms,
            store: store.unwrap_or_else(|| state.store.clone()),
            verdicts: pipeline,
        })
    }

    /// Bit byte, 9 bytes per history triple, 16 bytes per arm, and one byte
    /// per stored word.
    fn wire_size(&self, msg: &HermanMsg) -> usize {
        let triples: usize = msg
            .history
            .slots()
            .iter()
            .map(PartialConfiguration::known)
            .sum();
        let arms: usize = msg
            .arms
            .slots()
            .iter()
            .map(|p| p.left.is_some() as usize + p.right.is_some() as usize)
            .sum();
        let words = msg.store.as_ref().map_or(0, |s| {
            (0..=s.depth())
                .flat_map(|j| (0..s.n()).map(move |g| (j, g)))
                .filter_map(|(j, g)| s.batch(j, g).map(<[RandWord]>::len))
                .sum()
        });
        1 + 9 * triples + 16 * arms + words
    }
}

/// Depth-`d` slot of `node` as full bits, if complete.
#[cfg(test)]
pub(crate) fn deepest_view(node: &AdaptiveNode) -> Option<Vec<bool>> {
    node.history.slot(node.history.depth()).states()
}
