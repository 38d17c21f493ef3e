// SPDX-License-Identifier: Apache-2.0

//! Byzantine clock detector and a small clock testbed driven by randomness
//! surrogates.
//!
//! The detector is a tally: a node counts the nodes (itself included) that
//! reported the same clock value as its own and reports `true` iff the count
//! reaches `n - f`. With all correct clocks equal every correct node passes,
//! whatever the Byzantine nodes send. With two distinct correct values, the
//! smaller (or equal) group sees at most `floor((n - f') / 2) + f'` matching
//! reports, which stays below `n - f`.
//!
//! The testbed clock: if some value has `n - f` support, advance it by one;
//! otherwise take the surrogate bits. Surrogate words come out of a two-round
//! pipeline: the detector runs in round `s`, its verdict decides in round
//! `s + 1` whether the node sends fresh words or ⊥ to everyone, and the XOR
//! of what each node received in `s + 1` becomes its input in round `s + 2`.

mod adversary;

pub use adversary::{ClockAdversary, ClockStrategy};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{
    check_fault_bound, ConfigError, Configuration, Inbox, NodeCtx, NodeId, Protocol, ProtocolFault,
    Topology,
};
use crate::randomness::{
    draw, surrogate_receive, BitSource, Pipeline, Produced, RandInput, RandMeter, RandWord,
};

/// Rounds between the detector instance and the round its surrogate word is
/// consumed, minus one.
pub const SURROGATE_LATENCY: u64 = 1;

/// Matching reports, own clock included. `received` holds the other nodes'
/// reports; absent or `None` entries never match.
pub fn tally(own: u32, received: &BTreeMap<NodeId, Option<u32>>) -> usize {
    1 + received.values().filter(|v| **v == Some(own)).count()
}

/// `tally >= n - f`.
pub fn clock_detect(tally: usize, n: usize, f: usize) -> Result<bool, ConfigError> {
    if n < 3 * f + 1 {
        return Err(ConfigError::TooManyFaults { n, f });
    }
    Ok(tally >= n - f)
}

/// Whether `floor((n - f') / 2) + f' <= n - f - 1`, the largest tally the
/// smaller of two correct clock groups can reach.
pub fn minority_tally_bound(n: usize, f: usize, f_actual: usize) -> bool {
    if f_actual > f || n < 3 * f + 1 {
        return false;
    }
    (n - f_actual) / 2 + f_actual < n - f
}

/// The value reported by at least `n - f` of `reports`, if any. At most one
/// value can qualify when `n >= 3f + 1`.
pub fn supermajority(reports: &[Option<u32>], n: usize, f: usize) -> Option<u32> {
    let mut support: BTreeMap<u32, usize> = BTreeMap::new();
    for v in reports.iter().flatten() {
        *support.entry(*v).or_default() += 1;
    }
    support
        .into_iter()
        .find(|&(_, c)| c >= n - f)
        .map(|(v, _)| v)
}

/// Next testbed clock. `received` holds the other nodes' reports.
pub fn toy_clock_step(
    own: u32,
    received: &BTreeMap<NodeId, Option<u32>>,
    surrogate: RandWord,
    n: usize,
    f: usize,
    k: u32,
) -> u32 {
    let mut reports: Vec<Option<u32>> = received.values().copied().collect();
    reports.push(Some(own));
    match supermajority(&reports, n, f) {
        Some(v) => (v + 1) % k,
        None => (surrogate.bits() % k as u64) as u32,
    }
}

/// Testbed parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockParams {
    pub n: usize,
    pub f: usize,
    /// Number of clock values.
    pub k: u32,
    /// Surrogate word width in bits.
    pub width: u8,
}

impl ClockParams {
    pub fn new(n: usize, f: usize, k: u32, width: u8) -> Result<Self, ConfigError> {
        check_fault_bound(&Topology::complete(n)?, f)?;
        if k < 2 {
            return Err(ConfigError::Invalid(format!(
                "clock needs at least 2 values, got {k}"
            )));
        }
        if width == 0 || width > 64 {
            return Err(ConfigError::Invalid(format!(
                "word width {width} outside 1..=64"
            )));
        }
        Ok(Self { n, f, k, width })
    }

    pub fn topology(&self) -> Topology {
        Topology::complete(self.n).expect("validated")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockNode {
    pub clock: u32,
    /// Verdict of the detector instance run last round.
    pub detector: Option<Produced<bool>>,
    pub surrogate: Pipeline<RandWord>,
    /// Tally seen last round.
    pub tally: Option<usize>,
    /// Whether the node sent fresh words (rather than ⊥) last round.
    pub sent_fresh: bool,
}

impl ClockNode {
    pub fn fresh(clock: u32) -> Self {
        Self {
            clock,
            detector: None,
            surrogate: Pipeline::new(SURROGATE_LATENCY),
            tally: None,
            sent_fresh: false,
        }
    }

    pub fn last_verdict(&self) -> Option<bool> {
        self.detector.map(|p| p.output)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockMsg {
    pub clock: u32,
    /// Fresh surrogate word or ⊥.
    pub word: RandWord,
}

/// What a node draws in a round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Plan {
    send_fresh: bool,
    fallback: bool,
}

/// The testbed clock composed with the tally detector and the surrogate
/// protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdaptiveClock {
    pub params: ClockParams,
}

impl AdaptiveClock {
    pub fn new(params: ClockParams) -> Self {
        Self { params }
    }

    pub fn initial(clocks: &[u32]) -> Configuration<ClockNode> {
        Configuration::initial(clocks.iter().map(|&c| ClockNode::fresh(c)).collect())
    }

    fn plan(&self, state: &ClockNode, round: u64) -> Plan {
        let verdict = state
            .detector
            .filter(|p| p.started < round)
            .is_some_and(|p| p.output);
        Plan {
            send_fresh: !verdict,
            fallback: state.surrogate.consume(round).is_none(),
        }
    }
}

impl Protocol for AdaptiveClock {
    type State = ClockNode;
    type Message = ClockMsg;

    fn draw(
        &self,
        ctx: NodeCtx<'_>,
        state: &ClockNode,
        source: &mut BitSource,
        meter: &mut RandMeter,
    ) -> RandInput {
        let plan = self.plan(state, ctx.round);
        let w = self.params.width;
        let mut words = Vec::new();
        if plan.send_fresh {
            words.extend((0..ctx.topology.n()).map(|_| draw(source, w, meter, ctx.id)));
        }
        if plan.fallback {
            words.push(draw(source, w, meter, ctx.id));
        }
        words
    }

    fn send(
        &self,
        ctx: NodeCtx<'_>,
        state: &ClockNode,
        rand: &RandInput,
    ) -> Vec<(NodeId, ClockMsg)> {
        let plan = self.plan(state, ctx.round);
        (0..ctx.topology.n())
            .map(|to| {
                let word = if plan.send_fresh {
                    rand[to]
                } else {
                    RandWord::bottom()
                };
                (
                    to,
                    ClockMsg {
                        clock: state.clock,
                        word,
                    },
                )
            })
            .collect()
    }

    fn transition(
        &self,
        ctx: NodeCtx<'_>,
        state: &ClockNode,
        inbox: &Inbox<ClockMsg>,
        rand: &RandInput,
    ) -> Result<ClockNode, ProtocolFault> {
        let ClockParams { n, f, k, width } = self.params;
        let plan = self.plan(state, ctx.round);
        let expected = plan.send_fresh as usize * n + plan.fallback as usize;
        if rand.len() != expected {
            return Err(ProtocolFault::new(format!(
                "expected {expected} random words, got {}",
                rand.len()
            )));
        }

        let received: BTreeMap<NodeId, Option<u32>> = (0..n)
            .filter(|&j| j != ctx.id)
            .map(|j| (j, inbox.get(&j).map(|m| m.clock).filter(|&c| c < k)))
            .collect();
        let own_tally = tally(state.clock, &received);
        let verdict =
            clock_detect(own_tally, n, f).map_err(|e| ProtocolFault::new(e.to_string()))?;

        let words: BTreeMap<NodeId, RandWord> = inbox.iter().map(|(&j, m)| (j, m.word)).collect();
        let combined = surrogate_receive(&words, n, width);

        let input = match state.surrogate.consume(ctx.round) {
            Some(p) => p.output,
            None => *rand.last().expect("fallback word planned"),
        };
        let clock = toy_clock_step(state.clock, &received, input, n, f, k);

        let mut surrogate = state.surrogate;
        surrogate.record(ctx.round.saturating_sub(1), combined);
        Ok(ClockNode {
            clock,
            detector: Some(Produced {
                started: ctx.round,
                output: verdict,
            }),
            surrogate,
            tally: Some(own_tally),
            sent_fresh: plan.send_fresh,
        })
    }

    /// 4-byte clock, 1 tag byte, 8-byte word unless ⊥.
    fn wire_size(&self, msg: &ClockMsg) -> usize {
        5 + if msg.word.is_bottom() { 0 } else { 8 }
    }
}
