// SPDX-License-Identifier: Apache-2.0

//! Byzantine behaviours for the clock testbed.

use std::fmt;
use std::str::FromStr;

use crate::engine::{AdversaryView, ByzantineStrategy, NodeId};
use crate::randomness::{BitSource, RandWord};

use super::{AdaptiveClock, ClockMsg, ClockNode, ClockParams};

/// Stream id of the adversary's own generator, away from the node streams.
const ADVERSARY_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClockStrategy {
    /// Sends nothing.
    Silent,
    /// Tells each receiver its own clock, with a zero word.
    EchoReceiver,
    /// Uniform clock and word per message.
    Random,
    /// Receiver's clock plus one, with an all-ones word.
    Flip,
}

impl ClockStrategy {
    pub const ALL: [ClockStrategy; 4] =
        [Self::Silent, Self::EchoReceiver, Self::Random, Self::Flip];

    pub fn name(self) -> &'static str {
        match self {
            Self::Silent => "silent",
            Self::EchoReceiver => "echo-receiver",
            Self::Random => "random",
            Self::Flip => "flip",
        }
    }
}

impl fmt::Display for ClockStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClockStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "echo" {
            return Ok(Self::EchoReceiver);
        }
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                format!("unknown strategy {s:?} (expected silent, echo-receiver, random or flip)")
            })
    }
}

pub struct ClockAdversary {
    kind: ClockStrategy,
    params: ClockParams,
    rng: BitSource,
}

impl ClockAdversary {
    pub fn new(kind: ClockStrategy, params: ClockParams, seed: u64) -> Self {
        Self {
            kind,
            params,
            rng: BitSource::new(seed, ADVERSARY_STREAM),
        }
    }

    fn random_clock(&mut self) -> u32 {
        (self.rng.take(32) % self.params.k as u64) as u32
    }
}

impl ByzantineStrategy<AdaptiveClock> for ClockAdversary {
    fn message(
        &mut self,
        view: &AdversaryView<'_, AdaptiveClock>,
        _from: NodeId,
        to: NodeId,
    ) -> Option<ClockMsg> {
        let k = self.params.k;
        let w = self.params.width;
        let theirs = view.config.states[to].clock % k;
        match self.kind {
            ClockStrategy::Silent => None,
            ClockStrategy::EchoReceiver => Some(ClockMsg {
                clock: theirs,
                word: RandWord::zero(w),
            }),
            ClockStrategy::Random => {
                let clock = self.random_clock();
                let word = RandWord::new(self.rng.take(w), w);
                Some(ClockMsg { clock, word })
            }
            ClockStrategy::Flip => Some(ClockMsg {
                clock: (theirs + 1) % k,
                word: RandWord::ones(w),
            }),
        }
    }

    fn state(&mut self, view: &AdversaryView<'_, AdaptiveClock>, node: NodeId) -> ClockNode {
        let mut s = view.config.states[node].clone();
        if self.kind == ClockStrategy::Random {
            s.clock = self.random_clock();
        }
        s
    }
}
