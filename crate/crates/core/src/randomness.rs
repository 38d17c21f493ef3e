// SPDX-License-Identifier: Apache-2.0

//! Random bit sources, metering, and the two bit production protocols.
//!
//! Every random bit a node uses passes through a [`BitSource`] and is
//! counted by a [`RandMeter`]. Two production schemes sit on top:
//!
//! - [`gated_draw`]: a node draws fresh bits only while its most recently
//!   terminated detector instance reported `false`, and otherwise feeds a
//!   fixed post-convergence input.
//! - [`surrogate_send`] / [`surrogate_receive`]: a node whose detector reports
//!   `false` sends an independent fresh word to every node (itself included),
//!   and each receiver XORs everything it got. One honest fresh word is enough
//!   to make the result uniform, whatever the other contributors sent.

use std::collections::BTreeMap;
use std::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::engine::NodeId;

/// Widest word a single [`RandWord`] can carry.
pub const MAX_WIDTH: u8 = 64;

/// A fixed-width random bit vector, or the ⊥ marker.
///
/// ⊥ is a tagged value rather than a bit pattern, so an all-zeros word from a
/// Byzantine sender is distinguishable from ⊥ on the wire. Under XOR the two
/// behave identically.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandWord {
    bits: u64,
    width: u8,
    bottom: bool,
}

#[inline]
fn mask(width: u8) -> u64 {
    match width {
        0 => 0,
        w if w >= 64 => u64::MAX,
        w => (1u64 << w) - 1,
    }
}

impl RandWord {
    /// Builds a word from the low `width` bits of `bits`.
    #[inline]
    pub fn new(bits: u64, width: u8) -> Self {
        assert!(width <= MAX_WIDTH, "word width {width} exceeds {MAX_WIDTH}");
        Self {
            bits: bits & mask(width),
            width,
            bottom: false,
        }
    }

    #[inline]
    pub fn zero(width: u8) -> Self {
        Self::new(0, width)
    }

    pub fn ones(width: u8) -> Self {
        Self::new(u64::MAX, width)
    }

    pub fn from_bit(bit: bool) -> Self {
        Self::new(bit as u64, 1)
    }

    /// The ⊥ marker: "no randomness from me this round".
    #[inline]
    pub fn bottom() -> Self {
        Self {
            bits: 0,
            width: 0,
            bottom: true,
        }
    }

    #[inline]
    pub fn is_bottom(&self) -> bool {
        self.bottom
    }

    /// Raw bits; ⊥ reads as zero.
    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn width(&self) -> u8 {
        self.width
    }

    /// Lowest bit of the word.
    pub fn low_bit(&self) -> bool {
        self.bits & 1 == 1
    }

    /// Reinterprets the word at `width` bits, truncating or zero-extending.
    /// ⊥ stays ⊥.
    #[inline]
    pub fn resized(self, width: u8) -> Self {
        if self.bottom {
            self
        } else {
            Self::new(self.bits, width)
        }
    }

    #[inline]
    pub fn xor(self, other: Self) -> Self {
        match (self.bottom, other.bottom) {
            (true, true) => Self::zero(0),
            (true, false) => other.resized(other.width),
            (false, true) => self,
            (false, false) => {
                let width = self.width.max(other.width);
                Self::new(self.bits ^ other.bits, width)
            }
        }
    }
}

impl fmt::Display for RandWord {
    /// Most significant bit first; ⊥ prints as `⊥`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bottom {
            return f.write_str("⊥");
        }
        for i in (0..self.width).rev() {
            f.write_str(if (self.bits >> i) & 1 == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for RandWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RandWord({self})")
    }
}

/// Randomness handed to one node for one round.
pub type RandInput = Vec<RandWord>;

/// Seeded, positioned bit stream.
///
/// Each node of a run gets its own ChaCha stream derived from the run seed,
/// so the bits a node draws never depend on what other nodes drew.
#[derive(Clone, Debug)]
pub struct BitSource {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
    buffer: u64,
    buffered: u32,
    position: u64,
}

impl BitSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            seed,
            stream,
            rng,
            buffer: 0,
            buffered: 0,
            position: 0,
        }
    }

    /// The source for `node` in a run seeded with `seed`.
    pub fn for_node(seed: u64, node: NodeId) -> Self {
        Self::new(seed, node as u64)
    }

    /// A source positioned after `position` bits of the `(seed, stream)` stream.
    pub fn at(seed: u64, stream: u64, position: u64) -> Self {
        let mut source = Self::new(seed, stream);
        let mut left = position;
        while left > 0 {
            let k = left.min(64) as u8;
            source.take(k);
            left -= k as u64;
        }
        source
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of bits consumed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn next_bit(&mut self) -> bool {
        if self.buffered == 0 {
            self.buffer = self.rng.next_u64();
            self.buffered = 64;
        }
        let bit = self.buffer & 1 == 1;
        self.buffer >>= 1;
        self.buffered -= 1;
        self.position += 1;
        bit
    }

    /// Takes `k` bits; the first bit drawn becomes bit 0 of the result.
    pub fn take(&mut self, k: u8) -> u64 {
        assert!(k <= MAX_WIDTH);
        let mut out = 0u64;
        for i in 0..k {
            if self.next_bit() {
                out |= 1 << i;
            }
        }
        out
    }
}

/// Cumulative count of random bits drawn, per node.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandMeter {
    counts: Vec<u64>,
}

impl RandMeter {
    pub fn new(n: usize) -> Self {
        Self { counts: vec![0; n] }
    }

    pub fn record(&mut self, owner: NodeId, bits: u64) {
        if owner >= self.counts.len() {
            self.counts.resize(owner + 1, 0);
        }
        self.counts[owner] += bits;
    }

    pub fn get(&self, owner: NodeId) -> u64 {
        self.counts.get(owner).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// Draws `k` bits for `owner`, charging them to the meter.
pub fn draw(source: &mut BitSource, k: u8, meter: &mut RandMeter, owner: NodeId) -> RandWord {
    let bits = source.take(k);
    meter.record(owner, k as u64);
    RandWord::new(bits, k)
}

/// What a node feeds its algorithm once its detector reports convergence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PostConvergenceInput {
    /// All-ones word.
    Ones,
    Zeros,
    /// A caller-chosen word, e.g. the node's current bit.
    Keep(RandWord),
}

impl PostConvergenceInput {
    pub fn word(&self, width: u8) -> RandWord {
        match *self {
            Self::Ones => RandWord::ones(width),
            Self::Zeros => RandWord::zero(width),
            Self::Keep(word) => word.resized(width),
        }
    }
}

/// Detector-gated bit production: fresh bits while the last terminated
/// detector said `false`, the deterministic policy word (zero bits drawn)
/// otherwise.
pub fn gated_draw(
    last_verdict: bool,
    source: &mut BitSource,
    policy: &PostConvergenceInput,
    width: u8,
    meter: &mut RandMeter,
    owner: NodeId,
) -> RandWord {
    if last_verdict {
        policy.word(width)
    } else {
        draw(source, width, meter, owner)
    }
}

/// Bitwise XOR of `words`; ⊥ contributes the zero word. The result is as wide
/// as the widest non-⊥ input (zero width if every input is ⊥).
pub fn xor_combine<'a, I>(words: I) -> RandWord
where
    I: IntoIterator<Item = &'a RandWord>,
{
    words
        .into_iter()
        .fold(RandWord::bottom(), |acc, w| acc.xor(*w))
        .xor(RandWord::zero(0))
}

/// Sending half of the surrogate protocol: one independent fresh word per
/// destination when `my_verdict` is `false`, ⊥ to everyone otherwise.
pub fn surrogate_send(
    my_verdict: bool,
    source: &mut BitSource,
    meter: &mut RandMeter,
    owner: NodeId,
    destinations: usize,
    width: u8,
) -> Vec<RandWord> {
    (0..destinations)
        .map(|_| {
            if my_verdict {
                RandWord::bottom()
            } else {
                draw(source, width, meter, owner)
            }
        })
        .collect()
}

/// Receiving half: XOR of one word per node in `0..n`. A missing sender counts
/// as ⊥; non-⊥ words of the wrong width are read at `width` bits.
pub fn surrogate_receive(received: &BTreeMap<NodeId, RandWord>, n: usize, width: u8) -> RandWord {
    let mut acc = RandWord::zero(width);
    for node in 0..n {
        if let Some(word) = received.get(&node) {
            acc = acc.xor(word.resized(width));
        }
    }
    acc
}

/// Both halves of one surrogate round, for callers that already hold the
/// received words.
pub fn surrogate_round(
    my_verdict: bool,
    source: &mut BitSource,
    meter: &mut RandMeter,
    owner: NodeId,
    n: usize,
    width: u8,
    received: &BTreeMap<NodeId, RandWord>,
) -> (BTreeMap<NodeId, RandWord>, RandWord) {
    let outgoing = surrogate_send(my_verdict, source, meter, owner, n, width)
        .into_iter()
        .enumerate()
        .collect();
    (outgoing, surrogate_receive(received, n, width))
}

/// Output of a terminated production instance, stamped with its start round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Produced<T> {
    pub started: u64,
    pub output: T,
}

/// Tracks the most recently terminated instance of a pipelined protocol.
///
/// An instance started at round `s` with latency `L` can be consumed from
/// round `s + L + 1` on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pipeline<T> {
    latency: u64,
    last: Option<Produced<T>>,
}

impl<T> Pipeline<T> {
    pub fn new(latency: u64) -> Self {
        Self {
            latency,
            last: None,
        }
    }

    pub fn with_output(latency: u64, started: u64, output: T) -> Self {
        Self {
            latency,
            last: Some(Produced { started, output }),
        }
    }

    pub fn latency(&self) -> u64 {
        self.latency
    }

    pub fn record(&mut self, started: u64, output: T) {
        self.last = Some(Produced { started, output });
    }

    /// The instance usable at `round`, if it has terminated by then.
    pub fn consume(&self, round: u64) -> Option<&Produced<T>> {
        self.last
            .as_ref()
            .filter(|p| p.started.saturating_add(self.latency + 1) <= round)
    }

    pub fn last(&self) -> Option<&Produced<T>> {
        self.last.as_ref()
    }
}
