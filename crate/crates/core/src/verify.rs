// SPDX-License-Identifier: Apache-2.0

//! Brute-force verification suites. Each suite enumerates (or, where the
//! space is too large, seeds) its cases and stops at the first
//! counterexample.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::clock::{AdaptiveClock, ClockAdversary, ClockParams, ClockStrategy};
use crate::engine::{run, ByzantineSpec, Configuration, Topology};
use crate::herman::{
    herman_step, is_safe_tc, leader, legal_transition, token_count, AdaptiveHerman, AdaptiveNode,
    RingBits,
};
use crate::history::{HistoryArray, PartialConfiguration};
use crate::randomness::{xor_combine, BitSource, RandWord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Parity,
    Closure,
    History,
    Xor,
    Tally,
    Aggregate,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Self::Parity,
        Self::Closure,
        Self::History,
        Self::Xor,
        Self::Tally,
        Self::Aggregate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Parity => "parity",
            Self::Closure => "closure",
            Self::History => "history",
            Self::Xor => "xor",
            Self::Tally => "tally",
            Self::Aggregate => "aggregate",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown suite {s:?} (expected parity, closure, history, xor, tally or aggregate)"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Report {
    pub suite: Suite,
    /// Cases checked before stopping.
    pub cases: u64,
    pub counterexample: Option<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.counterexample {
            None => write!(f, "{}: pass ({} cases)", self.suite, self.cases),
            Some(c) => write!(f, "{}: FAIL after {} cases: {c}", self.suite, self.cases),
        }
    }
}

struct Tally {
    cases: u64,
}

impl Tally {
    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) -> Result<(), String> {
        self.cases += 1;
        if ok {
            Ok(())
        } else {
            Err(describe())
        }
    }
}

pub fn verify(suite: Suite) -> Report {
    let mut t = Tally { cases: 0 };
    let result = match suite {
        Suite::Parity => parity(&mut t, 1000, 100),
        Suite::Closure => closure(&mut t, 5, 6),
        Suite::History => history(&mut t, 25),
        Suite::Xor => xor(&mut t, 8, 256),
        Suite::Tally => tally(&mut t),
        Suite::Aggregate => aggregate(&mut t, 200),
    };
    Report {
        suite,
        cases: t.cases,
        counterexample: result.err(),
    }
}

fn random_ring(src: &mut BitSource, n: usize) -> RingBits {
    RingBits::new((0..n).map(|_| src.next_bit()).collect()).expect("odd n")
}

/// Plain Herman from random starts: token count odd and non-increasing.
fn parity(t: &mut Tally, runs: u64, rounds: u64) -> Result<(), String> {
    for seed in 0..runs {
        let n = 3 + 2 * (seed % 5) as usize;
        let mut src = BitSource::new(seed, 0);
        let mut ring = random_ring(&mut src, n);
        let mut prev = token_count(ring.bits());
        for r in 0..rounds {
            let coins = (0..n).map(|i| (i, src.next_bit())).collect();
            ring = herman_step(&ring, &coins).map_err(|e| e.to_string())?;
            let now = token_count(ring.bits());
            t.check(now % 2 == 1 && now <= prev, || {
                format!("seed {seed} n={n} round {r}: {prev} -> {now} tokens at {ring}")
            })?;
            prev = now;
        }
    }
    Ok(())
}

/// Every safe ring of size `n` under every coin sequence of length `len`.
fn closure(t: &mut Tally, n: usize, len: u32) -> Result<(), String> {
    for start in RingBits::all(n).filter(is_safe_tc) {
        for coins in 0u32..1 << len {
            let mut ring = start.clone();
            for step in 0..len {
                let holder = leader(&ring).map_err(|e| e.to_string())?;
                let next = herman_step(&ring, &[(holder, coins >> step & 1 == 1)].into())
                    .map_err(|e| e.to_string())?;
                let legal = legal_transition(&ring, &next).unwrap_or(false);
                t.check(legal && is_safe_tc(&next), || {
                    format!(
                        "{start} coins {coins:0len$b}: step {step} {ring} -> {next}",
                        len = len as usize
                    )
                })?;
                ring = next;
            }
        }
    }
    Ok(())
}

/// Replaces every history slot `j` with the complement of `past[j]`, the
/// true configuration `j + 1` rounds before `config`.
pub fn complemented_histories(
    config: &Configuration<AdaptiveNode>,
    past: &[Vec<bool>],
) -> Configuration<AdaptiveNode> {
    let states = config
        .states
        .iter()
        .map(|node| {
            let slots = past
                .iter()
                .enumerate()
                .map(|(j, bits)| {
                    PartialConfiguration::full(
                        config.round.wrapping_sub(j as u64 + 1),
                        bits.iter().map(|b| !b).collect(),
                    )
                })
                .collect();
            AdaptiveNode {
                history: HistoryArray::from_slots(slots),
                ..node.clone()
            }
        })
        .collect();
    Configuration::new(config.round, states)
}

/// The deepest slot matches the true configuration `d` rounds back from
/// round `d` on, starting from junk histories; and a complemented history
/// installed after a warm-up is still visible at round `d - 1`.
fn history(t: &mut Tally, seeds: u64) -> Result<(), String> {
    for n in [3, 5, 7, 9] {
        let d = n / 2;
        let topo = Topology::odd_ring(n).map_err(|e| e.to_string())?;
        let proto = AdaptiveHerman::default();
        for seed in 0..seeds {
            let mut src = BitSource::new(seed, 1);
            let init =
                AdaptiveHerman::corrupt(&AdaptiveHerman::initial(&random_ring(&mut src, n)), seed);
            let trace = run(&proto, &topo, init, 3 * d as u64 + 3, seed, None);
            for i in d..trace.events.len() {
                let truth = AdaptiveHerman::bits(&trace.configurations[i - d]);
                for (id, node) in trace.configurations[i + 1].states.iter().enumerate() {
                    let seen = node.history.slot(d).states();
                    t.check(seen.as_deref() == Some(&truth[..]), || {
                        format!("n={n} seed {seed} round {i} node {id}: slot {d} = {seen:?}, truth {truth:?}")
                    })?;
                }
            }

            let warm = d + 1;
            let trace = run(
                &proto,
                &topo,
                AdaptiveHerman::initial(&random_ring(&mut src, n)),
                warm as u64,
                seed,
                None,
            );
            let past: Vec<Vec<bool>> = (0..=d)
                .map(|j| AdaptiveHerman::bits(&trace.configurations[warm - 1 - j]))
                .collect();
            let start = complemented_histories(trace.last(), &past);
            let resumed = run(&proto, &topo, start, d as u64 + 1, seed ^ 1, None);
            let at = |k: usize| -> Vec<bool> { AdaptiveHerman::bits(&resumed.configurations[k]) };
            // round warm + d - 1 still reads the complemented slot 0 of the
            // restart; round warm + d reads the truth at the restart
            let wrong = resumed.configurations[d]
                .states
                .iter()
                .any(|s| s.history.slot(d).states().as_ref() != Some(&past[0]));
            let fixed = resumed.configurations[d + 1]
                .states
                .iter()
                .all(|s| s.history.slot(d).states() == Some(at(0)));
            t.check(wrong && fixed, || {
                format!(
                    "n={n} seed {seed}: complemented history not visible exactly through round {}",
                    warm + d - 1
                )
            })?;
        }
    }
    Ok(())
}

/// `u ↦ xor_combine(u, others)` hits every `width`-bit word exactly once.
/// `u` sits at `position` among at most three other words.
pub fn xor_is_bijection(others: &[RandWord], position: usize, width: u8) -> bool {
    assert!(others.len() <= 3 && position <= others.len() && width <= 16);
    let size = 1usize << width;
    let mut seen = vec![0u64; size.div_ceil(64)];
    let mut words = [RandWord::bottom(); 4];
    let len = others.len() + 1;
    let mut rest = others.iter();
    for (i, w) in words[..len].iter_mut().enumerate() {
        if i != position {
            *w = *rest.next().expect("len = others + 1");
        }
    }
    for u in 0..size as u64 {
        words[position] = RandWord::new(u, width);
        let out = xor_combine(&words[..len]);
        if out.is_bottom() || out.width() != width {
            return false;
        }
        let (cell, bit) = (out.bits() as usize / 64, out.bits() % 64);
        if seen[cell] >> bit & 1 == 1 {
            return false;
        }
        seen[cell] |= 1 << bit;
    }
    true
}

/// Four contributors, one correct, every ⊥ pattern of the other three.
/// Adversary words are exhaustive when at most two are present, with the
/// correct word first; with three present, `samples` seeded vectors, each
/// tried with the correct word at every position.
fn xor(t: &mut Tally, width: u8, samples: u64) -> Result<(), String> {
    let all = 1u64 << width;
    let mut src = BitSource::new(0, 2);
    for pattern in 0u8..8 {
        let present = pattern.count_ones();
        let vectors: Vec<Vec<u64>> = match present {
            0 => vec![vec![]],
            1 => (0..all).map(|a| vec![a]).collect(),
            2 => (0..all * all).map(|a| vec![a % all, a / all]).collect(),
            _ => (0..samples)
                .map(|_| (0..3).map(|_| src.take(width)).collect())
                .collect(),
        };
        let positions = if present == 3 { 0..4 } else { 0..1 };
        for vals in &vectors {
            let mut vals = vals.iter();
            let others: Vec<RandWord> = (0..3)
                .map(|slot| {
                    if pattern >> slot & 1 == 1 {
                        RandWord::new(*vals.next().expect("one value per present slot"), width)
                    } else {
                        RandWord::bottom()
                    }
                })
                .collect();
            for position in positions.clone() {
                t.check(xor_is_bijection(&others, position, width), || {
                    format!("correct word at {position}, others {others:?}")
                })?;
            }
        }
    }
    Ok(())
}

/// Every two-group split of the correct clocks against echo-receiver, and
/// equal correct clocks against every strategy.
fn tally(t: &mut Tally) -> Result<(), String> {
    for n in 4..=10 {
        let f = (n - 1) / 3;
        let params = ClockParams::new(n, f, 2, 1).map_err(|e| e.to_string())?;
        let topo = params.topology();
        let proto = AdaptiveClock::new(params);
        for fp in 0..=f {
            let correct = n - fp;
            let spec = |strategy| -> Result<Option<ByzantineSpec<AdaptiveClock>>, String> {
                if fp == 0 {
                    return Ok(None);
                }
                ByzantineSpec::new(
                    &topo,
                    (correct..n).collect(),
                    f,
                    Box::new(ClockAdversary::new(strategy, params, 0)),
                )
                .map(Some)
                .map_err(|e| e.to_string())
            };
            let bound = (n - fp) / 2 + fp;
            for zeros in 1..correct {
                let clocks: Vec<u32> = (0..n).map(|i| u32::from(i >= zeros)).collect();
                let after = run(
                    &proto,
                    &topo,
                    AdaptiveClock::initial(&clocks),
                    1,
                    0,
                    spec(ClockStrategy::EchoReceiver)?,
                );
                let states = &after.configurations[1].states[..correct];
                let minority = if zeros <= correct - zeros { 0 } else { 1 };
                let worst = states
                    .iter()
                    .zip(&clocks)
                    .filter(|(_, &c)| c == minority)
                    .filter_map(|(s, _)| s.tally)
                    .max()
                    .unwrap_or(0);
                let some_false = states.iter().any(|s| s.last_verdict() == Some(false));
                t.check(worst <= bound && bound < n - f && some_false, || {
                    format!("n={n} f={f} f'={fp} split {zeros}/{}: minority tally {worst}, bound {bound}", correct - zeros)
                })?;
            }
            for strategy in ClockStrategy::ALL {
                for v in 0..2 {
                    let clocks = vec![v; n];
                    let after = run(
                        &proto,
                        &topo,
                        AdaptiveClock::initial(&clocks),
                        1,
                        0,
                        spec(strategy)?,
                    );
                    let states = &after.configurations[1].states[..correct];
                    t.check(
                        states.iter().all(|s| s.last_verdict() == Some(true)),
                        || format!("n={n} f={f} f'={fp} all {v} vs {strategy}: some verdict false"),
                    )?;
                }
            }
        }
    }
    Ok(())
}

/// Aggregated and full detectors agree at every node and round.
fn aggregate(t: &mut Tally, runs: u64) -> Result<(), String> {
    let proto = AdaptiveHerman::default();
    for seed in 0..runs {
        let n = 3 + 2 * (seed % 4) as usize;
        let topo = Topology::odd_ring(n).map_err(|e| e.to_string())?;
        let mut src = BitSource::new(seed, 3);
        let trace = run(
            &proto,
            &topo,
            AdaptiveHerman::initial(&random_ring(&mut src, n)),
            60,
            seed,
            None,
        );
        for c in &trace.configurations[1..] {
            for (id, s) in c.states.iter().enumerate() {
                let v = s.verdicts.last().map(|p| p.output);
                t.check(v.is_some_and(|v| v.full == v.aggregated), || {
                    format!("n={n} seed {seed} round {} node {id}: {v:?}", c.round)
                })?;
            }
        }
    }
    Ok(())
}
