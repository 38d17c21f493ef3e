// SPDX-License-Identifier: Apache-2.0

//! Scenario runner: builds a protocol run from a flat description, turns the
//! execution into one trace record per configuration, and summarizes it.
//!
//! Record `t` describes the configuration at the start of round `t`: the
//! verdicts it holds were computed in round `t - 1`, `drawn` counts the bits
//! drawn in round `t - 1`, and `meter` is cumulative. Every summary column
//! is recomputed from the records alone.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{AdaptiveClock, ClockAdversary, ClockNode, ClockParams, ClockStrategy};
use crate::engine::{run, ByzantineSpec, Configuration, ExecutionTrace, NodeId, Topology};
use crate::herman::{
    tokens, AdaptiveHerman, AdaptiveNode, BitSupply, DetectorKind, InputPolicy, RingBits,
};
use crate::randomness::BitSource;

/// Stream reserved for drawing random initial states.
const INIT_STREAM: u64 = u64::MAX - 2;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Case {
    Herman,
    Clock,
}

/// How the initial configuration is built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitSpec {
    /// Uniform bits or clocks; `None` reuses the run seed.
    Random(Option<u64>),
    /// Explicit bits or clock values, node 0 first.
    List(Vec<u32>),
    /// All-equal bits for Herman (every node holds a token); a half/half
    /// clock split for the testbed.
    Worst,
    /// Random bits plus junk in every history slot, arm, store and verdict.
    CorruptedHistory(Option<u64>),
    /// All clocks zero.
    Sync,
}

impl FromStr for InitSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let seed = |a: Option<&str>| -> Result<Option<u64>, String> {
            a.map(|a| a.parse::<u64>().map_err(|e| format!("bad seed {a:?}: {e}")))
                .transpose()
        };
        match head {
            "random" => Ok(Self::Random(seed(arg)?)),
            "corrupted-history" => Ok(Self::CorruptedHistory(seed(arg)?)),
            "worst" if arg.is_none() => Ok(Self::Worst),
            "sync" if arg.is_none() => Ok(Self::Sync),
            "list" => {
                let a = arg.ok_or("list needs values, e.g. list:0,1,1")?;
                let vals = if a.contains(',') {
                    a.split(',').map(|v| v.trim().parse::<u32>()).collect::<Result<Vec<_>, _>>()
                } else {
                    a.chars().map(|c| c.to_string().parse::<u32>()).collect()
                };
                vals.map(Self::List).map_err(|e| format!("bad list {a:?}: {e}"))
            }
            _ => Err(format!(
                "unknown init {s:?} (expected random[:seed], list:..., worst, corrupted-history[:seed] or sync)"
            )),
        }
    }
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |f: &mut fmt::Formatter<'_>, name: &str, s: &Option<u64>| match s {
            Some(s) => write!(f, "{name}:{s}"),
            None => f.write_str(name),
        };
        match self {
            Self::Random(s) => opt(f, "random", s),
            Self::CorruptedHistory(s) => opt(f, "corrupted-history", s),
            Self::Worst => f.write_str("worst"),
            Self::Sync => f.write_str("sync"),
            Self::List(v) => {
                let vals: Vec<String> = v.iter().map(u32::to_string).collect();
                write!(f, "list:{}", vals.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub case: Case,
    pub n: usize,
    pub rounds: u64,
    pub seed: u64,
    pub init: InitSpec,
    /// Byzantine bound; the last `f` nodes are Byzantine.
    pub f: usize,
    pub byz: ClockStrategy,
    pub policy: InputPolicy,
    pub detector: DetectorKind,
    pub supply: BitSupply,
    /// Clock values.
    pub k: u32,
    /// Surrogate word width.
    pub width: u8,
}

impl Scenario {
    pub fn herman(n: usize, rounds: u64, seed: u64) -> Self {
        Self {
            case: Case::Herman,
            n,
            rounds,
            seed,
            init: InitSpec::Random(None),
            f: 0,
            byz: ClockStrategy::Silent,
            policy: InputPolicy::default(),
            detector: DetectorKind::default(),
            supply: BitSupply::default(),
            k: 2,
            width: 1,
        }
    }

    pub fn clock(n: usize, f: usize, rounds: u64, seed: u64) -> Self {
        Self {
            case: Case::Clock,
            f,
            init: InitSpec::Sync,
            byz: ClockStrategy::EchoReceiver,
            ..Self::herman(n, rounds, seed)
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        match self.case {
            Case::Herman => {
                Topology::odd_ring(self.n).map_err(|e| invalid(e.to_string()))?;
                if self.f != 0 {
                    return Err(invalid("the Herman ring has no Byzantine nodes; drop --f"));
                }
                if self.init == InitSpec::Sync {
                    return Err(invalid("sync is a clock init"));
                }
            }
            Case::Clock => {
                ClockParams::new(self.n, self.f, self.k, self.width)
                    .map_err(|e| invalid(e.to_string()))?;
                if matches!(self.init, InitSpec::CorruptedHistory(_)) {
                    return Err(invalid("corrupted-history is a Herman init"));
                }
            }
        }
        if let InitSpec::List(v) = &self.init {
            let k = if self.case == Case::Herman { 2 } else { self.k };
            if v.len() != self.n {
                return Err(invalid(format!(
                    "init list has {} values for {} nodes",
                    v.len(),
                    self.n
                )));
            }
            if let Some(bad) = v.iter().find(|&&x| x >= k) {
                return Err(invalid(format!("init value {bad} outside 0..{k}")));
            }
        }
        Ok(())
    }

    fn init_values(&self, k: u32) -> Vec<u32> {
        match &self.init {
            InitSpec::Random(s) | InitSpec::CorruptedHistory(s) => {
                let mut src = BitSource::new(s.unwrap_or(self.seed), INIT_STREAM);
                (0..self.n)
                    .map(|_| (src.take(32) % k as u64) as u32)
                    .collect()
            }
            InitSpec::List(v) => v.clone(),
            InitSpec::Worst if self.case == Case::Herman => vec![0; self.n],
            InitSpec::Worst => {
                let correct = self.n - self.f;
                (0..self.n)
                    .map(|i| u32::from(i >= correct / 2) % k)
                    .collect()
            }
            InitSpec::Sync => vec![0; self.n],
        }
    }

    fn byzantine(&self) -> Vec<NodeId> {
        (self.n - self.f..self.n).collect()
    }
}

/// One configuration of a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub case: Case,
    pub seed: u64,
    pub round: u64,
    /// Bits (Herman) or clock values, node 0 first.
    pub state: Vec<u32>,
    /// Token holders; empty for the clock.
    pub tokens: Vec<NodeId>,
    pub byzantine: Vec<NodeId>,
    /// Verdicts held by correct nodes; `None` before the first instance and
    /// at Byzantine nodes.
    pub verdicts: Vec<Option<bool>>,
    /// Bits drawn in the previous round.
    pub drawn: Vec<u64>,
    pub meter: Vec<u64>,
    /// One token, or all correct clocks equal.
    pub safe: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

impl TraceRecord {
    pub fn total_bits(&self) -> u64 {
        self.meter.iter().sum()
    }

    pub fn all_detected(&self) -> bool {
        self.verdicts
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.byzantine.contains(i))
            .all(|(_, v)| *v == Some(true))
    }
}

/// Metrics of one run, derived from its records.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub case: Case,
    pub seed: u64,
    pub n: usize,
    pub f: usize,
    pub rounds: u64,
    /// First round from which every configuration is safe.
    pub convergence_round: Option<u64>,
    /// First round at which every correct verdict is `true`.
    pub detection_round: Option<u64>,
    pub total_bits: u64,
    /// Bits drawn after the detection round.
    pub post_detection_bits: Option<u64>,
    pub fault: Option<String>,
}

impl Summary {
    pub fn from_records(records: &[TraceRecord]) -> Option<Summary> {
        let first = records.first()?;
        let last = records.last()?;
        let convergence_round = records
            .iter()
            .rposition(|r| !r.safe)
            .map_or(Some(0), |i| records.get(i + 1).map(|r| r.round));
        let detected = records.iter().find(|r| r.all_detected());
        Some(Summary {
            case: first.case,
            seed: first.seed,
            n: first.state.len(),
            f: first.byzantine.len(),
            rounds: last.round - first.round,
            convergence_round,
            detection_round: detected.map(|r| r.round),
            total_bits: last.total_bits(),
            post_detection_bits: detected.map(|r| last.total_bits() - r.total_bits()),
            fault: records.iter().find_map(|r| r.fault.clone()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioOutput {
    pub records: Vec<TraceRecord>,
    pub summary: Summary,
}

impl ScenarioOutput {
    pub fn faulted(&self) -> bool {
        self.summary.fault.is_some()
    }
}

fn records_of<S>(
    case: Case,
    trace: &ExecutionTrace<S>,
    state: impl Fn(&S) -> u32,
    verdict: impl Fn(&S) -> Option<bool>,
    safe: impl Fn(&[u32], &[NodeId]) -> bool,
) -> Vec<TraceRecord> {
    let byzantine: Vec<NodeId> = trace.byzantine.iter().copied().collect();
    let n = trace.topology.n();
    let mut out: Vec<TraceRecord> = trace
        .configurations
        .iter()
        .enumerate()
        .map(|(t, c)| {
            let values: Vec<u32> = c.states.iter().map(&state).collect();
            let toks = match case {
                Case::Herman => tokens(
                    &RingBits::new(values.iter().map(|&b| b == 1).collect()).expect("odd ring"),
                ),
                Case::Clock => Vec::new(),
            };
            let verdicts = c
                .states
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    if byzantine.contains(&i) {
                        None
                    } else {
                        verdict(s)
                    }
                })
                .collect();
            TraceRecord {
                case,
                seed: trace.seed,
                round: c.round,
                safe: safe(&values, &byzantine),
                state: values,
                tokens: toks,
                byzantine: byzantine.clone(),
                verdicts,
                drawn: if t == 0 {
                    vec![0; n]
                } else {
                    trace.events[t - 1].bits_drawn.clone()
                },
                meter: trace.meter_at(t),
                fault: None,
            }
        })
        .collect();
    if let (Some(fault), Some(last)) = (&trace.fault, out.last_mut()) {
        last.fault = Some(fault.to_string());
    }
    out
}

/// Runs the Herman case, returning the raw execution.
pub fn herman_trace(s: &Scenario) -> Result<ExecutionTrace<AdaptiveNode>, ScenarioError> {
    s.validate()?;
    if s.case != Case::Herman {
        return Err(invalid("not a Herman scenario"));
    }
    let topology = Topology::odd_ring(s.n).map_err(|e| invalid(e.to_string()))?;
    let bits = RingBits::new(s.init_values(2).into_iter().map(|b| b == 1).collect())
        .map_err(|e| invalid(e.to_string()))?;
    let mut initial = AdaptiveHerman::initial(&bits);
    if let InitSpec::CorruptedHistory(seed) = s.init {
        initial = AdaptiveHerman::corrupt(&initial, seed.unwrap_or(s.seed));
    }
    let proto = AdaptiveHerman::new(s.policy, s.detector, s.supply);
    Ok(run(&proto, &topology, initial, s.rounds, s.seed, None))
}

/// Runs the clock case, returning the raw execution.
pub fn clock_trace(s: &Scenario) -> Result<ExecutionTrace<ClockNode>, ScenarioError> {
    s.validate()?;
    if s.case != Case::Clock {
        return Err(invalid("not a clock scenario"));
    }
    let params = ClockParams::new(s.n, s.f, s.k, s.width).map_err(|e| invalid(e.to_string()))?;
    let topology = params.topology();
    let initial: Configuration<ClockNode> = AdaptiveClock::initial(&s.init_values(s.k));
    let byz = if s.f == 0 {
        None
    } else {
        let strategy = ClockAdversary::new(s.byz, params, s.seed);
        Some(
            ByzantineSpec::new(
                &topology,
                s.byzantine().into_iter().collect(),
                s.f,
                Box::new(strategy),
            )
            .map_err(|e| invalid(e.to_string()))?,
        )
    };
    Ok(run(
        &AdaptiveClock::new(params),
        &topology,
        initial,
        s.rounds,
        s.seed,
        byz,
    ))
}

fn correct_clocks_agree(values: &[u32], byzantine: &[NodeId]) -> bool {
    let mut correct = values
        .iter()
        .enumerate()
        .filter(|(i, _)| !byzantine.contains(i));
    match correct.next() {
        Some((_, v)) => correct.all(|(_, w)| w == v),
        None => true,
    }
}

pub fn run_scenario(s: &Scenario) -> Result<ScenarioOutput, ScenarioError> {
    let records = match s.case {
        Case::Herman => {
            let trace = herman_trace(s)?;
            let kind = s.detector;
            records_of(
                Case::Herman,
                &trace,
                |st| st.bit as u32,
                |st| st.verdicts.last().map(|p| p.output.pick(kind)),
                |v, _| {
                    v.iter()
                        .enumerate()
                        .filter(|&(i, b)| *b == v[(i + v.len() - 1) % v.len()])
                        .count()
                        == 1
                },
            )
        }
        Case::Clock => {
            let trace = clock_trace(s)?;
            records_of(
                Case::Clock,
                &trace,
                |st| st.clock,
                ClockNode::last_verdict,
                correct_clocks_agree,
            )
        }
    };
    let summary = Summary::from_records(&records).expect("a trace holds at least one record");
    Ok(ScenarioOutput { records, summary })
}

/// Runs `s` once per seed on the rayon pool; results come back in seed order.
pub fn sweep(s: &Scenario, seeds: &[u64]) -> Result<Vec<ScenarioOutput>, ScenarioError> {
    s.validate()?;
    seeds
        .par_iter()
        .map(|&seed| run_scenario(&s.with_seed(seed)))
        .collect()
}

/// One JSON object per line.
pub fn write_trace<W: Write>(mut out: W, records: &[TraceRecord]) -> Result<(), ScenarioError> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace(text: &str) -> Result<Vec<TraceRecord>, ScenarioError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(ScenarioError::from))
        .collect()
}

/// CSV with a header row.
pub fn write_metrics<W: Write>(out: W, rows: &[Summary]) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
