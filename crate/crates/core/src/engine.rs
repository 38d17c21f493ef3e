// SPDX-License-Identifier: Apache-2.0

//! Deterministic synchronous-round execution.
//!
//! A round runs in three phases:
//!
//! 1. every honest node draws its randomness for the round (metered),
//! 2. every node computes its outgoing messages from the round-start
//!    configuration, Byzantine nodes through their strategy,
//! 3. all messages are delivered at once and every honest node transitions.
//!
//! Byzantine strategies see the round-start configuration and the messages of
//! earlier rounds, never anything produced in the current round.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::randomness::{BitSource, RandInput, RandMeter};

pub type NodeId = usize;
pub type Round = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Ring,
    Complete,
}

/// Communication graph over nodes `0..n`.
///
/// On a ring, node `i`'s left neighbour is `i - 1` and its right neighbour is
/// `i + 1`, both mod `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    kind: TopologyKind,
    n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("node count must be positive")]
    Empty,
    #[error("ring of {0} nodes: this protocol needs an odd ring of at least 3")]
    EvenOrSmallRing(usize),
    #[error("Byzantine nodes require a complete communication graph")]
    NotComplete,
    #[error("n = {n} is below 3f + 1 for f = {f}")]
    TooManyFaults { n: usize, f: usize },
    #[error("{members} Byzantine members exceed the bound f = {f}")]
    TooManyMembers { members: usize, f: usize },
    #[error("node {0} is out of range")]
    UnknownNode(NodeId),
    #[error("{0}")]
    Invalid(String),
}

impl Topology {
    pub fn ring(n: usize) -> Result<Self, ConfigError> {
        if n == 0 {
            return Err(ConfigError::Empty);
        }
        Ok(Self {
            kind: TopologyKind::Ring,
            n,
        })
    }

    pub fn complete(n: usize) -> Result<Self, ConfigError> {
        if n == 0 {
            return Err(ConfigError::Empty);
        }
        Ok(Self {
            kind: TopologyKind::Complete,
            n,
        })
    }

    /// An odd ring with at least three nodes.
    pub fn odd_ring(n: usize) -> Result<Self, ConfigError> {
        if n < 3 || n.is_multiple_of(2) {
            return Err(ConfigError::EvenOrSmallRing(n));
        }
        Self::ring(n)
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diameter(&self) -> usize {
        diameter(self)
    }

    pub fn left(&self, id: NodeId) -> NodeId {
        (id + self.n - 1) % self.n
    }

    pub fn right(&self, id: NodeId) -> NodeId {
        (id + 1) % self.n
    }

    pub fn neighbors(&self, id: NodeId) -> Vec<NodeId> {
        match self.kind {
            TopologyKind::Complete => (0..self.n).filter(|&j| j != id).collect(),
            TopologyKind::Ring => {
                let mut out = vec![self.left(id), self.right(id)];
                out.sort_unstable();
                out.dedup();
                out.retain(|&j| j != id);
                out
            }
        }
    }

    /// Whether `from` may send to `to`. Self-delivery is always allowed.
    pub fn can_send(&self, from: NodeId, to: NodeId) -> bool {
        if from >= self.n || to >= self.n {
            return false;
        }
        from == to
            || match self.kind {
                TopologyKind::Complete => true,
                TopologyKind::Ring => to == self.left(from) || to == self.right(from),
            }
    }
}

/// Hop diameter: `floor(n / 2)` on a ring, 1 on a complete graph of two or
/// more nodes.
pub fn diameter(topology: &Topology) -> usize {
    match topology.kind {
        TopologyKind::Ring => topology.n / 2,
        TopologyKind::Complete => usize::from(topology.n > 1),
    }
}

/// System state at the start of a round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration<S> {
    pub round: Round,
    pub states: Vec<S>,
}

impl<S> Configuration<S> {
    pub fn new(round: Round, states: Vec<S>) -> Self {
        Self { round, states }
    }

    pub fn initial(states: Vec<S>) -> Self {
        Self::new(0, states)
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }
}

/// Messages delivered to one node in one round, keyed by sender.
pub type Inbox<M> = BTreeMap<NodeId, M>;

/// What a node knows about itself while running a round.
#[derive(Clone, Copy, Debug)]
pub struct NodeCtx<'a> {
    pub id: NodeId,
    pub round: Round,
    pub topology: &'a Topology,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ProtocolFault(pub String);

impl ProtocolFault {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

/// A per-node transition function, split into the three round phases.
pub trait Protocol {
    type State: Clone + fmt::Debug + PartialEq;
    type Message: Clone + fmt::Debug;

    /// Randomness the node draws at the start of the round. Every drawn bit
    /// must be charged to `meter`.
    fn draw(
        &self,
        ctx: NodeCtx<'_>,
        state: &Self::State,
        source: &mut BitSource,
        meter: &mut RandMeter,
    ) -> RandInput;

    /// Outgoing messages, computed from the round-start state only.
    fn send(
        &self,
        ctx: NodeCtx<'_>,
        state: &Self::State,
        rand: &RandInput,
    ) -> Vec<(NodeId, Self::Message)>;

    fn transition(
        &self,
        ctx: NodeCtx<'_>,
        state: &Self::State,
        inbox: &Inbox<Self::Message>,
        rand: &RandInput,
    ) -> Result<Self::State, ProtocolFault>;

    /// Encoded size of a message, for reporting.
    fn wire_size(&self, _msg: &Self::Message) -> usize {
        0
    }
}

/// One delivered message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery<M> {
    pub from: NodeId,
    pub to: NodeId,
    pub msg: M,
}

/// Everything delivered in one round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundMessages<M> {
    pub round: Round,
    pub deliveries: Vec<Delivery<M>>,
}

/// The adversary's view when choosing round-`round` behaviour.
pub struct AdversaryView<'a, P: Protocol> {
    pub round: Round,
    pub topology: &'a Topology,
    pub config: &'a Configuration<P::State>,
    /// Messages of rounds `< round`.
    pub observed: &'a [RoundMessages<P::Message>],
}

/// Behaviour of the Byzantine nodes.
pub trait ByzantineStrategy<P: Protocol> {
    /// Message `from` sends to `to` this round; `None` sends nothing.
    fn message(
        &mut self,
        view: &AdversaryView<'_, P>,
        from: NodeId,
        to: NodeId,
    ) -> Option<P::Message>;

    /// State stored at `node` after the round.
    fn state(&mut self, view: &AdversaryView<'_, P>, node: NodeId) -> P::State {
        view.config.states[node].clone()
    }
}

/// The Byzantine members, their bound `f`, and the strategy driving them.
pub struct ByzantineSpec<P: Protocol> {
    members: BTreeSet<NodeId>,
    f: usize,
    strategy: Box<dyn ByzantineStrategy<P> + Send>,
    observed: Vec<RoundMessages<P::Message>>,
}

impl<P: Protocol> ByzantineSpec<P> {
    pub fn new(
        topology: &Topology,
        members: BTreeSet<NodeId>,
        f: usize,
        strategy: Box<dyn ByzantineStrategy<P> + Send>,
    ) -> Result<Self, ConfigError> {
        check_fault_bound(topology, f)?;
        if members.len() > f {
            return Err(ConfigError::TooManyMembers {
                members: members.len(),
                f,
            });
        }
        if let Some(&bad) = members.iter().find(|&&m| m >= topology.n()) {
            return Err(ConfigError::UnknownNode(bad));
        }
        Ok(Self {
            members,
            f,
            strategy,
            observed: Vec::new(),
        })
    }

    pub fn members(&self) -> &BTreeSet<NodeId> {
        &self.members
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn is_byzantine(&self, node: NodeId) -> bool {
        self.members.contains(&node)
    }

    /// Messages the adversary has observed so far.
    pub fn observed(&self) -> &[RoundMessages<P::Message>] {
        &self.observed
    }
}

/// Byzantine scenarios need a complete graph and `n >= 3f + 1`.
pub fn check_fault_bound(topology: &Topology, f: usize) -> Result<(), ConfigError> {
    if f > 0 && topology.kind() != TopologyKind::Complete {
        return Err(ConfigError::NotComplete);
    }
    if topology.n() < 3 * f + 1 {
        return Err(ConfigError::TooManyFaults { n: topology.n(), f });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum SimFault {
    #[error("round {round}: configuration has {got} states for {n} nodes")]
    WrongSize { round: Round, n: usize, got: usize },
    #[error("round {round}: no randomness supplied for node {node}")]
    MissingRandomness { round: Round, node: NodeId },
    #[error("round {round}: node {from} cannot send to {to}")]
    BadDestination {
        round: Round,
        from: NodeId,
        to: NodeId,
    },
    #[error("round {round}: node {from} sent twice to {to}")]
    DuplicateMessage {
        round: Round,
        from: NodeId,
        to: NodeId,
    },
    #[error("round {round}: node {node}: {reason}")]
    Protocol {
        round: Round,
        node: NodeId,
        reason: String,
    },
}

/// Result of one engine step.
#[derive(Clone, Debug)]
pub struct StepOutcome<S> {
    pub config: Configuration<S>,
    pub messages: usize,
    pub bytes: usize,
}

/// Runs one synchronous round.
///
/// `rand_inputs[i]` is node `i`'s randomness; entries of Byzantine nodes are
/// ignored.
pub fn step<P: Protocol>(
    protocol: &P,
    topology: &Topology,
    config: &Configuration<P::State>,
    rand_inputs: &[RandInput],
    mut byz: Option<&mut ByzantineSpec<P>>,
) -> Result<StepOutcome<P::State>, SimFault> {
    let n = topology.n();
    let round = config.round;
    if config.n() != n {
        return Err(SimFault::WrongSize {
            round,
            n,
            got: config.n(),
        });
    }
    let is_byz = |node: NodeId, byz: &Option<&mut ByzantineSpec<P>>| {
        byz.as_ref().is_some_and(|b| b.is_byzantine(node))
    };
    for node in 0..n {
        if !is_byz(node, &byz) && node >= rand_inputs.len() {
            return Err(SimFault::MissingRandomness { round, node });
        }
    }

    let mut inboxes: Vec<Inbox<P::Message>> = vec![BTreeMap::new(); n];
    let mut deliveries = Vec::new();
    let mut bytes = 0usize;

    let mut deliver =
        |from: NodeId, to: NodeId, msg: P::Message, inboxes: &mut Vec<Inbox<P::Message>>| {
            if !topology.can_send(from, to) {
                return Err(SimFault::BadDestination { round, from, to });
            }
            if inboxes[to].contains_key(&from) {
                return Err(SimFault::DuplicateMessage { round, from, to });
            }
            bytes += protocol.wire_size(&msg);
            inboxes[to].insert(from, msg);
            Ok(())
        };

    // Byzantine messages first, from a view that cannot contain round-`round`
    // honest output.
    if let Some(spec) = byz.as_deref_mut() {
        let ByzantineSpec {
            members,
            strategy,
            observed,
            ..
        } = spec;
        let view = AdversaryView {
            round,
            topology,
            config,
            observed,
        };
        for &from in members.iter() {
            for to in topology.neighbors(from) {
                if let Some(msg) = strategy.message(&view, from, to) {
                    deliver(from, to, msg, &mut inboxes)?;
                }
            }
        }
    }

    for (from, state) in config.states.iter().enumerate() {
        if is_byz(from, &byz) {
            continue;
        }
        let ctx = NodeCtx {
            id: from,
            round,
            topology,
        };
        for (to, msg) in protocol.send(ctx, state, &rand_inputs[from]) {
            deliver(from, to, msg, &mut inboxes)?;
        }
    }

    let messages = inboxes.iter().map(BTreeMap::len).sum();
    let mut next = Vec::with_capacity(n);
    for (node, state) in config.states.iter().enumerate() {
        if is_byz(node, &byz) {
            // placeholder; replaced below once the adversary view is built
            next.push(state.clone());
            continue;
        }
        let ctx = NodeCtx {
            id: node,
            round,
            topology,
        };
        let s = protocol
            .transition(ctx, state, &inboxes[node], &rand_inputs[node])
            .map_err(|e| SimFault::Protocol {
                round,
                node,
                reason: e.0,
            })?;
        next.push(s);
    }

    if let Some(spec) = byz {
        {
            let ByzantineSpec {
                members,
                strategy,
                observed,
                ..
            } = &mut *spec;
            let view = AdversaryView {
                round,
                topology,
                config,
                observed,
            };
            for &node in members.iter() {
                next[node] = strategy.state(&view, node);
            }
        }
        for (to, inbox) in inboxes.into_iter().enumerate() {
            for (from, msg) in inbox {
                deliveries.push(Delivery { from, to, msg });
            }
        }
        spec.observed.push(RoundMessages { round, deliveries });
    }

    Ok(StepOutcome {
        config: Configuration::new(round + 1, next),
        messages,
        bytes,
    })
}

/// Per-round bookkeeping recorded alongside the configurations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundEvent {
    pub round: Round,
    /// Bits drawn by each node this round.
    pub bits_drawn: Vec<u64>,
    /// Cumulative meter after the round.
    pub meter: Vec<u64>,
    pub messages: usize,
    pub bytes: usize,
}

/// Finite execution prefix: `configurations[i]` is the state at the start of
/// round `i`, and `events[i]` describes round `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace<S> {
    pub topology: Topology,
    pub seed: u64,
    pub byzantine: BTreeSet<NodeId>,
    pub configurations: Vec<Configuration<S>>,
    pub events: Vec<RoundEvent>,
    pub fault: Option<SimFault>,
}

impl<S> ExecutionTrace<S> {
    pub fn last(&self) -> &Configuration<S> {
        self.configurations
            .last()
            .expect("a trace always holds its initial configuration")
    }

    /// Cumulative meter at the start of round `t` (all zeros at `t = 0`).
    pub fn meter_at(&self, t: usize) -> Vec<u64> {
        if t == 0 {
            vec![0; self.topology.n()]
        } else {
            self.events[t - 1].meter.clone()
        }
    }

    pub fn total_bits(&self) -> u64 {
        self.events.last().map_or(0, |e| e.meter.iter().sum())
    }

    pub fn into_result(self) -> Result<Self, SimFault> {
        match self.fault.clone() {
            Some(f) => Err(f),
            None => Ok(self),
        }
    }
}

/// Runs `rounds` rounds from `initial`, each node drawing from its own
/// stream of `seed`.
///
/// A step fault stops the run; the fault is recorded in the trace together
/// with every configuration reached before it.
pub fn run<P: Protocol>(
    protocol: &P,
    topology: &Topology,
    initial: Configuration<P::State>,
    rounds: u64,
    seed: u64,
    byz: Option<ByzantineSpec<P>>,
) -> ExecutionTrace<P::State> {
    run_until(protocol, topology, initial, rounds, seed, byz, |_| false)
}

/// Like [`run`], but stops early at the first configuration satisfying
/// `stop` (the initial one included). The prefix run is identical to the
/// corresponding prefix of a full run.
pub fn run_until<P: Protocol>(
    protocol: &P,
    topology: &Topology,
    initial: Configuration<P::State>,
    rounds: u64,
    seed: u64,
    mut byz: Option<ByzantineSpec<P>>,
    stop: impl Fn(&Configuration<P::State>) -> bool,
) -> ExecutionTrace<P::State> {
    let n = topology.n();
    let mut sources: Vec<BitSource> = (0..n).map(|i| BitSource::for_node(seed, i)).collect();
    let mut meter = RandMeter::new(n);
    let byzantine = byz.as_ref().map(|b| b.members.clone()).unwrap_or_default();
    let mut trace = ExecutionTrace {
        topology: *topology,
        seed,
        byzantine: byzantine.clone(),
        configurations: vec![initial],
        events: Vec::with_capacity(rounds as usize),
        fault: None,
    };

    for _ in 0..rounds {
        let config = trace.last();
        if stop(config) {
            break;
        }
        if config.n() != n {
            trace.fault = Some(SimFault::WrongSize {
                round: config.round,
                n,
                got: config.n(),
            });
            break;
        }
        let before = meter.clone();
        let rand_inputs: Vec<RandInput> = config
            .states
            .iter()
            .enumerate()
            .map(|(id, state)| {
                if byzantine.contains(&id) {
                    RandInput::new()
                } else {
                    let ctx = NodeCtx {
                        id,
                        round: config.round,
                        topology,
                    };
                    protocol.draw(ctx, state, &mut sources[id], &mut meter)
                }
            })
            .collect();
        match step(protocol, topology, config, &rand_inputs, byz.as_mut()) {
            Ok(outcome) => {
                trace.events.push(RoundEvent {
                    round: config.round,
                    bits_drawn: (0..n).map(|i| meter.get(i) - before.get(i)).collect(),
                    meter: meter.counts().to_vec(),
                    messages: outcome.messages,
                    bytes: outcome.bytes,
                });
                trace.configurations.push(outcome.config);
            }
            Err(fault) => {
                trace.fault = Some(fault);
                break;
            }
        }
    }
    trace
}
