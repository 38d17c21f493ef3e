// SPDX-License-Identifier: Apache-2.0

//! Acceptance gate: one pass/fail line per criterion. Every oracle here is
//! computed from first principles rather than through the code under test.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use stabsim::clock::{AdaptiveClock, ClockAdversary, ClockNode, ClockParams, ClockStrategy};
use stabsim::engine::{run, run_until, ByzantineSpec, Configuration, ExecutionTrace, Topology};
use stabsim::herman::{
    herman_step, leader, legal_transition, AdaptiveHerman, AdaptiveNode, BitSupply, DetectorKind,
    HermanProtocol, InputPolicy, RingBits,
};
use stabsim::history::{HistoryArray, PartialConfiguration};
use stabsim::randomness::{xor_combine, BitSource, RandWord};
use stabsim::scenario::{
    run_scenario, sweep, write_metrics, write_trace, InitSpec, Scenario, Summary,
};

type Outcome = Result<String, String>;

/// Token holders by direct comparison with the left neighbour.
fn oracle_tokens(bits: &[bool]) -> Vec<usize> {
    let n = bits.len();
    (0..n)
        .filter(|&i| bits[i] == bits[(i + n - 1) % n])
        .collect()
}

fn oracle_safe(bits: &[bool]) -> bool {
    oracle_tokens(bits).len() == 1
}

fn random_bits(seed: u64, stream: u64, n: usize) -> Vec<bool> {
    let mut src = BitSource::new(seed, stream);
    (0..n).map(|_| src.next_bit()).collect()
}

fn ring(bits: Vec<bool>) -> RingBits {
    RingBits::new(bits).expect("odd ring")
}

fn bits_of(c: &Configuration<AdaptiveNode>) -> Vec<bool> {
    c.states.iter().map(|s| s.bit).collect()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Slot `d` after round `i` (stored in configuration `i + 1`) equals the
/// configuration at the start of round `i - d`, for every `i >= d`, from
/// junk histories; and a complemented history installed after a warm-up is
/// still wrong at `d - 1` rounds later and right at `d`.
fn c1_history() -> Outcome {
    let mut checked = 0u64;
    for n in [3usize, 5, 7, 9] {
        let d = n / 2;
        let topo = Topology::odd_ring(n).unwrap();
        let proto = AdaptiveHerman::default();
        for seed in 0..40 {
            let clean = AdaptiveHerman::initial(&ring(random_bits(seed, 10, n)));
            let init = AdaptiveHerman::corrupt(&clean, seed + 1000);
            let trace = run(&proto, &topo, init, 4 * d as u64 + 4, seed, None);
            for i in d..trace.events.len() {
                let truth = bits_of(&trace.configurations[i - d]);
                for (id, s) in trace.configurations[i + 1].states.iter().enumerate() {
                    let seen = s.history.slot(d).states();
                    ensure(seen.as_ref() == Some(&truth), || {
                        format!("n={n} seed={seed} round {i} node {id}: {seen:?} != {truth:?}")
                    })?;
                    checked += 1;
                }
            }

            // Warm up, then overwrite slot j with the complement of the true
            // configuration j + 1 rounds back.
            let warm = d + 2;
            let pre = run(
                &proto,
                &topo,
                AdaptiveHerman::initial(&ring(random_bits(seed, 11, n))),
                warm as u64,
                seed,
                None,
            );
            let restart = pre.last();
            let states = restart
                .states
                .iter()
                .map(|s| {
                    let slots = (0..=d)
                        .map(|j| {
                            let past = bits_of(&pre.configurations[warm - 1 - j]);
                            PartialConfiguration::full(
                                restart.round - 1 - j as u64,
                                past.iter().map(|b| !b).collect(),
                            )
                        })
                        .collect();
                    AdaptiveNode {
                        history: HistoryArray::from_slots(slots),
                        ..s.clone()
                    }
                })
                .collect();
            let after = run(
                &proto,
                &topo,
                Configuration::new(restart.round, states),
                d as u64 + 1,
                seed + 7,
                None,
            );
            // relative round m is stored at index m + 1 and should show the
            // configuration d rounds before it
            let true_at = |m: usize| -> Vec<bool> {
                if m >= d {
                    bits_of(&after.configurations[m - d])
                } else {
                    bits_of(&pre.configurations[warm + m - d])
                }
            };
            let wrong_before = after.configurations[d]
                .states
                .iter()
                .any(|s| s.history.slot(d).states() != Some(true_at(d - 1)));
            let right_at_d = after.configurations[d + 1]
                .states
                .iter()
                .all(|s| s.history.slot(d).states() == Some(true_at(d)));
            ensure(wrong_before && right_at_d, || {
                format!("n={n} seed={seed}: constructed corruption wrong_at_d-1={wrong_before} right_at_d={right_at_d}")
            })?;
        }
    }
    Ok(format!(
        "{checked} slot checks over n in {{3,5,7,9}}, corruption visible exactly through round d-1"
    ))
}

/// Every safe 5-ring under every 6-step coin sequence. Non-holders get the
/// same coin as the holder or its complement, so the unread coins vary too.
fn c2_closure() -> Outcome {
    let n = 5;
    let safe: Vec<Vec<bool>> = (0u32..32)
        .map(|m| (0..n).map(|i| m >> i & 1 == 1).collect::<Vec<bool>>())
        .filter(|b| oracle_safe(b))
        .collect();
    ensure(safe.len() == 10, || {
        format!("expected 10 safe 5-rings, found {}", safe.len())
    })?;
    let mut transitions = 0;
    for start in &safe {
        for seq in 0u32..64 {
            for others_flip in [false, true] {
                let mut cur = start.clone();
                for t in 0..6 {
                    let coin = seq >> t & 1 == 1;
                    let holder = oracle_tokens(&cur)[0];
                    let coins: BTreeMap<usize, bool> = (0..n)
                        .map(|i| {
                            (
                                i,
                                if i == holder {
                                    coin
                                } else {
                                    coin ^ others_flip
                                },
                            )
                        })
                        .collect();
                    let next = herman_step(&ring(cur.clone()), &coins).unwrap().into_bits();
                    let moved = oracle_tokens(&next);
                    let legal_oracle =
                        moved.len() == 1 && (moved[0] == holder || moved[0] == (holder + 1) % n);
                    let legal_lib =
                        legal_transition(&ring(cur.clone()), &ring(next.clone())) == Ok(true);
                    ensure(legal_oracle && legal_lib, || {
                        format!("{cur:?} coins {seq:06b} step {t} -> {next:?}")
                    })?;
                    transitions += 1;
                    cur = next;
                }
            }
        }
    }
    Ok(format!(
        "{transitions} transitions from {} safe states, 0 counterexamples",
        safe.len()
    ))
}

/// Token count odd and non-increasing along 10^4 engine runs.
fn c3_parity() -> Outcome {
    let mut rounds = 0u64;
    for seed in 0..10_000u64 {
        let n = 3 + 2 * (seed % 5) as usize;
        let topo = Topology::odd_ring(n).unwrap();
        let init = Configuration::initial(random_bits(seed, 12, n));
        let trace = run(&HermanProtocol, &topo, init, 100, seed, None)
            .into_result()
            .map_err(|f| f.to_string())?;
        let counts: Vec<usize> = trace
            .configurations
            .iter()
            .map(|c| oracle_tokens(&c.states).len())
            .collect();
        for (t, w) in counts.windows(2).enumerate() {
            ensure(w[1] % 2 == 1 && w[1] <= w[0], || {
                format!("seed {seed} n={n} round {t}: {} -> {}", w[0], w[1])
            })?;
        }
        ensure(counts[0] % 2 == 1, || {
            format!("seed {seed}: even initial count")
        })?;
        rounds += 100;
    }
    Ok(format!("10000 runs, {rounds} rounds, 0 violations"))
}

fn full_verdict(s: &AdaptiveNode) -> Option<bool> {
    s.verdicts.last().map(|p| p.output.full)
}

/// Detection round and number of checked post-detection rounds.
fn c4_run(
    trace: &ExecutionTrace<AdaptiveNode>,
    bits: &[Vec<bool>],
) -> Result<(usize, usize), String> {
    let seed = trace.seed;
    let n = bits[0].len();
    ensure(trace.fault.is_none(), || {
        format!("seed {seed}: fault {:?}", trace.fault)
    })?;
    ensure(bits.iter().any(|b| oracle_safe(b)), || {
        format!("seed {seed}: never a single token")
    })?;
    let detected = trace
        .configurations
        .iter()
        .position(|c| c.states.iter().all(|s| full_verdict(s) == Some(true)))
        .ok_or_else(|| format!("seed {seed}: never detected"))?;
    let frozen = trace.meter_at(detected);
    let mut post = 0;
    for t in detected..bits.len() {
        ensure(trace.meter_at(t) == frozen, || {
            format!("seed {seed}: meter grew at round {t} after detection at {detected}")
        })?;
        let holder = oracle_tokens(&bits[t]);
        ensure(holder.len() == 1, || {
            format!("seed {seed}: {} tokens at round {t}", holder.len())
        })?;
        ensure(leader(&ring(bits[t].clone())) == Ok(holder[0]), || {
            format!("seed {seed}: leader() disagrees at {t}")
        })?;
        if t + 1 < bits.len() {
            let next = oracle_tokens(&bits[t + 1]);
            ensure(next == vec![(holder[0] + 1) % n], || {
                format!("seed {seed} round {t}: token {} -> {next:?}", holder[0])
            })?;
            post += 1;
        }
    }
    Ok((detected, post))
}

/// Number of verdicts checked.
fn c5_run(trace: &ExecutionTrace<AdaptiveNode>, bits: &[Vec<bool>]) -> Result<u64, String> {
    let seed = trace.seed;
    let d = bits[0].len() / 2;
    let conv = bits
        .iter()
        .position(|b| oracle_safe(b))
        .ok_or("no convergence")?;
    let mut checks = 0;
    // record t holds the verdict computed in round t - 1 about the
    // configuration at the start of round t - 1 - d
    for t in d + 1..trace.configurations.len() {
        let seen_safe = oracle_safe(&bits[t - 1 - d]);
        for (id, s) in trace.configurations[t].states.iter().enumerate() {
            let v = full_verdict(s);
            ensure(!(v == Some(true) && !seen_safe), || {
                format!("seed {seed} round {} node {id}: true on unsafe", t - 1)
            })?;
            if t > conv + d {
                ensure(v == Some(true), || {
                    format!("seed {seed} round {} node {id}: not detected", t - 1)
                })?;
            }
            checks += 1;
        }
    }
    Ok(checks)
}

/// Criteria 4 and 5 share the same 1000 runs; each trace is checked and
/// dropped as soon as it is produced. Returns both outcomes and the time
/// spent in the criterion-5 checks.
fn c4_c5() -> (Outcome, Outcome, Duration) {
    let n = 7;
    let topo = Topology::odd_ring(n).unwrap();
    let proto = AdaptiveHerman::new(InputPolicy::KeepBit, DetectorKind::Full, BitSupply::Local);
    let (mut worst, mut post, mut verdicts) = (0, 0, 0);
    let mut c4: Result<(), String> = Ok(());
    let mut c5: Result<(), String> = Ok(());
    let mut c5_time = Duration::ZERO;
    for seed in 0..1000u64 {
        let init = AdaptiveHerman::initial(&ring(random_bits(seed, 13, n)));
        let trace = run(&proto, &topo, init, 500, seed, None);
        let bits: Vec<Vec<bool>> = trace.configurations.iter().map(bits_of).collect();
        if c4.is_ok() {
            match c4_run(&trace, &bits) {
                Ok((d, p)) => {
                    worst = worst.max(d);
                    post += p;
                }
                Err(e) => c4 = Err(e),
            }
        }
        let t = Instant::now();
        if c5.is_ok() {
            match c5_run(&trace, &bits) {
                Ok(k) => verdicts += k,
                Err(e) => c5 = Err(e),
            }
        }
        c5_time += t.elapsed();
    }
    (
        c4.map(|_| format!("1000/1000 runs converged, latest detection at round {worst}, {post} post-detection rounds all +1 with frozen meter")),
        c5.map(|_| format!("{verdicts} verdicts, 0 soundness or completeness violations")),
        c5_time,
    )
}

/// Independent XOR: fold over the non-⊥ bit patterns.
fn oracle_xor(words: &[RandWord]) -> u64 {
    words
        .iter()
        .filter(|w| !w.is_bottom())
        .fold(0, |acc, w| acc ^ w.bits())
}

/// Four contributors, one correct word `u`. Exhaustive over adversary
/// vectors with up to two present words; three present words are sampled.
fn c6_xor() -> Outcome {
    let w = 8u8;
    let all = 256u64;
    let mut src = BitSource::new(99, 0);
    let mut maps = 0u64;
    let mut sampled = 0u64;
    for pattern in 0u8..8 {
        let present = pattern.count_ones();
        let vectors: Vec<Vec<u64>> = match present {
            0 => vec![vec![]],
            1 => (0..all).map(|a| vec![a]).collect(),
            2 => (0..all * all).map(|a| vec![a & 255, a >> 8]).collect(),
            _ => (0..4096)
                .map(|_| (0..3).map(|_| src.take(w)).collect())
                .collect(),
        };
        for vals in vectors {
            let mut it = vals.iter();
            let mut others = [RandWord::bottom(); 3];
            for (slot, w_slot) in others.iter_mut().enumerate() {
                if pattern >> slot & 1 == 1 {
                    *w_slot = RandWord::new(*it.next().unwrap(), w);
                }
            }
            let adversary = oracle_xor(&others);
            let positions = if present == 3 { 4 } else { 1 };
            for pos in 0..positions {
                let mut words = [RandWord::bottom(); 4];
                let mut rest = others.iter();
                for (i, slot) in words.iter_mut().enumerate() {
                    if i != pos {
                        *slot = *rest.next().unwrap();
                    }
                }
                let mut seen = [false; 256];
                for u in 0..all {
                    words[pos] = RandWord::new(u, w);
                    let out = xor_combine(&words);
                    ensure(!out.is_bottom() && out.bits() == u ^ adversary, || {
                        format!("{words:?} -> {out:?}")
                    })?;
                    ensure(
                        !std::mem::replace(&mut seen[out.bits() as usize], true),
                        || format!("collision at u={u} for {words:?}"),
                    )?;
                }
                maps += 1;
                sampled += u64::from(present == 3);
            }
        }
    }
    Ok(format!(
        "{maps} maps over W=8 are bijections ({} exhaustive, {sampled} sampled with 3 adversaries)",
        maps - sampled
    ))
}

fn clock_spec(
    topo: &Topology,
    params: ClockParams,
    byzantine: std::ops::Range<usize>,
    strategy: ClockStrategy,
    seed: u64,
) -> Option<ByzantineSpec<AdaptiveClock>> {
    if byzantine.is_empty() {
        return None;
    }
    Some(
        ByzantineSpec::new(
            topo,
            byzantine.collect(),
            params.f,
            Box::new(ClockAdversary::new(strategy, params, seed)),
        )
        .unwrap(),
    )
}

fn c7_tally() -> Outcome {
    let mut splits = 0;
    for n in 4..=10usize {
        let f = (n - 1) / 3;
        let params = ClockParams::new(n, f, 2, 1).unwrap();
        let topo = params.topology();
        let proto = AdaptiveClock::new(params);
        for fp in 0..=f {
            let correct = n - fp;
            let bound = (n - fp) / 2 + fp;
            ensure(bound < n - f, || {
                format!("n={n} f={f} f'={fp}: bound {bound} reaches n-f")
            })?;
            for zeros in 1..correct {
                let ones = correct - zeros;
                let clocks: Vec<u32> = (0..n)
                    .map(|i| u32::from(i >= zeros && i < correct))
                    .collect();
                let spec = clock_spec(&topo, params, correct..n, ClockStrategy::EchoReceiver, 0);
                let after = run(&proto, &topo, AdaptiveClock::initial(&clocks), 1, 0, spec);
                let states: &[ClockNode] = &after.configurations[1].states[..correct];
                for (i, s) in states.iter().enumerate() {
                    // echo-receiver agrees with everyone
                    let own_group = if clocks[i] == 0 { zeros } else { ones };
                    ensure(s.tally == Some(own_group + fp), || {
                        format!(
                            "n={n} f'={fp} split {zeros}/{ones} node {i}: tally {:?}",
                            s.tally
                        )
                    })?;
                }
                let minority = zeros.min(ones) + fp;
                ensure(minority <= bound, || {
                    format!("n={n} f'={fp}: minority tally {minority} > {bound}")
                })?;
                ensure(
                    states.iter().any(|s| s.last_verdict() == Some(false)),
                    || format!("n={n} f'={fp} split {zeros}/{ones}: every correct verdict true"),
                )?;
                splits += 1;
            }
            for strategy in ClockStrategy::ALL {
                for v in 0..2 {
                    let spec = clock_spec(&topo, params, correct..n, strategy, 3);
                    let after = run(
                        &proto,
                        &topo,
                        AdaptiveClock::initial(&vec![v; n]),
                        1,
                        0,
                        spec,
                    );
                    ensure(
                        after.configurations[1].states[..correct]
                            .iter()
                            .all(|s| s.last_verdict() == Some(true)),
                        || format!("n={n} f'={fp} all {v} vs {strategy}: a verdict is false"),
                    )?;
                }
            }
        }
    }
    Ok(format!(
        "{splits} two-group splits, all-equal true under every strategy"
    ))
}

fn c8_byzantine() -> Outcome {
    let mut runs = 0;
    for n in [4usize, 7] {
        let f = (n - 1) / 3;
        let params = ClockParams::new(n, f, 2, 1).unwrap();
        let topo = params.topology();
        let proto = AdaptiveClock::new(params);
        for strategy in ClockStrategy::ALL {
            for seed in 0..100 {
                let spec = clock_spec(&topo, params, n - f..n, strategy, seed);
                let trace = run(
                    &proto,
                    &topo,
                    AdaptiveClock::initial(&vec![0; n]),
                    100,
                    seed,
                    spec,
                )
                .into_result()
                .map_err(|e| e.to_string())?;
                for c in &trace.configurations {
                    let v = c.states[0].clock;
                    ensure(c.states[..n - f].iter().all(|s| s.clock == v), || {
                        format!(
                            "n={n} {strategy} seed {seed}: correct clocks split at round {}",
                            c.round
                        )
                    })?;
                }
                let flushed = trace.meter_at(2);
                for t in 2..trace.configurations.len() {
                    ensure(trace.meter_at(t) == flushed, || {
                        format!(
                            "n={n} {strategy} seed {seed}: bits drawn in round {}",
                            t - 1
                        )
                    })?;
                }
                runs += 1;
            }
        }
    }
    Ok(format!(
        "{runs} runs, correct clocks equal throughout, meter frozen from round 2"
    ))
}

fn c9_testbed() -> Outcome {
    let n = 4;
    let params = ClockParams::new(n, 0, 2, 1).unwrap();
    let topo = params.topology();
    let proto = AdaptiveClock::new(params);
    let agree =
        |c: &Configuration<ClockNode>| c.states.iter().all(|s| s.clock == c.states[0].clock);
    let mut slowest = 0;
    for assignment in 0u32..16 {
        let clocks: Vec<u32> = (0..n).map(|i| assignment >> i & 1).collect();
        for seed in 0..250 {
            let trace = run_until(
                &proto,
                &topo,
                AdaptiveClock::initial(&clocks),
                200,
                seed,
                None,
                agree,
            );
            let last = trace.last();
            ensure(agree(last), || {
                format!("clocks {clocks:?} seed {seed}: no agreement in 200 rounds")
            })?;
            slowest = slowest.max(last.round);
        }
    }
    Ok(format!("4000 runs agreed, slowest at round {slowest}"))
}

fn c10_aggregate() -> Outcome {
    let mut compared = 0u64;
    for seed in 0..1000u64 {
        let n = [3usize, 5, 7, 9][(seed % 4) as usize];
        let kind = if seed % 8 < 4 {
            DetectorKind::Full
        } else {
            DetectorKind::Aggregated
        };
        let topo = Topology::odd_ring(n).unwrap();
        let proto = AdaptiveHerman::new(InputPolicy::KeepBit, kind, BitSupply::Local);
        let init = AdaptiveHerman::initial(&ring(random_bits(seed, 14, n)));
        let trace = run(&proto, &topo, init, 60, seed, None);
        for c in &trace.configurations[1..] {
            for (id, s) in c.states.iter().enumerate() {
                let v = s
                    .verdicts
                    .last()
                    .map(|p| p.output)
                    .ok_or("missing verdict")?;
                ensure(v.full == v.aggregated, || {
                    format!("seed {seed} n={n} round {} node {id}: {v:?}", c.round)
                })?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} verdict pairs, 0 divergences"))
}

fn render(outs: &[stabsim::scenario::ScenarioOutput]) -> (Vec<u8>, Vec<u8>) {
    let mut trace = Vec::new();
    for o in outs {
        write_trace(&mut trace, &o.records).unwrap();
    }
    let rows: Vec<Summary> = outs.iter().map(|o| o.summary.clone()).collect();
    let mut metrics = Vec::new();
    write_metrics(&mut metrics, &rows).unwrap();
    (trace, metrics)
}

fn c11_determinism() -> Outcome {
    let mut scenarios = vec![
        Scenario::herman(7, 200, 42),
        Scenario::herman(3, 0, 1),
        Scenario {
            init: InitSpec::CorruptedHistory(None),
            ..Scenario::herman(9, 120, 5)
        },
        Scenario {
            supply: BitSupply::Collected,
            policy: InputPolicy::Ones,
            ..Scenario::herman(5, 150, 2)
        },
        Scenario {
            detector: DetectorKind::Aggregated,
            init: InitSpec::Worst,
            ..Scenario::herman(11, 300, 9)
        },
        Scenario {
            init: InitSpec::Worst,
            f: 0,
            ..Scenario::clock(4, 0, 100, 3)
        },
    ];
    for strategy in ClockStrategy::ALL {
        scenarios.push(Scenario {
            byz: strategy,
            width: 4,
            k: 5,
            init: InitSpec::Random(None),
            ..Scenario::clock(7, 2, 80, 11)
        });
    }
    let mut bytes = 0;
    for s in &scenarios {
        let a = render(&[run_scenario(s).map_err(|e| e.to_string())?]);
        let b = render(&[run_scenario(s).map_err(|e| e.to_string())?]);
        ensure(a == b, || format!("{s:?} differs between reruns"))?;
        bytes += a.0.len() + a.1.len();
    }
    let seeds: Vec<u64> = (0..24).collect();
    let a = render(&sweep(&Scenario::herman(7, 100, 0), &seeds).map_err(|e| e.to_string())?);
    let b = render(&sweep(&Scenario::herman(7, 100, 0), &seeds).map_err(|e| e.to_string())?);
    ensure(a == b, || "sweep output differs between reruns".to_string())?;
    Ok(format!(
        "{} scenarios and a 24-seed sweep rerun byte-identical ({bytes} bytes)",
        scenarios.len()
    ))
}

struct Gate {
    failed: Vec<usize>,
}

impl Gate {
    fn check(
        &mut self,
        id: usize,
        name: &str,
        budget: Option<Duration>,
        f: impl FnOnce() -> Outcome,
    ) {
        let t = Instant::now();
        let outcome = f();
        self.report(id, name, budget, outcome, t.elapsed());
    }

    fn report(
        &mut self,
        id: usize,
        name: &str,
        budget: Option<Duration>,
        outcome: Outcome,
        took: Duration,
    ) {
        let over = budget.filter(|b| took > *b);
        let line = match (&outcome, over) {
            (Ok(detail), None) => format!("PASS  criterion {id:>2} {name}: {detail} [{took:.2?}]"),
            (Ok(detail), Some(b)) => format!(
                "FAIL  criterion {id:>2} {name}: {detail} but took {took:.2?} (budget {b:?})"
            ),
            (Err(why), _) => format!("FAIL  criterion {id:>2} {name}: {why} [{took:.2?}]"),
        };
        if line.starts_with("FAIL") {
            self.failed.push(id);
        }
        println!("{line}");
    }
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let mut gate = Gate { failed: Vec::new() };
    gate.check(1, "exact-d history stabilization", secs(1), c1_history);
    gate.check(2, "closure over every coin sequence", secs(1), c2_closure);
    gate.check(3, "token parity and monotonicity", secs(10), c3_parity);

    let t = Instant::now();
    let (c4, c5, c5_time) = c4_c5();
    let c4_time = t.elapsed() - c5_time;
    gate.report(4, "randomization adaptiveness", secs(10), c4, c4_time);
    gate.report(5, "detector soundness and completeness", None, c5, c5_time);

    gate.check(6, "XOR surrogate masking", secs(1), c6_xor);
    gate.check(7, "tally bounds", secs(5), c7_tally);
    gate.check(
        8,
        "Byzantine closure and adaptiveness",
        secs(10),
        c8_byzantine,
    );
    gate.check(
        9,
        "testbed convergence without faults",
        secs(10),
        c9_testbed,
    );
    gate.check(10, "aggregation fidelity", None, c10_aggregate);
    gate.check(11, "determinism", None, c11_determinism);

    if gate.failed.is_empty() {
        println!("acceptance: 11/11 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!(
            "acceptance: {} failed: {:?}",
            gate.failed.len(),
            gate.failed
        );
        ExitCode::FAILURE
    }
}
