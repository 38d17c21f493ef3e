// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stabsim::clock::ClockStrategy;
use stabsim::herman::{BitSupply, DetectorKind, InputPolicy};
use stabsim::scenario::{
    run_scenario, sweep, write_metrics, write_trace, Case, InitSpec, Scenario, ScenarioError,
    ScenarioOutput, Summary,
};
use stabsim::verify::{verify, Suite};

const VIOLATION: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "stabsim",
    version,
    about = "Synchronous-round simulator for randomization-adaptive self-stabilization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Herman's token ring with detector-gated coins.
    Herman(RunArgs),
    /// Byzantine clock testbed fed by randomness surrogates.
    Clock(RunArgs),
    /// Brute-force verification suite.
    Verify {
        /// parity, closure, history, xor, tally, aggregate or all
        suite: String,
    },
    /// One run per seed; metrics (and traces) written in seed order.
    Sweep {
        #[arg(long, value_parser = parse_case, default_value = "herman")]
        case: Case,
        /// `a..b`, a comma list, or a count `N` meaning `0..N`.
        #[arg(long, value_parser = parse_seeds, default_value = "0..100")]
        seeds: Seeds,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Debug)]
struct Seeds(Vec<u64>);

#[derive(Args, Clone, Debug)]
struct RunArgs {
    /// Nodes (Herman: 7, clock: 4 by default).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 200)]
    rounds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// random[:seed], list:0,1,..., worst, corrupted-history[:seed], sync
    #[arg(long, value_parser = parse_init)]
    init: Option<InitSpec>,
    /// keep-bit, ones or zeros
    #[arg(long, value_parser = parse_policy, default_value = "keep-bit")]
    policy: InputPolicy,
    /// full or aggregated
    #[arg(long, value_parser = parse_detector, default_value = "full")]
    detector: DetectorKind,
    /// local or collected
    #[arg(long, value_parser = parse_supply, default_value = "local")]
    supply: BitSupply,
    /// Byzantine bound; the last f nodes misbehave.
    #[arg(long)]
    f: Option<usize>,
    /// silent, echo-receiver, random or flip
    #[arg(long, value_parser = parse_byz, default_value = "echo-receiver")]
    byz: ClockStrategy,
    /// Surrogate word width in bits.
    #[arg(long, default_value_t = 1)]
    width: u8,
    /// Clock values.
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    metrics: Option<PathBuf>,
}

impl RunArgs {
    fn scenario(&self, case: Case) -> Scenario {
        let base = match case {
            Case::Herman => Scenario::herman(self.n.unwrap_or(7), self.rounds, self.seed),
            Case::Clock => Scenario::clock(
                self.n.unwrap_or(4),
                self.f.unwrap_or(1),
                self.rounds,
                self.seed,
            ),
        };
        Scenario {
            init: self.init.clone().unwrap_or(base.init.clone()),
            f: self.f.unwrap_or(base.f),
            byz: self.byz,
            policy: self.policy,
            detector: self.detector,
            supply: self.supply,
            k: self.k,
            width: self.width,
            ..base
        }
    }
}

fn parse_case(s: &str) -> Result<Case, String> {
    match s {
        "herman" => Ok(Case::Herman),
        "clock" => Ok(Case::Clock),
        _ => Err(format!("unknown case {s:?} (expected herman or clock)")),
    }
}

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let num = |v: &str| {
        v.trim()
            .parse::<u64>()
            .map_err(|e| format!("bad seed {v:?}: {e}"))
    };
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if a >= b {
            return Err(format!("empty seed range {s}"));
        }
        return Ok(Seeds((a..b).collect()));
    }
    if s.contains(',') {
        return s.split(',').map(num).collect::<Result<_, _>>().map(Seeds);
    }
    Ok(Seeds((0..num(s)?).collect()))
}

fn parse_init(s: &str) -> Result<InitSpec, String> {
    s.parse()
}

fn parse_byz(s: &str) -> Result<ClockStrategy, String> {
    s.parse()
}

fn parse_policy(s: &str) -> Result<InputPolicy, String> {
    match s {
        "keep-bit" => Ok(InputPolicy::KeepBit),
        "ones" => Ok(InputPolicy::Ones),
        "zeros" => Ok(InputPolicy::Zeros),
        _ => Err(format!(
            "unknown policy {s:?} (expected keep-bit, ones or zeros)"
        )),
    }
}

fn parse_detector(s: &str) -> Result<DetectorKind, String> {
    match s {
        "full" => Ok(DetectorKind::Full),
        "aggregated" => Ok(DetectorKind::Aggregated),
        _ => Err(format!(
            "unknown detector {s:?} (expected full or aggregated)"
        )),
    }
}

fn parse_supply(s: &str) -> Result<BitSupply, String> {
    match s {
        "local" => Ok(BitSupply::Local),
        "collected" => Ok(BitSupply::Collected),
        _ => Err(format!(
            "unknown supply {s:?} (expected local or collected)"
        )),
    }
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new)
}

/// A run that was safe and later was not.
fn closure_broken(out: &ScenarioOutput) -> Option<u64> {
    let first = out.records.iter().position(|r| r.safe)?;
    out.records[first..]
        .iter()
        .find(|r| !r.safe)
        .map(|r| r.round)
}

fn status(out: &ScenarioOutput) -> Result<(), String> {
    if let Some(f) = &out.summary.fault {
        return Err(format!("seed {}: simulation fault: {f}", out.summary.seed));
    }
    if let Some(r) = closure_broken(out) {
        return Err(format!(
            "seed {}: safe configuration lost at round {r}",
            out.summary.seed
        ));
    }
    Ok(())
}

fn print_summary(s: &Summary) {
    let opt = |v: Option<u64>| v.map_or("-".to_string(), |v| v.to_string());
    println!(
        "seed {} n={} f={} rounds={} converged={} detected={} bits={} post-detection={}",
        s.seed,
        s.n,
        s.f,
        s.rounds,
        opt(s.convergence_round),
        opt(s.detection_round),
        s.total_bits,
        opt(s.post_detection_bits),
    );
}

fn emit(args: &RunArgs, outs: &[ScenarioOutput]) -> Result<(), ScenarioError> {
    if let Some(path) = &args.trace {
        let mut w = create(path)?;
        for o in outs {
            write_trace(&mut w, &o.records)?;
        }
        w.flush()?;
    }
    if let Some(path) = &args.metrics {
        let rows: Vec<Summary> = outs.iter().map(|o| o.summary.clone()).collect();
        write_metrics(create(path)?, &rows)?;
    }
    Ok(())
}

fn run_cases(args: &RunArgs, case: Case, seeds: Option<&[u64]>) -> ExitCode {
    let scenario = args.scenario(case);
    let outs = match seeds {
        None => run_scenario(&scenario).map(|o| vec![o]),
        Some(seeds) => sweep(&scenario, seeds),
    };
    let outs = match outs {
        Ok(o) => o,
        Err(e @ ScenarioError::Invalid(_)) => {
            eprintln!("stabsim: {e}");
            return ExitCode::from(USAGE);
        }
        Err(e) => {
            eprintln!("stabsim: {e}");
            return ExitCode::from(VIOLATION);
        }
    };
    if let Err(e) = emit(args, &outs) {
        eprintln!("stabsim: {e}");
        return ExitCode::from(VIOLATION);
    }
    let mut code = ExitCode::SUCCESS;
    for o in &outs {
        print_summary(&o.summary);
        if let Err(msg) = status(o) {
            eprintln!("stabsim: {msg}");
            code = ExitCode::from(VIOLATION);
        }
    }
    code
}

fn run_verify(suite: &str) -> ExitCode {
    let suites = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        match suite.parse::<Suite>() {
            Ok(s) => vec![s],
            Err(e) => {
                eprintln!("stabsim: {e}");
                return ExitCode::from(USAGE);
            }
        }
    };
    let mut code = ExitCode::SUCCESS;
    for s in suites {
        let report = verify(s);
        println!("{report}");
        if !report.passed() {
            code = ExitCode::from(VIOLATION);
        }
    }
    code
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match &cli.command {
        Command::Herman(args) => run_cases(args, Case::Herman, None),
        Command::Clock(args) => run_cases(args, Case::Clock, None),
        Command::Verify { suite } => run_verify(suite),
        Command::Sweep { case, seeds, run } => run_cases(run, *case, Some(&seeds.0)),
    }
}
