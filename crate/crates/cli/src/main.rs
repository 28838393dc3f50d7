//! `nmds`: encode files into shards, decode, repair, and analyze the
//! (2k,k) partitioned XOR code.
//!
//! Exit codes: 0 success, 1 operational failure, 2 usage error.

mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use nmds::analyzer::{
    tolerance_profile, verify_common_partition_claim, verify_distinct_partition_claim, verify_three_failure_claim,
};
use nmds::codec::{count_recovery_sets, enumerate_recovery_sets, CodeParams, NodeId, RecoveryClassification};
use nmds::repair::{count_repair_options, plan_single_repairs, RepairKind, RepairScenario};
use nmds::report::KvDocument;
use nmds::simulator::{compare_baselines, parse_trace, run_simulation, SimConfig, SimError};
use nmds::store::{RepairRequest, ShardDir};

use output::OutputArgs;

#[derive(Debug, Parser)]
#[command(name = "nmds", version, about = "(2k,k) partitioned XOR erasure code toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a file into stripes and write 2k shards per stripe plus a manifest
    Encode {
        /// Number of partitions (k >= 2)
        #[arg(long)]
        k: usize,
        /// Bytes per fragment
        #[arg(long, default_value_t = 4096)]
        fragment_size: usize,
        /// Input file
        #[arg(long = "in")]
        input: PathBuf,
        /// Directory for shards and manifest
        #[arg(long)]
        out_dir: PathBuf,
        /// Shard name prefix; defaults to the input file name
        #[arg(long)]
        basename: Option<String>,
    },
    /// Reassemble the original file from healthy shards
    Decode {
        /// Directory holding shards and manifest
        #[arg(long)]
        shards: PathBuf,
        /// Output file
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild missing or corrupt shards in place
    Repair {
        /// Directory holding shards and manifest
        #[arg(long)]
        shards: PathBuf,
        /// Node to rebuild (S1..Sk, P1..Pk); all damaged shards when omitted
        #[arg(long)]
        node: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// List missing or corrupt shards
    Scrub {
        /// Directory holding shards and manifest
        #[arg(long)]
        shards: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exhaustive fault-tolerance report
    Analyze {
        /// Number of partitions (2 <= k <= 12)
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Recovery-set and repair-option counts, cross-checked by enumeration
    Counts {
        /// Number of partitions (k >= 2)
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Round-based failure/repair simulation with baseline comparison
    Simulate {
        /// Number of partitions (k >= 2)
        #[arg(long)]
        k: Option<usize>,
        /// Number of rounds
        #[arg(long)]
        rounds: Option<u64>,
        /// Per-node, per-round failure probability
        #[arg(long)]
        fail_prob: Option<f64>,
        /// Scripted failures: one `<round> = <nodes>` line per round
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Failure RNG seed
        #[arg(long)]
        seed: Option<u64>,
        /// Repairs allowed per round (unlimited when omitted)
        #[arg(long)]
        repairs_per_round: Option<usize>,
        /// Independent stripes, each on its own 2k nodes
        #[arg(long)]
        groups: Option<usize>,
        /// Helper count of the MSR baseline; defaults to k+1
        #[arg(long)]
        msr_d: Option<usize>,
        /// Base configuration (`key = value` document); flags override it
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Failure(e)
    }
}

type CliResult = Result<(), CliError>;

fn usage(msg: impl ToString) -> CliError {
    CliError::Usage(msg.to_string())
}

fn params(k: usize) -> Result<CodeParams, CliError> {
    CodeParams::new(k).map_err(usage)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Encode { k, fragment_size, input, out_dir, basename } => encode(k, fragment_size, input, out_dir, basename),
        Command::Decode { shards, out } => decode(shards, out),
        Command::Repair { shards, node, output } => repair(shards, node, output),
        Command::Scrub { shards, output } => scrub(shards, output),
        Command::Analyze { k, output } => analyze(k, output),
        Command::Counts { k, output } => counts(k, output),
        Command::Simulate { k, rounds, fail_prob, trace, seed, repairs_per_round, groups, msr_d, config, output } => {
            let mut c = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    SimConfig::parse(&text).map_err(usage)?
                }
                None => SimConfig::new(k.ok_or_else(|| usage("--k is required without --config"))?),
            };
            if let Some(k) = k {
                c.k = k;
            }
            if let Some(rounds) = rounds {
                c.rounds = rounds;
            }
            if let Some(p) = fail_prob {
                c.fail_probability = p;
            }
            if let Some(path) = trace {
                let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                c.trace = parse_trace(&text).map_err(usage)?;
            }
            if let Some(seed) = seed {
                c.rng_seed = seed;
            }
            if let Some(n) = repairs_per_round {
                c.repairs_per_round = Some(n);
            }
            if let Some(g) = groups {
                c.groups = g;
            }
            simulate(c, msr_d, output)
        }
    }
}

fn encode(k: usize, fragment_size: usize, input: PathBuf, out_dir: PathBuf, basename: Option<String>) -> CliResult {
    let params = params(k)?;
    if fragment_size == 0 {
        return Err(usage("--fragment-size must be at least 1"));
    }
    let data = fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
    let basename = match basename {
        Some(b) => b,
        None => input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| usage("cannot derive a basename from --in; pass --basename"))?,
    };
    let store = ShardDir::encode_file(&out_dir, &basename, &data, &params, fragment_size).map_err(anyhow::Error::from)?;
    let m = store.manifest();
    println!(
        "encoded {} bytes into {} stripe(s) x {} shards (k = {}, fragment size {}) in {}",
        m.original_file_len,
        m.stripe_count,
        params.n(),
        k,
        fragment_size,
        out_dir.display()
    );
    Ok(())
}

fn decode(shards: PathBuf, out: PathBuf) -> CliResult {
    let store = ShardDir::open(&shards).map_err(anyhow::Error::from)?;
    let data = store.decode_file().map_err(anyhow::Error::from)?;
    fs::write(&out, &data).with_context(|| format!("writing {}", out.display()))?;
    println!("decoded {} bytes to {}", data.len(), out.display());
    Ok(())
}

fn repair(shards: PathBuf, node: Option<String>, output: OutputArgs) -> CliResult {
    let request = match node {
        Some(label) => RepairRequest::Node(label.parse::<NodeId>().map_err(usage)?),
        None => RepairRequest::All,
    };
    let store = ShardDir::open(&shards).map_err(anyhow::Error::from)?;
    if let RepairRequest::Node(node) = request {
        if node.partition >= store.manifest().k {
            return Err(usage(format!("node {node} does not exist for k = {}", store.manifest().k)));
        }
    }
    let outcome = store.repair(request).map_err(anyhow::Error::from)?;
    let bw = outcome.bandwidth;
    let k = outcome.k;

    let mut doc = KvDocument::new();
    doc.push("k", k).push("repairs", outcome.stripes.iter().map(|s| s.plans.len()).sum::<usize>());
    for s in &outcome.stripes {
        for (i, plan) in s.plans.iter().enumerate() {
            doc.push(
                format!("stripe.{}.repair.{i}", s.stripe),
                format!("{} <- {} ({}, {} units)", plan.target, plan.schedule_string(), plan.kind, plan.cost_fragments()),
            );
        }
    }
    doc.push("fragment_units", bw.fragment_units)
        .push("bandwidth_m", format!("{}/{} M", bw.fragment_units, k))
        .push("bytes_downloaded", bw.bytes_downloaded)
        .push("nodes_contacted", bw.nodes_contacted);

    output.emit(&doc, || {
        let mut text = String::new();
        if outcome.stripes.is_empty() {
            text.push_str("nothing to repair\n");
        }
        for s in &outcome.stripes {
            for plan in &s.plans {
                let helpers: Vec<String> = plan.helpers.iter().map(|h| h.to_string()).collect();
                text.push_str(&format!(
                    "stripe {}: {} <- {}  [{}; helpers {}]\n",
                    s.stripe,
                    plan.target,
                    plan.schedule_string(),
                    plan.kind,
                    helpers.join(",")
                ));
            }
        }
        text.push_str(&format!(
            "repair bandwidth: {} fragment units = {}/{} M ({} bytes), {} helper contacts\n",
            bw.fragment_units, bw.fragment_units, k, bw.bytes_downloaded, bw.nodes_contacted
        ));
        text
    });
    Ok(())
}

fn scrub(shards: PathBuf, output: OutputArgs) -> CliResult {
    let store = ShardDir::open(&shards).map_err(anyhow::Error::from)?;
    let report = store.scrub().map_err(anyhow::Error::from)?;
    let mut doc = KvDocument::new();
    doc.push("clean", report.is_clean());
    for (stripe, issues) in &report.stripes {
        let list: Vec<String> = issues.iter().map(|(n, i)| format!("{n}:{i}")).collect();
        doc.push(format!("stripe.{stripe}"), list.join(" "));
    }
    output.emit(&doc, || report.to_string());
    Ok(())
}

fn analyze(k: usize, output: OutputArgs) -> CliResult {
    let params = params(k)?;
    let profile = tolerance_profile(&params).map_err(anyhow::Error::from)?;
    let claims = [
        verify_three_failure_claim(&params).map_err(anyhow::Error::from)?,
        verify_distinct_partition_claim(&params).map_err(anyhow::Error::from)?,
        verify_common_partition_claim(&params).map_err(anyhow::Error::from)?,
    ];
    let mut doc = profile.to_kv();
    for c in &claims {
        doc.extend(c.to_kv());
    }
    output.emit(&doc, || {
        let mut text = profile.to_string();
        text.push_str("claims:\n");
        for c in &claims {
            text.push_str(&format!("  {c}\n"));
        }
        text
    });
    Ok(())
}

fn counts(k: usize, output: OutputArgs) -> CliResult {
    let params = params(k)?;
    let formula = count_recovery_sets(&params);
    let three = count_repair_options(&params, RepairScenario::RelatedAlive);
    let a = count_repair_options(&params, RepairScenario::StrategyA);
    let b = count_repair_options(&params, RepairScenario::StrategyB);

    let mut doc = KvDocument::new();
    doc.push("k", k)
        .push("recovery.strategy_i", formula.strategy_i)
        .push("recovery.strategy_ii", formula.strategy_ii)
        .push("recovery.total", formula.total)
        .push("repair.three_node", three)
        .push("repair.strategy_a", a)
        .push("repair.strategy_b", b);

    let enumerated = match enumerate_recovery_sets(&params) {
        Ok(sets) => {
            let i = sets.iter().filter(|s| matches!(s.classification, RecoveryClassification::StrategyI { .. })).count();
            let target_s = NodeId::systematic(0);
            let target_p = NodeId::parity(0);
            let all = params.all_nodes();
            let count = |target: NodeId, alive, kind| -> anyhow::Result<usize> {
                Ok(plan_single_repairs(&params, target, alive)?.iter().filter(|p| p.kind == kind).count())
            };
            let pair_alive = all.without(target_s).without(target_p);
            let e3 = count(target_s, all.without(target_s), RepairKind::ThreeNode)?;
            let ea = count(target_p, pair_alive, RepairKind::StrategyA)?;
            let eb = count(target_s, pair_alive, RepairKind::StrategyB)?;
            let matches = i as u128 == formula.strategy_i
                && (sets.len() - i) as u128 == formula.strategy_ii
                && e3 as u128 == three
                && ea as u128 == a
                && eb as u128 == b;
            doc.push("enumerated.recovery.strategy_i", i)
                .push("enumerated.recovery.strategy_ii", sets.len() - i)
                .push("enumerated.recovery.total", sets.len())
                .push("enumerated.repair.three_node", e3)
                .push("enumerated.repair.strategy_a", ea)
                .push("enumerated.repair.strategy_b", eb)
                .push("enumerated.matches", matches);
            Some((i, sets.len() - i, sets.len(), e3, ea, eb, matches))
        }
        Err(_) => {
            doc.push("enumerated", "skipped");
            None
        }
    };

    output.emit(&doc, || {
        let mut text = format!("k = {k} (n = {})\n", params.n());
        text.push_str(&format!(
            "recovery sets   strategy I: {}  strategy II: {}  total: {}\n",
            formula.strategy_i, formula.strategy_ii, formula.total
        ));
        text.push_str(&format!("repair options  three-node: {three}  strategy A: {a}  strategy B: {b}\n"));
        match enumerated {
            Some((i, ii, t, e3, ea, eb, ok)) => {
                text.push_str(&format!("enumerated      recovery {i}/{ii}/{t}  repair {e3}/{ea}/{eb}  "));
                text.push_str(if ok { "[matches formulas]\n" } else { "[MISMATCH]\n" });
            }
            None => text.push_str("enumeration skipped (k above bound)\n"),
        }
        text
    });
    Ok(())
}

fn simulate(config: SimConfig, msr_d: Option<usize>, output: OutputArgs) -> CliResult {
    config.validate().map_err(usage)?;
    let d = msr_d.unwrap_or(config.k + 1).min(2 * config.k - 1);
    let metrics = run_simulation(&config).map_err(|e| match e {
        SimError::InvalidConfig(_) => usage(e),
        other => CliError::Failure(other.into()),
    })?;
    let comparison = compare_baselines(&metrics, config.k, d).map_err(usage)?;
    let mut doc = metrics.to_kv();
    doc.extend(comparison.to_kv());
    output.emit(&doc, || format!("{metrics}\n{comparison}"));
    Ok(())
}
