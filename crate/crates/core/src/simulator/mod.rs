//! Round-based failure and repair simulation.
//!
//! Each round: scripted failures for the round are applied, then every node
//! of every group draws one value from a SplitMix64 generator seeded with
//! `rng_seed` (state = seed; `state += 0x9E3779B97F4A7C15`, then the usual
//! two xor-shift-multiply steps) and fails if the draw is below
//! `floor(fail_probability · 2^64)`. Draws are made for every (group, node)
//! in canonical order whenever `fail_probability > 0`, alive or not, so a
//! trace can be reproduced from the seed alone. A group whose survivors can
//! no longer decode the file records a data-loss event and is frozen. Then
//! up to `repairs_per_round` repairs run, cheapest plan first, and complete
//! within the round.

mod config;

use std::fmt;

use num_rational::Ratio;
use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use thiserror::Error;

use crate::analyzer::{is_recoverable, ErasurePattern};
use crate::codec::{encode_stripe, CodeParams, NodeId, NodeSet, Packet, Stripe};
use crate::repair::{best_single_repair, execute_plan, msr_repair_units, naive_mds_repair_units, RepairError, RepairPlan};
use crate::report::KvDocument;

pub use config::{parse_trace, FailureTrace, RepairPolicy, SimConfig};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("group {group}: repaired packet for {node} differs from the original")]
    RepairMismatch { group: usize, node: NodeId },
    #[error(transparent)]
    Repair(#[from] RepairError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoundLog {
    pub round: u64,
    pub failures: u64,
    pub repairs: u64,
    pub fragment_units: u64,
    pub data_loss_events: u64,
    /// Failed nodes still awaiting repair at the end of the round.
    pub pending: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimMetrics {
    pub k: usize,
    pub fragment_size: usize,
    pub failures_injected: u64,
    pub repairs_completed: u64,
    pub fragment_units_downloaded: u64,
    pub bytes_downloaded: u64,
    pub helpers_contacted_total: u64,
    pub data_loss_events: u64,
    pub rounds: Vec<RoundLog>,
}

impl SimMetrics {
    pub fn to_kv(&self) -> KvDocument {
        let mut doc = KvDocument::new();
        doc.push("k", self.k)
            .push("fragment_size", self.fragment_size)
            .push("rounds", self.rounds.len())
            .push("failures_injected", self.failures_injected)
            .push("repairs_completed", self.repairs_completed)
            .push("fragment_units_downloaded", self.fragment_units_downloaded)
            .push("bytes_downloaded", self.bytes_downloaded)
            .push("helpers_contacted_total", self.helpers_contacted_total)
            .push("data_loss_events", self.data_loss_events);
        for r in &self.rounds {
            doc.push(
                format!("round.{}", r.round),
                format!(
                    "failures={} repairs={} units={} losses={} pending={}",
                    r.failures, r.repairs, r.fragment_units, r.data_loss_events, r.pending
                ),
            );
        }
        doc
    }
}

impl fmt::Display for SimMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rounds                {}", self.rounds.len())?;
        writeln!(f, "failures injected     {}", self.failures_injected)?;
        writeln!(f, "repairs completed     {}", self.repairs_completed)?;
        writeln!(f, "fragment units        {} ({}/{} M)", self.fragment_units_downloaded, self.fragment_units_downloaded, self.k)?;
        writeln!(f, "bytes downloaded      {}", self.bytes_downloaded)?;
        writeln!(f, "helpers contacted     {}", self.helpers_contacted_total)?;
        writeln!(f, "data loss events      {}", self.data_loss_events)
    }
}

struct Group {
    original: Stripe,
    failed: NodeSet,
    frozen: bool,
}

fn failure_threshold(probability: f64) -> u128 {
    (probability * 18_446_744_073_709_551_616.0) as u128
}

pub fn run_simulation(config: &SimConfig) -> Result<SimMetrics, SimError> {
    let params = config.validate()?;
    let mut failure_rng = SplitMix64::seed_from_u64(config.rng_seed);
    let threshold = failure_threshold(config.fail_probability);
    // stripe contents come from a separate stream so they never shift the
    // failure draws
    let mut content_rng = SplitMix64::seed_from_u64(config.rng_seed ^ 0xC0DE_C0DE_C0DE_C0DE);
    let mut groups: Vec<Group> = (0..config.groups)
        .map(|_| {
            let fragments: Vec<Packet> = (0..params.k())
                .map(|_| {
                    let mut bytes = vec![0u8; config.fragment_size];
                    content_rng.fill_bytes(&mut bytes);
                    Packet::new(bytes)
                })
                .collect();
            let original = encode_stripe(&params, &fragments).expect("valid fragments");
            Group { original, failed: NodeSet::empty(), frozen: false }
        })
        .collect();

    let mut metrics = SimMetrics {
        k: params.k(),
        fragment_size: config.fragment_size,
        failures_injected: 0,
        repairs_completed: 0,
        fragment_units_downloaded: 0,
        bytes_downloaded: 0,
        helpers_contacted_total: 0,
        data_loss_events: 0,
        rounds: Vec::with_capacity(config.rounds as usize),
    };

    for round in 0..config.rounds {
        let mut log = RoundLog { round, ..RoundLog::default() };
        let scripted = config.trace.get(&round).map(Vec::as_slice).unwrap_or(&[]);
        for group in groups.iter_mut() {
            for &node in scripted {
                if !group.frozen && !group.failed.contains(node) {
                    group.failed.insert(node);
                    log.failures += 1;
                }
            }
            if threshold > 0 {
                for node in params.nodes() {
                    let draw = failure_rng.next_u64() as u128;
                    if draw < threshold && !group.frozen && !group.failed.contains(node) {
                        group.failed.insert(node);
                        log.failures += 1;
                    }
                }
            }
        }
        for group in groups.iter_mut().filter(|g| !g.frozen) {
            if !is_recoverable(&params, &ErasurePattern(group.failed)) {
                group.frozen = true;
                log.data_loss_events += 1;
            }
        }

        let mut budget = config.repairs_per_round.unwrap_or(usize::MAX);
        for (index, group) in groups.iter_mut().enumerate().filter(|(_, g)| !g.frozen) {
            while budget > 0 && !group.failed.is_empty() {
                let plan = cheapest_plan(&params, group.failed)?;
                let rebuilt = execute_plan(&plan, &group.original)?;
                if &rebuilt != group.original.packet(plan.target) {
                    return Err(SimError::RepairMismatch { group: index, node: plan.target });
                }
                group.failed.remove(plan.target);
                budget -= 1;
                log.repairs += 1;
                log.fragment_units += plan.cost_fragments() as u64;
                metrics.helpers_contacted_total += plan.helpers.len() as u64;
            }
        }
        log.pending = groups.iter().filter(|g| !g.frozen).map(|g| g.failed.len() as u64).sum();

        metrics.failures_injected += log.failures;
        metrics.repairs_completed += log.repairs;
        metrics.fragment_units_downloaded += log.fragment_units;
        metrics.data_loss_events += log.data_loss_events;
        metrics.rounds.push(log);
    }
    metrics.bytes_downloaded = metrics.fragment_units_downloaded * config.fragment_size as u64;
    Ok(metrics)
}

/// Cheapest plan over all failed nodes; ties go to the first node.
fn cheapest_plan(params: &CodeParams, failed: NodeSet) -> Result<RepairPlan, RepairError> {
    let alive = failed.complement(params);
    let mut best: Option<RepairPlan> = None;
    for target in failed.iter() {
        // a recoverable group always has a plan for every failed node
        let plan = best_single_repair(params, target, alive)?;
        if best.as_ref().is_none_or(|b| plan.cost_fragments() < b.cost_fragments()) {
            best = Some(plan);
        }
    }
    Ok(best.expect("failed set is non-empty"))
}

/// Per-repair averages against naive MDS and MSR repair, in fragment units
/// of M/k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineComparison {
    pub k: usize,
    pub repairs: u64,
    pub code_units_per_repair: Ratio<u64>,
    pub code_helpers_per_repair: Ratio<u64>,
    pub naive_units: u64,
    pub naive_helpers: u64,
    pub msr_helpers: usize,
    pub msr_units: Ratio<u64>,
}

pub fn compare_baselines(metrics: &SimMetrics, k: usize, d: usize) -> Result<BaselineComparison, SimError> {
    let msr_units = msr_repair_units(2 * k, k, d)?;
    let per_repair = |total: u64| {
        if metrics.repairs_completed == 0 {
            Ratio::from_integer(0)
        } else {
            Ratio::new(total, metrics.repairs_completed)
        }
    };
    Ok(BaselineComparison {
        k,
        repairs: metrics.repairs_completed,
        code_units_per_repair: per_repair(metrics.fragment_units_downloaded),
        code_helpers_per_repair: per_repair(metrics.helpers_contacted_total),
        naive_units: naive_mds_repair_units(k),
        naive_helpers: k as u64,
        msr_helpers: d,
        msr_units,
    })
}

impl BaselineComparison {
    pub fn to_kv(&self) -> KvDocument {
        let mut doc = KvDocument::new();
        doc.push("baseline.repairs", self.repairs)
            .push("baseline.code.units_per_repair", self.code_units_per_repair)
            .push("baseline.code.helpers_per_repair", self.code_helpers_per_repair)
            .push("baseline.naive.units_per_repair", self.naive_units)
            .push("baseline.naive.helpers", self.naive_helpers)
            .push("baseline.msr.d", self.msr_helpers)
            .push("baseline.msr.units_per_repair", self.msr_units);
        doc
    }
}

impl fmt::Display for BaselineComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22} {:>16} {:>10}", "per repair", "units (M/k)", "helpers")?;
        writeln!(f, "{:<22} {:>16} {:>10}", "this code", self.code_units_per_repair.to_string(), self.code_helpers_per_repair.to_string())?;
        writeln!(f, "{:<22} {:>16} {:>10}", format!("MSR (d = {})", self.msr_helpers), self.msr_units.to_string(), self.msr_helpers)?;
        writeln!(f, "{:<22} {:>16} {:>10}", "naive MDS", self.naive_units, self.naive_helpers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traced(k: usize, rounds: u64, trace: &[(u64, &[&str])]) -> SimConfig {
        let mut c = SimConfig::new(k);
        c.rounds = rounds;
        for (round, nodes) in trace {
            c.trace.insert(*round, nodes.iter().map(|s| s.parse().unwrap()).collect());
        }
        c
    }

    #[test]
    fn splitmix_reference_value() {
        let mut rng = SplitMix64::seed_from_u64(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn single_failure_costs_three_units() {
        let m = run_simulation(&traced(5, 1, &[(0, &["S1"])])).unwrap();
        assert_eq!((m.repairs_completed, m.fragment_units_downloaded, m.helpers_contacted_total), (1, 3, 3));
    }

    #[test]
    fn partition_pair_costs_seven_units() {
        let m = run_simulation(&traced(5, 1, &[(0, &["S1", "P1"])])).unwrap();
        assert_eq!((m.repairs_completed, m.fragment_units_downloaded), (2, 7));
    }

    #[test]
    fn no_failures_no_traffic() {
        for seed in [0, 1, 99] {
            let mut c = SimConfig::new(4);
            c.rounds = 50;
            c.rng_seed = seed;
            let m = run_simulation(&c).unwrap();
            assert_eq!((m.repairs_completed, m.fragment_units_downloaded), (0, 0));
        }
    }

    #[test]
    fn certain_failure_loses_data_once_per_group() {
        let mut c = SimConfig::new(3);
        c.rounds = 5;
        c.groups = 4;
        c.fail_probability = 1.0;
        let m = run_simulation(&c).unwrap();
        assert_eq!(m.data_loss_events, 4);
        assert_eq!(m.repairs_completed, 0);
        assert_eq!(m.failures_injected, 4 * 6);
    }

    #[test]
    fn repair_budget_defers_work() {
        let mut c = traced(5, 3, &[(0, &["S1", "S2", "S3"])]);
        c.repairs_per_round = Some(1);
        let m = run_simulation(&c).unwrap();
        assert_eq!(m.rounds.iter().map(|r| r.repairs).collect::<Vec<_>>(), [1, 1, 1]);
        assert_eq!(m.rounds.iter().map(|r| r.pending).collect::<Vec<_>>(), [2, 1, 0]);
        assert_eq!(m.data_loss_events, 0);
    }

    #[test]
    fn determinism() {
        let mut c = SimConfig::new(6);
        c.rounds = 200;
        c.fail_probability = 0.05;
        c.groups = 3;
        c.rng_seed = 1234;
        c.repairs_per_round = Some(2);
        let a = run_simulation(&c).unwrap();
        assert_eq!(a, run_simulation(&c).unwrap());
        assert!(a.failures_injected > 0);
        c.rng_seed = 1235;
        assert_ne!(a, run_simulation(&c).unwrap());
    }

    #[test]
    fn baselines() {
        let m = run_simulation(&traced(5, 1, &[(0, &["S1"])])).unwrap();
        let cmp = compare_baselines(&m, 5, 6).unwrap();
        assert_eq!(cmp.msr_units, Ratio::from_integer(3));
        assert_eq!(cmp.naive_units, 5);
        assert_eq!(cmp.code_units_per_repair, Ratio::from_integer(3));
        assert_eq!(cmp.code_helpers_per_repair, Ratio::from_integer(3));
        assert_eq!(cmp.msr_helpers, 6);
        assert_eq!(compare_baselines(&m, 5, 5).unwrap().msr_units, Ratio::from_integer(5));
        assert!(compare_baselines(&m, 5, 10).is_err());

        let m2 = run_simulation(&traced(2, 1, &[(0, &["S1"])])).unwrap();
        assert_eq!(compare_baselines(&m2, 2, 2).unwrap().code_units_per_repair, Ratio::from_integer(1));
    }

    #[test]
    fn invalid_config() {
        let mut c = SimConfig::new(5);
        c.fail_probability = -0.1;
        assert!(matches!(run_simulation(&c), Err(SimError::InvalidConfig(_))));
        let c = traced(3, 1, &[(0, &["P4"])]);
        assert!(matches!(run_simulation(&c), Err(SimError::InvalidConfig(_))));
    }
}
