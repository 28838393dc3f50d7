//! Exact repair of failed nodes.
//!
//! With `Σ = d_1 ⊕ … ⊕ d_k`, the two nodes of any partition XOR to `Σ`, so a
//! node whose related node survives is rebuilt from three packets: the
//! related node plus both nodes of any other intact partition. When the
//! related node is gone too, one node from every other partition suffices,
//! provided the number of parities among them has the right parity (even for
//! a parity target, odd for a systematic target).

use std::collections::BTreeMap;

use num_rational::Ratio;
use thiserror::Error;

use crate::codec::{CodeParams, CodecError, NodeId, NodeSet, Packet, Role, Stripe};

/// Exhaustive plan listing is refused above this k (2^(k−2) plans per family).
pub const DEFAULT_PLAN_ENUMERATION_BOUND: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RepairError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("{0} is listed as alive; only failed nodes can be repaired")]
    TargetAlive(NodeId),
    #[error("surviving nodes cannot determine the packet of {0}")]
    Unrecoverable(NodeId),
    #[error("both nodes of partition {} must be failed", .0 + 1)]
    PartitionNotFailed(usize),
    #[error("no packet supplied for helper {0}")]
    MissingHelper(NodeId),
    #[error("k = {k} exceeds the plan enumeration bound {bound}")]
    EnumerationBound { k: usize, bound: usize },
    #[error("helper count d = {d} outside [{k}, {max}]")]
    HelperCountOutOfRange { d: usize, k: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RepairKind {
    /// Related node plus both nodes of another partition.
    ThreeNode,
    /// Parity target rebuilt without its systematic node.
    StrategyA,
    /// Systematic target rebuilt without its parity node.
    StrategyB,
    /// One node from each other partition while the related node is alive.
    KMinusOne,
}

impl std::fmt::Display for RepairKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RepairKind::ThreeNode => "three-node",
            RepairKind::StrategyA => "strategy-a",
            RepairKind::StrategyB => "strategy-b",
            RepairKind::KMinusOne => "k-minus-one",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RepairPlan {
    pub target: NodeId,
    /// Helpers in canonical order.
    pub helpers: Vec<NodeId>,
    /// Order in which helper packets are XORed together.
    pub schedule: Vec<NodeId>,
    pub kind: RepairKind,
}

impl RepairPlan {
    fn new(target: NodeId, schedule: Vec<NodeId>, kind: RepairKind) -> Self {
        let mut helpers = schedule.clone();
        helpers.sort();
        Self { target, helpers, schedule, kind }
    }

    /// Helper packets downloaded, in units of one fragment (M/k).
    pub fn cost_fragments(&self) -> usize {
        self.helpers.len()
    }

    pub fn helper_set(&self) -> NodeSet {
        self.helpers.iter().copied().collect()
    }

    /// Human-readable schedule, e.g. `P1 ^ S2 ^ P2`.
    pub fn schedule_string(&self) -> String {
        self.schedule.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ^ ")
    }

    fn sort_key(&self) -> (usize, &[NodeId]) {
        (self.cost_fragments(), &self.helpers)
    }
}

fn check_target(params: &CodeParams, target: NodeId, alive: NodeSet) -> Result<(), RepairError> {
    params.check_node(target)?;
    if alive.contains(target) {
        return Err(RepairError::TargetAlive(target));
    }
    Ok(())
}

fn one_per_partition_kind(target: NodeId, related_alive: bool) -> RepairKind {
    match (related_alive, target.role) {
        (true, _) => RepairKind::KMinusOne,
        (false, Role::Parity) => RepairKind::StrategyA,
        (false, Role::Systematic) => RepairKind::StrategyB,
    }
}

/// Parity-node count (mod 2) that a one-per-partition helper set needs.
fn required_parity_bit(target: NodeId) -> usize {
    match target.role {
        Role::Parity => 0,
        Role::Systematic => 1,
    }
}

/// Every repair plan for `target` that uses only `alive` nodes, sorted by
/// cost and then by helper list. Errors when no plan exists.
pub fn plan_single_repairs(params: &CodeParams, target: NodeId, alive: NodeSet) -> Result<Vec<RepairPlan>, RepairError> {
    plan_single_repairs_within(params, target, alive, DEFAULT_PLAN_ENUMERATION_BOUND)
}

pub fn plan_single_repairs_within(
    params: &CodeParams,
    target: NodeId,
    alive: NodeSet,
    bound: usize,
) -> Result<Vec<RepairPlan>, RepairError> {
    check_target(params, target, alive)?;
    if params.k() > bound {
        return Err(RepairError::EnumerationBound { k: params.k(), bound });
    }
    let related = target.related();
    let related_alive = alive.contains(related);
    let mut plans = Vec::new();

    if related_alive {
        for b in (0..params.k()).filter(|&b| b != target.partition) {
            let (s, p) = (NodeId::systematic(b), NodeId::parity(b));
            if alive.contains(s) && alive.contains(p) {
                plans.push(RepairPlan::new(target, vec![related, s, p], RepairKind::ThreeNode));
            }
        }
    }

    let kind = one_per_partition_kind(target, related_alive);
    let others: Vec<usize> = (0..params.k()).filter(|&b| b != target.partition).collect();
    let mut picked = Vec::with_capacity(others.len());
    collect_one_per_partition(&others, alive, required_parity_bit(target), 0, &mut picked, &mut |helpers| {
        plans.push(RepairPlan::new(target, helpers.to_vec(), kind));
    });

    if plans.is_empty() {
        return Err(RepairError::Unrecoverable(target));
    }
    plans.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(plans)
}

fn collect_one_per_partition(
    partitions: &[usize],
    alive: NodeSet,
    parity_bit: usize,
    parities: usize,
    picked: &mut Vec<NodeId>,
    emit: &mut dyn FnMut(&[NodeId]),
) {
    let Some((&first, rest)) = partitions.split_first() else {
        if parities % 2 == parity_bit {
            emit(picked);
        }
        return;
    };
    for node in [NodeId::systematic(first), NodeId::parity(first)] {
        if alive.contains(node) {
            picked.push(node);
            collect_one_per_partition(rest, alive, parity_bit, parities + node.is_parity() as usize, picked, emit);
            picked.pop();
        }
    }
}

/// The first plan [`plan_single_repairs`] would return, built directly
/// without enumerating the alternatives. Works for every supported k.
pub fn best_single_repair(params: &CodeParams, target: NodeId, alive: NodeSet) -> Result<RepairPlan, RepairError> {
    check_target(params, target, alive)?;
    let related = target.related();
    let related_alive = alive.contains(related);
    let both_alive = |b: usize| alive.contains(NodeId::systematic(b)) && alive.contains(NodeId::parity(b));

    let three = related_alive
        .then(|| (0..params.k()).find(|&b| b != target.partition && both_alive(b)))
        .flatten()
        .map(|b| RepairPlan::new(target, vec![related, NodeId::systematic(b), NodeId::parity(b)], RepairKind::ThreeNode));

    let others: Vec<usize> = (0..params.k()).filter(|&b| b != target.partition).collect();
    let spread = smallest_one_per_partition(&others, alive, required_parity_bit(target))
        .map(|helpers| RepairPlan::new(target, helpers, one_per_partition_kind(target, related_alive)));

    [three, spread]
        .into_iter()
        .flatten()
        .min_by(|a, b| a.sort_key().cmp(&b.sort_key()))
        .ok_or(RepairError::Unrecoverable(target))
}

/// Lexicographically smallest one-node-per-partition choice over
/// `partitions` whose parity count matches `parity_bit` (mod 2).
fn smallest_one_per_partition(partitions: &[usize], alive: NodeSet, parity_bit: usize) -> Option<Vec<NodeId>> {
    let options = |b: usize| {
        [NodeId::systematic(b), NodeId::parity(b)].into_iter().filter(move |&n| alive.contains(n))
    };
    if partitions.iter().any(|&b| options(b).next().is_none()) {
        return None;
    }
    let mut picked = Vec::with_capacity(partitions.len());
    let mut parities = 0;
    for (pos, &b) in partitions.iter().enumerate() {
        let rest = &partitions[pos + 1..];
        let flexible = rest.iter().any(|&r| options(r).count() == 2);
        let forced: usize = rest.iter().map(|&r| options(r).all(|n| n.is_parity()) as usize).sum();
        let node = options(b).find(|n| {
            let count = parities + n.is_parity() as usize;
            flexible || (count + forced) % 2 == parity_bit
        })?;
        parities += node.is_parity() as usize;
        picked.push(node);
    }
    Some(picked)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairScenario {
    /// The failed node's related node is alive: three-node repair.
    RelatedAlive,
    /// Parity node rebuilt without its systematic node.
    StrategyA,
    /// Systematic node rebuilt without its parity node.
    StrategyB,
}

/// Closed-form number of repair options with every other partition intact:
/// `k−1` three-node plans, or `2^(k−2)` plans for strategies A and B.
pub fn count_repair_options(params: &CodeParams, scenario: RepairScenario) -> u128 {
    let k = params.k() as u128;
    match scenario {
        RepairScenario::RelatedAlive => k - 1,
        RepairScenario::StrategyA | RepairScenario::StrategyB => 1u128 << (k - 2),
    }
}

/// Which node of a doubly failed partition is rebuilt first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartitionOrder {
    /// Strategy A: parity first.
    ParityFirst,
    /// Strategy B: systematic first.
    #[default]
    SystematicFirst,
}

/// Two-step repair of a partition whose nodes both failed: a (k−1)-helper
/// plan for the first node, then a three-node plan that reuses it.
pub fn plan_partition_repair(
    params: &CodeParams,
    partition: usize,
    alive: NodeSet,
    order: PartitionOrder,
) -> Result<(RepairPlan, RepairPlan), RepairError> {
    let (s, p) = (NodeId::systematic(partition), NodeId::parity(partition));
    params.check_node(s)?;
    if alive.contains(s) || alive.contains(p) {
        return Err(RepairError::PartitionNotFailed(partition));
    }
    let (first, second) = match order {
        PartitionOrder::ParityFirst => (p, s),
        PartitionOrder::SystematicFirst => (s, p),
    };
    let first_plan = best_single_repair(params, first, alive)?;
    let alive = alive.with(first);
    let second_plan = match best_three_node(params, second, alive) {
        Some(plan) => plan,
        None => best_single_repair(params, second, alive)?,
    };
    Ok((first_plan, second_plan))
}

fn best_three_node(params: &CodeParams, target: NodeId, alive: NodeSet) -> Option<RepairPlan> {
    let related = target.related();
    if !alive.contains(related) {
        return None;
    }
    (0..params.k())
        .filter(|&b| b != target.partition)
        .find(|&b| alive.contains(NodeId::systematic(b)) && alive.contains(NodeId::parity(b)))
        .map(|b| RepairPlan::new(target, vec![related, NodeId::systematic(b), NodeId::parity(b)], RepairKind::ThreeNode))
}

/// Repairs every node of `failed`, one at a time: at each step the failed node
/// with the cheapest plan (ties broken by node order) is rebuilt, then the
/// rest are replanned with it alive.
pub fn plan_cheapest_first(params: &CodeParams, failed: NodeSet) -> Result<Vec<RepairPlan>, RepairError> {
    let mut failed = failed;
    let mut plans = Vec::with_capacity(failed.len());
    while !failed.is_empty() {
        let alive = failed.complement(params);
        let mut best: Option<RepairPlan> = None;
        let mut first_error = None;
        for target in failed.iter() {
            match best_single_repair(params, target, alive) {
                Ok(plan) => {
                    if best.as_ref().is_none_or(|b| plan.cost_fragments() < b.cost_fragments()) {
                        best = Some(plan);
                    }
                }
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
        let plan = best.ok_or_else(|| first_error.expect("failed set is non-empty"))?;
        failed.remove(plan.target);
        plans.push(plan);
    }
    Ok(plans)
}

/// Source of helper packets for [`execute_plan`].
pub trait PacketLookup {
    fn packet(&self, node: NodeId) -> Option<&Packet>;
}

impl PacketLookup for Stripe {
    fn packet(&self, node: NodeId) -> Option<&Packet> {
        (node.partition < self.params().k()).then(|| Stripe::packet(self, node))
    }
}

impl PacketLookup for BTreeMap<NodeId, Packet> {
    fn packet(&self, node: NodeId) -> Option<&Packet> {
        self.get(&node)
    }
}

/// XORs the helper packets of `plan`; the result is the target's exact packet.
pub fn execute_plan(plan: &RepairPlan, lookup: &impl PacketLookup) -> Result<Packet, RepairError> {
    let mut schedule = plan.schedule.iter();
    let first = schedule.next().ok_or(RepairError::Unrecoverable(plan.target))?;
    let mut out = lookup.packet(*first).ok_or(RepairError::MissingHelper(*first))?.clone();
    for node in schedule {
        let packet = lookup.packet(*node).ok_or(RepairError::MissingHelper(*node))?;
        out.xor_assign(packet)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BandwidthReport {
    /// Helper packets downloaded; each is M/k bytes.
    pub fragment_units: u64,
    pub bytes_downloaded: u64,
    /// Helpers contacted, summed over repairs.
    pub nodes_contacted: usize,
    /// Distinct node ids among all helpers.
    pub distinct_nodes: usize,
}

impl BandwidthReport {
    /// Bandwidth as a fraction of the file size M.
    pub fn fraction_of_file(&self, k: usize) -> Ratio<u64> {
        Ratio::new(self.fragment_units, k as u64)
    }
}

pub fn repair_bandwidth(plans: &[RepairPlan], fragment_size: u64) -> BandwidthReport {
    let fragment_units: u64 = plans.iter().map(|p| p.cost_fragments() as u64).sum();
    let distinct = plans.iter().fold(NodeSet::empty(), |acc, p| acc.union(p.helper_set()));
    BandwidthReport {
        fragment_units,
        bytes_downloaded: fragment_units * fragment_size,
        nodes_contacted: plans.iter().map(|p| p.helper_set().len()).sum(),
        distinct_nodes: distinct.len(),
    }
}

/// Repair bandwidth of a minimum-storage regenerating code with `d` helpers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MsrBandwidth {
    /// `M·d / (k·(d−k+1))` bytes, exact.
    pub exact: Ratio<u128>,
    /// `exact` rounded up to whole bytes.
    pub bytes: u128,
}

pub fn msr_repair_bandwidth(n: usize, k: usize, d: usize, file_size: u64) -> Result<MsrBandwidth, RepairError> {
    check_helper_count(n, k, d)?;
    let exact = Ratio::new(file_size as u128 * d as u128, (k * (d - k + 1)) as u128);
    Ok(MsrBandwidth { exact, bytes: exact.ceil().to_integer() })
}

/// MSR repair bandwidth in fragment units of M/k: `d / (d−k+1)`.
pub fn msr_repair_units(n: usize, k: usize, d: usize) -> Result<Ratio<u64>, RepairError> {
    check_helper_count(n, k, d)?;
    Ok(Ratio::new(d as u64, (d - k + 1) as u64))
}

/// Naive MDS repair downloads the whole file: k fragment units.
pub fn naive_mds_repair_units(k: usize) -> u64 {
    k as u64
}

fn check_helper_count(n: usize, k: usize, d: usize) -> Result<(), RepairError> {
    if k == 0 || d < k || d + 1 > n {
        return Err(RepairError::HelperCountOutOfRange { d, k, max: n.saturating_sub(1) });
    }
    Ok(())
}
