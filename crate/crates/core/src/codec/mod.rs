//! Encoding and decoding for the (2k,k) partitioned XOR code.
//!
//! The code stores k data fragments `d_1..d_k` on systematic nodes `S_i`
//! and, on each parity node `P_i`, the XOR of every fragment except `d_i`.
//! `S_i` and `P_i` form partition `i`. Writing `Σ = d_1 ⊕ … ⊕ d_k`, every
//! parity packet is `p_i = Σ ⊕ d_i`, which is what both the structured
//! decoder and the repair planner lean on.

mod enumerate;
mod oracle;
mod packet;
mod params;

use std::collections::BTreeMap;

use thiserror::Error;

pub use enumerate::{
    combinations, count_recovery_sets, enumerate_recovery_sets, enumerate_recovery_sets_within,
    RecoveryCounts, RecoverySet, DEFAULT_ENUMERATION_BOUND,
};
pub use oracle::{gf2_rank, in_span, is_decodable_oracle, node_set_rank};
pub use packet::{xor_packets, Packet};
pub use params::{make_params, CodeParams, NodeId, NodeSet, Role, MAX_K};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("k must be between 2 and {max}, got {0}", max = MAX_K)]
    InvalidK(usize),
    #[error("node {node} does not exist for k = {k}")]
    NodeOutOfRange { node: NodeId, k: usize },
    #[error("invalid node label {0:?}; expected S<i> or P<i> with i >= 1")]
    BadNodeLabel(String),
    #[error("packet length mismatch: expected {expected} bytes, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("packets must be at least one byte long")]
    EmptyPacket,
    #[error("expected {expected} fragments, got {found}")]
    FragmentCount { expected: usize, found: usize },
    #[error("expected a subset of {expected} distinct nodes, got {found}")]
    SubsetSize { expected: usize, found: usize },
    #[error("node {0} appears more than once")]
    DuplicateNode(NodeId),
    #[error("node set is not decodable: {0}")]
    Undecodable(UndecodableReason),
    #[error("k = {k} exceeds the enumeration bound {bound}")]
    EnumerationBound { k: usize, bound: usize },
}

/// One encoded codeword: k systematic and k parity packets of equal length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stripe {
    params: CodeParams,
    fragment_size: usize,
    // indexed by NodeId::index
    packets: Vec<Packet>,
}

impl Stripe {
    pub fn params(&self) -> CodeParams {
        self.params
    }

    pub fn fragment_size(&self) -> usize {
        self.fragment_size
    }

    pub fn packet(&self, node: NodeId) -> &Packet {
        &self.packets[node.index()]
    }

    /// Node/packet pairs in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Packet)> {
        self.packets.iter().enumerate().map(|(i, p)| (NodeId::from_index(i), p))
    }

    /// The systematic packets `d_1..d_k`.
    pub fn fragments(&self) -> Vec<Packet> {
        (0..self.params.k()).map(|i| self.packet(NodeId::systematic(i)).clone()).collect()
    }

    /// Shares of the nodes in `set`.
    pub fn shares(&self, set: NodeSet) -> BTreeMap<NodeId, Packet> {
        set.iter().map(|n| (n, self.packet(n).clone())).collect()
    }
}

pub fn encode_stripe(params: &CodeParams, fragments: &[Packet]) -> Result<Stripe, CodecError> {
    if fragments.len() != params.k() {
        return Err(CodecError::FragmentCount { expected: params.k(), found: fragments.len() });
    }
    let fragment_size = fragments[0].len();
    if fragment_size == 0 {
        return Err(CodecError::EmptyPacket);
    }
    let sum = Packet::xor_all(fragment_size, fragments)?;
    let mut packets = Vec::with_capacity(params.n());
    for d in fragments {
        let mut parity = sum.clone();
        parity.xor_assign(d)?;
        packets.push(d.clone());
        packets.push(parity);
    }
    Ok(Stripe { params: *params, fragment_size, packets })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UndecodableReason {
    /// Two or more partitions contribute both nodes, so at least two
    /// partitions are missing and their fragments cannot be separated.
    MultipleDoubledPartitions,
    /// One node from every partition with an odd number of parities; the
    /// rows sum to zero.
    OddParityCountFullCover,
}

impl std::fmt::Display for UndecodableReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UndecodableReason::MultipleDoubledPartitions => "more than one partition contributes both nodes",
            UndecodableReason::OddParityCountFullCover => "one node per partition with an odd parity count",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecoveryClassification {
    /// Both nodes of `doubled_partition`, one node from each of k−2 other
    /// partitions, nothing from `excluded_partition`.
    StrategyI { doubled_partition: usize, excluded_partition: usize },
    /// One node from every partition, `2m` of them parity nodes.
    StrategyII { m: usize },
    Undecodable(UndecodableReason),
}

impl RecoveryClassification {
    pub fn is_decodable(&self) -> bool {
        !matches!(self, RecoveryClassification::Undecodable(_))
    }
}

pub fn classify_subset(params: &CodeParams, subset: &[NodeId]) -> Result<RecoveryClassification, CodecError> {
    let mut set = NodeSet::empty();
    for &node in subset {
        params.check_node(node)?;
        if set.contains(node) {
            return Err(CodecError::DuplicateNode(node));
        }
        set.insert(node);
    }
    if set.len() != params.k() {
        return Err(CodecError::SubsetSize { expected: params.k(), found: set.len() });
    }
    Ok(classify_set(params, set))
}

/// Classification of a node set already known to hold exactly k valid nodes.
pub fn classify_set(params: &CodeParams, set: NodeSet) -> RecoveryClassification {
    debug_assert_eq!(set.len(), params.k());
    let mut doubled = Vec::new();
    let mut excluded = Vec::new();
    let mut parities = 0;
    for partition in 0..params.k() {
        let s = set.contains(NodeId::systematic(partition));
        let p = set.contains(NodeId::parity(partition));
        match (s, p) {
            (true, true) => doubled.push(partition),
            (false, false) => excluded.push(partition),
            (false, true) => parities += 1,
            (true, false) => {}
        }
    }
    match doubled.len() {
        0 if parities % 2 == 0 => RecoveryClassification::StrategyII { m: parities / 2 },
        0 => RecoveryClassification::Undecodable(UndecodableReason::OddParityCountFullCover),
        1 => RecoveryClassification::StrategyI {
            doubled_partition: doubled[0],
            excluded_partition: excluded[0],
        },
        _ => RecoveryClassification::Undecodable(UndecodableReason::MultipleDoubledPartitions),
    }
}

/// Recovers `d_1..d_k` from exactly k shares.
pub fn decode(params: &CodeParams, shares: &BTreeMap<NodeId, Packet>) -> Result<Vec<Packet>, CodecError> {
    let nodes: Vec<NodeId> = shares.keys().copied().collect();
    let class = classify_subset(params, &nodes)?;
    let len = shares.values().next().map(Packet::len).unwrap_or(0);
    if len == 0 {
        return Err(CodecError::EmptyPacket);
    }
    if let Some(bad) = shares.values().find(|p| p.len() != len) {
        return Err(CodecError::LengthMismatch { expected: len, found: bad.len() });
    }

    let sum = match class {
        RecoveryClassification::Undecodable(reason) => return Err(CodecError::Undecodable(reason)),
        RecoveryClassification::StrategyI { doubled_partition, .. } => xor_packets(
            &shares[&NodeId::systematic(doubled_partition)],
            &shares[&NodeId::parity(doubled_partition)],
        )?,
        // an even number of parities cancels Σ, leaving the XOR of their own
        // fragments; adding the supplied systematics completes Σ
        RecoveryClassification::StrategyII { .. } => Packet::xor_all(len, shares.values())?,
    };

    let mut fragments: Vec<Option<Packet>> = vec![None; params.k()];
    for (node, packet) in shares {
        let slot = &mut fragments[node.partition];
        if slot.is_some() {
            continue;
        }
        *slot = Some(match node.role {
            Role::Systematic => packet.clone(),
            Role::Parity => xor_packets(&sum, packet)?,
        });
    }
    if let RecoveryClassification::StrategyI { excluded_partition, .. } = class {
        let mut missing = sum;
        for d in fragments.iter().flatten() {
            missing.xor_assign(d)?;
        }
        fragments[excluded_partition] = Some(missing);
    }
    Ok(fragments.into_iter().map(|d| d.expect("every partition recovered")).collect())
}

/// Picks a decodable k-subset of `available`, preferring the fewest parity
/// nodes and then the canonically smallest node list.
pub fn select_recovery_set(params: &CodeParams, available: NodeSet) -> Option<Vec<NodeId>> {
    let k = params.k();
    let avail_s = |i| available.contains(NodeId::systematic(i));
    let avail_p = |i| available.contains(NodeId::parity(i));
    let cheapest = |i| if avail_s(i) { NodeId::systematic(i) } else { NodeId::parity(i) };
    let mut candidates: Vec<Vec<NodeId>> = Vec::new();

    // one node per partition with an even parity count
    if (0..k).all(|i| avail_s(i) || avail_p(i)) {
        let mut pick: Vec<NodeId> = (0..k).map(cheapest).collect();
        let parities = pick.iter().filter(|n| n.is_parity()).count();
        if parities % 2 == 1 {
            // flip the last partition that can switch to its parity
            if let Some(i) = (0..k).rev().find(|&i| avail_s(i) && avail_p(i)) {
                pick[i] = NodeId::parity(i);
                candidates.push(pick);
            }
        } else {
            candidates.push(pick);
        }
    }

    // one doubled partition, k−2 singles, one partition left out
    for a in (0..k).filter(|&i| avail_s(i) && avail_p(i)) {
        let others: Vec<usize> = (0..k).filter(|&i| i != a && (avail_s(i) || avail_p(i))).collect();
        if others.len() < k - 2 {
            continue;
        }
        // when every other partition is covered one must be left out; prefer
        // a parity-only one
        let drop = (others.len() == k - 1)
            .then(|| others.iter().rposition(|&i| !avail_s(i)).unwrap_or(k - 2));
        let mut pick: Vec<NodeId> = vec![NodeId::systematic(a), NodeId::parity(a)];
        pick.extend(
            others
                .iter()
                .enumerate()
                .filter(|&(pos, _)| Some(pos) != drop)
                .map(|(_, &i)| cheapest(i)),
        );
        pick.sort();
        candidates.push(pick);
    }

    candidates.into_iter().min_by(|a, b| {
        let pa = a.iter().filter(|n| n.is_parity()).count();
        let pb = b.iter().filter(|n| n.is_parity()).count();
        pa.cmp(&pb).then_with(|| a.cmp(b))
    })
}
