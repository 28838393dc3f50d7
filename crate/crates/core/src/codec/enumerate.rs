use super::{classify_set, CodeParams, CodecError, NodeId, NodeSet, RecoveryClassification};

/// Default largest k for which recovery sets are materialized; C(24,12) is
/// about 2.7M candidate subsets.
pub const DEFAULT_ENUMERATION_BOUND: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecoveryCounts {
    pub strategy_i: u128,
    pub strategy_ii: u128,
    pub total: u128,
}

/// Closed-form counts of decodable k-subsets:
/// `k(k−1)·2^(k−2)` doubled-partition sets, `2^(k−1)` full-cover sets, and
/// `2^(k−2)·(k²−k+2)` in total.
pub fn count_recovery_sets(params: &CodeParams) -> RecoveryCounts {
    let k = params.k() as u128;
    let pow = |e: u128| 1u128 << e;
    let strategy_i = k * (k - 1) * pow(k - 2);
    let strategy_ii = pow(k - 1);
    let total = pow(k - 2) * (k * k - k + 2);
    debug_assert_eq!(strategy_i + strategy_ii, total);
    RecoveryCounts { strategy_i, strategy_ii, total }
}

/// A decodable k-subset in canonical node order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoverySet {
    pub nodes: Vec<NodeId>,
    pub classification: RecoveryClassification,
}

impl RecoverySet {
    pub fn parity_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_parity()).count()
    }
}

/// Iterates every `r`-element subset of `0..n` as a bitmask, in increasing
/// numeric order.
pub fn combinations(n: usize, r: usize) -> impl Iterator<Item = u128> {
    assert!(n <= 127, "combinations limited to n <= 127");
    let limit = 1u128 << n;
    let mut next = if r > n { None } else { Some(if r == 0 { 0 } else { (1u128 << r) - 1 }) };
    std::iter::from_fn(move || {
        let current = next?;
        next = if current == 0 {
            None
        } else {
            // Gosper's hack
            let c = current & current.wrapping_neg();
            let ripple = current + c;
            let following = (((ripple ^ current) >> 2) / c) | ripple;
            (following < limit).then_some(following)
        };
        Some(current)
    })
}

pub fn enumerate_recovery_sets(params: &CodeParams) -> Result<Vec<RecoverySet>, CodecError> {
    enumerate_recovery_sets_within(params, DEFAULT_ENUMERATION_BOUND)
}

/// Every decodable k-subset, ordered by parity-node count and then by node
/// list. Refuses k above `bound`.
pub fn enumerate_recovery_sets_within(params: &CodeParams, bound: usize) -> Result<Vec<RecoverySet>, CodecError> {
    if params.k() > bound {
        return Err(CodecError::EnumerationBound { k: params.k(), bound });
    }
    let mut sets: Vec<RecoverySet> = combinations(params.n(), params.k())
        .filter_map(|bits| {
            let set = NodeSet::from_bits(bits);
            let classification = classify_set(params, set);
            classification
                .is_decodable()
                .then(|| RecoverySet { nodes: set.to_vec(), classification })
        })
        .collect();
    sets.sort_by(|a, b| a.parity_count().cmp(&b.parity_count()).then_with(|| a.nodes.cmp(&b.nodes)));
    Ok(sets)
}
