use std::fmt;
use std::str::FromStr;

use super::CodecError;

/// Largest supported k. Node rows are packed into a `u64` and node sets into
/// a `u128`, and the shard header stores k in 16 bits.
pub const MAX_K: usize = 64;

/// Geometry of a (2k,k) code: k partitions, each holding one systematic and
/// one parity node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodeParams {
    k: usize,
}

impl CodeParams {
    pub fn new(k: usize) -> Result<Self, CodecError> {
        if !(2..=MAX_K).contains(&k) {
            return Err(CodecError::InvalidK(k));
        }
        Ok(Self { k })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    /// Total node count, always `2k`.
    #[inline]
    pub fn n(&self) -> usize {
        2 * self.k
    }

    /// All node ids in canonical order.
    pub fn nodes(&self) -> impl DoubleEndedIterator<Item = NodeId> {
        (0..self.n()).map(NodeId::from_index)
    }

    /// Every node, as a set.
    pub fn all_nodes(&self) -> NodeSet {
        NodeSet::from_bits(if self.n() == 128 { u128::MAX } else { (1u128 << self.n()) - 1 })
    }

    /// Row of `node` over GF(2) in the basis of data fragments `d_1..d_k`.
    ///
    /// A systematic node is a unit row; a parity node is the all-ones row with
    /// a zero at its own partition.
    pub fn row(&self, node: NodeId) -> u64 {
        let unit = 1u64 << node.partition;
        match node.role {
            Role::Systematic => unit,
            Role::Parity => self.ones_row() ^ unit,
        }
    }

    /// The row of `d_1 ⊕ … ⊕ d_k`.
    pub fn ones_row(&self) -> u64 {
        if self.k == 64 {
            u64::MAX
        } else {
            (1u64 << self.k) - 1
        }
    }

    pub(crate) fn check_node(&self, node: NodeId) -> Result<(), CodecError> {
        if node.partition >= self.k {
            Err(CodecError::NodeOutOfRange { node, k: self.k })
        } else {
            Ok(())
        }
    }
}

/// Convenience wrapper matching the free-function style used by the CLI.
pub fn make_params(k: usize) -> Result<CodeParams, CodecError> {
    CodeParams::new(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Systematic = 0,
    Parity = 1,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Systematic => Role::Parity,
            Role::Parity => Role::Systematic,
        }
    }
}

/// One of the 2k storage nodes. Partitions are 0-based; `Display` prints the
/// 1-based labels `S1..Sk` / `P1..Pk`.
///
/// The derived ordering sorts by partition, then `Systematic < Parity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub partition: usize,
    pub role: Role,
}

impl NodeId {
    pub const fn systematic(partition: usize) -> Self {
        Self { partition, role: Role::Systematic }
    }

    pub const fn parity(partition: usize) -> Self {
        Self { partition, role: Role::Parity }
    }

    /// The other node of the same partition.
    pub fn related(self) -> Self {
        Self { partition: self.partition, role: self.role.other() }
    }

    /// Canonical index `2·partition + role`; agrees with the `Ord` impl.
    #[inline]
    pub fn index(self) -> usize {
        2 * self.partition + self.role as usize
    }

    #[inline]
    pub fn from_index(index: usize) -> Self {
        let role = if index.is_multiple_of(2) { Role::Systematic } else { Role::Parity };
        Self { partition: index / 2, role }
    }

    pub fn is_parity(self) -> bool {
        self.role == Role::Parity
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.role {
            Role::Systematic => 'S',
            Role::Parity => 'P',
        };
        write!(f, "{}{}", tag, self.partition + 1)
    }
}

impl FromStr for NodeId {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || CodecError::BadNodeLabel(s.to_string());
        let mut chars = s.chars();
        let role = match chars.next().map(|c| c.to_ascii_uppercase()) {
            Some('S') => Role::Systematic,
            Some('P') => Role::Parity,
            _ => return Err(bad()),
        };
        let number: usize = chars.as_str().parse().map_err(|_| bad())?;
        if number == 0 {
            return Err(bad());
        }
        Ok(NodeId { partition: number - 1, role })
    }
}

/// A set of node ids packed as a bitmask over canonical indices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeSet(u128);

impl NodeSet {
    pub const fn empty() -> Self {
        NodeSet(0)
    }

    pub const fn from_bits(bits: u128) -> Self {
        NodeSet(bits)
    }

    pub const fn bits(self) -> u128 {
        self.0
    }

    pub fn contains(self, node: NodeId) -> bool {
        node.index() < 128 && self.0 & (1u128 << node.index()) != 0
    }

    pub fn insert(&mut self, node: NodeId) {
        self.0 |= 1u128 << node.index();
    }

    pub fn remove(&mut self, node: NodeId) {
        self.0 &= !(1u128 << node.index());
    }

    pub fn with(mut self, node: NodeId) -> Self {
        self.insert(node);
        self
    }

    pub fn without(mut self, node: NodeId) -> Self {
        self.remove(node);
        self
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 | other.0)
    }

    pub fn difference(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 & !other.0)
    }

    /// Nodes of `params` not in this set.
    pub fn complement(self, params: &CodeParams) -> NodeSet {
        params.all_nodes().difference(self)
    }

    /// Members in canonical order.
    pub fn iter(self) -> impl Iterator<Item = NodeId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let index = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(NodeId::from_index(index))
        })
    }

    pub fn to_vec(self) -> Vec<NodeId> {
        self.iter().collect()
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<I: IntoIterator<Item = NodeId>>(iter: I) -> Self {
        let mut set = NodeSet::empty();
        for node in iter {
            set.insert(node);
        }
        set
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, node) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{node}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_bounds() {
        let p = make_params(5).unwrap();
        assert_eq!((p.k(), p.n()), (5, 10));
        assert_eq!(make_params(2).unwrap().n(), 4);
        assert!(matches!(make_params(1), Err(CodecError::InvalidK(1))));
        assert!(make_params(0).is_err());
        assert!(make_params(MAX_K + 1).is_err());
        assert_eq!(make_params(MAX_K).unwrap().all_nodes().len(), 128);
    }

    #[test]
    fn node_order_and_labels() {
        let p = make_params(3).unwrap();
        let labels: Vec<String> = p.nodes().map(|n| n.to_string()).collect();
        assert_eq!(labels, ["S1", "P1", "S2", "P2", "S3", "P3"]);
        let mut shuffled: Vec<NodeId> = p.nodes().rev().collect();
        shuffled.sort();
        assert_eq!(shuffled, p.nodes().collect::<Vec<_>>());
        assert_eq!("p3".parse::<NodeId>().unwrap(), NodeId::parity(2));
        assert!("S0".parse::<NodeId>().is_err());
        assert!("X1".parse::<NodeId>().is_err());
        assert!("S".parse::<NodeId>().is_err());
    }

    #[test]
    fn rows() {
        let p = make_params(5).unwrap();
        assert_eq!(p.row(NodeId::systematic(0)), 0b00001);
        assert_eq!(p.row(NodeId::parity(0)), 0b11110);
        assert_eq!(p.row(NodeId::parity(4)), 0b01111);
    }

    #[test]
    fn node_set_iterates_in_canonical_order() {
        let set: NodeSet = [NodeId::parity(1), NodeId::systematic(0), NodeId::systematic(1)]
            .into_iter()
            .collect();
        assert_eq!(set.to_string(), "{S1,S2,P2}");
        assert_eq!(set.len(), 3);
        assert!(set.without(NodeId::systematic(1)).iter().all(|n| n != NodeId::systematic(1)));
    }
}
