//! GF(2) linear algebra over node rows, used as the independent decodability
//! check for the structured classifier.

use super::{CodeParams, CodecError, NodeId, NodeSet};

/// Rank over GF(2) of rows packed as `u64` bitmasks.
pub fn gf2_rank(rows: impl IntoIterator<Item = u64>) -> usize {
    // basis[b] holds a reduced row whose highest set bit is b
    let mut basis = [0u64; 64];
    let mut rank = 0;
    for mut row in rows {
        while row != 0 {
            let top = 63 - row.leading_zeros() as usize;
            if basis[top] == 0 {
                basis[top] = row;
                rank += 1;
                break;
            }
            row ^= basis[top];
        }
    }
    rank
}

/// Whether `row` lies in the GF(2) span of `rows`.
pub fn in_span(rows: impl IntoIterator<Item = u64>, row: u64) -> bool {
    let rows: Vec<u64> = rows.into_iter().collect();
    gf2_rank(rows.iter().copied()) == gf2_rank(rows.iter().copied().chain([row]))
}

/// Rank of the rows of every node in `set`.
pub fn node_set_rank(params: &CodeParams, set: NodeSet) -> usize {
    gf2_rank(set.iter().map(|n| params.row(n)))
}

/// True iff the k nodes of `subset` have linearly independent rows.
pub fn is_decodable_oracle(params: &CodeParams, subset: &[NodeId]) -> Result<bool, CodecError> {
    if subset.len() != params.k() {
        return Err(CodecError::SubsetSize { expected: params.k(), found: subset.len() });
    }
    for &node in subset {
        params.check_node(node)?;
    }
    Ok(gf2_rank(subset.iter().map(|&n| params.row(n))) == params.k())
}
