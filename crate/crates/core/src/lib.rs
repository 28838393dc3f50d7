//! A (2k,k) flat XOR erasure code with cheap single-node repair.
//!
//! Data is split into k fragments stored on k systematic nodes; k parity
//! nodes each store the XOR of all fragments but one. Pairing each systematic
//! node with its parity node gives k partitions. Any single failed node can
//! be rebuilt from three surviving nodes regardless of k.
//!
//! - [`codec`]: encoding, structured decoding, recovery-set classification.
//! - [`repair`]: repair planning, exact repair, bandwidth accounting.
//! - [`analyzer`]: exhaustive erasure-pattern scans.
//! - [`store`]: shard container format, manifests, file striping, scrub.
//! - [`simulator`]: round-based failure and repair simulation.

pub mod analyzer;
pub mod codec;
pub mod repair;
pub mod report;
pub mod simulator;
pub mod store;

pub use codec::{
    classify_subset, decode, encode_stripe, make_params, select_recovery_set, CodeParams, CodecError, NodeId, NodeSet,
    Packet, RecoveryClassification, Role, Stripe,
};
