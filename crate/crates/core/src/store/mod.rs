//! Persistence: files are striped, encoded, and written as one shard file
//! per node per stripe, plus a manifest.

mod dir;
mod manifest;
mod shard;
mod stripe;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::codec::{CodeParams, CodecError, NodeId, NodeSet};
use crate::repair::RepairError;

pub use dir::{shard_file_name, RepairOutcome, RepairRequest, ShardDir, StripeRepair};
pub use manifest::FileManifest;
pub use shard::{crc32, read_shard, write_shard, ShardHeader, HEADER_LEN, MAGIC, VERSION};
pub use stripe::{assemble_file, split_file};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("shard truncated: need {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("bad shard magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported shard version {0}")]
    UnsupportedVersion(u8),
    #[error("invalid shard header: {0}")]
    InvalidHeader(String),
    #[error("payload checksum mismatch: header says {expected:08x}, payload hashes to {actual:08x}")]
    CrcMismatch { expected: u32, actual: u32 },
    #[error("shard has trailing data: expected {expected} bytes, found {found}")]
    TrailingData { expected: usize, found: usize },
    #[error("fragment size must be at least one byte")]
    InvalidFragmentSize,
    #[error("file needs more than 2^32 stripes")]
    TooManyStripes,
    #[error("expected {expected} stripes, got {found}")]
    StripeCountMismatch { expected: u32, found: usize },
    #[error("stripe {0} is missing")]
    MissingStripe(u32),
    #[error("stripe {0} has the wrong fragment count or size")]
    MalformedStripe(u32),
    #[error("stripe {stripe} cannot be decoded from its healthy shards {healthy}")]
    UndecodableStripe { stripe: u32, healthy: NodeSet },
    #[error("bad manifest: {0}")]
    BadManifest(String),
    #[error("no manifest found in {0}")]
    NoManifest(String),
    #[error("several manifests in {0}; name one explicitly")]
    AmbiguousManifest(String),
    #[error("stripe {stripe}: {source}")]
    Repair { stripe: u32, source: RepairError },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScrubIssue {
    Missing,
    /// Payload does not hash to the header's or the manifest's checksum.
    Checksum,
    /// Unreadable container or header fields disagreeing with the manifest.
    Malformed(String),
}

impl fmt::Display for ScrubIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScrubIssue::Missing => f.write_str("missing"),
            ScrubIssue::Checksum => f.write_str("crc"),
            ScrubIssue::Malformed(why) => write!(f, "malformed ({why})"),
        }
    }
}

/// Damaged shards per stripe; stripes without damage are omitted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScrubReport {
    pub stripes: BTreeMap<u32, Vec<(NodeId, ScrubIssue)>>,
}

impl ScrubReport {
    pub fn is_clean(&self) -> bool {
        self.stripes.is_empty()
    }

    pub fn damaged(&self, stripe: u32) -> NodeSet {
        self.stripes.get(&stripe).map(|v| v.iter().map(|(n, _)| *n).collect()).unwrap_or_default()
    }
}

impl fmt::Display for ScrubReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_clean() {
            return writeln!(f, "all shards healthy");
        }
        for (stripe, issues) in &self.stripes {
            let list: Vec<String> = issues.iter().map(|(n, i)| format!("{n} ({i})")).collect();
            writeln!(f, "stripe {stripe}: {}", list.join(", "))?;
        }
        Ok(())
    }
}

/// Checks every (stripe, node) shard of `manifest`; `fetch` returns the raw
/// shard bytes or `None` when absent.
pub fn scrub(manifest: &FileManifest, fetch: impl Fn(u32, NodeId) -> Option<Vec<u8>>) -> Result<ScrubReport, StoreError> {
    let params = CodeParams::new(manifest.k)?;
    let mut report = ScrubReport::default();
    for stripe in 0..manifest.stripe_count {
        let mut issues = Vec::new();
        for node in params.nodes() {
            let issue = match fetch(stripe, node) {
                None => Some(ScrubIssue::Missing),
                Some(bytes) => check_shard(manifest, stripe, node, &bytes),
            };
            if let Some(issue) = issue {
                issues.push((node, issue));
            }
        }
        if !issues.is_empty() {
            report.stripes.insert(stripe, issues);
        }
    }
    Ok(report)
}

fn check_shard(manifest: &FileManifest, stripe: u32, node: NodeId, bytes: &[u8]) -> Option<ScrubIssue> {
    let header = match read_shard(bytes) {
        Ok((header, _)) => header,
        Err(StoreError::CrcMismatch { .. }) => return Some(ScrubIssue::Checksum),
        Err(e) => return Some(ScrubIssue::Malformed(e.to_string())),
    };
    let expected = (manifest.k, node, stripe, manifest.fragment_size, manifest.original_file_len);
    let found = (header.k as usize, header.node, header.stripe_index, header.fragment_size as usize, header.original_file_len);
    if expected != found {
        return Some(ScrubIssue::Malformed("header does not match manifest".into()));
    }
    match manifest.checksums.get(&(stripe, node)) {
        Some(&crc) if crc != header.payload_crc32 => Some(ScrubIssue::Checksum),
        _ => None,
    }
}
