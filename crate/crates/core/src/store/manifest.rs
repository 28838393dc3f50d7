use std::collections::BTreeMap;

use crate::codec::NodeId;
use crate::report::KvDocument;

use super::StoreError;

/// Describes how a file was striped. Stored next to the shards as a
/// `key = value` text document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileManifest {
    pub basename: String,
    pub k: usize,
    pub fragment_size: usize,
    pub stripe_count: u32,
    pub original_file_len: u64,
    /// CRC-32 of each shard payload, keyed by (stripe, node).
    pub checksums: BTreeMap<(u32, NodeId), u32>,
}

impl FileManifest {
    pub fn stripe_bytes(&self) -> u64 {
        (self.k * self.fragment_size) as u64
    }

    /// `ceil(len / (k·fragment_size))`, at least one stripe.
    pub fn expected_stripe_count(original_file_len: u64, k: usize, fragment_size: usize) -> u64 {
        let stripe = (k * fragment_size) as u64;
        original_file_len.div_ceil(stripe).max(1)
    }

    pub fn to_text(&self) -> String {
        let mut doc = KvDocument::new();
        doc.push("format", "nmds-manifest")
            .push("version", 1)
            .push("basename", &self.basename)
            .push("k", self.k)
            .push("fragment_size", self.fragment_size)
            .push("stripe_count", self.stripe_count)
            .push("original_file_len", self.original_file_len);
        for ((stripe, node), crc) in &self.checksums {
            doc.push(format!("crc.{stripe}.{node}"), format!("{crc:08x}"));
        }
        doc.to_string()
    }

    pub fn parse(text: &str) -> Result<Self, StoreError> {
        let bad = |msg: String| StoreError::BadManifest(msg);
        let doc = KvDocument::parse(text).map_err(bad)?;
        let field = |key: &str| doc.get(key).ok_or_else(|| bad(format!("missing `{key}`")));
        let number = |key: &str| -> Result<u64, StoreError> {
            field(key)?.parse().map_err(|_| bad(format!("`{key}` is not a number")))
        };
        if field("format")? != "nmds-manifest" {
            return Err(bad("not an nmds manifest".into()));
        }
        if number("version")? != 1 {
            return Err(bad("unsupported manifest version".into()));
        }
        let mut checksums = BTreeMap::new();
        for (key, value) in doc.entries() {
            let Some(rest) = key.strip_prefix("crc.") else { continue };
            let (stripe, node) = rest.split_once('.').ok_or_else(|| bad(format!("bad checksum key `{key}`")))?;
            let stripe: u32 = stripe.parse().map_err(|_| bad(format!("bad stripe in `{key}`")))?;
            let node: NodeId = node.parse().map_err(|_| bad(format!("bad node in `{key}`")))?;
            let crc = u32::from_str_radix(value, 16).map_err(|_| bad(format!("bad checksum `{value}`")))?;
            checksums.insert((stripe, node), crc);
        }
        let manifest = FileManifest {
            basename: field("basename")?.to_string(),
            k: number("k")? as usize,
            fragment_size: number("fragment_size")? as usize,
            stripe_count: u32::try_from(number("stripe_count")?).map_err(|_| bad("stripe_count too large".into()))?,
            original_file_len: number("original_file_len")?,
            checksums,
        };
        if manifest.k < 2 || manifest.fragment_size == 0 {
            return Err(bad("k must be at least 2 and fragment_size positive".into()));
        }
        let expected = Self::expected_stripe_count(manifest.original_file_len, manifest.k, manifest.fragment_size);
        if expected != manifest.stripe_count as u64 {
            return Err(bad(format!("stripe_count {} disagrees with file length (expected {expected})", manifest.stripe_count)));
        }
        Ok(manifest)
    }
}
