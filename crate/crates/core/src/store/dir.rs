use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::codec::{decode, encode_stripe, select_recovery_set, CodeParams, NodeId, NodeSet, Packet};
use crate::repair::{
    best_single_repair, execute_plan, plan_cheapest_first, plan_partition_repair, repair_bandwidth, BandwidthReport,
    PartitionOrder, RepairPlan,
};

use super::{assemble_file, read_shard, scrub, split_file, write_shard, FileManifest, ScrubReport, ShardHeader, StoreError};

/// `<basename>.s<stripe>.<S|P><partition+1>.shard`
pub fn shard_file_name(basename: &str, stripe: u32, node: NodeId) -> String {
    format!("{basename}.s{stripe}.{node}.shard")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.display().to_string(), source }
}

/// Writes `bytes` through a temporary file and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// What to rebuild in [`ShardDir::repair`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairRequest {
    /// Every damaged shard, cheapest plan first.
    All,
    /// One node in every stripe where it is damaged. If its related node is
    /// damaged as well, both are rebuilt, the named node first.
    Node(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripeRepair {
    pub stripe: u32,
    pub plans: Vec<RepairPlan>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairOutcome {
    pub k: usize,
    pub stripes: Vec<StripeRepair>,
    pub bandwidth: BandwidthReport,
}

/// A directory holding the shards and manifest of one file.
#[derive(Debug, Clone)]
pub struct ShardDir {
    dir: PathBuf,
    manifest: FileManifest,
}

impl ShardDir {
    /// Splits, encodes and writes `data`, returning the opened directory.
    pub fn encode_file(
        dir: impl AsRef<Path>,
        basename: &str,
        data: &[u8],
        params: &CodeParams,
        fragment_size: usize,
    ) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let (stripes, mut manifest) = split_file(data, params, fragment_size)?;
        manifest.basename = basename.to_string();
        let mut store = ShardDir { dir, manifest };
        let mut checksums = BTreeMap::new();
        for (index, fragments) in stripes.iter().enumerate() {
            let stripe = encode_stripe(params, fragments)?;
            for (node, packet) in stripe.iter() {
                let crc = store.write_packet(index as u32, node, packet)?;
                checksums.insert((index as u32, node), crc);
            }
        }
        store.manifest.checksums = checksums;
        write_atomic(&store.manifest_path(), store.manifest.to_text().as_bytes())?;
        Ok(store)
    }

    /// Opens the only manifest in `dir`.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref();
        let mut manifests = Vec::new();
        for entry in fs::read_dir(dir).map_err(io_err(dir))? {
            let path = entry.map_err(io_err(dir))?.path();
            if path.extension().is_some_and(|e| e == "manifest") {
                manifests.push(path);
            }
        }
        match manifests.len() {
            0 => Err(StoreError::NoManifest(dir.display().to_string())),
            1 => Self::open_manifest(&manifests[0]),
            _ => Err(StoreError::AmbiguousManifest(dir.display().to_string())),
        }
    }

    pub fn open_manifest(path: &Path) -> Result<Self, StoreError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let manifest = FileManifest::parse(&text)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(ShardDir { dir, manifest })
    }

    pub fn manifest(&self) -> &FileManifest {
        &self.manifest
    }

    pub fn params(&self) -> Result<CodeParams, StoreError> {
        Ok(CodeParams::new(self.manifest.k)?)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(format!("{}.manifest", self.manifest.basename))
    }

    pub fn shard_path(&self, stripe: u32, node: NodeId) -> PathBuf {
        self.dir.join(shard_file_name(&self.manifest.basename, stripe, node))
    }

    fn write_packet(&self, stripe: u32, node: NodeId, packet: &Packet) -> Result<u32, StoreError> {
        let header = ShardHeader {
            k: self.manifest.k as u16,
            node,
            stripe_index: stripe,
            fragment_size: u32::try_from(self.manifest.fragment_size).map_err(|_| StoreError::InvalidFragmentSize)?,
            original_file_len: self.manifest.original_file_len,
            payload_crc32: 0,
        };
        let bytes = write_shard(&header, packet)?;
        write_atomic(&self.shard_path(stripe, node), &bytes)?;
        Ok(super::crc32(packet.as_bytes()))
    }

    pub fn scrub(&self) -> Result<ScrubReport, StoreError> {
        scrub(&self.manifest, |stripe, node| fs::read(self.shard_path(stripe, node)).ok())
    }

    /// Healthy shards of one stripe, given a scrub report.
    fn healthy_shards(&self, stripe: u32, report: &ScrubReport) -> Result<BTreeMap<NodeId, Packet>, StoreError> {
        let params = self.params()?;
        let damaged = report.damaged(stripe);
        let mut shards = BTreeMap::new();
        for node in damaged.complement(&params).iter() {
            let path = self.shard_path(stripe, node);
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            let (_, packet) = read_shard(&bytes)?;
            shards.insert(node, packet);
        }
        Ok(shards)
    }

    /// Reassembles the original file from whatever shards are healthy.
    pub fn decode_file(&self) -> Result<Vec<u8>, StoreError> {
        let params = self.params()?;
        let report = self.scrub()?;
        let mut stripes = BTreeMap::new();
        for stripe in 0..self.manifest.stripe_count {
            let mut shards = self.healthy_shards(stripe, &report)?;
            let healthy: NodeSet = shards.keys().copied().collect();
            let pick = select_recovery_set(&params, healthy).ok_or(StoreError::UndecodableStripe { stripe, healthy })?;
            let chosen: BTreeMap<NodeId, Packet> =
                pick.iter().map(|n| (*n, shards.remove(n).expect("picked from healthy"))).collect();
            stripes.insert(stripe, decode(&params, &chosen)?);
        }
        assemble_file(&stripes, &self.manifest)
    }

    /// Rebuilds damaged shards in place and reports the plans used.
    pub fn repair(&self, request: RepairRequest) -> Result<RepairOutcome, StoreError> {
        let params = self.params()?;
        if let RepairRequest::Node(node) = request {
            params.check_node(node)?;
        }
        let report = self.scrub()?;
        let mut outcome = Vec::new();
        for &stripe in report.stripes.keys() {
            let damaged = report.damaged(stripe);
            let alive = damaged.complement(&params);
            let wrap = |source| StoreError::Repair { stripe, source };
            let plans = match request {
                RepairRequest::All => plan_cheapest_first(&params, damaged).map_err(wrap)?,
                RepairRequest::Node(node) if !damaged.contains(node) => continue,
                RepairRequest::Node(node) if damaged.contains(node.related()) => {
                    let order = match node.role {
                        crate::codec::Role::Systematic => PartitionOrder::SystematicFirst,
                        crate::codec::Role::Parity => PartitionOrder::ParityFirst,
                    };
                    let (a, b) = plan_partition_repair(&params, node.partition, alive, order).map_err(wrap)?;
                    vec![a, b]
                }
                RepairRequest::Node(node) => vec![best_single_repair(&params, node, alive).map_err(wrap)?],
            };
            let mut packets = self.healthy_shards(stripe, &report)?;
            for plan in &plans {
                let rebuilt = execute_plan(plan, &packets).map_err(wrap)?;
                if let Some(&expected) = self.manifest.checksums.get(&(stripe, plan.target)) {
                    let actual = super::crc32(rebuilt.as_bytes());
                    if actual != expected {
                        return Err(StoreError::CrcMismatch { expected, actual });
                    }
                }
                self.write_packet(stripe, plan.target, &rebuilt)?;
                packets.insert(plan.target, rebuilt);
            }
            outcome.push(StripeRepair { stripe, plans });
        }
        let all_plans: Vec<RepairPlan> = outcome.iter().flat_map(|s| s.plans.iter().cloned()).collect();
        let bandwidth = repair_bandwidth(&all_plans, self.manifest.fragment_size as u64);
        Ok(RepairOutcome { k: params.k(), stripes: outcome, bandwidth })
    }
}
