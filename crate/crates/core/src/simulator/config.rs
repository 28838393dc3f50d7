use std::collections::BTreeMap;

use crate::codec::{CodeParams, NodeId};
use crate::report::KvDocument;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RepairPolicy {
    /// Repeatedly rebuild the failed node with the cheapest plan, ties going
    /// to the canonically first node.
    #[default]
    CheapestFirst,
}

/// Scripted failures: round → nodes failed at the start of that round.
pub type FailureTrace = BTreeMap<u64, Vec<NodeId>>;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub k: usize,
    pub rounds: u64,
    /// Per node, per round.
    pub fail_probability: f64,
    pub trace: FailureTrace,
    pub rng_seed: u64,
    pub repair_policy: RepairPolicy,
    /// Cap on repairs per round across all groups; `None` is unlimited.
    pub repairs_per_round: Option<usize>,
    /// Independent stripes, each on its own 2k nodes.
    pub groups: usize,
    pub fragment_size: usize,
}

impl SimConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            rounds: 1,
            fail_probability: 0.0,
            trace: FailureTrace::new(),
            rng_seed: 0,
            repair_policy: RepairPolicy::CheapestFirst,
            repairs_per_round: None,
            groups: 1,
            fragment_size: 8,
        }
    }

    pub fn validate(&self) -> Result<CodeParams, SimError> {
        let params = CodeParams::new(self.k).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.fail_probability) {
            return Err(SimError::InvalidConfig(format!("fail_probability {} outside [0, 1]", self.fail_probability)));
        }
        if self.groups == 0 {
            return Err(SimError::InvalidConfig("groups must be at least 1".into()));
        }
        if self.fragment_size == 0 {
            return Err(SimError::InvalidConfig("fragment_size must be at least 1".into()));
        }
        for (round, nodes) in &self.trace {
            if let Some(bad) = nodes.iter().find(|n| n.partition >= self.k) {
                return Err(SimError::InvalidConfig(format!("trace round {round}: node {bad} does not exist for k = {}", self.k)));
            }
        }
        Ok(params)
    }

    /// Parses a `key = value` document. Trace entries are `fail.<round> = S1, P1`.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let doc = KvDocument::parse(text).map_err(SimError::InvalidConfig)?;
        let bad = |key: &str, value: &str| SimError::InvalidConfig(format!("bad value {value:?} for `{key}`"));
        let k = doc.get("k").ok_or_else(|| SimError::InvalidConfig("missing `k`".into()))?;
        let mut config = SimConfig::new(k.parse().map_err(|_| bad("k", k))?);
        for (key, value) in doc.entries() {
            match key.as_str() {
                "k" => {}
                "rounds" => config.rounds = value.parse().map_err(|_| bad(key, value))?,
                "fail_probability" => config.fail_probability = value.parse().map_err(|_| bad(key, value))?,
                "seed" => config.rng_seed = value.parse().map_err(|_| bad(key, value))?,
                "groups" => config.groups = value.parse().map_err(|_| bad(key, value))?,
                "fragment_size" => config.fragment_size = value.parse().map_err(|_| bad(key, value))?,
                "policy" if value == "cheapest-first" => config.repair_policy = RepairPolicy::CheapestFirst,
                "repairs_per_round" if value == "unlimited" => config.repairs_per_round = None,
                "repairs_per_round" => config.repairs_per_round = Some(value.parse().map_err(|_| bad(key, value))?),
                _ => match key.strip_prefix("fail.") {
                    Some(round) => {
                        let round: u64 = round.parse().map_err(|_| bad(key, value))?;
                        config.trace.entry(round).or_default().extend(parse_node_list(value)?);
                    }
                    None => return Err(SimError::InvalidConfig(format!("unknown key `{key}`"))),
                },
            }
        }
        config.validate()?;
        Ok(config)
    }
}

/// Parses a standalone trace: one `<round> = <nodes>` line per round.
pub fn parse_trace(text: &str) -> Result<FailureTrace, SimError> {
    let doc = KvDocument::parse(text).map_err(SimError::InvalidConfig)?;
    let mut trace = FailureTrace::new();
    for (round, nodes) in doc.entries() {
        let round: u64 = round.parse().map_err(|_| SimError::InvalidConfig(format!("bad round {round:?}")))?;
        trace.entry(round).or_default().extend(parse_node_list(nodes)?);
    }
    Ok(trace)
}

fn parse_node_list(value: &str) -> Result<Vec<NodeId>, SimError> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e: crate::codec::CodecError| SimError::InvalidConfig(e.to_string())))
        .collect()
}
