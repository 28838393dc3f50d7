//! Exhaustive erasure-pattern analysis.
//!
//! A pattern is recoverable when the rows of the surviving nodes have rank k
//! over GF(2), i.e. the whole file can still be decoded. Scans are brute
//! force over every pattern and run in parallel; results do not depend on
//! scheduling.

use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{combinations, gf2_rank, CodeParams, NodeId, NodeSet};
use crate::report::KvDocument;

/// Exhaustive scans are limited to this many nodes (2^24 patterns).
pub const DEFAULT_NODE_BOUND: usize = 24;
/// Counterexample lists are truncated to this many entries.
pub const COUNTEREXAMPLE_CAP: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalyzeError {
    #[error("exhaustive scan over {nodes} nodes exceeds the bound of {bound} (k <= {})", .bound / 2)]
    TooLarge { nodes: usize, bound: usize },
}

/// A set of simultaneously failed nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ErasurePattern(pub NodeSet);

impl ErasurePattern {
    pub fn new(failed: impl IntoIterator<Item = NodeId>) -> Self {
        ErasurePattern(failed.into_iter().collect())
    }

    pub fn failed(&self) -> NodeSet {
        self.0
    }
}

impl fmt::Display for ErasurePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub fn is_recoverable(params: &CodeParams, pattern: &ErasurePattern) -> bool {
    let survivors = pattern.failed().complement(params);
    gf2_rank(survivors.iter().map(|n| params.row(n))) == params.k()
}

/// Precomputed rows for fast scanning over bitmask patterns.
struct Scanner {
    params: CodeParams,
    rows: Vec<u64>,
    full: u128,
}

impl Scanner {
    fn new(params: &CodeParams, bound: usize) -> Result<Self, AnalyzeError> {
        if params.n() > bound {
            return Err(AnalyzeError::TooLarge { nodes: params.n(), bound });
        }
        Ok(Self { params: *params, rows: params.nodes().map(|n| params.row(n)).collect(), full: params.all_nodes().bits() })
    }

    fn recoverable(&self, failed: u128) -> bool {
        let mut survivors = self.full & !failed;
        let mut rows = Vec::with_capacity(self.rows.len());
        while survivors != 0 {
            rows.push(self.rows[survivors.trailing_zeros() as usize]);
            survivors &= survivors - 1;
        }
        gf2_rank(rows) == self.params.k()
    }

    /// Unrecoverable patterns of exactly `size` failures accepted by `filter`,
    /// as (checked, count, first counterexamples in canonical order).
    fn scan_size(&self, size: usize, filter: impl Fn(u128) -> bool + Sync) -> (u64, u64, Vec<NodeSet>) {
        let masks: Vec<u128> = combinations(self.params.n(), size).filter(|&m| filter(m)).collect();
        let bad: Vec<NodeSet> =
            masks.par_iter().filter(|&&m| !self.recoverable(m)).map(|&m| NodeSet::from_bits(m)).collect();
        let count = bad.len() as u64;
        (masks.len() as u64, count, canonical_capped(bad))
    }
}

fn canonical_capped(mut sets: Vec<NodeSet>) -> Vec<NodeSet> {
    sets.sort_by_cached_key(|s| s.to_vec());
    sets.truncate(COUNTEREXAMPLE_CAP);
    sets
}

fn binomial(n: u64, r: u64) -> u64 {
    (0..r).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeCount {
    pub failures: usize,
    pub recoverable: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToleranceReport {
    pub k: usize,
    /// Largest t such that every pattern of at most t failures is recoverable.
    pub max_all_patterns_tolerated: usize,
    /// One entry per failure count 0..=2k.
    pub per_size: Vec<SizeCount>,
    /// Unrecoverable patterns of size `max_all_patterns_tolerated + 1`,
    /// canonical order, capped.
    pub counterexamples: Vec<ErasurePattern>,
}

impl ToleranceReport {
    pub fn to_kv(&self) -> KvDocument {
        let mut doc = KvDocument::new();
        doc.push("k", self.k).push("n", 2 * self.k).push("max_tolerated", self.max_all_patterns_tolerated);
        for s in &self.per_size {
            doc.push(format!("recoverable.f{}", s.failures), format!("{}/{}", s.recoverable, s.total));
        }
        doc.push("counterexample_size", self.max_all_patterns_tolerated + 1);
        doc.push("counterexamples", join_patterns(&self.counterexamples));
        doc
    }
}

impl fmt::Display for ToleranceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(2k,k) = ({},{})  max tolerated: {}", 2 * self.k, self.k, self.max_all_patterns_tolerated)?;
        writeln!(f, "{:>9} {:>12} {:>12} {:>9}", "failures", "recoverable", "patterns", "fraction")?;
        for s in &self.per_size {
            let frac = s.recoverable as f64 / s.total as f64;
            writeln!(f, "{:>9} {:>12} {:>12} {:>9.4}", s.failures, s.recoverable, s.total, frac)?;
        }
        writeln!(f, "smallest unrecoverable patterns ({} failures):", self.max_all_patterns_tolerated + 1)?;
        for p in &self.counterexamples {
            writeln!(f, "  {p}")?;
        }
        Ok(())
    }
}

fn join_patterns(patterns: &[ErasurePattern]) -> String {
    patterns.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
}

/// Full recoverability profile over every failure count.
pub fn tolerance_profile(params: &CodeParams) -> Result<ToleranceReport, AnalyzeError> {
    let scanner = Scanner::new(params, DEFAULT_NODE_BOUND)?;
    let n = params.n();
    let recoverable = (0..1u64 << n)
        .into_par_iter()
        .fold(
            || vec![0u64; n + 1],
            |mut acc, mask| {
                if scanner.recoverable(mask as u128) {
                    acc[mask.count_ones() as usize] += 1;
                }
                acc
            },
        )
        .reduce(|| vec![0u64; n + 1], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    let per_size: Vec<SizeCount> = (0..=n)
        .map(|f| SizeCount { failures: f, recoverable: recoverable[f], total: binomial(n as u64, f as u64) })
        .collect();
    let max = per_size.iter().take_while(|s| s.recoverable == s.total).count() - 1;
    let (_, _, bad) = scanner.scan_size(max + 1, |_| true);
    Ok(ToleranceReport {
        k: params.k(),
        max_all_patterns_tolerated: max,
        per_size,
        counterexamples: bad.into_iter().map(ErasurePattern).collect(),
    })
}

/// Largest t such that every pattern of at most t failures is recoverable.
pub fn max_tolerated_failures(params: &CodeParams) -> Result<usize, AnalyzeError> {
    let scanner = Scanner::new(params, DEFAULT_NODE_BOUND)?;
    // every pattern of size f+1 unrecoverable-free implies the same for f
    // (monotonicity), but sizes are scanned upward to stop early
    for f in 1..=params.n() {
        let (_, bad, _) = scanner.scan_size(f, |_| true);
        if bad > 0 {
            return Ok(f - 1);
        }
    }
    Ok(params.n())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Claim {
    /// Every pattern of three failures is recoverable.
    AnyThreeFailures,
    /// Every pattern of k−1 failures in k−1 distinct partitions is recoverable.
    DistinctPartitions,
    /// Every pattern of k−1 failures in which at most one partition loses
    /// both nodes is recoverable.
    AtMostOneDoubledPartition,
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Claim::AnyThreeFailures => "any-three-failures",
            Claim::DistinctPartitions => "k-minus-one-distinct-partitions",
            Claim::AtMostOneDoubledPartition => "k-minus-one-at-most-one-doubled-partition",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimReport {
    pub claim: Claim,
    pub k: usize,
    pub patterns_checked: u64,
    pub counterexample_count: u64,
    /// Canonical order, capped at [`COUNTEREXAMPLE_CAP`].
    pub counterexamples: Vec<ErasurePattern>,
}

impl ClaimReport {
    pub fn holds(&self) -> bool {
        self.counterexample_count == 0
    }

    pub fn to_kv(&self) -> KvDocument {
        let prefix = format!("claim.{}", self.claim);
        let mut doc = KvDocument::new();
        doc.push(format!("{prefix}.holds"), self.holds())
            .push(format!("{prefix}.checked"), self.patterns_checked)
            .push(format!("{prefix}.counterexample_count"), self.counterexample_count)
            .push(format!("{prefix}.counterexamples"), join_patterns(&self.counterexamples));
        doc
    }
}

impl fmt::Display for ClaimReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.holds() { "holds" } else { "FAILS" };
        write!(f, "{:<44} {verdict} ({} patterns checked", self.claim.to_string(), self.patterns_checked)?;
        if !self.holds() {
            write!(f, ", {} counterexamples: {}", self.counterexample_count, join_patterns(&self.counterexamples))?;
        }
        f.write_str(")")
    }
}

fn claim_report(params: &CodeParams, claim: Claim, size: usize, filter: impl Fn(u128) -> bool + Sync) -> Result<ClaimReport, AnalyzeError> {
    let scanner = Scanner::new(params, DEFAULT_NODE_BOUND)?;
    let (checked, count, bad) = scanner.scan_size(size, filter);
    Ok(ClaimReport {
        claim,
        k: params.k(),
        patterns_checked: checked,
        counterexample_count: count,
        counterexamples: bad.into_iter().map(ErasurePattern).collect(),
    })
}

/// Partitions that lose both nodes in `mask`.
fn doubled_partitions(k: usize, mask: u128) -> usize {
    (0..k).filter(|&i| (mask >> (2 * i)) & 0b11 == 0b11).count()
}

pub fn verify_three_failure_claim(params: &CodeParams) -> Result<ClaimReport, AnalyzeError> {
    claim_report(params, Claim::AnyThreeFailures, 3, |_| true)
}

pub fn verify_distinct_partition_claim(params: &CodeParams) -> Result<ClaimReport, AnalyzeError> {
    let k = params.k();
    claim_report(params, Claim::DistinctPartitions, k - 1, |m| doubled_partitions(k, m) == 0)
}

pub fn verify_common_partition_claim(params: &CodeParams) -> Result<ClaimReport, AnalyzeError> {
    let k = params.k();
    claim_report(params, Claim::AtMostOneDoubledPartition, k - 1, |m| doubled_partitions(k, m) <= 1)
}

/// Sampled recoverability for codes too large to scan exhaustively.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledTolerance {
    pub failures: usize,
    pub samples: u64,
    pub recoverable: u64,
    /// 95% Wilson score interval for the recoverable fraction.
    pub interval: (f64, f64),
}

pub fn sample_tolerance(params: &CodeParams, failures: usize, samples: u64, seed: u64) -> SampledTolerance {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let n = params.n();
    let failures = failures.min(n);
    let mut recoverable = 0;
    for _ in 0..samples {
        let pattern = ErasurePattern(index::sample(&mut rng, n, failures).into_iter().map(NodeId::from_index).collect());
        recoverable += is_recoverable(params, &pattern) as u64;
    }
    SampledTolerance { failures, samples, recoverable, interval: wilson_interval(recoverable, samples) }
}

fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) / n) + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::make_params;

    fn pattern(labels: &[&str]) -> ErasurePattern {
        ErasurePattern::new(labels.iter().map(|s| s.parse::<NodeId>().unwrap()))
    }

    #[test]
    fn recoverability_examples() {
        let k5 = make_params(5).unwrap();
        assert!(is_recoverable(&k5, &pattern(&["S1", "P1", "S2"])));
        assert!(!is_recoverable(&k5, &pattern(&["S2", "P2", "S3", "P3"])));
        for k in 2..=9 {
            let p = make_params(k).unwrap();
            assert!(is_recoverable(&p, &ErasurePattern::new((0..k).map(NodeId::parity))));
            assert!(is_recoverable(&p, &ErasurePattern::default()));
        }
    }

    #[test]
    fn max_tolerated_examples() {
        let m = |k| max_tolerated_failures(&make_params(k).unwrap()).unwrap();
        assert_eq!(m(5), 3);
        assert_eq!(m(4), 3);
        assert_eq!(m(3), 2);
        assert_eq!(m(2), 1);
        assert_eq!(
            max_tolerated_failures(&make_params(13).unwrap()),
            Err(AnalyzeError::TooLarge { nodes: 26, bound: 24 })
        );
    }

    #[test]
    fn three_failure_claim_boundary() {
        let report = verify_three_failure_claim(&make_params(5).unwrap()).unwrap();
        assert!(report.holds());
        assert_eq!(report.patterns_checked, 120);

        let report = verify_three_failure_claim(&make_params(3).unwrap()).unwrap();
        let found: Vec<String> = report.counterexamples.iter().map(|p| p.to_string()).collect();
        assert_eq!(found, ["{S1,S2,S3}", "{S1,P2,P3}", "{P1,S2,P3}", "{P1,P2,S3}"]);

        let report = verify_three_failure_claim(&make_params(2).unwrap()).unwrap();
        assert_eq!((report.patterns_checked, report.counterexample_count), (4, 4));
    }

    #[test]
    fn partition_claims() {
        let report = verify_distinct_partition_claim(&make_params(5).unwrap()).unwrap();
        assert!(report.holds());
        assert_eq!(report.patterns_checked, 80);
        assert_eq!(verify_distinct_partition_claim(&make_params(3).unwrap()).unwrap().patterns_checked, 12);
        assert_eq!(verify_distinct_partition_claim(&make_params(2).unwrap()).unwrap().patterns_checked, 4);
        for k in 2..=7 {
            assert!(verify_common_partition_claim(&make_params(k).unwrap()).unwrap().holds(), "k = {k}");
        }
    }

    #[test]
    fn profile_k5() {
        let report = tolerance_profile(&make_params(5).unwrap()).unwrap();
        assert_eq!(report.per_size[0], SizeCount { failures: 0, recoverable: 1, total: 1 });
        assert_eq!(report.per_size[3], SizeCount { failures: 3, recoverable: 120, total: 120 });
        let f5 = report.per_size[5];
        assert!(f5.recoverable > 0 && f5.recoverable < f5.total);
        assert_eq!(report.max_all_patterns_tolerated, 3);
        // the only 4-failure losses are two whole partitions
        assert_eq!(report.counterexamples.len(), 10);
        assert_eq!(report.counterexamples[0], pattern(&["S1", "P1", "S2", "P2"]));
        let kv = report.to_kv();
        assert_eq!(kv.get("max_tolerated"), Some("3"));
        assert_eq!(kv.get("recoverable.f3"), Some("120/120"));
    }

    #[test]
    fn sampling_brackets_exact_fraction() {
        let p = make_params(5).unwrap();
        let exact = tolerance_profile(&p).unwrap().per_size[5];
        let s = sample_tolerance(&p, 5, 4000, 7);
        let frac = exact.recoverable as f64 / exact.total as f64;
        assert!(s.interval.0 <= frac && frac <= s.interval.1, "{s:?} vs {frac}");
        assert_eq!(s, sample_tolerance(&p, 5, 4000, 7));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 5), 252);
        assert_eq!(binomial(24, 12), 2_704_156);
        assert_eq!(binomial(6, 0), 1);
    }
}
