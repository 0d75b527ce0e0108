//! Run parameters and their validity rules.
//!
//! A [`SystemConfig`] fixes everything a run needs: cluster size `K`, the
//! replication degree `r` (each file is stored on `r` nodes, so the storage
//! fraction is `mu = r/K`), per-job shape `N`/`Q`/`T`, the job-batch
//! multiplier `gamma`, the PRNG seed, and the identifiers selecting the
//! aggregation group, the map-function family, and the shuffle scheme.
//!
//! `mu` is never represented as a float: all arithmetic on it is exact,
//! carried out on the integers `r` and `K`.

use num_integer::binomial;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::load::Load;

/// The abelian group instantiating the "+" of linear aggregation.
///
/// Reduction sums intermediate values in one of these groups; the identity is
/// always the all-zero payload. Coded multicast is raw bitwise XOR regardless
/// of the group, because coded segments are recovered exactly before any
/// summation happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationGroup {
    /// Bitwise XOR; every element is its own inverse.
    Xor,
    /// Independent bytewise addition modulo 256.
    Add8,
    /// Independent little-endian 32-bit wrapping addition. Requires `32 | T`.
    Add32,
}

impl AggregationGroup {
    pub fn name(self) -> &'static str {
        match self {
            AggregationGroup::Xor => "xor",
            AggregationGroup::Add8 => "add8",
            AggregationGroup::Add32 => "add32",
        }
    }
}

impl std::str::FromStr for AggregationGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xor" => Ok(AggregationGroup::Xor),
            "add8" => Ok(AggregationGroup::Add8),
            "add32" => Ok(AggregationGroup::Add32),
            other => Err(Error::Parameter(format!(
                "unknown aggregation group `{other}` (expected xor, add8, or add32)"
            ))),
        }
    }
}

impl std::fmt::Display for AggregationGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Map-function family producing the intermediate values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadFamily {
    /// Keyed pseudorandom function of (seed, job, function, file).
    Prf,
    /// Seeded wrapping-integer dot products, modeling partial-gradient
    /// shards. Requires `32 | T`.
    Linear,
}

impl WorkloadFamily {
    pub fn name(self) -> &'static str {
        match self {
            WorkloadFamily::Prf => "prf",
            WorkloadFamily::Linear => "linear",
        }
    }
}

impl std::str::FromStr for WorkloadFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prf" => Ok(WorkloadFamily::Prf),
            "linear" => Ok(WorkloadFamily::Linear),
            other => Err(Error::Parameter(format!(
                "unknown workload family `{other}` (expected prf or linear)"
            ))),
        }
    }
}

impl std::fmt::Display for WorkloadFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Shuffle scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// Unicast every missing intermediate value raw.
    Uncoded,
    /// Pre-combine values of the same function, unicast one packet per batch.
    Compression,
    /// Coded multicast of individually recoverable values within node
    /// subsets; no pre-combining.
    Cdc,
    /// Pre-combine per batch, then coded multicast across jobs in two stages.
    #[serde(rename = "ccdc")]
    CompressedCdc,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::Uncoded,
        SchemeKind::Compression,
        SchemeKind::Cdc,
        SchemeKind::CompressedCdc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Uncoded => "uncoded",
            SchemeKind::Compression => "compression",
            SchemeKind::Cdc => "cdc",
            SchemeKind::CompressedCdc => "ccdc",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uncoded" => Ok(SchemeKind::Uncoded),
            "compression" => Ok(SchemeKind::Compression),
            "cdc" => Ok(SchemeKind::Cdc),
            "ccdc" => Ok(SchemeKind::CompressedCdc),
            other => Err(Error::Parameter(format!(
                "unknown scheme `{other}` (expected uncoded, compression, cdc, or ccdc)"
            ))),
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// All parameters of one simulated run.
///
/// Serialized field names match the CLI flags (`K`, `r`, `N`, `Q`, `T`,
/// `gamma`, ...), so a JSON config file reads like the command line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of computing nodes (at least 2).
    #[serde(rename = "K")]
    pub k: u32,
    /// Replication degree `mu * K`: how many nodes store each file.
    pub r: u32,
    /// Input files per job.
    #[serde(rename = "N")]
    pub n: u32,
    /// Output functions per job; `K` must divide `Q`.
    #[serde(rename = "Q")]
    pub q: u32,
    /// Intermediate-value size in bits; must be byte-aligned.
    #[serde(rename = "T")]
    pub t: u32,
    /// Job-batch multiplier: the run executes `gamma * C(K, r+1)` jobs.
    pub gamma: u32,
    /// Seed for the deterministic workload generator.
    pub seed: u64,
    /// Group used for all reductions.
    pub group: AggregationGroup,
    /// Map-function family.
    pub workload: WorkloadFamily,
    /// Shuffle scheme to execute.
    pub scheme: SchemeKind,
}

impl SystemConfig {
    /// Total number of jobs, `gamma * C(K, r+1)`.
    pub fn jobs(&self) -> u64 {
        u64::from(self.gamma) * binomial(u64::from(self.k), u64::from(self.r) + 1)
    }

    /// Number of jobs in one placement block, `C(K, r+1)`.
    pub fn jobs_per_block(&self) -> u64 {
        binomial(u64::from(self.k), u64::from(self.r) + 1)
    }

    /// Output functions owned by each node per job.
    pub fn functions_per_node(&self) -> u32 {
        self.q / self.k
    }

    /// The exact storage fraction `r / K`.
    pub fn mu(&self) -> Load {
        Load::new(u64::from(self.r), u64::from(self.k))
    }

    /// Intermediate-value size in bytes.
    pub fn value_bytes(&self) -> usize {
        self.t as usize / 8
    }

    /// Check every invariant that applies to this configuration, including
    /// the per-scheme divisibility conditions. Error messages name the
    /// violated constraint.
    pub fn validate(&self) -> Result<()> {
        let SystemConfig { k, r, n, q, t, gamma, .. } = *self;
        if k < 2 {
            return Err(Error::Config(format!("K must be at least 2 (got K={k})")));
        }
        if r < 1 || r > k - 1 {
            return Err(Error::Config(format!(
                "r must satisfy 1 <= r <= K-1 (got r={r}, K={k})"
            )));
        }
        if n == 0 {
            return Err(Error::Config("N must be positive".into()));
        }
        if q == 0 || q % k != 0 {
            return Err(Error::Config(format!(
                "K must divide Q (got K={k}, Q={q})"
            )));
        }
        if t == 0 || t % 8 != 0 {
            return Err(Error::Config(format!(
                "T must be a positive multiple of 8 bits (got T={t})"
            )));
        }
        if gamma == 0 {
            return Err(Error::Config("gamma must be at least 1".into()));
        }
        if k > 64 {
            return Err(Error::Config(format!(
                "node labels are sized for clusters of at most 64 (got K={k})"
            )));
        }
        let per_block = binomial(u64::from(k), u64::from(r) + 1);
        match u64::from(gamma).checked_mul(per_block) {
            Some(jobs) if jobs <= u64::from(u32::MAX) => {}
            _ => {
                return Err(Error::Config(format!(
                    "gamma * C(K, r+1) jobs exceed the supported range (gamma={gamma}, C({k}, {})={per_block})",
                    r + 1
                )));
            }
        }
        if self.group == AggregationGroup::Add32 && t % 32 != 0 {
            return Err(Error::Config(format!(
                "group add32 requires 32 | T (got T={t})"
            )));
        }
        if self.workload == WorkloadFamily::Linear && t % 32 != 0 {
            return Err(Error::Config(format!(
                "the linear workload family requires 32 | T (got T={t})"
            )));
        }
        match self.scheme {
            SchemeKind::CompressedCdc | SchemeKind::Uncoded => {
                // Both run on the subset placement, so both need its shape.
                if n % (r + 1) != 0 {
                    return Err(Error::Config(format!(
                        "(r+1) must divide N (got r+1={}, N={n})",
                        r + 1
                    )));
                }
            }
            SchemeKind::Cdc => {
                let batches = binomial(u64::from(k), u64::from(r));
                if u64::from(n) % batches != 0 {
                    return Err(Error::Config(format!(
                        "C(K, r) must divide N (got C({k}, {r})={batches}, N={n})"
                    )));
                }
            }
            SchemeKind::Compression => {
                let c = k.div_ceil(r);
                if c > k {
                    return Err(Error::Config(format!(
                        "ceil(K/r) must not exceed K (got ceil({k}/{r})={c})"
                    )));
                }
                if (u64::from(r) * u64::from(n)) % u64::from(k) != 0 {
                    return Err(Error::Config(format!(
                        "mu*N = r*N/K must be an integer (got r={r}, N={n}, K={k})"
                    )));
                }
                if u64::from(r) * u64::from(n) < u64::from(k) {
                    return Err(Error::Config(format!(
                        "mu*N must be at least 1 (got r*N/K = {r}*{n}/{k})"
                    )));
                }
            }
        }
        Ok(())
    }
}
