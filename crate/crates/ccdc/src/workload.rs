//! Deterministic synthetic workloads.
//!
//! A map function turns `(job, function, file)` into one `T`-bit intermediate
//! value. Two families are provided:
//!
//! * `prf` — a keyed pseudorandom function. Values carry no structure; any
//!   accidental reuse or misrouting of a value shows up as a bitwise mismatch
//!   against the centralized oracle.
//! * `linear` — each file is a seeded vector of `d` words (each initialized
//!   below 2^16), and each function applies a seeded `(T/32) x d` matrix to
//!   it with wrapping 32-bit arithmetic. The map output is genuinely linear
//!   in the file payload, which is what makes sender-side pre-combining
//!   lossless for additive reductions.
//!
//! The generator is a splitmix-style 64-bit mixer: the seed and the tuple
//! components are absorbed one step at a time, then output blocks are drawn
//! in counter mode. The construction is fixed here so traces are reproducible
//! run-to-run and machine-to-machine.

use crate::config::{SystemConfig, WorkloadFamily};
use crate::error::{Error, Result};
use crate::model::{FileRef, FunctionRef, NodeId, Placement};
use crate::value::Value;

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Splitmix-style keyed generator. Absorbing folds a word into the state;
/// `block(i)` yields the i-th 64-bit output without disturbing the state.
#[derive(Debug, Clone, Copy)]
struct Prf {
    state: u64,
}

impl Prf {
    fn new(seed: u64) -> Self {
        Prf { state: mix(seed.wrapping_add(GAMMA)) }
    }

    fn absorb(mut self, word: u64) -> Self {
        self.state = mix(self.state.wrapping_add(GAMMA).wrapping_add(word));
        self
    }

    fn block(self, counter: u64) -> u64 {
        mix(self.state.wrapping_add(counter.wrapping_mul(GAMMA)))
    }

    fn fill(self, out: &mut [u8]) {
        for (i, chunk) in out.chunks_mut(8).enumerate() {
            let block = self.block(i as u64).to_le_bytes();
            chunk.copy_from_slice(&block[..chunk.len()]);
        }
    }
}

// Domain tags keep the value, file-vector, and coefficient streams disjoint.
const TAG_VALUE: u64 = 1;
const TAG_FILE: u64 = 2;
const TAG_COEFF: u64 = 3;

/// Per-node count of intermediate values computed, for reporting map work.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapWork {
    per_node: Vec<u64>,
}

impl MapWork {
    pub fn new(nodes: u32) -> Self {
        MapWork { per_node: vec![0; nodes as usize] }
    }

    pub fn record(&mut self, node: NodeId, values: u64) {
        self.per_node[(node - 1) as usize] += values;
    }

    pub fn of(&self, node: NodeId) -> u64 {
        self.per_node[(node - 1) as usize]
    }

    pub fn into_counts(self) -> Vec<u64> {
        self.per_node
    }
}

/// A table of map results for one `(files x functions)` request.
pub type ValueTable = std::collections::BTreeMap<(u32, u32), Value>;

/// A deterministic map-function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Workload {
    pub family: WorkloadFamily,
    pub seed: u64,
    /// Payload dimension of the linear family's file vectors.
    pub d: u32,
}

impl Workload {
    pub const DEFAULT_LINEAR_DIM: u32 = 64;

    pub fn new(family: WorkloadFamily, seed: u64, d: u32) -> Self {
        Workload { family, seed, d }
    }

    pub fn from_config(cfg: &SystemConfig) -> Self {
        Workload::new(cfg.workload, cfg.seed, Self::DEFAULT_LINEAR_DIM)
    }

    /// Compute one intermediate value `v_{q,n}` for job `f.job`.
    pub fn map_value(&self, cfg: &SystemConfig, f: FunctionRef, file: FileRef) -> Result<Value> {
        if f.job != file.job {
            return Err(Error::CrossJob { function_job: f.job, file_job: file.job });
        }
        let in_range = f.job >= 1
            && u64::from(f.job) <= cfg.jobs()
            && f.index >= 1
            && f.index <= cfg.q
            && file.index >= 1
            && file.index <= cfg.n;
        if !in_range {
            return Err(Error::Parameter(format!(
                "map request out of range: function {f}, file {file}"
            )));
        }
        match self.family {
            WorkloadFamily::Prf => {
                let mut bytes = vec![0u8; cfg.value_bytes()];
                Prf::new(self.seed)
                    .absorb(TAG_VALUE)
                    .absorb(f.job.into())
                    .absorb(f.index.into())
                    .absorb(file.index.into())
                    .fill(&mut bytes);
                Ok(Value::from_bytes(bytes))
            }
            WorkloadFamily::Linear => {
                if cfg.t % 32 != 0 {
                    return Err(Error::Config(format!(
                        "the linear workload family requires 32 | T (got T={})",
                        cfg.t
                    )));
                }
                let vector = self.file_vector(file);
                Ok(self.map_linear_vector(cfg, f, &vector))
            }
        }
    }

    /// The seeded payload vector of one file (linear family): `d` words, each
    /// below 2^16.
    pub fn file_vector(&self, file: FileRef) -> Vec<u32> {
        let prf = Prf::new(self.seed)
            .absorb(TAG_FILE)
            .absorb(file.job.into())
            .absorb(file.index.into());
        (0..self.d).map(|i| (prf.block(i.into()) & 0xffff) as u32).collect()
    }

    /// Apply function `f` to an explicit payload vector: each output word is
    /// a seeded dot product of the vector, wrapping modulo 2^32. Linear in
    /// the payload by construction.
    pub fn map_linear_vector(&self, cfg: &SystemConfig, f: FunctionRef, vector: &[u32]) -> Value {
        let words = (cfg.t / 32) as usize;
        let mut bytes = Vec::with_capacity(words * 4);
        for m in 0..words {
            let row = Prf::new(self.seed)
                .absorb(TAG_COEFF)
                .absorb(f.job.into())
                .absorb(f.index.into())
                .absorb(m as u64);
            let mut acc = 0u32;
            for (idx, &w) in vector.iter().enumerate() {
                let coeff = (row.block(idx as u64) & 0xffff) as u32;
                acc = acc.wrapping_add(coeff.wrapping_mul(w));
            }
            bytes.extend_from_slice(&acc.to_le_bytes());
        }
        Value::from_bytes(bytes)
    }

    /// Map the cross product `files x functions` at `node`, enforcing that
    /// every requested file is locally stored. This is the one gate through
    /// which schemes obtain map results, so a scheme that reaches outside the
    /// placement fails here.
    pub fn map_files(
        &self,
        cfg: &SystemConfig,
        node: NodeId,
        placement: &Placement,
        files: &[FileRef],
        functions: &[FunctionRef],
        work: &mut MapWork,
    ) -> Result<ValueTable> {
        for &file in files {
            if !placement.stores(node, file) {
                return Err(Error::PlacementViolation { node, file });
            }
        }
        let mut table = ValueTable::new();
        for &f in functions {
            for &file in files {
                table.insert((f.index, file.index), self.map_value(cfg, f, file)?);
            }
        }
        work.record(node, (files.len() * functions.len()) as u64);
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{AggregationGroup, SchemeKind, SystemConfig};

    fn cfg(family: WorkloadFamily) -> SystemConfig {
        SystemConfig {
            k: 3,
            r: 2,
            n: 6,
            q: 3,
            t: 64,
            gamma: 1,
            seed: 7,
            group: AggregationGroup::Add32,
            workload: family,
            scheme: SchemeKind::CompressedCdc,
        }
    }

    #[test]
    fn same_inputs_same_value() {
        let cfg = cfg(WorkloadFamily::Prf);
        let w = Workload::from_config(&cfg);
        let f = FunctionRef::new(1, 2);
        let file = FileRef::new(1, 3);
        assert_eq!(w.map_value(&cfg, f, file).unwrap(), w.map_value(&cfg, f, file).unwrap());
    }

    #[test]
    fn cross_job_requests_are_rejected() {
        let cfg = cfg(WorkloadFamily::Prf);
        let w = Workload::from_config(&cfg);
        let err = w.map_value(&cfg, FunctionRef::new(1, 1), FileRef::new(2, 1));
        assert!(matches!(err, Err(Error::CrossJob { .. })));
    }

    #[test]
    fn prf_values_are_pairwise_distinct_across_the_whole_run() {
        // Brute-force collision check: every (job, function, file) cell of
        // the example configs yields a distinct 64-bit-or-wider payload.
        for (k, r, n, q) in [(3u32, 2u32, 6u32, 3u32), (4, 2, 6, 4)] {
            let cfg = SystemConfig { k, r, n, q, ..cfg(WorkloadFamily::Prf) };
            let w = Workload::from_config(&cfg);
            let mut seen = std::collections::HashSet::new();
            for j in 1..=cfg.jobs() as u32 {
                for q in 1..=cfg.q {
                    for n in 1..=cfg.n {
                        let v = w
                            .map_value(&cfg, FunctionRef::new(j, q), FileRef::new(j, n))
                            .unwrap();
                        assert!(seen.insert(v.into_bytes()), "collision at ({j},{q},{n})");
                    }
                }
            }
        }
    }

    #[test]
    fn linear_family_is_zero_on_zero_payload() {
        let cfg = cfg(WorkloadFamily::Linear);
        let w = Workload::from_config(&cfg);
        let zero_vec = vec![0u32; w.d as usize];
        let v = w.map_linear_vector(&cfg, FunctionRef::new(1, 1), &zero_vec);
        assert!(v.is_zero());
    }

    #[test]
    fn linear_family_distributes_over_payload_addition() {
        let cfg = cfg(WorkloadFamily::Linear);
        let w = Workload::from_config(&cfg);
        let f = FunctionRef::new(1, 2);
        let a = w.file_vector(FileRef::new(1, 1));
        let b = w.file_vector(FileRef::new(1, 4));
        let sum_vec: Vec<u32> =
            a.iter().zip(&b).map(|(x, y)| x.wrapping_add(*y)).collect();
        let lhs = w.map_linear_vector(&cfg, f, &sum_vec);
        let rhs = AggregationGroup::Add32
            .add(&w.map_linear_vector(&cfg, f, &a), &w.map_linear_vector(&cfg, f, &b))
            .unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn map_files_enforces_placement_and_counts_work() {
        let cfg = cfg(WorkloadFamily::Prf);
        let w = Workload::from_config(&cfg);
        let mut placement = Placement::new(3);
        placement.add_batch(1, vec![1, 2], vec![1, 2]);
        let mut work = MapWork::new(3);

        let files = [FileRef::new(1, 1), FileRef::new(1, 2)];
        let funcs = [FunctionRef::new(1, 1)];
        let table = w.map_files(&cfg, 1, &placement, &files, &funcs, &mut work).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(work.of(1), 2);
        assert_eq!(
            table[&(1, 1)],
            w.map_value(&cfg, funcs[0], files[0]).unwrap()
        );

        // Node 3 stores nothing: same request must fail.
        let err = w.map_files(&cfg, 3, &placement, &files, &funcs, &mut work);
        assert!(matches!(err, Err(Error::PlacementViolation { node: 3, .. })));
        assert_eq!(work.of(3), 0);
    }

    #[test]
    fn empty_function_set_yields_empty_table() {
        let cfg = cfg(WorkloadFamily::Prf);
        let w = Workload::from_config(&cfg);
        let mut placement = Placement::new(3);
        placement.add_batch(1, vec![1], vec![1]);
        let mut work = MapWork::new(3);
        let table = w
            .map_files(&cfg, 1, &placement, &[FileRef::new(1, 1)], &[], &mut work)
            .unwrap();
        assert!(table.is_empty());
    }
}
