//! Shared domain types: file and function references, the symmetric reducer
//! assignment, and the file placement produced by each scheme.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::subsets::binomial;

/// 1-based node label.
pub type NodeId = u32;

/// 1-based job index.
pub type JobId = u32;

/// A sorted set of node labels. Ordering is lexicographic, matching the
/// subset enumeration in [`crate::subsets`].
pub type NodeSubset = Vec<NodeId>;

/// One input file of one job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FileRef {
    pub job: JobId,
    /// 1-based file index within the job.
    pub index: u32,
}

impl FileRef {
    pub fn new(job: JobId, index: u32) -> Self {
        FileRef { job, index }
    }
}

impl std::fmt::Display for FileRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}^({})", self.index, self.job)
    }
}

/// One output function of one job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FunctionRef {
    pub job: JobId,
    /// 1-based function index within the job.
    pub index: u32,
}

impl FunctionRef {
    pub fn new(job: JobId, index: u32) -> Self {
        FunctionRef { job, index }
    }
}

impl std::fmt::Display for FunctionRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "phi_{}^({})", self.index, self.job)
    }
}

/// The fixed symmetric reducer assignment: node `k` owns the block of `Q/K`
/// consecutive function indices `(k-1)*Q/K + 1 ..= k*Q/K`, for every job.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReduceAssignment {
    nodes: u32,
    functions: u32,
}

impl ReduceAssignment {
    /// Build the assignment; fails unless `K | Q`.
    pub fn symmetric(nodes: u32, functions: u32) -> Result<Self> {
        if nodes == 0 || functions == 0 || functions % nodes != 0 {
            return Err(Error::Config(format!(
                "K must divide Q (got K={nodes}, Q={functions})"
            )));
        }
        Ok(ReduceAssignment { nodes, functions })
    }

    /// Function indices owned by `node` (for every job).
    pub fn owned(&self, node: NodeId) -> std::ops::RangeInclusive<u32> {
        debug_assert!(node >= 1 && node <= self.nodes);
        let per = self.functions / self.nodes;
        (node - 1) * per + 1..=node * per
    }

    /// The node responsible for reducing function index `q`.
    pub fn owner(&self, q: u32) -> NodeId {
        debug_assert!(q >= 1 && q <= self.functions);
        (q - 1) / (self.functions / self.nodes) + 1
    }
}

/// Which file of which job sits on which node, plus the batch structure the
/// shuffle schemes key their exchanges on.
///
/// Batches are indexed by `(job, node subset)`: the files of the batch are
/// stored on exactly the nodes of that subset. The coded schemes use size-`r`
/// subsets; the round-robin placement of the compression scheme uses the
/// subset of nodes that share a batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    nodes: u32,
    stored: Vec<BTreeSet<FileRef>>,
    batches: BTreeMap<(JobId, NodeSubset), Vec<u32>>,
    job_subsets: BTreeMap<JobId, NodeSubset>,
}

impl Placement {
    pub fn new(nodes: u32) -> Self {
        Placement {
            nodes,
            stored: vec![BTreeSet::new(); nodes as usize],
            batches: BTreeMap::new(),
            job_subsets: BTreeMap::new(),
        }
    }

    pub fn nodes(&self) -> u32 {
        self.nodes
    }

    /// Record a batch: files `files` of job `job`, stored on every node in
    /// `subset`.
    pub fn add_batch(&mut self, job: JobId, subset: NodeSubset, files: Vec<u32>) {
        for &k in &subset {
            debug_assert!(k >= 1 && k <= self.nodes);
            let stored = &mut self.stored[(k - 1) as usize];
            stored.extend(files.iter().map(|&n| FileRef::new(job, n)));
        }
        self.batches.insert((job, subset), files);
    }

    /// Record that all files of `job` live exclusively on `subset`.
    pub fn set_job_subset(&mut self, job: JobId, subset: NodeSubset) {
        self.job_subsets.insert(job, subset);
    }

    pub fn stores(&self, node: NodeId, file: FileRef) -> bool {
        self.stored[(node - 1) as usize].contains(&file)
    }

    /// The set `M_k` of files stored at `node`.
    pub fn stored_by(&self, node: NodeId) -> &BTreeSet<FileRef> {
        &self.stored[(node - 1) as usize]
    }

    /// File indices of the batch of `job` labelled by `subset`, if any.
    pub fn batch(&self, job: JobId, subset: &[NodeId]) -> Option<&Vec<u32>> {
        self.batches.get(&(job, subset.to_vec()))
    }

    /// All batches of one job, in ascending subset order.
    pub fn batches_of(&self, job: JobId) -> impl Iterator<Item = (&NodeSubset, &Vec<u32>)> {
        self.batches
            .range((job, Vec::new())..=(job, vec![u32::MAX; self.nodes as usize]))
            .map(|((_, subset), files)| (subset, files))
    }

    /// The subset of nodes holding all files of `job`, when the placement
    /// assigns jobs to subsets.
    pub fn job_subset(&self, job: JobId) -> Option<&NodeSubset> {
        self.job_subsets.get(&job)
    }

    /// Check the validity conditions every placement must satisfy: the
    /// per-node storage bound `|M_k| <= mu*J*N` and full coverage of the
    /// `J*N`-file universe.
    pub fn check_valid(&self, r: u32, jobs: u64, files_per_job: u32) -> Result<()> {
        let bound = u64::from(r) * jobs * u64::from(files_per_job) / u64::from(self.nodes);
        for (i, stored) in self.stored.iter().enumerate() {
            if stored.len() as u64 > bound {
                return Err(Error::Config(format!(
                    "node {} stores {} files, exceeding mu*J*N = {bound}",
                    i + 1,
                    stored.len()
                )));
            }
        }
        let mut union: BTreeSet<FileRef> = BTreeSet::new();
        for stored in &self.stored {
            union.extend(stored.iter().copied());
        }
        let expected = jobs * u64::from(files_per_job);
        if union.len() as u64 != expected {
            return Err(Error::Config(format!(
                "placement covers {} files, expected {expected}",
                union.len()
            )));
        }
        Ok(())
    }
}

/// How many jobs of one block a node belongs to: `C(K-1, r)` of the
/// `C(K, r+1)` job subsets contain any fixed node.
pub fn jobs_containing_node(k: u32, r: u32) -> u64 {
    binomial(u64::from(k) - 1, u64::from(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_assignment_blocks() {
        // One function per node: node k owns function k.
        let a = ReduceAssignment::symmetric(4, 4).unwrap();
        for k in 1..=4 {
            assert_eq!(a.owned(k).collect::<Vec<_>>(), vec![k]);
            assert_eq!(a.owner(k), k);
        }
        // Two functions per node.
        let a = ReduceAssignment::symmetric(2, 4).unwrap();
        assert_eq!(a.owned(1).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(a.owned(2).collect::<Vec<_>>(), vec![3, 4]);
        assert_eq!(a.owner(3), 2);
    }

    #[test]
    fn assignment_requires_divisibility() {
        assert!(ReduceAssignment::symmetric(3, 4).is_err());
    }

    #[test]
    fn placement_tracks_batches_and_storage() {
        let mut p = Placement::new(3);
        p.add_batch(1, vec![1, 2], vec![1, 2]);
        p.add_batch(1, vec![1, 3], vec![3, 4]);
        p.add_batch(1, vec![2, 3], vec![5, 6]);
        p.set_job_subset(1, vec![1, 2, 3]);

        assert!(p.stores(1, FileRef::new(1, 3)));
        assert!(!p.stores(1, FileRef::new(1, 5)));
        assert_eq!(p.batch(1, &[2, 3]), Some(&vec![5, 6]));
        assert_eq!(p.batches_of(1).count(), 3);
        assert_eq!(p.job_subset(1), Some(&vec![1, 2, 3]));
        p.check_valid(2, 1, 6).unwrap();
    }

    #[test]
    fn coverage_gap_is_detected() {
        let mut p = Placement::new(2);
        p.add_batch(1, vec![1], vec![1]);
        // file 2 of job 1 is nowhere
        assert!(p.check_valid(1, 1, 2).is_err());
    }
}
