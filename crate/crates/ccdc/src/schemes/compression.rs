//! Compression-only baseline: pre-combine values of the same function at the
//! sender, then unicast one value-sized packet per missing batch.
//!
//! Files are partitioned into `c = ceil(1/mu)` batches per job; node `k`
//! stores batch `((k-1) mod c) + 1` of every job, round-robin. To reduce a
//! function, a node needs one pre-combined packet from each of the other
//! `c - 1` batches, so the load is `c - 1` (which flattens to `1` once
//! `mu >= 1/2`, where only two batches exist).

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::{FileRef, FunctionRef, NodeId, Placement};
use crate::net::{FaultSpec, MsgTag, Multicast};
use crate::schemes::{assignment, Outcome, RunState};
use crate::value::Value;
use crate::workload::{MapWork, Workload};

/// Number of batches, `ceil(1/mu) = ceil(K/r)`.
pub fn batch_count(cfg: &SystemConfig) -> u32 {
    cfg.k.div_ceil(cfg.r)
}

/// The batch index (1-based) node `k` stores.
fn batch_of(cfg: &SystemConfig, node: NodeId) -> u32 {
    (node - 1) % batch_count(cfg) + 1
}

/// Round-robin placement: the first `c - 1` batches hold `mu*N` files each,
/// the last batch holds the remaining files; batch `t` lives on the nodes
/// congruent to `t` modulo `c`.
pub fn placement(cfg: &SystemConfig) -> Result<Placement> {
    let c = batch_count(cfg);
    if c > cfg.k {
        return Err(Error::Config(format!(
            "ceil(K/r) must not exceed K (got ceil({}/{})={c})",
            cfg.k, cfg.r
        )));
    }
    let mu_n = u64::from(cfg.r) * u64::from(cfg.n) / u64::from(cfg.k);
    if u64::from(cfg.r) * u64::from(cfg.n) % u64::from(cfg.k) != 0 || mu_n == 0 {
        return Err(Error::Config(format!(
            "mu*N = r*N/K must be a positive integer (got r={}, N={}, K={})",
            cfg.r, cfg.n, cfg.k
        )));
    }
    let mu_n = mu_n as u32;
    let mut batches: Vec<Vec<u32>> = Vec::with_capacity(c as usize);
    let mut next_file = 1u32;
    for t in 1..=c {
        let size = if t < c { mu_n } else { cfg.n - mu_n * (c - 1) };
        batches.push((next_file..next_file + size).collect());
        next_file += size;
    }
    debug_assert_eq!(next_file, cfg.n + 1);

    let mut placement = Placement::new(cfg.k);
    for job in 1..=cfg.jobs() as u32 {
        for (i, files) in batches.iter().enumerate() {
            let t = i as u32 + 1;
            let holders: Vec<NodeId> = (1..=cfg.k).filter(|&k| batch_of(cfg, k) == t).collect();
            placement.add_batch(job, holders, files.clone());
        }
    }
    Ok(placement)
}

/// Holders of batch `t`, ascending.
fn holders(cfg: &SystemConfig, t: u32) -> Vec<NodeId> {
    (1..=cfg.k).filter(|&k| batch_of(cfg, k) == t).collect()
}

/// Pre-combine `v_{q,n}` over one batch at `node`.
fn batch_sum(
    cfg: &SystemConfig,
    workload: &Workload,
    placement: &Placement,
    node: NodeId,
    f: FunctionRef,
    files: &[u32],
    work: &mut MapWork,
) -> Result<Value> {
    let refs: Vec<FileRef> = files.iter().map(|&n| FileRef::new(f.job, n)).collect();
    let table = workload.map_files(cfg, node, placement, &refs, &[f], work)?;
    cfg.group.sum(cfg.t as usize, table.values())
}

pub(crate) fn execute(
    cfg: &SystemConfig,
    workload: &Workload,
    fault: Option<FaultSpec>,
) -> Result<Outcome> {
    let placement = placement(cfg)?;
    let reducers = assignment(cfg)?;
    let c = batch_count(cfg);
    let mut state = RunState::new(cfg, fault);
    let jobs = cfg.jobs() as u32;

    // Shuffle: for each receiver and owned function, the lowest-indexed
    // holder of every non-local batch unicasts that batch's pre-combined
    // value.
    for job in 1..=jobs {
        for receiver in 1..=cfg.k {
            let local = batch_of(cfg, receiver);
            for q in reducers.owned(receiver) {
                let f = FunctionRef::new(job, q);
                for t in (1..=c).filter(|&t| t != local) {
                    let sender = holders(cfg, t)[0];
                    let files = placement
                        .batch(job, &holders(cfg, t))
                        .ok_or_else(|| Error::Protocol(format!("batch {t} missing for job {job}")))?
                        .clone();
                    let combined =
                        batch_sum(cfg, workload, &placement, sender, f, &files, &mut state.work)?;
                    state.log.send(Multicast::new(
                        sender,
                        [receiver],
                        combined.into_bytes(),
                        MsgTag::new(cfg.scheme).job(job),
                    ))?;
                }
            }
        }
    }

    // Reduce: local batch sum plus the c-1 received packets, in send order.
    for job in 1..=jobs {
        for receiver in 1..=cfg.k {
            let local = batch_of(cfg, receiver);
            let received: Vec<Vec<u8>> = state
                .log
                .inbox_where(receiver, |t| t.job == Some(job))
                .iter()
                .map(|m| m.payload.clone())
                .collect();
            let mut next = received.iter();
            for q in reducers.owned(receiver) {
                let f = FunctionRef::new(job, q);
                let local_files = placement
                    .batch(job, &holders(cfg, local))
                    .ok_or_else(|| Error::Protocol(format!("local batch missing for job {job}")))?
                    .clone();
                let mut acc = batch_sum(
                    cfg,
                    workload,
                    &placement,
                    receiver,
                    f,
                    &local_files,
                    &mut state.work,
                )?;
                for _ in 1..c {
                    let payload = next.next().ok_or_else(|| {
                        Error::Protocol(format!("missing pre-combined packet for {f}"))
                    })?;
                    acc = cfg.group.add(&acc, &Value::from_bytes(payload.clone()))?;
                }
                state.record_output(f, acc)?;
            }
            if next.next().is_some() {
                return Err(Error::Protocol(format!(
                    "node {receiver} received more packets than it needs for job {job}"
                )));
            }
        }
    }

    state.finish(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{AggregationGroup, SchemeKind, WorkloadFamily};
    use crate::load::load;
    use crate::model::FileRef;

    fn cfg(k: u32, r: u32, n: u32, q: u32) -> SystemConfig {
        SystemConfig {
            k,
            r,
            n,
            q,
            t: 256,
            gamma: 1,
            seed: 11,
            group: AggregationGroup::Add8,
            workload: WorkloadFamily::Prf,
            scheme: SchemeKind::Compression,
        }
    }

    #[test]
    fn two_batch_placement_splits_four_two() {
        // K=3, r=2: two batches, sizes mu*N=4 and 2; nodes 1 and 3 share the
        // first batch, node 2 holds the second.
        let cfg = cfg(3, 2, 6, 3);
        let p = placement(&cfg).unwrap();
        assert_eq!(p.batch(1, &[1, 3]), Some(&vec![1, 2, 3, 4]));
        assert_eq!(p.batch(1, &[2]), Some(&vec![5, 6]));
        assert!(p.stores(1, FileRef::new(1, 4)));
        assert!(p.stores(3, FileRef::new(1, 1)));
        assert!(p.stores(2, FileRef::new(1, 5)));
        assert!(!p.stores(2, FileRef::new(1, 1)));
    }

    #[test]
    fn minimum_storage_round_robin() {
        // K=4, r=1: four singleton-holder batches of two files, node k holds
        // batch k.
        let cfg = cfg(4, 1, 8, 4);
        let p = placement(&cfg).unwrap();
        for k in 1..=4u32 {
            let files: Vec<u32> = vec![2 * k - 1, 2 * k];
            assert_eq!(p.batch(1, &[k]), Some(&files));
        }
    }

    #[test]
    fn every_batch_has_a_holder() {
        for (k, r, n) in [(3u32, 2u32, 6u32), (4, 1, 8), (5, 2, 30), (6, 5, 6)] {
            let cfg = cfg(k, r, n, k);
            let p = placement(&cfg).unwrap();
            let c = batch_count(&cfg);
            for t in 1..=c {
                assert!(!holders(&cfg, t).is_empty(), "K={k} r={r} batch {t}");
            }
        }
    }

    #[test]
    fn large_storage_load_is_one() {
        let cfg = cfg(3, 2, 6, 3);
        let outcome = crate::schemes::run(&cfg).unwrap();
        assert_eq!(outcome.load, load(1, 1));
    }

    #[test]
    fn small_storage_load_counts_batches() {
        let cfg = cfg(4, 1, 8, 4);
        let outcome = crate::schemes::run(&cfg).unwrap();
        assert_eq!(outcome.load, load(3, 1));
    }

    #[test]
    fn outputs_match_the_oracle() {
        for seed in [1u64, 2, 3] {
            let cfg = SystemConfig { seed, ..cfg(4, 2, 6, 4) };
            let w = Workload::from_config(&cfg);
            let outcome = crate::schemes::run(&cfg).unwrap();
            let oracle = crate::analysis::oracle_outputs(&cfg, &w).unwrap();
            assert_eq!(outcome.outputs, oracle, "seed {seed}");
        }
    }
}
