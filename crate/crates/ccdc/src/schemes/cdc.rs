//! Subset-coded multicast baseline: recover every intermediate value
//! individually, with no pre-combining.
//!
//! Per job, the `N` files are split into `C(K, r)` equal batches, one per
//! size-`r` node subset, and replicated on exactly those `r` nodes. Within
//! every size-`(r+1)` subset `S`, each node `k` is missing the values of the
//! batch labelled `S \ {k}`, which all other members of `S` share:
//!
//! ```text
//! U_k = values { v_{q,n} : q owned by k, n in batch(S \ {k}) }
//! ```
//!
//! Each `U_k` is concatenated (ascending function, then ascending file),
//! split into `r` segments labelled by `S \ {k}`, and every node `i` of `S`
//! broadcasts the XOR of its labelled segments. Receivers cancel the segments
//! they can map locally and reassemble their own `U_k` exactly. Each packet
//! serves `r` nodes at once, so the per-unit load is `(1-mu)*N / (mu*K)`.

use std::collections::BTreeMap;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::{FileRef, FunctionRef, NodeId, NodeSubset, Placement};
use crate::net::{FaultSpec, MsgTag, Multicast};
use crate::schemes::{assignment, concat_values, extract_values, Outcome, RunState};
use crate::subsets::{binomial, complement_in, lex_subsets};
use crate::value::{join_segments, split_packet, xor_in_place, SplitPacket};
use crate::workload::{MapWork, Workload};

/// Batch placement: the i-th lexicographic size-`r` subset stores the i-th
/// contiguous block of `N / C(K, r)` files, for every job.
pub fn placement(cfg: &SystemConfig) -> Result<Placement> {
    let batches = binomial(cfg.k.into(), cfg.r.into());
    if u64::from(cfg.n) % batches != 0 {
        return Err(Error::Config(format!(
            "C(K, r) must divide N (got C({}, {})={batches}, N={})",
            cfg.k, cfg.r, cfg.n
        )));
    }
    let per_batch = cfg.n / batches as u32;
    let subsets = lex_subsets(cfg.k, cfg.r)?;
    let mut placement = Placement::new(cfg.k);
    for job in 1..=cfg.jobs() as u32 {
        for (i, subset) in subsets.iter().enumerate() {
            let first = i as u32 * per_batch + 1;
            placement.add_batch(job, subset.clone(), (first..first + per_batch).collect());
        }
    }
    Ok(placement)
}

/// Build `U_target` as seen from `node`: the concatenated, split packet of
/// all values the target is missing within `subset`. Any member of
/// `subset \ {target}` computes an identical packet.
fn build_packet(
    cfg: &SystemConfig,
    workload: &Workload,
    placement: &Placement,
    reducers: &crate::model::ReduceAssignment,
    node: NodeId,
    subset: &[NodeId],
    target: NodeId,
    job: u32,
    work: &mut MapWork,
) -> Result<SplitPacket> {
    let batch_subset: NodeSubset = complement_in(subset, &[target]);
    let files: Vec<FileRef> = placement
        .batch(job, &batch_subset)
        .ok_or_else(|| Error::Protocol(format!("no batch for subset {batch_subset:?}")))?
        .iter()
        .map(|&n| FileRef::new(job, n))
        .collect();
    let functions: Vec<FunctionRef> =
        reducers.owned(target).map(|q| FunctionRef::new(job, q)).collect();
    let table = workload.map_files(cfg, node, placement, &files, &functions, work)?;
    // BTreeMap iteration gives ascending (function, file) order.
    let packet = concat_values(table.values());
    split_packet(&packet, cfg.r as usize)
}

/// Position of `label` in the ascending segment labelling of `subset`.
fn segment_index(labels: &[NodeId], label: NodeId) -> Result<usize> {
    labels
        .iter()
        .position(|&l| l == label)
        .ok_or_else(|| Error::NotAMember { node: label, subset: labels.to_vec() })
}

pub(crate) fn execute(
    cfg: &SystemConfig,
    workload: &Workload,
    fault: Option<FaultSpec>,
) -> Result<Outcome> {
    let placement = placement(cfg)?;
    let reducers = assignment(cfg)?;
    let mut state = RunState::new(cfg, fault);
    let jobs = cfg.jobs() as u32;
    let exchange_subsets = lex_subsets(cfg.k, cfg.r + 1)?;

    // Send pass: within each size-(r+1) subset, every member broadcasts the
    // XOR of its labelled segments across the other members' packets.
    for job in 1..=jobs {
        for (rank, subset) in exchange_subsets.iter().enumerate() {
            for &sender in subset {
                let mut coded: Option<Vec<u8>> = None;
                for &target in subset.iter().filter(|&&t| t != sender) {
                    let split = build_packet(
                        cfg, workload, &placement, &reducers, sender, subset, target, job,
                        &mut state.work,
                    )?;
                    state.padded_bits += split.padded_bits as u64;
                    let labels = complement_in(subset, &[target]);
                    let seg = &split.segments[segment_index(&labels, sender)?];
                    match coded.as_mut() {
                        None => coded = Some(seg.clone()),
                        Some(acc) => xor_in_place(acc, seg)?,
                    }
                }
                let payload = coded.expect("subset has at least two members");
                state.log.send(Multicast::new(
                    sender,
                    subset.iter().copied().filter(|&k| k != sender),
                    payload,
                    MsgTag::new(cfg.scheme).job(job).subset(rank as u64),
                ))?;
            }
        }
    }

    // Decode + reduce pass: each node cancels the segments it can map
    // locally, reassembles its own packets, and sums all N values per owned
    // function.
    for job in 1..=jobs {
        // (node, function index) -> recovered values, one batch at a time.
        let mut recovered: BTreeMap<(NodeId, u32), Vec<crate::value::Value>> = BTreeMap::new();
        for (rank, subset) in exchange_subsets.iter().enumerate() {
            for &receiver in subset {
                let labels = complement_in(subset, &[receiver]);
                let mut segments: Vec<Vec<u8>> = vec![Vec::new(); labels.len()];
                let inbox = state.log.inbox_where(receiver, |t| {
                    t.job == Some(job) && t.subset_rank == Some(rank as u64)
                });
                if inbox.len() != cfg.r as usize {
                    return Err(Error::Protocol(format!(
                        "node {receiver} expected {} coded packets in subset {subset:?}, got {}",
                        cfg.r,
                        inbox.len()
                    )));
                }
                for m in inbox {
                    let mut seg = m.payload.clone();
                    for &other in subset.iter().filter(|&&t| t != m.sender && t != receiver) {
                        let split = build_packet(
                            cfg, workload, &placement, &reducers, receiver, subset, other, job,
                            &mut state.work,
                        )?;
                        let other_labels = complement_in(subset, &[other]);
                        xor_in_place(&mut seg, &split.segments[segment_index(&other_labels, m.sender)?])?;
                    }
                    segments[segment_index(&labels, m.sender)?] = seg;
                }
                let packet = join_segments(&segments);
                let batch_subset = complement_in(subset, &[receiver]);
                let files = placement
                    .batch(job, &batch_subset)
                    .ok_or_else(|| Error::Protocol("missing batch".into()))?;
                let functions: Vec<u32> = reducers.owned(receiver).collect();
                let values =
                    extract_values(&packet, functions.len() * files.len(), cfg.value_bytes())?;
                // Values are laid out function-major, matching the sender.
                for (fi, &q) in functions.iter().enumerate() {
                    let start = fi * files.len();
                    recovered
                        .entry((receiver, q))
                        .or_default()
                        .extend(values[start..start + files.len()].iter().cloned());
                }
            }
        }

        for node in 1..=cfg.k {
            for q in reducers.owned(node) {
                let f = FunctionRef::new(job, q);
                // Locally mapped values over the node's own batches.
                let local_files: Vec<FileRef> = placement
                    .stored_by(node)
                    .iter()
                    .copied()
                    .filter(|file| file.job == job)
                    .collect();
                let table =
                    workload.map_files(cfg, node, &placement, &local_files, &[f], &mut state.work)?;
                let mut acc = cfg.group.sum(cfg.t as usize, table.values())?;
                for v in recovered.get(&(node, q)).into_iter().flatten() {
                    acc = cfg.group.add(&acc, v)?;
                }
                state.record_output(f, acc)?;
            }
        }
    }

    state.finish(cfg)
}
