//! Uncoded baseline: unicast every missing intermediate value raw.
//!
//! Runs on the same subset placement as the two-stage coded scheme so loads
//! are directly comparable. For each node and each function it reduces, every
//! value mapped from a file the node lacks is sent individually by the
//! lowest-indexed node storing that file. With the subset placement this
//! costs `(1-mu)*N` per unit of `J*Q*T`.

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::{FileRef, FunctionRef, NodeId};
use crate::net::{FaultSpec, MsgTag, Multicast};
use crate::schemes::{assignment, ccdc, RunState, Outcome};
use crate::value::Value;
use crate::workload::Workload;

pub(crate) fn execute(
    cfg: &SystemConfig,
    workload: &Workload,
    fault: Option<FaultSpec>,
) -> Result<Outcome> {
    let placement = ccdc::placement(cfg)?;
    let reducers = assignment(cfg)?;
    let mut state = RunState::new(cfg, fault);
    let jobs = cfg.jobs() as u32;

    // Shuffle: one unicast per (receiver, owned function, missing file).
    for job in 1..=jobs {
        for receiver in 1..=cfg.k {
            for q in reducers.owned(receiver) {
                let f = FunctionRef::new(job, q);
                for n in 1..=cfg.n {
                    let file = FileRef::new(job, n);
                    if placement.stores(receiver, file) {
                        continue;
                    }
                    let sender = lowest_holder(cfg, &placement, file)?;
                    let table = workload.map_files(
                        cfg,
                        sender,
                        &placement,
                        &[file],
                        &[f],
                        &mut state.work,
                    )?;
                    let value = table[&(q, n)].clone();
                    state.log.send(Multicast::new(
                        sender,
                        [receiver],
                        value.into_bytes(),
                        MsgTag::new(cfg.scheme).job(job),
                    ))?;
                }
            }
        }
    }

    // Reduce: local map results plus the received raw values, consumed in
    // the same (function, file) order they were sent in.
    for job in 1..=jobs {
        for receiver in 1..=cfg.k {
            let received: Vec<Vec<u8>> = state
                .log
                .inbox_where(receiver, |t| t.job == Some(job))
                .iter()
                .map(|m| m.payload.clone())
                .collect();
            let mut next = received.iter();
            for q in reducers.owned(receiver) {
                let f = FunctionRef::new(job, q);
                let mut acc = Value::zeros(cfg.t as usize);
                for n in 1..=cfg.n {
                    let file = FileRef::new(job, n);
                    let v = if placement.stores(receiver, file) {
                        let table = workload.map_files(
                            cfg,
                            receiver,
                            &placement,
                            &[file],
                            &[f],
                            &mut state.work,
                        )?;
                        table[&(q, n)].clone()
                    } else {
                        let payload = next.next().ok_or_else(|| {
                            Error::Protocol(format!("missing unicast for {f}, file {file}"))
                        })?;
                        Value::from_bytes(payload.clone())
                    };
                    acc = cfg.group.add(&acc, &v)?;
                }
                state.record_output(f, acc)?;
            }
            if next.next().is_some() {
                return Err(Error::Protocol(format!(
                    "node {receiver} received more unicasts than it needs for job {job}"
                )));
            }
        }
    }

    state.finish(cfg)
}

fn lowest_holder(
    cfg: &SystemConfig,
    placement: &crate::model::Placement,
    file: FileRef,
) -> Result<NodeId> {
    (1..=cfg.k)
        .find(|&k| placement.stores(k, file))
        .ok_or_else(|| Error::Protocol(format!("file {file} is stored nowhere")))
}
