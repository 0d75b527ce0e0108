//! The four shuffle schemes, each a complete placement + map + shuffle +
//! reduce pipeline.
//!
//! Every scheme follows the same discipline:
//!
//! * map results are only obtained through [`Workload::map_files`], which
//!   rejects any request for a file outside the node's local storage;
//! * every transmitted bit goes through the [`TraceLog`], which charges the
//!   sender;
//! * receivers decode from the logged payloads plus their own local map
//!   results — never from sender-side state — so a corrupted payload
//!   corrupts the reduced outputs.

use std::collections::BTreeMap;

use crate::config::{SchemeKind, SystemConfig};
use crate::error::{Error, Result};
use crate::load::Load;
use crate::model::{FunctionRef, ReduceAssignment};
use crate::net::{FaultSpec, TraceLog};
use crate::value::Value;
use crate::workload::{MapWork, Workload};

pub mod ccdc;
pub mod cdc;
pub mod compression;
pub mod uncoded;

/// Result of one complete run.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Reduced value of every output function of every job; ownership
    /// follows the symmetric reducer assignment.
    pub outputs: BTreeMap<FunctionRef, Value>,
    /// Measured communication load, exact.
    pub load: Load,
    /// Every multicast of the run.
    pub trace: TraceLog,
    /// Intermediate values computed per node.
    pub map_work: Vec<u64>,
    /// Zero-padding bits appended by senders when splitting packets; zero
    /// exactly when every packet length divided evenly.
    pub padded_bits: u64,
}

/// Run the scheme selected by `cfg` with its derived workload.
pub fn run(cfg: &SystemConfig) -> Result<Outcome> {
    run_with(cfg, &Workload::from_config(cfg))
}

/// Run with an explicit workload (e.g. a custom linear dimension).
pub fn run_with(cfg: &SystemConfig, workload: &Workload) -> Result<Outcome> {
    dispatch(cfg, workload, None)
}

/// Run while corrupting one payload bit in the message log.
pub fn run_faulted(cfg: &SystemConfig, workload: &Workload, fault: FaultSpec) -> Result<Outcome> {
    dispatch(cfg, workload, Some(fault))
}

fn dispatch(cfg: &SystemConfig, workload: &Workload, fault: Option<FaultSpec>) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.scheme {
        SchemeKind::Uncoded => uncoded::execute(cfg, workload, fault),
        SchemeKind::Compression => compression::execute(cfg, workload, fault),
        SchemeKind::Cdc => cdc::execute(cfg, workload, fault),
        SchemeKind::CompressedCdc => ccdc::execute(cfg, workload, fault),
    }
}

/// Mutable state threaded through a run.
pub(crate) struct RunState {
    pub log: TraceLog,
    pub work: MapWork,
    pub outputs: BTreeMap<FunctionRef, Value>,
    pub padded_bits: u64,
}

impl RunState {
    pub fn new(cfg: &SystemConfig, fault: Option<FaultSpec>) -> Self {
        RunState {
            log: match fault {
                Some(f) => TraceLog::with_fault(cfg.k, f),
                None => TraceLog::new(cfg.k),
            },
            work: MapWork::new(cfg.k),
            outputs: BTreeMap::new(),
            padded_bits: 0,
        }
    }

    pub fn record_output(&mut self, f: FunctionRef, v: Value) -> Result<()> {
        if self.outputs.insert(f, v).is_some() {
            return Err(Error::Protocol(format!("function {f} reduced twice")));
        }
        Ok(())
    }

    /// Close the run: check the output table is complete and compute the
    /// normalized load.
    pub fn finish(self, cfg: &SystemConfig) -> Result<Outcome> {
        let expected = cfg.jobs() * u64::from(cfg.q);
        if self.outputs.len() as u64 != expected {
            return Err(Error::IncompleteShuffle(format!(
                "run produced {} outputs, expected {expected}",
                self.outputs.len()
            )));
        }
        let load = self.log.measured_load(cfg.jobs(), cfg.q.into(), cfg.t.into());
        Ok(Outcome {
            outputs: self.outputs,
            load,
            trace: self.log,
            map_work: self.work.into_counts(),
            padded_bits: self.padded_bits,
        })
    }
}

/// The symmetric reducer assignment for `cfg`.
pub(crate) fn assignment(cfg: &SystemConfig) -> Result<ReduceAssignment> {
    ReduceAssignment::symmetric(cfg.k, cfg.q)
}

/// Concatenate values in the order given (callers sort by function then
/// file index).
pub(crate) fn concat_values<'a>(values: impl IntoIterator<Item = &'a Value>) -> Vec<u8> {
    let mut out = Vec::new();
    for v in values {
        out.extend_from_slice(v.as_bytes());
    }
    out
}

/// Slice a reassembled packet back into `count` values of `value_bytes`
/// each, discarding any padding tail.
pub(crate) fn extract_values(packet: &[u8], count: usize, value_bytes: usize) -> Result<Vec<Value>> {
    let needed = count * value_bytes;
    if packet.len() < needed {
        return Err(Error::Protocol(format!(
            "packet of {} bytes cannot hold {count} values of {value_bytes} bytes",
            packet.len()
        )));
    }
    Ok(packet[..needed]
        .chunks(value_bytes.max(1))
        .map(|c| Value::from_bytes(c.to_vec()))
        .collect())
}
