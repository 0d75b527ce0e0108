//! Error-free broadcast network with exact bit accounting.
//!
//! There is no latency, loss, or congestion model: the metric is bits. Each
//! multicast is charged once at its sender regardless of how many nodes
//! receive it, and delivery is immediate. The full message log doubles as
//! the medium — receivers decode from the logged payloads — so a payload
//! corruption injected into the log propagates to every decoder exactly as a
//! corrupted broadcast would.

use std::collections::BTreeSet;
use std::io::Write;

use crate::config::SchemeKind;
use crate::error::{Error, Result};
use crate::load::{zero, Load};
use crate::model::{JobId, NodeId};

/// Provenance of a message, for trace filtering and per-stage accounting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsgTag {
    pub scheme: SchemeKind,
    /// 0 for single-phase schemes, 1 or 2 for the two-stage coded shuffle.
    pub stage: u8,
    /// Rank of the node subset coordinating the exchange, when one exists.
    pub subset_rank: Option<u64>,
    /// The outside node driving a cross-job exchange (stage 2 only).
    pub outside_node: Option<NodeId>,
    /// Job the exchange belongs to (the coordinating subset's own job for
    /// cross-job stages).
    pub job: Option<JobId>,
}

impl MsgTag {
    pub fn new(scheme: SchemeKind) -> Self {
        MsgTag { scheme, stage: 0, subset_rank: None, outside_node: None, job: None }
    }

    pub fn stage(mut self, stage: u8) -> Self {
        self.stage = stage;
        self
    }

    pub fn subset(mut self, rank: u64) -> Self {
        self.subset_rank = Some(rank);
        self
    }

    pub fn outside(mut self, node: NodeId) -> Self {
        self.outside_node = Some(node);
        self
    }

    pub fn job(mut self, job: JobId) -> Self {
        self.job = Some(job);
        self
    }
}

/// One logged transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multicast {
    pub sender: NodeId,
    pub recipients: BTreeSet<NodeId>,
    pub payload: Vec<u8>,
    pub tag: MsgTag,
}

impl Multicast {
    pub fn new(
        sender: NodeId,
        recipients: impl IntoIterator<Item = NodeId>,
        payload: Vec<u8>,
        tag: MsgTag,
    ) -> Self {
        Multicast { sender, recipients: recipients.into_iter().collect(), payload, tag }
    }

    /// Payload length in bits.
    pub fn bits(&self) -> u64 {
        self.payload.len() as u64 * 8
    }
}

/// Flip one payload bit of one logged message; used by fault-sensitivity
/// tests to show that decoding is exact rather than approximate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultSpec {
    /// 0-based sequence number of the message to corrupt.
    pub message: usize,
    /// 0-based bit offset within the payload.
    pub bit: usize,
}

/// Append-only log of every broadcast, with per-sender bit totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceLog {
    nodes: u32,
    messages: Vec<Multicast>,
    sent_bits: Vec<u64>,
    fault: Option<FaultSpec>,
}

impl TraceLog {
    pub fn new(nodes: u32) -> Self {
        TraceLog { nodes, messages: Vec::new(), sent_bits: vec![0; nodes as usize], fault: None }
    }

    /// A log that corrupts one bit of the `fault.message`-th send. The
    /// sender is still charged for the original bits; only the delivered
    /// payload is damaged.
    pub fn with_fault(nodes: u32, fault: FaultSpec) -> Self {
        TraceLog { fault: Some(fault), ..TraceLog::new(nodes) }
    }

    /// Validate and append a message, charging its length to the sender.
    pub fn send(&mut self, mut m: Multicast) -> Result<()> {
        if m.recipients.is_empty() {
            return Err(Error::NoRecipients);
        }
        if m.recipients.contains(&m.sender) {
            return Err(Error::SelfDelivery(m.sender));
        }
        if m.sender < 1 || m.sender > self.nodes || m.recipients.iter().any(|&k| k < 1 || k > self.nodes) {
            return Err(Error::Parameter(format!(
                "message endpoints out of range for a {}-node cluster",
                self.nodes
            )));
        }
        self.sent_bits[(m.sender - 1) as usize] += m.bits();
        if let Some(f) = self.fault {
            if f.message == self.messages.len() && f.bit < m.payload.len() * 8 {
                m.payload[f.bit / 8] ^= 1 << (f.bit % 8);
            }
        }
        self.messages.push(m);
        Ok(())
    }

    pub fn messages(&self) -> &[Multicast] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Bits broadcast by `node` so far.
    pub fn sent_bits(&self, node: NodeId) -> u64 {
        self.sent_bits[(node - 1) as usize]
    }

    pub fn total_bits(&self) -> u64 {
        self.sent_bits.iter().sum()
    }

    /// Messages addressed to `node`, in send order.
    pub fn inbox(&self, node: NodeId) -> Vec<&Multicast> {
        self.inbox_where(node, |_| true)
    }

    /// Messages addressed to `node` whose tag satisfies `filter`, in send
    /// order.
    pub fn inbox_where(&self, node: NodeId, filter: impl Fn(&MsgTag) -> bool) -> Vec<&Multicast> {
        self.messages
            .iter()
            .filter(|m| m.recipients.contains(&node) && filter(&m.tag))
            .collect()
    }

    /// Total bits normalized by `J*Q*T`, as a reduced fraction.
    pub fn measured_load(&self, jobs: u64, functions: u64, value_bits: u64) -> Load {
        debug_assert!(jobs > 0 && functions > 0 && value_bits > 0);
        if self.messages.is_empty() {
            return zero();
        }
        Load::new(self.total_bits(), jobs * functions * value_bits)
    }

    /// Load contributed by messages matching `filter`.
    pub fn measured_load_where(
        &self,
        jobs: u64,
        functions: u64,
        value_bits: u64,
        filter: impl Fn(&MsgTag) -> bool,
    ) -> Load {
        let bits: u64 = self.messages.iter().filter(|m| filter(&m.tag)).map(Multicast::bits).sum();
        if bits == 0 {
            return zero();
        }
        Load::new(bits, jobs * functions * value_bits)
    }

    /// Write the message-level trace as CSV: one row per multicast with
    /// columns `seq,sender,recipients,bits,scheme,stage,subset_rank,outside_node,job`.
    /// Recipient sets are `|`-separated node labels.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "seq,sender,recipients,bits,scheme,stage,subset_rank,outside_node,job")?;
        for (seq, m) in self.messages.iter().enumerate() {
            let recipients = m
                .recipients
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join("|");
            writeln!(
                out,
                "{seq},{},{recipients},{},{},{},{},{},{}",
                m.sender,
                m.bits(),
                m.tag.scheme,
                m.tag.stage,
                m.tag.subset_rank.map(|r| r.to_string()).unwrap_or_default(),
                m.tag.outside_node.map(|n| n.to_string()).unwrap_or_default(),
                m.tag.job.map(|j| j.to_string()).unwrap_or_default(),
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::load::load;

    fn msg(sender: NodeId, recipients: &[NodeId], bytes: usize) -> Multicast {
        Multicast::new(sender, recipients.iter().copied(), vec![0xab; bytes], MsgTag::new(SchemeKind::Uncoded))
    }

    #[test]
    fn sender_totals_accumulate() {
        let mut log = TraceLog::new(3);
        log.send(msg(1, &[2, 3], 64)).unwrap();
        assert_eq!(log.sent_bits(1), 512);
        assert_eq!(log.sent_bits(2), 0);
        log.send(msg(1, &[2], 64)).unwrap();
        assert_eq!(log.sent_bits(1), 1024);
        assert_eq!(log.total_bits(), 1024);
    }

    #[test]
    fn malformed_messages_are_rejected() {
        let mut log = TraceLog::new(3);
        assert!(matches!(log.send(msg(1, &[], 8)), Err(Error::NoRecipients)));
        assert!(matches!(log.send(msg(1, &[1, 2], 8)), Err(Error::SelfDelivery(1))));
        assert!(log.send(msg(1, &[4], 8)).is_err());
        assert!(log.is_empty());
    }

    #[test]
    fn empty_log_has_zero_load() {
        let log = TraceLog::new(3);
        assert_eq!(log.measured_load(1, 3, 1024), load(0, 1));
    }

    #[test]
    fn three_half_value_messages_normalize_to_one_half() {
        // Three broadcasts of T/2 bits with J=1, Q=3: load 3*(T/2)/(3T) = 1/2.
        let t_bytes = 128;
        let mut log = TraceLog::new(3);
        for k in 1..=3 {
            let rcpt: Vec<NodeId> = (1..=3).filter(|&x| x != k).collect();
            log.send(msg(k, &rcpt, t_bytes / 2)).unwrap();
        }
        assert_eq!(log.measured_load(1, 3, t_bytes as u64 * 8), load(1, 2));
    }

    #[test]
    fn load_conserves_total_bits_exactly() {
        let mut log = TraceLog::new(4);
        log.send(msg(1, &[2], 13)).unwrap();
        log.send(msg(2, &[3, 4], 29)).unwrap();
        let (j, q, t) = (4u64, 4u64, 1024u64);
        let l = log.measured_load(j, q, t);
        assert_eq!(l * Load::from_integer(j * q * t), Load::from_integer(log.total_bits()));
    }

    #[test]
    fn inbox_respects_addressing_and_order() {
        let mut log = TraceLog::new(3);
        log.send(msg(1, &[2, 3], 8)).unwrap();
        log.send(msg(2, &[3], 8)).unwrap();
        assert_eq!(log.inbox(2).len(), 1);
        assert_eq!(log.inbox(1).len(), 0);
        let inbox3 = log.inbox(3);
        assert_eq!(inbox3.len(), 2);
        assert_eq!(inbox3[0].sender, 1);
        assert_eq!(inbox3[1].sender, 2);
    }

    #[test]
    fn inbox_filters_by_tag() {
        let mut log = TraceLog::new(3);
        let mut stage1 = msg(1, &[2], 8);
        stage1.tag = MsgTag::new(SchemeKind::CompressedCdc).stage(1).job(4);
        let mut stage2 = msg(1, &[2], 8);
        stage2.tag = MsgTag::new(SchemeKind::CompressedCdc).stage(2).job(4);
        log.send(stage1).unwrap();
        log.send(stage2).unwrap();
        assert_eq!(log.inbox_where(2, |t| t.stage == 1).len(), 1);
        assert_eq!(log.inbox_where(2, |t| t.job == Some(4)).len(), 2);
    }

    #[test]
    fn fault_flips_exactly_one_delivered_bit() {
        let clean = msg(1, &[2], 4);
        let mut log = TraceLog::with_fault(3, FaultSpec { message: 0, bit: 11 });
        log.send(clean.clone()).unwrap();
        let delivered = &log.messages()[0];
        assert_eq!(delivered.bits(), clean.bits());
        assert_eq!(log.sent_bits(1), clean.bits());
        let diff: Vec<usize> = (0..4 * 8)
            .filter(|&i| {
                let byte = i / 8;
                ((delivered.payload[byte] ^ clean.payload[byte]) >> (i % 8)) & 1 == 1
            })
            .collect();
        assert_eq!(diff, vec![11]);
    }

    #[test]
    fn csv_has_one_row_per_message() {
        let mut log = TraceLog::new(3);
        let mut m = msg(1, &[2, 3], 8);
        m.tag = MsgTag::new(SchemeKind::CompressedCdc).stage(2).subset(0).outside(4).job(1);
        log.send(m).unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "seq,sender,recipients,bits,scheme,stage,subset_rank,outside_node,job"
        );
        assert_eq!(lines.next().unwrap(), "0,1,2|3,64,ccdc,2,0,4,1");
        assert!(lines.next().is_none());
    }
}
