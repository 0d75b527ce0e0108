//! Intermediate values, group arithmetic, and packet segmentation.
//!
//! Every payload in the simulator is byte-aligned (`8 | T`, and packets are
//! padded to whole segments), so bit strings are carried as byte buffers and
//! all bit counts are `8 * len`.
//!
//! Reduction adds values in the configured [`AggregationGroup`]; coded
//! multicast always uses raw [`xor_bytes`] on segments, independent of the
//! group, because each receiver recovers segments exactly before summing.

use crate::config::AggregationGroup;
use crate::error::{Error, Result};

/// A single intermediate value: an opaque payload of exactly `T` bits.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Value(Vec<u8>);

impl Value {
    /// The all-zero value of `bits` length — the group identity.
    pub fn zeros(bits: usize) -> Self {
        debug_assert_eq!(bits % 8, 0);
        Value(vec![0u8; bits / 8])
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Value(bytes)
    }

    pub fn bits(&self) -> usize {
        self.0.len() * 8
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }
}

impl std::fmt::Debug for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Value({} bits, ", self.bits())?;
        for b in self.0.iter().take(8) {
            write!(f, "{b:02x}")?;
        }
        if self.0.len() > 8 {
            write!(f, "..")?;
        }
        write!(f, ")")
    }
}

impl AggregationGroup {
    /// Abelian sum of two equal-length values.
    pub fn add(self, a: &Value, b: &Value) -> Result<Value> {
        if a.bits() != b.bits() {
            return Err(Error::PayloadLength { left: a.bits(), right: b.bits() });
        }
        let mut out = a.0.clone();
        match self {
            AggregationGroup::Xor => {
                for (x, y) in out.iter_mut().zip(&b.0) {
                    *x ^= y;
                }
            }
            AggregationGroup::Add8 => {
                for (x, y) in out.iter_mut().zip(&b.0) {
                    *x = x.wrapping_add(*y);
                }
            }
            AggregationGroup::Add32 => {
                self.check_alignment(a.bits())?;
                for (xs, ys) in out.chunks_exact_mut(4).zip(b.0.chunks_exact(4)) {
                    let sum = u32::from_le_bytes(xs.try_into().unwrap())
                        .wrapping_add(u32::from_le_bytes(ys.try_into().unwrap()));
                    xs.copy_from_slice(&sum.to_le_bytes());
                }
            }
        }
        Ok(Value(out))
    }

    /// The group inverse of `a`, so that `add(a, inverse(a))` is all-zero.
    pub fn inverse(self, a: &Value) -> Result<Value> {
        let mut out = a.0.clone();
        match self {
            AggregationGroup::Xor => {}
            AggregationGroup::Add8 => {
                for x in out.iter_mut() {
                    *x = x.wrapping_neg();
                }
            }
            AggregationGroup::Add32 => {
                self.check_alignment(a.bits())?;
                for xs in out.chunks_exact_mut(4) {
                    let neg = u32::from_le_bytes(xs.try_into().unwrap()).wrapping_neg();
                    xs.copy_from_slice(&neg.to_le_bytes());
                }
            }
        }
        Ok(Value(out))
    }

    /// Group sum of an iterator of values, starting from the identity.
    pub fn sum<'a>(self, bits: usize, values: impl IntoIterator<Item = &'a Value>) -> Result<Value> {
        let mut acc = Value::zeros(bits);
        for v in values {
            acc = self.add(&acc, v)?;
        }
        Ok(acc)
    }

    fn check_alignment(self, bits: usize) -> Result<()> {
        if self == AggregationGroup::Add32 && bits % 32 != 0 {
            return Err(Error::PayloadAlignment {
                bits,
                group: "add32",
                reason: "length must be a multiple of 32 bits",
            });
        }
        Ok(())
    }
}

/// Bitwise XOR of two equal-length bit strings.
pub fn xor_bytes(a: &[u8], b: &[u8]) -> Result<Vec<u8>> {
    if a.len() != b.len() {
        return Err(Error::PayloadLength { left: a.len() * 8, right: b.len() * 8 });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x ^ y).collect())
}

/// XOR `b` into `acc` in place.
pub fn xor_in_place(acc: &mut [u8], b: &[u8]) -> Result<()> {
    if acc.len() != b.len() {
        return Err(Error::PayloadLength { left: acc.len() * 8, right: b.len() * 8 });
    }
    for (x, y) in acc.iter_mut().zip(b) {
        *x ^= y;
    }
    Ok(())
}

/// Result of [`split_packet`]: equal-length segments plus how many zero bits
/// of padding were appended to make the packet divisible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPacket {
    /// `parts` segments in order; concatenated they give the padded packet.
    pub segments: Vec<Vec<u8>>,
    /// Zero bits appended before splitting. Padding is transmitted and
    /// counted in the load, then discarded after reassembly.
    pub padded_bits: usize,
}

impl SplitPacket {
    /// Length of one segment in bits.
    pub fn segment_bits(&self) -> usize {
        self.segments.first().map_or(0, |s| s.len() * 8)
    }
}

/// Split a packet into `parts` equal byte-aligned segments, zero-padding the
/// tail to the next multiple of `parts` bytes first. Callers label segments
/// by the ascending node ids of the subset performing the exchange.
pub fn split_packet(packet: &[u8], parts: usize) -> Result<SplitPacket> {
    if parts == 0 {
        return Err(Error::Parameter("cannot split a packet into 0 parts".into()));
    }
    let padded_len = packet.len().div_ceil(parts) * parts;
    let mut padded = packet.to_vec();
    padded.resize(padded_len, 0);
    let seg_len = padded_len / parts;
    let segments = if padded.is_empty() {
        vec![Vec::new(); parts]
    } else {
        padded.chunks(seg_len).map(<[u8]>::to_vec).collect()
    };
    debug_assert_eq!(segments.len(), parts);
    Ok(SplitPacket {
        segments,
        padded_bits: (padded_len - packet.len()) * 8,
    })
}

/// Concatenate segments back into a packet (still padded).
pub fn join_segments(segments: &[Vec<u8>]) -> Vec<u8> {
    segments.iter().flat_map(|s| s.iter().copied()).collect()
}
