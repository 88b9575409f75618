//! Shared domain types: node identities, opaque values, and result vectors.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Identity of a participant. Indices are 1-based and total-ordered, so a
/// system of `n` nodes is exactly `NodeId(1)..=NodeId(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u8);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Zero-based position, for indexing per-node arrays.
    pub fn pos(self) -> usize {
        self.0 as usize - 1
    }

    pub fn all(n: usize) -> impl Iterator<Item = NodeId> {
        (1..=n as u8).map(NodeId)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// An opaque private value, or the distinguished null value.
///
/// Null is distinct from every payload, including the empty one. Equality is
/// byte-wise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Value {
    Null,
    Bytes(Vec<u8>),
}

impl Value {
    pub fn bytes(b: impl Into<Vec<u8>>) -> Value {
        Value::Bytes(b.into())
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Length-prefixed encoding: `0x00` for null, `0x01 || u32-le length || bytes`.
    pub fn encode(&self, out: &mut Vec<u8>) {
        match self {
            Value::Null => out.push(0x00),
            Value::Bytes(b) => {
                out.push(0x01);
                out.extend_from_slice(&(b.len() as u32).to_le_bytes());
                out.extend_from_slice(b);
            }
        }
    }

    pub fn decode(input: &[u8]) -> Option<(Value, &[u8])> {
        match input.first()? {
            0x00 => Some((Value::Null, &input[1..])),
            0x01 => {
                let len = u32::from_le_bytes(input.get(1..5)?.try_into().ok()?) as usize;
                let body = input.get(5..5 + len)?;
                Some((Value::Bytes(body.to_vec()), &input[5 + len..]))
            }
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => write!(f, "null"),
            Value::Bytes(b) => match std::str::from_utf8(b) {
                Ok(s) if s.chars().all(|c| c.is_ascii_graphic()) => write!(f, "{s}"),
                _ => {
                    for byte in b {
                        write!(f, "{byte:02x}")?;
                    }
                    Ok(())
                }
            },
        }
    }
}

/// The agreed vector `V`: one slot per node, each holding a value or null.
///
/// Slots only ever transition from null to a value, or are finalized to null
/// once; a finalized slot never changes again within a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultVector {
    slots: Vec<Value>,
}

impl ResultVector {
    pub fn new(n: usize) -> ResultVector {
        ResultVector { slots: vec![Value::Null; n] }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn get(&self, node: NodeId) -> &Value {
        &self.slots[node.pos()]
    }

    pub fn set(&mut self, node: NodeId, value: Value) {
        self.slots[node.pos()] = value;
    }

    pub fn slots(&self) -> &[Value] {
        &self.slots
    }

    pub fn filled(&self) -> usize {
        self.slots.iter().filter(|v| !v.is_null()).count()
    }
}

impl fmt::Display for ResultVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.slots.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_differs_from_every_payload() {
        assert_ne!(Value::Null, Value::bytes(""));
        assert_ne!(Value::Null, Value::bytes([0u8]));
        assert_eq!(Value::bytes("a"), Value::bytes("a"));
    }

    #[test]
    fn value_codec_round_trip() {
        for v in [Value::Null, Value::bytes(""), Value::bytes("payload"), Value::bytes([0, 255, 7])] {
            let mut buf = Vec::new();
            v.encode(&mut buf);
            buf.extend_from_slice(b"rest");
            let (decoded, rest) = Value::decode(&buf).unwrap();
            assert_eq!(decoded, v);
            assert_eq!(rest, b"rest");
        }
    }

    #[test]
    fn result_vector_slots() {
        let mut v = ResultVector::new(4);
        assert_eq!(v.filled(), 0);
        v.set(NodeId(2), Value::bytes("x"));
        assert_eq!(v.get(NodeId(2)), &Value::bytes("x"));
        assert_eq!(v.get(NodeId(1)), &Value::Null);
        assert_eq!(v.filled(), 1);
    }
}
