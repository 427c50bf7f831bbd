//! Unbounded `(sequence, process)` tags and their packing into register values.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::history::{ProcessId, Value};

/// An ordering token. Tags compare lexicographically: first by `seq`, then by
/// `pid`, which makes the order total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tag {
    pub seq: u64,
    pub pid: ProcessId,
}

impl Tag {
    pub const fn new(seq: u64, pid: ProcessId) -> Self {
        Self { seq, pid }
    }

    /// The tag every process starts from.
    pub const fn initial(pid: ProcessId) -> Self {
        Self { seq: 0, pid }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.seq, self.pid)
    }
}

/// Strict lexicographic order on tags.
pub fn tag_less(a: Tag, b: Tag) -> bool {
    (a.seq, a.pid) < (b.seq, b.pid)
}

/// A value together with the tag of the write that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TaggedValue {
    pub tag: Tag,
    pub val: Value,
}

impl TaggedValue {
    pub const fn new(tag: Tag, val: Value) -> Self {
        Self { tag, val }
    }
}

/// Mixed-radix packing of a [`TaggedValue`] into a single register value:
///
/// ```text
/// code = (seq * processes + pid) * domain + val
/// ```
///
/// The map is injective as long as `pid < processes` and `val < domain`.
/// Sequence numbers are capped at [`TagCodec::seq_limit`] so that every code
/// fits in a `u64`; the register domain is `seq_limit * processes * domain`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TagCodec {
    processes: u64,
    domain: u64,
}

impl TagCodec {
    pub fn new(processes: usize, domain: u64) -> Self {
        assert!(processes > 0 && domain > 0, "empty tag codec");
        let processes = processes as u64;
        assert!(
            processes.checked_mul(domain).is_some(),
            "tag codec radix overflows u64"
        );
        Self { processes, domain }
    }

    /// Exclusive upper bound on encodable sequence numbers.
    pub fn seq_limit(&self) -> u64 {
        u64::MAX / (self.processes * self.domain)
    }

    /// Size of the value domain a register needs to hold any encoded tag.
    pub fn register_domain(&self) -> u64 {
        self.seq_limit() * self.processes * self.domain
    }

    pub fn encode(&self, tv: TaggedValue) -> Value {
        assert!(
            tv.tag.seq < self.seq_limit(),
            "tag sequence {} overflows the register encoding",
            tv.tag.seq
        );
        let pid = u64::from(tv.tag.pid.0);
        debug_assert!(pid < self.processes && tv.val.0 < self.domain);
        Value((tv.tag.seq * self.processes + pid) * self.domain + tv.val.0)
    }

    pub fn decode(&self, code: Value) -> TaggedValue {
        let val = code.0 % self.domain;
        let rest = code.0 / self.domain;
        let pid = rest % self.processes;
        let seq = rest / self.processes;
        TaggedValue::new(Tag::new(seq, ProcessId(pid as u32)), Value(val))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(seq: u64, pid: u32) -> Tag {
        Tag::new(seq, ProcessId(pid))
    }

    #[test]
    fn lexicographic_order() {
        assert!(tag_less(t(2, 9), t(3, 1)));
        assert!(tag_less(t(3, 2), t(3, 5)));
        assert!(!tag_less(t(4, 0), t(4, 0)));
        assert!(!tag_less(t(3, 1), t(2, 9)));
    }

    #[test]
    fn codec_bounds() {
        let c = TagCodec::new(3, 10);
        assert_eq!(c.register_domain(), c.seq_limit() * 30);
        let top = TaggedValue::new(t(c.seq_limit() - 1, 2), Value(9));
        assert_eq!(c.decode(c.encode(top)), top);
        assert!(c.encode(top).0 < c.register_domain());
    }

    #[test]
    #[should_panic(expected = "overflows the register encoding")]
    fn codec_overflow_guard() {
        let c = TagCodec::new(2, 2);
        c.encode(TaggedValue::new(t(c.seq_limit(), 0), Value(0)));
    }

    proptest! {
        #[test]
        fn trichotomy(a in 0u64..5, p in 0u32..4, b in 0u64..5, q in 0u32..4) {
            let (x, y) = (t(a, p), t(b, q));
            let held = [tag_less(x, y), tag_less(y, x), x == y];
            prop_assert_eq!(held.iter().filter(|h| **h).count(), 1);
        }

        #[test]
        fn codec_is_injective(n in 1usize..6, m in 2u64..20, seq in 0u64..1_000_000, pid in 0u32..6, val in 0u64..20) {
            prop_assume!((pid as usize) < n && val < m);
            let c = TagCodec::new(n, m);
            let tv = TaggedValue::new(t(seq, pid), Value(val));
            prop_assert_eq!(c.decode(c.encode(tv)), tv);
        }
    }
}
