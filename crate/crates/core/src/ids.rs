//! Global identifiers for domains, nodes, fiber links and intents.
//!
//! Node and intent identifiers serialize as short strings (`"1.4"`, `"2:17"`)
//! so they can be used as JSON object keys and read comfortably in scenario
//! files and exports.

use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// Identifier of an autonomous domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainId(pub u32);

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A node address, unique across all domains. Ordered by `(domain, local)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub domain: DomainId,
    pub local: u32,
}

impl NodeId {
    pub const fn new(domain: u32, local: u32) -> Self {
        NodeId {
            domain: DomainId(domain),
            local,
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.domain.0, self.local)
    }
}

/// Error returned when parsing an identifier from its string form.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid identifier `{0}`")]
pub struct ParseIdError(pub String);

fn split_pair(s: &str, sep: char) -> Result<(u32, u64), ParseIdError> {
    let err = || ParseIdError(s.to_string());
    let (a, b) = s.split_once(sep).ok_or_else(err)?;
    let a = a.trim().parse().map_err(|_| err())?;
    let b = b.trim().parse().map_err(|_| err())?;
    Ok((a, b))
}

impl FromStr for NodeId {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (d, l) = split_pair(s, '.')?;
        let local = u32::try_from(l).map_err(|_| ParseIdError(s.to_string()))?;
        Ok(NodeId::new(d, local))
    }
}

/// Intent identifier: the creating domain plus a per-domain monotonic counter.
/// Identifiers are never reused inside one DAG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IntentId {
    pub domain: DomainId,
    pub seq: u64,
}

impl IntentId {
    pub const fn new(domain: u32, seq: u64) -> Self {
        IntentId {
            domain: DomainId(domain),
            seq,
        }
    }
}

impl fmt::Display for IntentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.domain.0, self.seq)
    }
}

impl FromStr for IntentId {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (d, n) = split_pair(s, ':')?;
        Ok(IntentId::new(d, n))
    }
}

/// Unordered pair of fiber endpoints, stored normalized (`lo < hi`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkKey {
    lo: NodeId,
    hi: NodeId,
}

impl LinkKey {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            LinkKey { lo: a, hi: b }
        } else {
            LinkKey { lo: b, hi: a }
        }
    }

    pub fn lo(&self) -> NodeId {
        self.lo
    }

    pub fn hi(&self) -> NodeId {
        self.hi
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.lo == n || self.hi == n
    }

    /// The endpoint opposite to `n`, if `n` is an endpoint.
    pub fn other(&self, n: NodeId) -> Option<NodeId> {
        if self.lo == n {
            Some(self.hi)
        } else if self.hi == n {
            Some(self.lo)
        } else {
            None
        }
    }
}

impl fmt::Display for LinkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

impl FromStr for LinkKey {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once('-').ok_or_else(|| ParseIdError(s.to_string()))?;
        Ok(LinkKey::new(a.parse()?, b.parse()?))
    }
}

macro_rules! string_serde {
    ($ty:ty, $what:literal) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse()
                    .map_err(|_| de::Error::custom(format!("invalid {} `{}`", $what, s)))
            }
        }
    };
}

string_serde!(NodeId, "node id");
string_serde!(IntentId, "intent id");
string_serde!(LinkKey, "link");

/// Inclusive, 1-based range of contiguous spectrum slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotRange {
    pub start: u16,
    pub end: u16,
}

impl SlotRange {
    /// Range of `width` slots beginning at `start`. `width` must be at least 1.
    pub fn with_width(start: u16, width: u16) -> Self {
        debug_assert!(width >= 1);
        SlotRange {
            start,
            end: start + width - 1,
        }
    }

    pub fn width(&self) -> u16 {
        self.end - self.start + 1
    }

    pub fn iter(&self) -> impl Iterator<Item = u16> {
        self.start..=self.end
    }
}

impl fmt::Display for SlotRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.start, self.end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_key_is_unordered() {
        let a = NodeId::new(1, 1);
        let b = NodeId::new(1, 2);
        assert_eq!(LinkKey::new(a, b), LinkKey::new(b, a));
        assert_eq!(LinkKey::new(b, a).lo(), a);
        assert_eq!(LinkKey::new(a, b).other(a), Some(b));
        assert_eq!(LinkKey::new(a, b).other(NodeId::new(2, 1)), None);
    }

    #[test]
    fn ids_parse_back() {
        let n: NodeId = "3.14".parse().unwrap();
        assert_eq!(n, NodeId::new(3, 14));
        let i: IntentId = "2:7".parse().unwrap();
        assert_eq!(i.to_string(), "2:7");
        let l: LinkKey = "1.2-1.1".parse().unwrap();
        assert_eq!(l.to_string(), "1.1-1.2");
        assert!("1-2".parse::<NodeId>().is_err());
        assert!("x:1".parse::<IntentId>().is_err());
    }

    #[test]
    fn ids_as_json_keys() {
        let mut m = std::collections::BTreeMap::new();
        m.insert(NodeId::new(1, 2), 5u32);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"1.2":5}"#);
        let back: std::collections::BTreeMap<NodeId, u32> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn slot_range_width() {
        let r = SlotRange::with_width(3, 4);
        assert_eq!(r, SlotRange { start: 3, end: 6 });
        assert_eq!(r.width(), 4);
        assert_eq!(r.iter().collect::<Vec<_>>(), vec![3, 4, 5, 6]);
    }
}
