//! Field partitions and their canonical text form.
//!
//! A layout is a partition of field names into ordered clusters: clusters
//! of two or more fields are interleaved (AoS groups), singletons are
//! standalone arrays (SoA). The canonical form sorts fields within a
//! cluster by declaration index and clusters by their minimum declaration
//! index, which makes the printed form a stable key for profiles and
//! golden outputs.

use std::collections::BTreeSet;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::FieldTable;

/// A partition of a field-name set into ordered clusters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Layout {
    clusters: Vec<Vec<String>>,
}

impl Layout {
    /// Build a canonical layout from arbitrary clusters.
    ///
    /// Rejects unknown and duplicated fields; sorts clusters and members
    /// into canonical order.
    pub fn new(clusters: Vec<Vec<String>>, table: &FieldTable) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for cluster in &clusters {
            for f in cluster {
                if !table.contains(f) {
                    return Err(Error::UnknownField { field: f.clone() });
                }
                if !seen.insert(f.clone()) {
                    return Err(Error::InvalidInput(format!(
                        "field '{f}' appears in more than one cluster"
                    )));
                }
            }
        }
        let mut canon: Vec<Vec<String>> = clusters
            .into_iter()
            .filter(|c| !c.is_empty())
            .map(|mut c| {
                c.sort_by_key(|f| table.decl_index(f).unwrap_or(usize::MAX));
                c
            })
            .collect();
        canon.sort_by_key(|c| table.decl_index(&c[0]).unwrap_or(usize::MAX));
        Ok(Self { clusters: canon })
    }

    /// All-singleton layout over names already in declaration order.
    pub fn singletons<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            clusters: names.into_iter().map(|n| vec![n.into()]).collect(),
        }
    }

    /// Internal constructor for producers that build clusters already in
    /// canonical order (greedy clustering, partition enumeration).
    pub(crate) fn from_canonical_parts(clusters: Vec<Vec<String>>) -> Self {
        Self { clusters }
    }

    pub fn clusters(&self) -> &[Vec<String>] {
        &self.clusters
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Number of fields covered by the partition.
    pub fn field_count(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// Index of the cluster holding `field`.
    pub fn cluster_index_of(&self, field: &str) -> Option<usize> {
        self.clusters
            .iter()
            .position(|c| c.iter().any(|f| f == field))
    }

    pub fn cluster_of(&self, field: &str) -> Option<&[String]> {
        self.cluster_index_of(field)
            .map(|i| self.clusters[i].as_slice())
    }

    /// Set of fields covered by the partition.
    pub fn field_set(&self) -> BTreeSet<&str> {
        self.clusters
            .iter()
            .flat_map(|c| c.iter().map(String::as_str))
            .collect()
    }

    /// True iff the partition covers exactly the table's field set.
    pub fn spans(&self, table: &FieldTable) -> bool {
        self.field_count() == table.len() && table.names().all(|n| self.cluster_index_of(n).is_some())
    }

    /// Re-canonicalize; identity on layouts already canonical.
    pub fn canonicalized(&self, table: &FieldTable) -> Result<Self> {
        Self::new(self.clusters.clone(), table)
    }

    /// The stable text form: `{f,g,h}|{x}|{y}` with no whitespace.
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        for (i, cluster) in self.clusters.iter().enumerate() {
            if i > 0 {
                out.push('|');
            }
            out.push('{');
            for (j, f) in cluster.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(f);
            }
            out.push('}');
        }
        out
    }

    /// Parse the text form back into a layout, preserving the written
    /// cluster and field order. Printing a canonical layout and parsing
    /// the result yields an equal layout.
    pub fn parse(input: &str) -> Result<Self> {
        let reject = |reason: &str| Error::InvalidLayoutString {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        if input.is_empty() {
            return Err(reject("empty layout"));
        }
        let mut clusters = Vec::new();
        let mut seen = BTreeSet::new();
        for part in input.split('|') {
            let inner = part
                .strip_prefix('{')
                .and_then(|p| p.strip_suffix('}'))
                .ok_or_else(|| reject("every cluster must be brace-delimited"))?;
            if inner.is_empty() {
                return Err(reject("empty cluster"));
            }
            let mut cluster = Vec::new();
            for name in inner.split(',') {
                if name.is_empty() {
                    return Err(reject("empty field name"));
                }
                if name.contains(['{', '}', '|', ' ']) {
                    return Err(reject("field names may not contain '{', '}', '|', or spaces"));
                }
                if !seen.insert(name.to_string()) {
                    return Err(reject(&format!("field '{name}' appears twice")));
                }
                cluster.push(name.to_string());
            }
            clusters.push(cluster);
        }
        Ok(Self { clusters })
    }
}

impl std::fmt::Display for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.canonical_string())
    }
}

impl Serialize for Layout {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical_string())
    }
}

impl<'de> Deserialize<'de> for Layout {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Layout::parse(&s).map_err(serde::de::Error::custom)
    }
}
