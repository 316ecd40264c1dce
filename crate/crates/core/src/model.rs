//! Program, architecture, and tuning-profile data model shared by all passes.
//!
//! All values here are immutable after construction; passes borrow them
//! freely and may run concurrently. `validate` reports every invariant
//! violation as a diagnostic instead of failing fast, so a user sees all
//! problems in one round.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One logical array (record field) in the optimized data set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Field {
    /// Unique name within a program.
    pub name: String,
    /// Bytes per element; at least 1.
    pub elem_bytes: u64,
    /// Position in declaration order, `0..F-1` with no gaps.
    pub decl_index: usize,
}

/// How a group of fields is touched each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessPattern {
    /// Consecutive iterations touch consecutive indices (vectorizable).
    Streaming,
    /// Data-dependent gather; one random record per access.
    Irregular,
}

/// One co-access site: the fields touched together, how often per
/// iteration, and the arithmetic attributable to the site.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(deserialize = "T: serde::Deserialize<'de> + crate::scalar::Scalar"))]
pub struct AccessGroup<T> {
    pub fields: BTreeSet<String>,
    /// Accesses per loop iteration; positive.
    pub freq: T,
    pub pattern: AccessPattern,
    /// Arithmetic operations per iteration for this site.
    #[serde(default = "zero")]
    pub ops: T,
}

fn zero<T: Scalar>() -> T {
    T::zero()
}

fn default_stream_cluster_penalty<T: Scalar>() -> T {
    T::from_f64(2.0).unwrap()
}

/// A data/task-parallel operation executable on one of the devices.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(deserialize = "T: serde::Deserialize<'de> + crate::scalar::Scalar"))]
pub struct Section<T> {
    pub id: String,
    /// Parallel iterations; positive.
    pub trip_count: u64,
    pub groups: Vec<AccessGroup<T>>,
    pub allowed_devices: BTreeSet<String>,
}

impl<T> Section<T> {
    /// Union of the field sets of all access groups.
    pub fn touched_fields(&self) -> BTreeSet<&str> {
        self.groups
            .iter()
            .flat_map(|g| g.fields.iter().map(String::as_str))
            .collect()
    }
}

/// The optimizer's input: parallel arrays plus an ordered list of sections.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(deserialize = "T: serde::Deserialize<'de> + crate::scalar::Scalar"))]
pub struct Program<T> {
    pub name: String,
    /// Logical array length shared by every field.
    pub record_count: u64,
    pub fields: Vec<Field>,
    pub sections: Vec<Section<T>>,
    /// Execution order; a permutation of the section ids.
    pub order: Vec<String>,
}

impl<T> Program<T> {
    pub fn section(&self, id: &str) -> Option<&Section<T>> {
        self.sections.iter().find(|s| s.id == id)
    }

    /// Sections resolved in execution order.
    pub fn sections_in_order(&self) -> Result<Vec<&Section<T>>> {
        self.order
            .iter()
            .map(|id| {
                self.section(id).ok_or_else(|| Error::UnknownSection {
                    section: id.clone(),
                })
            })
            .collect()
    }

    /// Field lookup table in declaration order.
    pub fn field_table(&self) -> Result<FieldTable> {
        FieldTable::new(&self.fields)
    }
}

/// Declaration-ordered field lookup used by every pass.
#[derive(Debug, Clone)]
pub struct FieldTable {
    fields: Vec<Field>,
    by_name: BTreeMap<String, usize>,
}

impl FieldTable {
    pub fn new(fields: &[Field]) -> Result<Self> {
        let mut sorted = fields.to_vec();
        sorted.sort_by_key(|f| f.decl_index);
        for (pos, f) in sorted.iter().enumerate() {
            if f.decl_index != pos {
                return Err(Error::InvalidInput(format!(
                    "field declaration indices must form 0..{} with no gaps (found {} for '{}')",
                    fields.len(),
                    f.decl_index,
                    f.name
                )));
            }
        }
        let mut by_name = BTreeMap::new();
        for (pos, f) in sorted.iter().enumerate() {
            if by_name.insert(f.name.clone(), pos).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate field name '{}'",
                    f.name
                )));
            }
        }
        Ok(Self {
            fields: sorted,
            by_name,
        })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    pub fn decl_index(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn elem_bytes(&self, name: &str) -> Option<u64> {
        self.by_name.get(name).map(|&i| self.fields[i].elem_bytes)
    }

    /// Field names in declaration order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.fields.iter().map(|f| f.name.as_str())
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    /// Total element bytes of a cluster; unknown names count zero.
    pub fn cluster_bytes(&self, cluster: &[String]) -> u64 {
        cluster
            .iter()
            .filter_map(|f| self.elem_bytes(f))
            .sum()
    }
}

/// One execution target and the knobs of its memory system.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(deserialize = "T: serde::Deserialize<'de> + crate::scalar::Scalar"))]
pub struct Device<T> {
    pub name: String,
    /// Cache-line / transaction size in bytes; a power of two.
    pub line_bytes: u64,
    /// Time to service one line fetch.
    pub line_time_ns: T,
    pub throughput_ops_per_ns: T,
    /// Whether adjacent threads merge adjacent accesses into wide
    /// transactions (favors one-field arrays for streaming access).
    pub coalescing: bool,
    /// Cost multiplier for streaming a multi-field cluster on a
    /// coalescing device; at least 1.
    #[serde(default = "default_stream_cluster_penalty")]
    pub stream_cluster_penalty: T,
    /// Byte bound on one interleaved field cluster; a power of two.
    pub cluster_capacity_bytes: u64,
}

/// Directed transfer capability between two devices; treated as
/// symmetric when only one direction is listed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link<T> {
    pub from: String,
    pub to: String,
    pub bandwidth_bytes_per_ns: T,
    pub latency_ns: T,
}

/// The machine: devices plus transfer parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(deserialize = "T: serde::Deserialize<'de> + crate::scalar::Scalar"))]
pub struct Architecture<T> {
    pub devices: Vec<Device<T>>,
    #[serde(default)]
    pub links: Vec<Link<T>>,
    /// Bandwidth of an in-memory relayout on a single device.
    pub same_device_remap_bandwidth_bytes_per_ns: T,
    /// Flat cost added to any remap that moves at least one byte.
    #[serde(default = "zero")]
    pub remap_fixed_overhead_ns: T,
}

impl<T> Architecture<T> {
    pub fn device(&self, name: &str) -> Option<&Device<T>> {
        self.devices.iter().find(|d| d.name == name)
    }

    /// Link between two devices in either direction.
    pub fn link_between(&self, a: &str, b: &str) -> Option<&Link<T>> {
        self.links
            .iter()
            .find(|l| (l.from == a && l.to == b) || (l.from == b && l.to == a))
    }
}

/// One measured execution time keyed by section, device, and layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileEntry<T> {
    pub section: String,
    pub device: String,
    /// Canonical layout string the measurement was taken under.
    pub layout: String,
    pub time_ns: T,
}

/// Measured execution times that override the analytic model.
///
/// Lookups for absent keys report absence; there is no default time.
#[derive(Debug, Clone)]
pub struct TuningProfile<T> {
    entries: BTreeMap<(String, String, String), T>,
}

impl<T> Default for TuningProfile<T> {
    fn default() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> TuningProfile<T> {
    pub fn from_entries(entries: Vec<ProfileEntry<T>>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for e in entries {
            let key = (e.section.clone(), e.device.clone(), e.layout.clone());
            if map.insert(key, e.time_ns).is_some() {
                return Err(Error::DuplicateProfileEntry {
                    section: e.section,
                    device: e.device,
                    layout: e.layout,
                });
            }
        }
        Ok(Self { entries: map })
    }

    pub fn lookup(&self, section: &str, device: &str, layout: &str) -> Option<T> {
        self.entries
            .get(&(section.to_string(), device.to_string(), layout.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(String, String, String), &T)> {
        self.entries.iter()
    }

    /// Remove one entry; used by tests exercising model fallback.
    pub fn remove(&mut self, section: &str, device: &str, layout: &str) -> Option<T> {
        self.entries
            .remove(&(section.to_string(), device.to_string(), layout.to_string()))
    }
}

/// One named invariant violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// What the problem is about, e.g. `section 's1'` or `field 'V1'`.
    pub subject: String,
    pub message: String,
}

impl Diagnostic {
    fn new(subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// Check every model invariant of a program against an architecture.
///
/// Returns an empty list iff the program and architecture are well
/// formed and every section's allowed devices exist in the architecture.
/// Pure: identical inputs yield identical diagnostic lists.
pub fn validate_program<T: Scalar>(p: &Program<T>, a: &Architecture<T>) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    // Architecture invariants.
    let mut device_names = BTreeSet::new();
    for d in &a.devices {
        let subj = format!("device '{}'", d.name);
        if !device_names.insert(d.name.clone()) {
            out.push(Diagnostic::new(&subj, "duplicate device name"));
        }
        if !d.line_bytes.is_power_of_two() {
            out.push(Diagnostic::new(
                &subj,
                format!("line_bytes {} is not a power of two", d.line_bytes),
            ));
        }
        if !d.cluster_capacity_bytes.is_power_of_two() {
            out.push(Diagnostic::new(
                &subj,
                format!(
                    "cluster_capacity_bytes {} is not a power of two",
                    d.cluster_capacity_bytes
                ),
            ));
        }
        if !(d.line_time_ns > T::zero() && d.line_time_ns.is_finite()) {
            out.push(Diagnostic::new(&subj, "line_time_ns must be positive"));
        }
        if !(d.throughput_ops_per_ns > T::zero() && d.throughput_ops_per_ns.is_finite()) {
            out.push(Diagnostic::new(
                &subj,
                "throughput_ops_per_ns must be positive",
            ));
        }
        if !(d.stream_cluster_penalty >= T::one() && d.stream_cluster_penalty.is_finite()) {
            out.push(Diagnostic::new(
                &subj,
                "stream_cluster_penalty must be at least 1",
            ));
        }
    }
    if a.devices.is_empty() {
        out.push(Diagnostic::new("architecture", "no devices declared"));
    }
    if !(a.same_device_remap_bandwidth_bytes_per_ns > T::zero()
        && a.same_device_remap_bandwidth_bytes_per_ns.is_finite())
    {
        out.push(Diagnostic::new(
            "architecture",
            "same_device_remap_bandwidth_bytes_per_ns must be positive",
        ));
    }
    if !(a.remap_fixed_overhead_ns >= T::zero() && a.remap_fixed_overhead_ns.is_finite()) {
        out.push(Diagnostic::new(
            "architecture",
            "remap_fixed_overhead_ns must be nonnegative",
        ));
    }
    for l in &a.links {
        let subj = format!("link '{}'->'{}'", l.from, l.to);
        for end in [&l.from, &l.to] {
            if !device_names.contains(end) {
                out.push(Diagnostic::new(&subj, format!("unknown device '{end}'")));
            }
        }
        if !(l.bandwidth_bytes_per_ns > T::zero() && l.bandwidth_bytes_per_ns.is_finite()) {
            out.push(Diagnostic::new(&subj, "bandwidth must be positive"));
        }
        if !(l.latency_ns >= T::zero() && l.latency_ns.is_finite()) {
            out.push(Diagnostic::new(&subj, "latency must be nonnegative"));
        }
    }

    // Program invariants.
    if p.record_count == 0 {
        out.push(Diagnostic::new(
            format!("program '{}'", p.name),
            "record_count must be positive",
        ));
    }
    let mut field_names = BTreeSet::new();
    for f in &p.fields {
        let subj = format!("field '{}'", f.name);
        if !field_names.insert(f.name.clone()) {
            out.push(Diagnostic::new(&subj, "duplicate field name"));
        }
        if f.elem_bytes == 0 {
            out.push(Diagnostic::new(&subj, "elem_bytes must be at least 1"));
        }
    }
    let mut decl_seen = vec![false; p.fields.len()];
    for f in &p.fields {
        if f.decl_index >= p.fields.len() || decl_seen[f.decl_index.min(p.fields.len() - 1)] {
            out.push(Diagnostic::new(
                format!("field '{}'", f.name),
                format!(
                    "decl_index {} does not form a 0..{} sequence",
                    f.decl_index,
                    p.fields.len()
                ),
            ));
        } else {
            decl_seen[f.decl_index] = true;
        }
    }

    let mut section_ids = BTreeSet::new();
    let mut used_devices: BTreeSet<&str> = BTreeSet::new();
    for s in &p.sections {
        let subj = format!("section '{}'", s.id);
        if !section_ids.insert(s.id.clone()) {
            out.push(Diagnostic::new(&subj, "duplicate section id"));
        }
        if s.trip_count == 0 {
            out.push(Diagnostic::new(&subj, "trip_count must be positive"));
        }
        if s.groups.is_empty() {
            out.push(Diagnostic::new(&subj, "section has no access groups"));
        }
        for (gi, g) in s.groups.iter().enumerate() {
            let gsubj = format!("section '{}' group {gi}", s.id);
            if g.fields.is_empty() {
                out.push(Diagnostic::new(&gsubj, "group has no fields"));
            }
            for f in &g.fields {
                if !field_names.contains(f) {
                    out.push(Diagnostic::new(
                        &gsubj,
                        format!("references undeclared field '{f}'"),
                    ));
                }
            }
            if !(g.freq > T::zero() && g.freq.is_finite()) {
                out.push(Diagnostic::new(&gsubj, "freq must be positive"));
            }
            if !(g.ops >= T::zero() && g.ops.is_finite()) {
                out.push(Diagnostic::new(&gsubj, "ops must be nonnegative"));
            }
        }
        if s.allowed_devices.is_empty() {
            out.push(Diagnostic::new(&subj, "allowed_devices is empty"));
        }
        for d in &s.allowed_devices {
            used_devices.insert(d);
            if !device_names.contains(d) {
                out.push(Diagnostic::new(
                    &subj,
                    format!("allowed device '{d}' is not in the architecture"),
                ));
            }
        }
    }

    // Execution order must be a permutation of the section ids.
    let mut order_seen = BTreeSet::new();
    for id in &p.order {
        if !section_ids.contains(id) {
            out.push(Diagnostic::new(
                "order",
                format!("unknown section '{id}'"),
            ));
        }
        if !order_seen.insert(id.clone()) {
            out.push(Diagnostic::new(
                "order",
                format!("section '{id}' appears more than once"),
            ));
        }
    }
    for id in &section_ids {
        if !order_seen.contains(id) {
            out.push(Diagnostic::new(
                "order",
                format!("section '{id}' is missing from the order"),
            ));
        }
    }

    // Every pair of devices the program can touch needs a link.
    let used: Vec<&str> = used_devices
        .into_iter()
        .filter(|d| device_names.contains(*d))
        .collect();
    for (i, da) in used.iter().enumerate() {
        for db in used.iter().skip(i + 1) {
            if a.link_between(da, db).is_none() {
                out.push(Diagnostic::new(
                    "architecture",
                    format!("no link between used devices '{da}' and '{db}'"),
                ));
            }
        }
    }

    out
}

/// Check profile entries against a program and architecture: known
/// sections and devices, positive times, and canonical spanning layouts.
pub fn validate_profile<T: Scalar>(
    prof: &TuningProfile<T>,
    p: &Program<T>,
    a: &Architecture<T>,
) -> Vec<Diagnostic> {
    use crate::layout::Layout;

    let mut out = Vec::new();
    let table = match p.field_table() {
        Ok(t) => t,
        Err(e) => {
            out.push(Diagnostic::new("profile", format!("program fields unusable: {e}")));
            return out;
        }
    };
    for ((section, device, layout), time) in prof.entries() {
        let subj = format!("profile entry ({section}, {device}, {layout})");
        if p.section(section).is_none() {
            out.push(Diagnostic::new(&subj, format!("unknown section '{section}'")));
        }
        if a.device(device).is_none() {
            out.push(Diagnostic::new(&subj, format!("unknown device '{device}'")));
        }
        if !(*time > T::zero() && time.is_finite()) {
            out.push(Diagnostic::new(&subj, "time_ns must be positive"));
        }
        match Layout::parse(layout) {
            Err(e) => out.push(Diagnostic::new(&subj, format!("bad layout: {e}"))),
            Ok(l) => {
                if !l.spans(&table) {
                    out.push(Diagnostic::new(
                        &subj,
                        "layout does not span the program fields",
                    ));
                } else {
                    match l.canonicalized(&table) {
                        Ok(c) if c == l => {}
                        Ok(_) => out.push(Diagnostic::new(&subj, "layout is not canonical")),
                        Err(e) => out.push(Diagnostic::new(&subj, format!("bad layout: {e}"))),
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{arch_cpu_gpu, medical_like_program};

    #[test]
    fn well_formed_program_has_no_diagnostics() {
        let p = medical_like_program();
        let a = arch_cpu_gpu();
        assert_eq!(validate_program(&p, &a), Vec::new());
    }

    #[test]
    fn undeclared_field_is_named() {
        let mut p = medical_like_program();
        p.sections[0].groups[0].fields.insert("X".to_string());
        let diags = validate_program(&p, &arch_cpu_gpu());
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("'X'"), "{}", diags[0]);
    }

    #[test]
    fn unknown_allowed_device_is_named() {
        let mut p = medical_like_program();
        p.sections[1].allowed_devices = BTreeSet::from(["tpu".to_string()]);
        let diags = validate_program(&p, &arch_cpu_gpu());
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("'tpu'"), "{}", diags[0]);
    }

    #[test]
    fn validation_is_pure() {
        let mut p = medical_like_program();
        p.record_count = 0;
        p.fields[2].elem_bytes = 0;
        let a = arch_cpu_gpu();
        assert_eq!(validate_program(&p, &a), validate_program(&p, &a));
    }

    #[test]
    fn order_must_be_a_permutation() {
        let mut p = medical_like_program();
        p.order.pop();
        let diags = validate_program(&p, &arch_cpu_gpu());
        assert!(diags.iter().any(|d| d.message.contains("missing from the order")));
    }

    #[test]
    fn duplicate_profile_entries_are_rejected() {
        let entry = ProfileEntry {
            section: "s1".to_string(),
            device: "cpu".to_string(),
            layout: "{A}".to_string(),
            time_ns: 10.0,
        };
        let err = TuningProfile::from_entries(vec![entry.clone(), entry]).unwrap_err();
        assert!(matches!(err, Error::DuplicateProfileEntry { .. }));
    }

    #[test]
    fn profile_lookup_reports_absence() {
        let prof = TuningProfile::<f64>::from_entries(vec![]).unwrap();
        assert_eq!(prof.lookup("s1", "cpu", "{A}"), None);
    }
}
