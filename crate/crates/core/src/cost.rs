//! Analytic execution-cost, remap-cost, and combine-loss estimation with
//! tuning-profile override.
//!
//! The model has two memory regimes. Irregular access pays one full line
//! per touched cluster per access (a gather lands on one record and pulls
//! whichever lines its clusters occupy). Streaming access pays amortized
//! bytes per iteration, `cluster_bytes / line_bytes` lines, multiplied by
//! the device's penalty when a coalescing device streams a multi-field
//! cluster. Measured profile entries take precedence over the model.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::model::{
    AccessPattern, Architecture, Device, FieldTable, Program, Section, TuningProfile,
};
use crate::ods::{merge_sections, ods};
use crate::scalar::Scalar;

/// Where an execution cost came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CostSource {
    Model,
    Profile,
}

/// Execution cost of one section under one layout on one device.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CostBreakdown<T> {
    pub memory_ns: T,
    pub compute_ns: T,
    pub total_ns: T,
    pub source: CostSource,
}

/// Estimate the execution cost of `section` under `layout` on `device`.
///
/// A profile entry keyed by `(section id, device name, canonical layout
/// string)` overrides the model exactly; a missing entry silently falls
/// back to the model.
pub fn exec_cost<T: Scalar>(
    section: &Section<T>,
    layout: &Layout,
    device: &Device<T>,
    program: &Program<T>,
    profile: Option<&TuningProfile<T>>,
) -> Result<CostBreakdown<T>> {
    let table = program.field_table()?;
    exec_cost_with_table(section, layout, device, &table, profile)
}

/// Table-reusing variant for callers evaluating many layouts.
pub(crate) fn exec_cost_with_table<T: Scalar>(
    section: &Section<T>,
    layout: &Layout,
    device: &Device<T>,
    table: &FieldTable,
    profile: Option<&TuningProfile<T>>,
) -> Result<CostBreakdown<T>> {
    if !section.allowed_devices.contains(&device.name) {
        return Err(Error::DeviceNotAllowed {
            section: section.id.clone(),
            device: device.name.clone(),
        });
    }
    if !layout.spans(table) {
        return Err(Error::LayoutSpanMismatch {
            detail: format!(
                "layout covers {} of {} fields",
                layout.field_count(),
                table.len()
            ),
        });
    }

    if let Some(prof) = profile {
        if let Some(measured) =
            prof.lookup(&section.id, &device.name, &layout.canonical_string())
        {
            return Ok(CostBreakdown {
                memory_ns: T::zero(),
                compute_ns: T::zero(),
                total_ns: measured,
                source: CostSource::Profile,
            });
        }
    }

    let trip = T::from_count(section.trip_count);
    let line_bytes = T::from_count(device.line_bytes);
    let cluster_bytes: Vec<u64> = layout
        .clusters()
        .iter()
        .map(|c| table.cluster_bytes(c))
        .collect();

    let mut memory = T::zero();
    let mut compute = T::zero();
    for group in &section.groups {
        let mut lines_per_access = T::zero();
        for (ci, cluster) in layout.clusters().iter().enumerate() {
            if !cluster.iter().any(|f| group.fields.contains(f)) {
                continue;
            }
            let line_cost = match group.pattern {
                AccessPattern::Irregular => T::one(),
                AccessPattern::Streaming => {
                    let amortized = T::from_count(cluster_bytes[ci]) / line_bytes;
                    if device.coalescing && cluster.len() > 1 {
                        amortized * device.stream_cluster_penalty
                    } else {
                        amortized
                    }
                }
            };
            lines_per_access = lines_per_access + line_cost * device.line_time_ns;
        }
        memory = memory + trip * group.freq * lines_per_access;
        compute = compute + trip * group.freq * group.ops / device.throughput_ops_per_ns;
    }

    Ok(CostBreakdown {
        memory_ns: memory,
        compute_ns: compute,
        total_ns: memory + compute,
        source: CostSource::Model,
    })
}

/// What a remap between two adjacent runs moves and costs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemapEstimate<T> {
    /// Moved fields in declaration order.
    pub moved: Vec<String>,
    /// Total bytes relocated (`record_count * elem_bytes` per field).
    pub bytes: u64,
    pub cost_ns: T,
}

/// Estimate a remap at the boundary between two runs.
///
/// On the same device, a field among the `common` set moves iff its
/// cluster signature restricted to `common` differs between the layouts.
/// A device change moves every common field. A remap that moves nothing
/// is free, including the fixed overhead.
pub fn remap_estimate<T: Scalar>(
    from_layout: &Layout,
    from_device: &Device<T>,
    to_layout: &Layout,
    to_device: &Device<T>,
    common: &BTreeSet<String>,
    program: &Program<T>,
    arch: &Architecture<T>,
) -> Result<RemapEstimate<T>> {
    let table = program.field_table()?;

    let signature = |layout: &Layout, field: &str| -> Result<BTreeSet<String>> {
        let cluster = layout
            .cluster_of(field)
            .ok_or_else(|| Error::UnknownField {
                field: field.to_string(),
            })?;
        Ok(cluster
            .iter()
            .filter(|f| common.contains(*f))
            .cloned()
            .collect())
    };

    let mut moved: Vec<String> = Vec::new();
    for field in table.names() {
        if !common.contains(field) {
            continue;
        }
        let moves = if from_device.name != to_device.name {
            true
        } else {
            signature(from_layout, field)? != signature(to_layout, field)?
        };
        if moves {
            moved.push(field.to_string());
        }
    }

    let bytes: u64 = moved
        .iter()
        .map(|f| program.record_count * table.elem_bytes(f).unwrap_or(0))
        .sum();

    let cost_ns = if bytes == 0 {
        T::zero()
    } else if from_device.name == to_device.name {
        T::from_count(bytes) / arch.same_device_remap_bandwidth_bytes_per_ns
            + arch.remap_fixed_overhead_ns
    } else {
        let link = arch
            .link_between(&from_device.name, &to_device.name)
            .ok_or_else(|| Error::MissingLink {
                from: from_device.name.clone(),
                to: to_device.name.clone(),
            })?;
        T::from_count(bytes) / link.bandwidth_bytes_per_ns + link.latency_ns
    };

    Ok(RemapEstimate {
        moved,
        bytes,
        cost_ns,
    })
}

/// Remap cost alone; see [`remap_estimate`].
pub fn remap_cost<T: Scalar>(
    from_layout: &Layout,
    from_device: &Device<T>,
    to_layout: &Layout,
    to_device: &Device<T>,
    common: &BTreeSet<String>,
    program: &Program<T>,
    arch: &Architecture<T>,
) -> Result<T> {
    remap_estimate(
        from_layout,
        from_device,
        to_layout,
        to_device,
        common,
        program,
        arch,
    )
    .map(|r| r.cost_ns)
}

/// Performance lost by running two sections under one shared layout
/// instead of each under its own.
pub fn combine_loss<T: Scalar>(
    first: &Section<T>,
    second: &Section<T>,
    device: &Device<T>,
    program: &Program<T>,
    profile: Option<&TuningProfile<T>>,
) -> Result<T> {
    let merged = merge_sections(&[first, second])?;
    let shared = ods(&merged, device, program)?;
    let own_first = ods(first, device, program)?;
    let own_second = ods(second, device, program)?;

    let combined = exec_cost(first, &shared, device, program, profile)?.total_ns
        + exec_cost(second, &shared, device, program, profile)?.total_ns;
    let separate = exec_cost(first, &own_first, device, program, profile)?.total_ns
        + exec_cost(second, &own_second, device, program, profile)?.total_ns;
    Ok(combined - separate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProfileEntry;
    use crate::testutil::{
        arch_cpu_gpu, device, irregular_group, medical_like_program, program, section,
        streaming_group,
    };

    fn cpu() -> Device<f64> {
        arch_cpu_gpu().device("cpu").unwrap().clone()
    }

    #[test]
    fn doubling_trip_count_doubles_the_total() {
        let p = program(
            &["A", "B"],
            4,
            vec![
                section("s1", 10, vec![irregular_group(&["A", "B"], 1.5, 2.0)]),
                section("s2", 20, vec![irregular_group(&["A", "B"], 1.5, 2.0)]),
            ],
        );
        let l = Layout::singletons(["A", "B"]);
        let d = cpu();
        let once = exec_cost(&p.sections[0], &l, &d, &p, None).unwrap();
        let twice = exec_cost(&p.sections[1], &l, &d, &p, None).unwrap();
        assert_eq!(twice.total_ns, 2.0 * once.total_ns);
        assert_eq!(twice.memory_ns, 2.0 * once.memory_ns);
        assert_eq!(twice.compute_ns, 2.0 * once.compute_ns);
    }

    #[test]
    fn clustering_a_gathered_triple_cuts_memory_three_fold() {
        let p = medical_like_program();
        let d = cpu();
        let t = p.field_table().unwrap();
        let s = section("g", 1000, vec![irregular_group(&["U1", "U2", "U3"], 1.0, 0.0)]);
        let soa = Layout::singletons(t.names().map(str::to_string));
        let grouped = Layout::new(
            vec![
                vec!["V1".into()],
                vec!["V2".into()],
                vec!["V3".into()],
                vec!["U1".into(), "U2".into(), "U3".into()],
                vec!["S".into()],
                vec!["T".into()],
                vec!["interpT".into()],
            ],
            &t,
        )
        .unwrap();
        let scattered = exec_cost(&s, &soa, &d, &p, None).unwrap();
        let packed = exec_cost(&s, &grouped, &d, &p, None).unwrap();
        assert_eq!(scattered.memory_ns, 3000.0 * d.line_time_ns);
        assert_eq!(packed.memory_ns, 1000.0 * d.line_time_ns);
    }

    #[test]
    fn streaming_bytes_are_partition_invariant_without_coalescing() {
        let names: Vec<String> = (0..32).map(|i| format!("f{i:02}")).collect();
        let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let p = program(
            &name_refs,
            4,
            vec![section("s1", 100, vec![streaming_group(&name_refs, 1.0, 0.0)])],
        );
        let t = p.field_table().unwrap();
        let d = device("cpu", 64, 1.0, 10.0, false, 1024);
        let soa = Layout::singletons(names.clone());
        let blocks = Layout::new(
            (0..4)
                .map(|b| (0..8).map(|i| names[b * 8 + i].clone()).collect())
                .collect(),
            &t,
        )
        .unwrap();
        let a = exec_cost(&p.sections[0], &soa, &d, &p, None).unwrap();
        let b = exec_cost(&p.sections[0], &blocks, &d, &p, None).unwrap();
        assert_eq!(a.memory_ns, b.memory_ns);
        assert_eq!(a.memory_ns, 100.0 * (128.0 / 64.0));
    }

    #[test]
    fn identical_layouts_on_one_device_remap_for_free() {
        let p = medical_like_program();
        let a = arch_cpu_gpu();
        let d = cpu();
        let t = p.field_table().unwrap();
        let l = Layout::singletons(t.names().map(str::to_string));
        let common: BTreeSet<String> = t.names().map(str::to_string).collect();
        let r = remap_estimate(&l, &d, &l, &d, &common, &p, &a).unwrap();
        assert!(r.moved.is_empty());
        assert_eq!(r.bytes, 0);
        assert_eq!(r.cost_ns, 0.0);
    }

    #[test]
    fn regrouping_the_vector_triple_moves_exactly_it() {
        let p = medical_like_program();
        let a = arch_cpu_gpu();
        let d = cpu();
        let t = p.field_table().unwrap();
        let aosv = Layout::new(
            vec![
                vec!["V1".into(), "V2".into(), "V3".into()],
                vec!["U1".into()],
                vec!["U2".into()],
                vec!["U3".into()],
                vec!["S".into()],
                vec!["T".into()],
                vec!["interpT".into()],
            ],
            &t,
        )
        .unwrap();
        let soa = Layout::singletons(t.names().map(str::to_string));
        let common: BTreeSet<String> = t.names().map(str::to_string).collect();
        let r = remap_estimate(&aosv, &d, &soa, &d, &common, &p, &a).unwrap();
        assert_eq!(r.moved, vec!["V1", "V2", "V3"]);
        assert_eq!(r.bytes, 3 * p.record_count * 4);
        let expected =
            r.bytes as f64 / a.same_device_remap_bandwidth_bytes_per_ns + a.remap_fixed_overhead_ns;
        assert_eq!(r.cost_ns, expected);
    }

    #[test]
    fn device_change_moves_every_common_field() {
        let p = medical_like_program();
        let a = arch_cpu_gpu();
        let d1 = cpu();
        let d2 = a.device("gpu").unwrap().clone();
        let t = p.field_table().unwrap();
        let l = Layout::singletons(t.names().map(str::to_string));
        let common: BTreeSet<String> =
            ["V1", "V2", "V3"].iter().map(|s| s.to_string()).collect();
        let r = remap_estimate(&l, &d1, &l, &d2, &common, &p, &a).unwrap();
        assert_eq!(r.moved, vec!["V1", "V2", "V3"]);
        assert_eq!(r.bytes, 3 * p.record_count * 4);
        let link = a.link_between("cpu", "gpu").unwrap();
        assert_eq!(
            r.cost_ns,
            r.bytes as f64 / link.bandwidth_bytes_per_ns + link.latency_ns
        );
    }

    #[test]
    fn missing_link_is_rejected() {
        let p = medical_like_program();
        let mut a = arch_cpu_gpu();
        a.links.clear();
        let d1 = a.device("cpu").unwrap().clone();
        let d2 = a.device("gpu").unwrap().clone();
        let t = p.field_table().unwrap();
        let l = Layout::singletons(t.names().map(str::to_string));
        let common: BTreeSet<String> = ["V1".to_string()].into_iter().collect();
        let err = remap_estimate(&l, &d1, &l, &d2, &common, &p, &a).unwrap_err();
        assert!(matches!(err, Error::MissingLink { .. }));
    }

    #[test]
    fn moved_set_is_symmetric_on_one_device() {
        let p = medical_like_program();
        let a = arch_cpu_gpu();
        let d = cpu();
        let t = p.field_table().unwrap();
        let aosu = Layout::new(
            vec![
                vec!["U1".into(), "U2".into(), "U3".into()],
                vec!["V1".into()],
                vec!["V2".into()],
                vec!["V3".into()],
                vec!["S".into()],
                vec!["T".into()],
                vec!["interpT".into()],
            ],
            &t,
        )
        .unwrap();
        let soa = Layout::singletons(t.names().map(str::to_string));
        for common_fields in [
            vec!["U1", "U2"],
            vec!["U1", "V1", "S"],
            vec!["V1", "V2", "V3", "U1", "U2", "U3", "S", "T", "interpT"],
        ] {
            let common: BTreeSet<String> =
                common_fields.iter().map(|s| s.to_string()).collect();
            let fwd = remap_estimate(&aosu, &d, &soa, &d, &common, &p, &a).unwrap();
            let rev = remap_estimate(&soa, &d, &aosu, &d, &common, &p, &a).unwrap();
            assert_eq!(fwd.moved, rev.moved);
            assert_eq!(fwd.cost_ns, rev.cost_ns);
        }
    }

    #[test]
    fn combining_a_section_with_itself_loses_nothing() {
        let p = medical_like_program();
        let d = cpu();
        let s = p.section("s2").unwrap();
        let loss = combine_loss(s, s, &d, &p, None).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn disjoint_sections_combine_for_free() {
        let p = program(
            &["A", "B", "C", "D"],
            4,
            vec![
                section("s1", 16, vec![irregular_group(&["A", "B"], 1.0, 0.0)]),
                section("s2", 16, vec![irregular_group(&["C", "D"], 2.0, 0.0)]),
            ],
        );
        let d = cpu();
        let loss = combine_loss(&p.sections[0], &p.sections[1], &d, &p, None).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn conflicting_preferences_make_combining_costly() {
        // First section gathers {A,B} (wants them interleaved); second
        // streams {A,B} heavily on a coalescing device (wants them split).
        let p = program(
            &["A", "B"],
            4,
            vec![
                section("s1", 1024, vec![irregular_group(&["A", "B"], 4.0, 0.0)]),
                section("s2", 1024, vec![streaming_group(&["A", "B"], 64.0, 0.0)]),
            ],
        );
        let d = device("gpu", 128, 4.0, 64.0, true, 128);
        let loss = combine_loss(&p.sections[0], &p.sections[1], &d, &p, None).unwrap();
        assert!(loss > 0.0, "loss = {loss}");
    }

    #[test]
    fn profile_entry_takes_precedence_exactly() {
        let p = medical_like_program();
        let d = cpu();
        let s = p.section("s1").unwrap();
        let l = crate::ods::ods(s, &d, &p).unwrap();
        let mut prof = TuningProfile::from_entries(vec![ProfileEntry {
            section: "s1".to_string(),
            device: "cpu".to_string(),
            layout: l.canonical_string(),
            time_ns: 123456.75,
        }])
        .unwrap();

        let hit = exec_cost(s, &l, &d, &p, Some(&prof)).unwrap();
        assert_eq!(hit.source, CostSource::Profile);
        assert_eq!(hit.total_ns, 123456.75);
        assert_eq!(hit.memory_ns, 0.0);
        assert_eq!(hit.compute_ns, 0.0);

        prof.remove("s1", "cpu", &l.canonical_string());
        let miss = exec_cost(s, &l, &d, &p, Some(&prof)).unwrap();
        assert_eq!(miss.source, CostSource::Model);
        assert_eq!(miss.total_ns, miss.memory_ns + miss.compute_ns);
    }

    #[test]
    fn non_spanning_layout_is_rejected() {
        let p = medical_like_program();
        let d = cpu();
        let l = Layout::singletons(["V1", "V2"]);
        let err = exec_cost(p.section("s1").unwrap(), &l, &d, &p, None).unwrap_err();
        assert!(matches!(err, Error::LayoutSpanMismatch { .. }));
    }
}
