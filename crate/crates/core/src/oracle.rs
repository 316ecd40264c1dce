//! Ground-truth machinery: exhaustive layout and plan search plus a
//! set-associative LRU cache simulator for validating the analytic model.
//!
//! The exhaustive searches explore exactly the spaces the production
//! passes search: set partitions of a section's fields for the greedy
//! pass, contiguous-run partitions times device choices for the planner.
//! Agreement checks are therefore apples to apples.

use std::collections::BTreeSet;

use rand_core::{RngCore, SeedableRng};

use crate::cost::exec_cost_with_table;
use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::model::{AccessPattern, Architecture, Device, Program, Section, TuningProfile};
use crate::ods::{merge_sections, ods};
use crate::pdl::{Plan, PlanRun, RemapRecord};
use crate::scalar::Scalar;

/// Largest field set `enumerate_layouts` accepts (Bell numbers explode).
pub const MAX_ENUM_FIELDS: usize = 12;
/// Largest section count `brute_force_plan` accepts.
pub const MAX_PLAN_SECTIONS: usize = 6;

/// Stream of every capacity-feasible set partition of a field set.
///
/// Fields must be given in declaration order; emitted layouts are then
/// canonical by construction. Each partition whose clusters all fit the
/// byte capacity is produced exactly once.
pub fn enumerate_layouts(
    fields: &[(String, u64)],
    capacity_bytes: u64,
) -> Result<LayoutEnumeration> {
    if fields.len() > MAX_ENUM_FIELDS {
        return Err(Error::TooManyFields {
            count: fields.len(),
            limit: MAX_ENUM_FIELDS,
        });
    }
    Ok(LayoutEnumeration {
        names: fields.iter().map(|(n, _)| n.clone()).collect(),
        bytes: fields.iter().map(|(_, b)| *b).collect(),
        capacity_bytes,
        state: Some(vec![0; fields.len()]),
    })
}

/// Iterator over restricted-growth strings, filtered by capacity.
#[derive(Debug)]
pub struct LayoutEnumeration {
    names: Vec<String>,
    bytes: Vec<u64>,
    capacity_bytes: u64,
    state: Option<Vec<usize>>,
}

impl LayoutEnumeration {
    fn feasible(&self, labels: &[usize]) -> bool {
        let mut sums = vec![0u64; labels.len() + 1];
        for (i, &l) in labels.iter().enumerate() {
            sums[l] += self.bytes[i];
            if sums[l] > self.capacity_bytes {
                return false;
            }
        }
        true
    }

    fn layout_of(&self, labels: &[usize]) -> Layout {
        let block_count = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut clusters: Vec<Vec<String>> = vec![Vec::new(); block_count];
        for (i, &l) in labels.iter().enumerate() {
            clusters[l].push(self.names[i].clone());
        }
        Layout::from_canonical_parts(clusters)
    }

    /// Advance to the successor restricted-growth string, if any.
    fn advance(labels: &mut [usize]) -> bool {
        let n = labels.len();
        for i in (1..n).rev() {
            let max_prefix = labels[..i].iter().copied().max().unwrap_or(0);
            if labels[i] <= max_prefix {
                labels[i] += 1;
                for l in labels[i + 1..].iter_mut() {
                    *l = 0;
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for LayoutEnumeration {
    type Item = Layout;

    fn next(&mut self) -> Option<Layout> {
        loop {
            let mut labels = self.state.take()?;
            if labels.is_empty() {
                return Some(Layout::from_canonical_parts(Vec::new()));
            }
            let candidate = if self.feasible(&labels) {
                Some(self.layout_of(&labels))
            } else {
                None
            };
            if Self::advance(&mut labels) {
                self.state = Some(labels);
            }
            if candidate.is_some() {
                return candidate;
            }
        }
    }
}

/// Exhaustive optimum of the per-section layout problem.
///
/// Minimizes the model-branch execution cost over every capacity-feasible
/// partition of the section's fields (untouched program fields ride along
/// as singletons, exactly as in the greedy pass). Cost ties break toward
/// the smaller canonical layout string.
pub fn brute_force_ods<T: Scalar>(
    section: &Section<T>,
    device: &Device<T>,
    program: &Program<T>,
) -> Result<(Layout, T)> {
    let table = program.field_table()?;
    let touched = section.touched_fields();
    let touched_fields: Vec<(String, u64)> = table
        .names()
        .filter(|n| touched.contains(*n))
        .map(|n| (n.to_string(), table.elem_bytes(n).unwrap()))
        .collect();

    for (name, bytes) in &touched_fields {
        if *bytes > device.cluster_capacity_bytes {
            return Err(Error::FieldExceedsCapacity {
                field: name.clone(),
                elem_bytes: *bytes,
                capacity: device.cluster_capacity_bytes,
            });
        }
    }
    let untouched: Vec<Vec<String>> = table
        .names()
        .filter(|n| !touched.contains(*n))
        .map(|n| vec![n.to_string()])
        .collect();

    let mut best: Option<(Layout, T, String)> = None;
    for partial in enumerate_layouts(&touched_fields, device.cluster_capacity_bytes)? {
        let mut clusters = partial.clusters().to_vec();
        clusters.extend(untouched.iter().cloned());
        let layout = Layout::new(clusters, &table)?;
        let cost = exec_cost_with_table(section, &layout, device, &table, None)?.total_ns;
        let key = layout.canonical_string();
        let replace = match &best {
            None => true,
            Some((_, c, k)) => cost < *c || (cost == *c && key < *k),
        };
        if replace {
            best = Some((layout, cost, key));
        }
    }
    best.map(|(l, c, _)| (l, c))
        .ok_or_else(|| Error::InvalidInput("no feasible layout exists".to_string()))
}

/// Exhaustive optimum of the whole-program planning problem.
///
/// Enumerates all `2^(k-1)` contiguous-run partitions crossed with every
/// per-run device choice, pricing runs and remaps with the same machinery
/// the run graph uses. Ties break exactly as in the shortest-path pass.
pub fn brute_force_plan<T: Scalar>(
    program: &Program<T>,
    arch: &Architecture<T>,
    profile: Option<&TuningProfile<T>>,
) -> Result<(Plan<T>, T)> {
    let sections = program.sections_in_order()?;
    let k = sections.len();
    if k == 0 {
        return Err(Error::InvalidInput(
            "program has no sections to plan".to_string(),
        ));
    }
    if k > MAX_PLAN_SECTIONS {
        return Err(Error::TooManySections {
            count: k,
            limit: MAX_PLAN_SECTIONS,
        });
    }
    let table = program.field_table()?;

    struct Best<T> {
        plan: Plan<T>,
        runs: usize,
        seq: Vec<(String, usize)>,
    }
    let mut best: Option<Best<T>> = None;
    for mask in 0..(1u32 << (k - 1)) {
        // Decode the boundary mask into contiguous runs.
        let mut runs: Vec<(usize, usize)> = Vec::new();
        let mut begin = 0usize;
        for boundary in 0..k - 1 {
            if mask & (1 << boundary) != 0 {
                runs.push((begin, boundary));
                begin = boundary + 1;
            }
        }
        runs.push((begin, k - 1));

        // Allowed devices per run, in architecture order.
        let mut choices: Vec<Vec<&Device<T>>> = Vec::with_capacity(runs.len());
        for &(b, e) in &runs {
            let allowed: Vec<&Device<T>> = arch
                .devices
                .iter()
                .filter(|d| sections[b..=e].iter().all(|s| s.allowed_devices.contains(&d.name)))
                .collect();
            choices.push(allowed);
        }
        if choices.iter().any(Vec::is_empty) {
            continue;
        }

        // Odometer over device choices.
        let mut pick = vec![0usize; runs.len()];
        loop {
            let devices: Vec<&Device<T>> = pick
                .iter()
                .zip(&choices)
                .map(|(&i, c)| c[i])
                .collect();
            let candidate =
                price_assignment(program, arch, profile, &table, &sections, &runs, &devices)?;
            let seq: Vec<(String, usize)> = candidate
                .runs
                .iter()
                .map(|r| (r.device.clone(), r.begin))
                .collect();
            let replace = match &best {
                None => true,
                Some(incumbent) => match candidate.total_ns.partial_cmp(&incumbent.plan.total_ns)
                {
                    Some(std::cmp::Ordering::Less) => true,
                    Some(std::cmp::Ordering::Greater) => false,
                    _ => match candidate.runs.len().cmp(&incumbent.runs) {
                        std::cmp::Ordering::Less => true,
                        std::cmp::Ordering::Greater => false,
                        std::cmp::Ordering::Equal => seq < incumbent.seq,
                    },
                },
            };
            if replace {
                let runs = candidate.runs.len();
                best = Some(Best {
                    plan: candidate,
                    runs,
                    seq,
                });
            }

            // Advance the odometer.
            let mut digit = 0usize;
            loop {
                if digit == pick.len() {
                    break;
                }
                pick[digit] += 1;
                if pick[digit] < choices[digit].len() {
                    break;
                }
                pick[digit] = 0;
                digit += 1;
            }
            if digit == pick.len() {
                break;
            }
        }
    }

    let best = best.ok_or_else(|| {
        Error::InvalidInput("no feasible device assignment exists".to_string())
    })?;
    let total = best.plan.total_ns;
    Ok((best.plan, total))
}

/// Price one (partition, device assignment): the accumulation mirrors the
/// shortest-path sweep term for term.
fn price_assignment<T: Scalar>(
    program: &Program<T>,
    arch: &Architecture<T>,
    profile: Option<&TuningProfile<T>>,
    table: &crate::model::FieldTable,
    sections: &[&Section<T>],
    runs: &[(usize, usize)],
    devices: &[&Device<T>],
) -> Result<Plan<T>> {
    let mut plan_runs: Vec<PlanRun<T>> = Vec::with_capacity(runs.len());
    let mut fields_per_run: Vec<BTreeSet<String>> = Vec::with_capacity(runs.len());
    for (&(b, e), device) in runs.iter().zip(devices) {
        let members = &sections[b..=e];
        let merged = merge_sections(members)?;
        let layout = ods(&merged, device, program)?;
        let mut exec = T::zero();
        for s in members {
            exec = exec + exec_cost_with_table(s, &layout, device, table, profile)?.total_ns;
        }
        fields_per_run.push(
            members
                .iter()
                .flat_map(|s| s.touched_fields().into_iter().map(str::to_string))
                .collect(),
        );
        plan_runs.push(PlanRun {
            sections: program.order[b..=e].to_vec(),
            device: device.name.clone(),
            layout,
            exec_ns: exec,
            begin: b,
            end: e,
        });
    }

    let mut remaps: Vec<RemapRecord<T>> = Vec::with_capacity(runs.len() - 1);
    let mut total = plan_runs[0].exec_ns;
    for i in 1..plan_runs.len() {
        let common: BTreeSet<String> = fields_per_run[i - 1]
            .intersection(&fields_per_run[i])
            .cloned()
            .collect();
        let estimate = crate::cost::remap_estimate(
            &plan_runs[i - 1].layout,
            devices[i - 1],
            &plan_runs[i].layout,
            devices[i],
            &common,
            program,
            arch,
        )?;
        total = total + (estimate.cost_ns + plan_runs[i].exec_ns);
        remaps.push(RemapRecord {
            after: plan_runs[i - 1].end + 1,
            moved: estimate.moved,
            bytes: estimate.bytes,
            cost_ns: estimate.cost_ns,
        });
    }

    Ok(Plan {
        runs: plan_runs,
        remaps,
        total_ns: total,
    })
}

/// Geometry of the simulated cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheConfig {
    pub line_bytes: u64,
    pub num_sets: u64,
    pub ways: usize,
}

impl CacheConfig {
    pub fn new(line_bytes: u64, num_sets: u64, ways: usize) -> Result<Self> {
        if !line_bytes.is_power_of_two() || !num_sets.is_power_of_two() || ways == 0 {
            return Err(Error::InvalidInput(format!(
                "cache geometry must use power-of-two line ({line_bytes}) and sets ({num_sets}) with at least one way ({ways})"
            )));
        }
        Ok(Self {
            line_bytes,
            num_sets,
            ways,
        })
    }

    /// Geometry from a total capacity.
    pub fn with_capacity(total_bytes: u64, line_bytes: u64, ways: usize) -> Result<Self> {
        if ways == 0 || line_bytes == 0 || !total_bytes.is_multiple_of(line_bytes * ways as u64) {
            return Err(Error::InvalidInput(format!(
                "cache capacity {total_bytes} is not divisible into {ways}-way sets of {line_bytes}-byte lines"
            )));
        }
        Self::new(line_bytes, total_bytes / (line_bytes * ways as u64), ways)
    }

    pub fn total_bytes(&self) -> u64 {
        self.line_bytes * self.num_sets * self.ways as u64
    }
}

/// Set-associative cache with true LRU replacement.
struct CacheSim {
    cfg: CacheConfig,
    /// `sets[set][way] = (tag, last_used)`; `u64::MAX` tags are invalid.
    sets: Vec<Vec<(u64, u64)>>,
    clock: u64,
    misses: u64,
}

impl CacheSim {
    fn new(cfg: CacheConfig) -> Self {
        Self {
            cfg,
            sets: vec![vec![(u64::MAX, 0); cfg.ways]; cfg.num_sets as usize],
            clock: 0,
            misses: 0,
        }
    }

    fn access(&mut self, addr: u64) {
        self.clock += 1;
        let line = addr / self.cfg.line_bytes;
        let set = (line % self.cfg.num_sets) as usize;
        let tag = line / self.cfg.num_sets;
        let ways = &mut self.sets[set];
        if let Some(hit) = ways.iter_mut().find(|(t, _)| *t == tag) {
            hit.1 = self.clock;
            return;
        }
        self.misses += 1;
        let victim = ways
            .iter_mut()
            .min_by_key(|(t, used)| if *t == u64::MAX { 0 } else { *used + 1 })
            .expect("at least one way");
        *victim = (tag, self.clock);
    }
}

/// Deterministic cache replay of one section under a layout.
///
/// Clusters occupy disjoint base regions (each aligned up to the line
/// size, in cluster order). The element address of field `f` at record
/// index `i` is `base(cluster) + i * bytes(cluster) + offset(f)`. Each
/// iteration `t < iters` touches every group once, every field of the
/// group once: streaming groups access record `t % record_count`;
/// irregular groups access one pseudorandom record shared by all fields
/// of the group in that iteration.
///
/// Reproducibility: the generator is ChaCha8 seeded with
/// `seed_from_u64(seed)`. Draws happen lazily in replay order (iteration
/// major, then group order); each irregular group consumes exactly one
/// `next_u64` per iteration, and the record index is that value modulo
/// `record_count`. Streaming groups consume no draws.
pub fn simulate_misses<T: Scalar>(
    section: &Section<T>,
    layout: &Layout,
    cfg: CacheConfig,
    program: &Program<T>,
    iters: u64,
    seed: u64,
) -> Result<u64> {
    if iters == 0 {
        return Err(Error::InvalidInput("iters must be at least 1".to_string()));
    }
    let table = program.field_table()?;
    if !layout.spans(&table) {
        return Err(Error::LayoutSpanMismatch {
            detail: format!(
                "layout covers {} of {} fields",
                layout.field_count(),
                table.len()
            ),
        });
    }
    for g in &section.groups {
        for f in &g.fields {
            if layout.cluster_index_of(f).is_none() {
                return Err(Error::UnknownField { field: f.clone() });
            }
        }
    }

    // Base address and per-field offset of every cluster.
    let align_up = |v: u64, a: u64| v.div_ceil(a) * a;
    let mut bases: Vec<u64> = Vec::with_capacity(layout.clusters().len());
    let mut cluster_sizes: Vec<u64> = Vec::with_capacity(layout.clusters().len());
    let mut offsets: std::collections::BTreeMap<&str, (usize, u64)> = Default::default();
    let mut cursor = 0u64;
    for (ci, cluster) in layout.clusters().iter().enumerate() {
        bases.push(cursor);
        let mut within = 0u64;
        for f in cluster {
            offsets.insert(f.as_str(), (ci, within));
            within += table.elem_bytes(f).unwrap_or(0);
        }
        cluster_sizes.push(within);
        cursor = align_up(cursor + program.record_count * within, cfg.line_bytes);
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut cache = CacheSim::new(cfg);
    let record_count = program.record_count.max(1);

    for t in 0..iters {
        for group in &section.groups {
            let index = match group.pattern {
                AccessPattern::Streaming => t % record_count,
                AccessPattern::Irregular => rng.next_u64() % record_count,
            };
            for f in &group.fields {
                let (ci, within) = offsets[f.as_str()];
                let addr = bases[ci] + index * cluster_sizes[ci] + within;
                cache.access(addr);
            }
        }
    }
    Ok(cache.misses)
}

/// Seeded generator reused by randomized oracle comparisons.
pub fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{
        arch_cpu_gpu, device, irregular_group, program, section, streaming_group,
    };

    fn pairs(names: &[&str], bytes: u64) -> Vec<(String, u64)> {
        names.iter().map(|n| (n.to_string(), bytes)).collect()
    }

    #[test]
    fn one_field_has_one_partition() {
        let layouts: Vec<Layout> = enumerate_layouts(&pairs(&["a"], 4), 64).unwrap().collect();
        assert_eq!(layouts.len(), 1);
        assert_eq!(layouts[0].canonical_string(), "{a}");
    }

    #[test]
    fn three_fields_have_five_partitions() {
        let layouts: Vec<Layout> = enumerate_layouts(&pairs(&["a", "b", "c"], 4), u64::MAX / 2)
            .unwrap()
            .collect();
        assert_eq!(layouts.len(), 5);
    }

    #[test]
    fn capacity_prunes_oversized_blocks() {
        // Partitions of 4 fields with at most 2 per cluster: 15 - 5 = 10.
        let layouts: Vec<Layout> = enumerate_layouts(&pairs(&["a", "b", "c", "d"], 4), 8)
            .unwrap()
            .collect();
        assert_eq!(layouts.len(), 10);
        for l in &layouts {
            assert!(l.clusters().iter().all(|c| c.len() <= 2));
        }
    }

    #[test]
    fn enumeration_emits_no_duplicates() {
        let layouts: Vec<String> = enumerate_layouts(&pairs(&["a", "b", "c", "d", "e"], 4), 12)
            .unwrap()
            .map(|l| l.canonical_string())
            .collect();
        let unique: std::collections::BTreeSet<&String> = layouts.iter().collect();
        assert_eq!(unique.len(), layouts.len());
    }

    #[test]
    fn enumeration_guard_rejects_large_sets() {
        let names: Vec<String> = (0..13).map(|i| format!("f{i}")).collect();
        let fields: Vec<(String, u64)> = names.into_iter().map(|n| (n, 4)).collect();
        let err = enumerate_layouts(&fields, 64).unwrap_err();
        assert!(matches!(err, Error::TooManyFields { count: 13, limit: 12 }));
    }

    #[test]
    fn gathered_group_wants_one_cluster() {
        let p = program(
            &["A", "B", "C"],
            4,
            vec![section("s1", 128, vec![irregular_group(&["A", "B", "C"], 1.0, 0.0)])],
        );
        let d = device("cpu", 64, 1.0, 10.0, false, 64);
        let (layout, _) = brute_force_ods(&p.sections[0], &d, &p).unwrap();
        assert_eq!(layout.canonical_string(), "{A,B,C}");
    }

    #[test]
    fn coalesced_streaming_wants_singletons() {
        let p = program(
            &["A", "B", "C"],
            4,
            vec![section("s1", 128, vec![streaming_group(&["A", "B", "C"], 1.0, 0.0)])],
        );
        let d = device("gpu", 128, 4.0, 64.0, true, 128);
        let (layout, _) = brute_force_ods(&p.sections[0], &d, &p).unwrap();
        assert_eq!(layout.canonical_string(), "{A}|{B}|{C}");
    }

    #[test]
    fn single_field_oracle_is_the_unique_layout() {
        let p = program(
            &["A"],
            4,
            vec![section("s1", 16, vec![streaming_group(&["A"], 1.0, 0.0)])],
        );
        let d = device("cpu", 64, 1.0, 10.0, false, 64);
        let (layout, _) = brute_force_ods(&p.sections[0], &d, &p).unwrap();
        assert_eq!(layout.canonical_string(), "{A}");
    }

    #[test]
    fn plan_oracle_matches_shortest_path_for_one_section() {
        let p = program(
            &["A", "B"],
            4,
            vec![section("s1", 64, vec![irregular_group(&["A", "B"], 1.0, 0.0)])],
        );
        let a = arch_cpu_gpu();
        let (oracle_plan, oracle_total) = brute_force_plan(&p, &a, None).unwrap();
        let fast = crate::pdl::shortest_plan(&crate::pdl::build_run_graph(&p, &a, None).unwrap())
            .unwrap();
        assert_eq!(oracle_total, fast.total_ns);
        assert_eq!(oracle_plan.runs[0].device, fast.runs[0].device);
    }

    #[test]
    fn plan_guard_rejects_long_programs() {
        let names = ["A"];
        let sections: Vec<Section<f64>> = (0..7)
            .map(|i| {
                section(
                    &format!("s{i}"),
                    8,
                    vec![irregular_group(&names, 1.0, 0.0)],
                )
            })
            .collect();
        let p = program(&names, 4, sections);
        let err = brute_force_plan(&p, &arch_cpu_gpu(), None).unwrap_err();
        assert!(matches!(err, Error::TooManySections { count: 7, limit: 6 }));
    }

    #[test]
    fn cold_cache_single_access_misses_once() {
        let p = program(
            &["A"],
            4,
            vec![section("s1", 1, vec![streaming_group(&["A"], 1.0, 0.0)])],
        );
        let layout = Layout::singletons(["A"]);
        let cfg = CacheConfig::new(64, 64, 8).unwrap();
        let misses = simulate_misses(&p.sections[0], &layout, cfg, &p, 1, 0).unwrap();
        assert_eq!(misses, 1);
    }

    #[test]
    fn same_seed_same_misses() {
        let mut p = program(
            &["A", "B", "C"],
            4,
            vec![section("s1", 1, vec![irregular_group(&["A", "B", "C"], 1.0, 0.0)])],
        );
        p.record_count = 1 << 16;
        let t = p.field_table().unwrap();
        let layout = Layout::new(
            vec![vec!["A".into(), "B".into(), "C".into()]],
            &t,
        )
        .unwrap();
        let cfg = CacheConfig::with_capacity(32 * 1024, 64, 8).unwrap();
        let a = simulate_misses(&p.sections[0], &layout, cfg, &p, 2048, 7).unwrap();
        let b = simulate_misses(&p.sections[0], &layout, cfg, &p, 2048, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn clustered_gather_misses_far_less_than_scattered() {
        let p = program(
            &["A", "B", "C"],
            4,
            vec![section("s1", 1, vec![irregular_group(&["A", "B", "C"], 1.0, 0.0)])],
        );
        let t = p.field_table().unwrap();
        let aos = Layout::new(vec![vec!["A".into(), "B".into(), "C".into()]], &t).unwrap();
        let soa = Layout::singletons(["A", "B", "C"]);
        let cfg = CacheConfig::with_capacity(32 * 1024, 64, 8).unwrap();
        let m_aos = simulate_misses(&p.sections[0], &aos, cfg, &p, 4096, 1).unwrap();
        let m_soa = simulate_misses(&p.sections[0], &soa, cfg, &p, 4096, 1).unwrap();
        let ratio = m_soa as f64 / m_aos as f64;
        assert!(ratio > 2.5, "ratio = {ratio} ({m_soa} vs {m_aos})");
    }

    #[test]
    fn model_and_simulator_agree_on_clear_cut_pairs() {
        // Wherever the model says one layout is clearly cheaper (< 0.8x)
        // for a single-group section, the simulator must order the
        // layouts the same way.
        let p = program(
            &["A", "B", "C"],
            4,
            vec![
                section("g3", 4096, vec![irregular_group(&["A", "B", "C"], 1.0, 0.0)]),
                section("g2", 4096, vec![irregular_group(&["A", "B"], 1.0, 0.0)]),
            ],
        );
        let t = p.field_table().unwrap();
        let d = device("cpu", 64, 1.0, 10.0, false, 64);
        let cfg = CacheConfig::with_capacity(32 * 1024, 64, 8).unwrap();
        let soa = Layout::singletons(["A", "B", "C"]);
        let packed3 = Layout::new(vec![vec!["A".into(), "B".into(), "C".into()]], &t).unwrap();
        let packed2 = Layout::new(
            vec![vec!["A".into(), "B".into()], vec!["C".into()]],
            &t,
        )
        .unwrap();

        for (sec, cheap, dear) in [
            (&p.sections[0], &packed3, &soa),
            (&p.sections[1], &packed2, &soa),
        ] {
            let model_cheap = crate::cost::exec_cost(sec, cheap, &d, &p, None).unwrap().total_ns;
            let model_dear = crate::cost::exec_cost(sec, dear, &d, &p, None).unwrap().total_ns;
            assert!(model_cheap < 0.8 * model_dear);
            let sim_cheap = simulate_misses(sec, cheap, cfg, &p, 4096, 3).unwrap();
            let sim_dear = simulate_misses(sec, dear, cfg, &p, 4096, 3).unwrap();
            assert!(
                sim_cheap < sim_dear,
                "simulator disagrees: {sim_cheap} vs {sim_dear}"
            );
        }
    }

    #[test]
    fn bad_cache_geometry_is_rejected() {
        assert!(CacheConfig::new(48, 64, 8).is_err());
        assert!(CacheConfig::new(64, 48, 8).is_err());
        assert!(CacheConfig::new(64, 64, 0).is_err());
        assert!(CacheConfig::with_capacity(1000, 64, 8).is_err());
    }
}
