//! Whole-program layout planning: run-graph construction and shortest-path
//! plan extraction with device mapping.
//!
//! A run is a contiguous chain of sections sharing one device and one
//! layout (the per-section pass applied to the merged chain). The run
//! graph holds a node for every `(begin, end, device)` combination that
//! all member sections allow, an edge between runs that abut in program
//! order weighted by the remap cost plus the successor's execution cost,
//! and synthetic source/sink endpoints. The cost of combining sections is
//! carried implicitly by the merged run's execution cost; the cost of not
//! combining is the remap edge. The cheapest source-to-sink path is the
//! program plan.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::cost::{exec_cost_with_table, remap_estimate};
use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::model::{Architecture, Program, TuningProfile};
use crate::ods::{merge_sections, ods};
use crate::scalar::Scalar;

/// One candidate run: sections `begin..=end` (0-based positions in the
/// program order) executed on `device` under `layout`.
#[derive(Debug, Clone, Serialize)]
pub struct RunNode<T> {
    pub begin: usize,
    pub end: usize,
    pub device: String,
    pub layout: Layout,
    /// Sum of the member sections' execution costs under `layout`,
    /// profile entries taking precedence.
    pub exec_ns: T,
    /// Fields accessed anywhere in the run.
    #[serde(skip)]
    pub fields: BTreeSet<String>,
}

/// Endpoint of a run-graph edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Source,
    Node(usize),
    Sink,
}

/// One run-graph edge; `weight` already includes the head's execution
/// cost so that a path weight is a plan total.
#[derive(Debug, Clone)]
pub struct RunEdge<T> {
    pub from: Endpoint,
    pub to: Endpoint,
    pub weight: T,
    pub remap_ns: T,
    /// Fields moved at this boundary, declaration order.
    pub moved: Vec<String>,
    pub moved_bytes: u64,
}

/// The full search space for one program on one architecture.
#[derive(Debug, Clone)]
pub struct RunGraph<T> {
    section_ids: Vec<String>,
    nodes: Vec<RunNode<T>>,
    edges: Vec<RunEdge<T>>,
}

impl<T: Scalar> RunGraph<T> {
    pub fn section_count(&self) -> usize {
        self.section_ids.len()
    }

    pub fn nodes(&self) -> &[RunNode<T>] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RunEdge<T>] {
        &self.edges
    }

    pub fn section_ids(&self) -> &[String] {
        &self.section_ids
    }

    fn node_label(&self, idx: usize) -> String {
        let n = &self.nodes[idx];
        format!("{}-{}@{}", n.begin + 1, n.end + 1, n.device)
    }

    /// DOT rendering of the graph; edges on `plan`'s path are highlighted.
    pub fn to_dot(&self, plan: Option<&Plan<T>>) -> String {
        let chosen: Vec<(usize, usize, String)> = plan
            .map(|p| {
                p.runs
                    .iter()
                    .map(|r| (r.begin, r.end, r.device.clone()))
                    .collect()
            })
            .unwrap_or_default();
        let on_path = |e: Endpoint| match e {
            Endpoint::Source | Endpoint::Sink => true,
            Endpoint::Node(i) => {
                let n = &self.nodes[i];
                chosen
                    .iter()
                    .any(|(b, en, d)| *b == n.begin && *en == n.end && *d == n.device)
            }
        };
        let consecutive = |from: Endpoint, to: Endpoint| -> bool {
            // Both endpoints on the path and adjacent in it.
            let pos = |e: Endpoint| match e {
                Endpoint::Source => Some(-1i64),
                Endpoint::Sink => Some(chosen.len() as i64),
                Endpoint::Node(i) => {
                    let n = &self.nodes[i];
                    chosen
                        .iter()
                        .position(|(b, en, d)| *b == n.begin && *en == n.end && *d == n.device)
                        .map(|p| p as i64)
                }
            };
            match (pos(from), pos(to)) {
                (Some(a), Some(b)) => b == a + 1,
                _ => false,
            }
        };

        let mut out = String::new();
        out.push_str("digraph run_graph {\n  rankdir=LR;\n  \"SRC\";\n  \"SNK\";\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let sections = self.section_ids[n.begin..=n.end].join(",");
            out.push_str(&format!(
                "  \"{}\" [label=\"{} @ {}\\nexec {:.3}\"];\n",
                self.node_label(i),
                sections,
                n.device,
                n.exec_ns
            ));
        }
        for e in &self.edges {
            let name = |ep: Endpoint| match ep {
                Endpoint::Source => "SRC".to_string(),
                Endpoint::Sink => "SNK".to_string(),
                Endpoint::Node(i) => self.node_label(i),
            };
            let style = if !chosen.is_empty()
                && on_path(e.from)
                && on_path(e.to)
                && consecutive(e.from, e.to)
            {
                " color=red penwidth=2"
            } else {
                ""
            };
            out.push_str(&format!(
                "  \"{}\" -> \"{}\" [label=\"{:.3}\"{}];\n",
                name(e.from),
                name(e.to),
                e.weight,
                style
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// One planned run in the final program plan.
#[derive(Debug, Clone, Serialize)]
pub struct PlanRun<T> {
    pub sections: Vec<String>,
    pub device: String,
    pub layout: Layout,
    pub exec_ns: T,
    #[serde(skip)]
    pub begin: usize,
    #[serde(skip)]
    pub end: usize,
}

/// One relayout/transfer between adjacent runs.
#[derive(Debug, Clone, Serialize)]
pub struct RemapRecord<T> {
    /// 1-based position (in program order) of the last section before
    /// the boundary.
    pub after: usize,
    /// Moved fields in declaration order; empty when nothing moves.
    pub moved: Vec<String>,
    pub bytes: u64,
    pub cost_ns: T,
}

/// The chosen layouts, device mapping, and remap points for a program.
#[derive(Debug, Clone, Serialize)]
pub struct Plan<T> {
    pub runs: Vec<PlanRun<T>>,
    pub remaps: Vec<RemapRecord<T>>,
    pub total_ns: T,
}

/// Build the run graph for a program.
///
/// Nodes exist for every contiguous section range and every device all
/// range members allow. Edge weights fold the head run's execution cost
/// together with the boundary remap cost, so the shortest source-to-sink
/// path weight equals the plan total.
pub fn build_run_graph<T: Scalar>(
    program: &Program<T>,
    arch: &Architecture<T>,
    profile: Option<&TuningProfile<T>>,
) -> Result<RunGraph<T>> {
    let sections = program.sections_in_order()?;
    let k = sections.len();
    if k == 0 {
        return Err(Error::InvalidInput(
            "program has no sections to plan".to_string(),
        ));
    }
    let table = program.field_table()?;
    for s in &sections {
        if !s
            .allowed_devices
            .iter()
            .any(|d| arch.device(d).is_some())
        {
            return Err(Error::NoAllowedDevice {
                section: s.id.clone(),
            });
        }
    }

    // Nodes ordered by (end, begin, device position): topological by end.
    let mut nodes: Vec<RunNode<T>> = Vec::new();
    for end in 0..k {
        for begin in 0..=end {
            let run_sections = &sections[begin..=end];
            for device in &arch.devices {
                if !run_sections
                    .iter()
                    .all(|s| s.allowed_devices.contains(&device.name))
                {
                    continue;
                }
                let merged = merge_sections(run_sections)?;
                let layout = ods(&merged, device, program)?;
                let mut exec = T::zero();
                for s in run_sections {
                    exec = exec
                        + exec_cost_with_table(s, &layout, device, &table, profile)?.total_ns;
                }
                let fields: BTreeSet<String> = run_sections
                    .iter()
                    .flat_map(|s| s.touched_fields().into_iter().map(str::to_string))
                    .collect();
                nodes.push(RunNode {
                    begin,
                    end,
                    device: device.name.clone(),
                    layout,
                    exec_ns: exec,
                    fields,
                });
            }
        }
    }

    let mut edges: Vec<RunEdge<T>> = Vec::new();
    for (i, node) in nodes.iter().enumerate() {
        if node.begin == 0 {
            edges.push(RunEdge {
                from: Endpoint::Source,
                to: Endpoint::Node(i),
                weight: node.exec_ns,
                remap_ns: T::zero(),
                moved: Vec::new(),
                moved_bytes: 0,
            });
        }
        if node.end == k - 1 {
            edges.push(RunEdge {
                from: Endpoint::Node(i),
                to: Endpoint::Sink,
                weight: T::zero(),
                remap_ns: T::zero(),
                moved: Vec::new(),
                moved_bytes: 0,
            });
        }
    }
    for (i, pred) in nodes.iter().enumerate() {
        for (j, succ) in nodes.iter().enumerate() {
            if pred.end + 1 != succ.begin {
                continue;
            }
            let common: BTreeSet<String> =
                pred.fields.intersection(&succ.fields).cloned().collect();
            let from_device = arch.device(&pred.device).unwrap();
            let to_device = arch.device(&succ.device).unwrap();
            let remap = remap_estimate(
                &pred.layout,
                from_device,
                &succ.layout,
                to_device,
                &common,
                program,
                arch,
            )?;
            edges.push(RunEdge {
                from: Endpoint::Node(i),
                to: Endpoint::Node(j),
                weight: remap.cost_ns + succ.exec_ns,
                remap_ns: remap.cost_ns,
                moved: remap.moved,
                moved_bytes: remap.bytes,
            });
        }
    }

    Ok(RunGraph {
        section_ids: program.order.clone(),
        nodes,
        edges,
    })
}

/// Candidate path state kept per node during the shortest-path sweep.
#[derive(Debug, Clone)]
struct PathState<T> {
    cost: T,
    runs: usize,
    /// `(device, begin)` per run from the source; the tie-break key.
    seq: Vec<(String, usize)>,
    parent: Endpoint,
}

fn better<T: Scalar>(candidate: &PathState<T>, incumbent: &Option<PathState<T>>) -> bool {
    let Some(inc) = incumbent else { return true };
    match candidate.cost.partial_cmp(&inc.cost) {
        Some(std::cmp::Ordering::Less) => true,
        Some(std::cmp::Ordering::Greater) => false,
        _ => match candidate.runs.cmp(&inc.runs) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => candidate.seq < inc.seq,
        },
    }
}

/// Minimum-weight source-to-sink path, returned as a plan.
///
/// Nodes are relaxed in topological order (ascending run end). Cost ties
/// break toward fewer runs, then toward the lexicographically smaller
/// `(device name, begin index)` sequence, so repeated executions yield
/// identical plans.
pub fn shortest_plan<T: Scalar>(graph: &RunGraph<T>) -> Result<Plan<T>> {
    let n = graph.nodes.len();
    let mut best: Vec<Option<PathState<T>>> = vec![None; n];
    let mut best_sink: Option<PathState<T>> = None;

    // Incoming edges grouped by head node; node order is already
    // topological (ascending end index).
    let mut incoming: Vec<Vec<&RunEdge<T>>> = vec![Vec::new(); n];
    let mut sink_edges: Vec<&RunEdge<T>> = Vec::new();
    for e in &graph.edges {
        match e.to {
            Endpoint::Node(j) => incoming[j].push(e),
            Endpoint::Sink => sink_edges.push(e),
            Endpoint::Source => {}
        }
    }

    for j in 0..n {
        let head = &graph.nodes[j];
        for e in &incoming[j] {
            let base = match e.from {
                Endpoint::Source => Some(PathState {
                    cost: T::zero(),
                    runs: 0,
                    seq: Vec::new(),
                    parent: Endpoint::Source,
                }),
                Endpoint::Node(i) => best[i].clone(),
                Endpoint::Sink => None,
            };
            let Some(base) = base else { continue };
            let mut seq = base.seq.clone();
            seq.push((head.device.clone(), head.begin));
            let candidate = PathState {
                cost: base.cost + e.weight,
                runs: base.runs + 1,
                seq,
                parent: e.from,
            };
            if better(&candidate, &best[j]) {
                best[j] = Some(candidate);
            }
        }
    }

    for e in &sink_edges {
        let Endpoint::Node(i) = e.from else { continue };
        let Some(base) = &best[i] else { continue };
        let candidate = PathState {
            cost: base.cost + e.weight,
            runs: base.runs,
            seq: base.seq.clone(),
            parent: e.from,
        };
        if better(&candidate, &best_sink) {
            best_sink = Some(candidate);
        }
    }

    let sink = best_sink.ok_or_else(|| {
        Error::InvalidInput("run graph has no source-to-sink path".to_string())
    })?;

    // Recover the node chain from the sink backwards.
    let mut chain: Vec<usize> = Vec::new();
    let mut cursor = sink.parent;
    while let Endpoint::Node(i) = cursor {
        chain.push(i);
        cursor = best[i].as_ref().unwrap().parent;
    }
    chain.reverse();

    let runs: Vec<PlanRun<T>> = chain
        .iter()
        .map(|&i| {
            let n = &graph.nodes[i];
            PlanRun {
                sections: graph.section_ids[n.begin..=n.end].to_vec(),
                device: n.device.clone(),
                layout: n.layout.clone(),
                exec_ns: n.exec_ns,
                begin: n.begin,
                end: n.end,
            }
        })
        .collect();

    let mut remaps = Vec::new();
    for w in chain.windows(2) {
        let edge = graph
            .edges
            .iter()
            .find(|e| e.from == Endpoint::Node(w[0]) && e.to == Endpoint::Node(w[1]))
            .expect("chain edges exist in the graph");
        remaps.push(RemapRecord {
            after: graph.nodes[w[0]].end + 1,
            moved: edge.moved.clone(),
            bytes: edge.moved_bytes,
            cost_ns: edge.remap_ns,
        });
    }

    Ok(Plan {
        runs,
        remaps,
        total_ns: sink.cost,
    })
}

/// Deterministic human-readable rendering of a plan.
pub fn explain_plan<T: Scalar>(plan: &Plan<T>, program: &Program<T>) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "program {}: {} run(s), {} remap(s), total {:.3} ns\n",
        program.name,
        plan.runs.len(),
        plan.remaps.iter().filter(|r| !r.moved.is_empty()).count(),
        plan.total_ns
    ));
    for (i, run) in plan.runs.iter().enumerate() {
        out.push_str(&format!(
            "run {}: sections {} on {}\n  layout: {}\n  exec:   {:.3} ns\n",
            i + 1,
            run.sections.join(","),
            run.device,
            run.layout.canonical_string(),
            run.exec_ns
        ));
        if i < plan.remaps.len() {
            let r = &plan.remaps[i];
            if r.moved.is_empty() {
                out.push_str(&format!(
                    "remap after section {}: moved none (0 bytes), cost {:.3} ns\n",
                    r.after, r.cost_ns
                ));
            } else {
                out.push_str(&format!(
                    "remap after section {}: moved {} ({} bytes), cost {:.3} ns\n",
                    r.after,
                    r.moved.join(","),
                    r.bytes,
                    r.cost_ns
                ));
            }
        }
    }
    out.push_str(&format!("total: {:.3} ns\n", plan.total_ns));
    out
}
