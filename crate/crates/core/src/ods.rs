//! Per-section layout selection: affinity graph construction and greedy
//! capacity-bounded clustering.
//!
//! Fields co-accessed by the same group attract each other; the greedy
//! pass merges the strongest positive attractions first, Kruskal style,
//! while a merged cluster still fits the device's cluster capacity.
//! Streaming co-access on a coalescing device repels instead of
//! attracting, which drives such sections toward one-field arrays.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::model::{AccessPattern, Device, FieldTable, Program, Section};
use crate::scalar::Scalar;

/// Weighted undirected graph over the fields of one section.
///
/// Edge weights are symmetric by construction (unordered keys); an
/// absent pair reads as weight zero. Weights may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph<T> {
    /// Node names with their declaration index and element size, in
    /// declaration order.
    nodes: Vec<AffinityNode>,
    /// Accumulated weights keyed by local node index pairs `(i, j)`, i < j.
    weights: BTreeMap<(usize, usize), T>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct AffinityNode {
    name: String,
    decl_index: usize,
    elem_bytes: u64,
}

/// One undirected edge reported in deterministic tie-break order.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityEdge<T> {
    /// Endpoint with the smaller declaration index.
    pub a: String,
    /// Endpoint with the larger declaration index.
    pub b: String,
    pub weight: T,
}

impl<T: Scalar> AffinityGraph<T> {
    /// Node names in declaration order.
    pub fn node_names(&self) -> Vec<&str> {
        self.nodes.iter().map(|n| n.name.as_str()).collect()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.weights.len()
    }

    /// Weight between two fields; zero when absent or unknown.
    pub fn weight(&self, f: &str, g: &str) -> T {
        let idx = |name: &str| self.nodes.iter().position(|n| n.name == name);
        match (idx(f), idx(g)) {
            (Some(i), Some(j)) if i != j => {
                let key = (i.min(j), i.max(j));
                self.weights.get(&key).copied().unwrap_or_else(T::zero)
            }
            _ => T::zero(),
        }
    }

    /// Edges sorted by weight descending, then by the declaration index
    /// pair ascending; the order the greedy pass consumes them in.
    pub fn edges_in_tiebreak_order(&self) -> Vec<AffinityEdge<T>> {
        self.edge_indices_in_tiebreak_order()
            .into_iter()
            .map(|(i, j, w)| AffinityEdge {
                a: self.nodes[i].name.clone(),
                b: self.nodes[j].name.clone(),
                weight: w,
            })
            .collect()
    }

    fn edge_indices_in_tiebreak_order(&self) -> Vec<(usize, usize, T)> {
        let mut edges: Vec<(usize, usize, T)> = self
            .weights
            .iter()
            .map(|(&(i, j), &w)| (i, j, w))
            .collect();
        edges.sort_by(|x, y| {
            y.2.partial_cmp(&x.2)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| x.0.cmp(&y.0))
                .then_with(|| x.1.cmp(&y.1))
        });
        edges
    }

    /// DOT rendering with nodes in declaration order and edges in
    /// tie-break order.
    pub fn to_dot(&self, title: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("graph \"{title}\" {{\n"));
        for n in &self.nodes {
            out.push_str(&format!("  \"{}\";\n", n.name));
        }
        for e in self.edges_in_tiebreak_order() {
            out.push_str(&format!(
                "  \"{}\" -- \"{}\" [label=\"{}\"];\n",
                e.a, e.b, e.weight
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// Build the affinity graph of one section for one device.
///
/// For every unordered field pair, the weight is the sum over groups
/// containing both fields of `trip_count * freq * w`, where irregular
/// access contributes `w = +1` on any device and streaming access
/// contributes `+1` on a non-coalescing device and `-1` on a coalescing
/// one.
pub fn build_affinity_graph<T: Scalar>(
    section: &Section<T>,
    device: &Device<T>,
    table: &FieldTable,
) -> Result<AffinityGraph<T>> {
    if !section.allowed_devices.contains(&device.name) {
        return Err(Error::DeviceNotAllowed {
            section: section.id.clone(),
            device: device.name.clone(),
        });
    }

    let touched = section.touched_fields();
    let mut nodes = Vec::new();
    let mut local = BTreeMap::new();
    for f in table.names() {
        if touched.contains(f) {
            local.insert(f.to_string(), nodes.len());
            nodes.push(AffinityNode {
                name: f.to_string(),
                decl_index: table.decl_index(f).unwrap(),
                elem_bytes: table.elem_bytes(f).unwrap(),
            });
        }
    }
    for f in &touched {
        if !table.contains(f) {
            return Err(Error::UnknownField {
                field: f.to_string(),
            });
        }
    }

    let trip = T::from_count(section.trip_count);
    let mut weights: BTreeMap<(usize, usize), T> = BTreeMap::new();
    for group in &section.groups {
        let sign = match group.pattern {
            AccessPattern::Irregular => T::one(),
            AccessPattern::Streaming if !device.coalescing => T::one(),
            AccessPattern::Streaming => -T::one(),
        };
        let contribution = trip * group.freq * sign;
        let members: Vec<usize> = group.fields.iter().map(|f| local[f]).collect();
        for (k, &i) in members.iter().enumerate() {
            for &j in members.iter().skip(k + 1) {
                let key = (i.min(j), i.max(j));
                let w = weights.entry(key).or_insert_with(T::zero);
                *w = *w + contribution;
            }
        }
    }

    Ok(AffinityGraph { nodes, weights })
}

/// Greedy capacity-bounded clustering of an affinity graph.
///
/// Starts from singletons and walks the edges in tie-break order,
/// merging the endpoint clusters of each strictly positive edge whenever
/// they are distinct and the merged byte size still fits the device's
/// cluster capacity. Deterministic for fixed input.
pub fn greedy_cluster<T: Scalar>(graph: &AffinityGraph<T>, device: &Device<T>) -> Result<Layout> {
    let capacity = device.cluster_capacity_bytes;
    for n in &graph.nodes {
        if n.elem_bytes > capacity {
            return Err(Error::FieldExceedsCapacity {
                field: n.name.clone(),
                elem_bytes: n.elem_bytes,
                capacity,
            });
        }
    }

    let mut dsu = Dsu::new(graph.nodes.iter().map(|n| n.elem_bytes).collect());
    for (i, j, w) in graph.edge_indices_in_tiebreak_order() {
        if w > T::zero() {
            dsu.try_union(i, j, capacity);
        }
    }

    // Collect clusters; members ascend in node order (= declaration
    // order) and clusters are keyed by their first member, so the result
    // is canonical.
    let mut clusters: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for i in 0..graph.nodes.len() {
        let root = dsu.find(i);
        clusters
            .entry(dsu.leader(root))
            .or_default()
            .push(graph.nodes[i].name.clone());
    }
    Ok(Layout::from_canonical_parts(
        clusters.into_values().collect(),
    ))
}

/// Union-find over node indices tracking cluster byte sizes and the
/// minimum member index of each set.
struct Dsu {
    parent: Vec<usize>,
    bytes: Vec<u64>,
    min_member: Vec<usize>,
}

impl Dsu {
    fn new(bytes: Vec<u64>) -> Self {
        let n = bytes.len();
        Self {
            parent: (0..n).collect(),
            bytes,
            min_member: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn leader(&self, root: usize) -> usize {
        self.min_member[root]
    }

    fn try_union(&mut self, a: usize, b: usize, capacity: u64) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb || self.bytes[ra] + self.bytes[rb] > capacity {
            return false;
        }
        self.parent[rb] = ra;
        self.bytes[ra] += self.bytes[rb];
        self.min_member[ra] = self.min_member[ra].min(self.min_member[rb]);
        true
    }
}

/// Per-section layout for one device, extended to every program field.
///
/// Fields the section never touches are carried as singleton clusters so
/// layouts stay comparable program-wide.
pub fn ods<T: Scalar>(
    section: &Section<T>,
    device: &Device<T>,
    program: &Program<T>,
) -> Result<Layout> {
    let table = program.field_table()?;
    let graph = build_affinity_graph(section, device, &table)?;
    let clustered = greedy_cluster(&graph, device)?;

    let touched = section.touched_fields();
    let mut clusters: Vec<Vec<String>> = clustered.clusters().to_vec();
    for name in table.names() {
        if !touched.contains(name) {
            let bytes = table.elem_bytes(name).unwrap();
            if bytes > device.cluster_capacity_bytes {
                return Err(Error::FieldExceedsCapacity {
                    field: name.to_string(),
                    elem_bytes: bytes,
                    capacity: device.cluster_capacity_bytes,
                });
            }
            clusters.push(vec![name.to_string()]);
        }
    }
    Layout::new(clusters, &table)
}

/// Fuse contiguous sections into one synthetic section.
///
/// The result has trip count 1 with every group frequency scaled by its
/// member's trip count, so affinity and cost sums are preserved even
/// when the member trip counts differ. Its allowed devices are the
/// intersection of the members'.
pub fn merge_sections<T: Scalar>(sections: &[&Section<T>]) -> Result<Section<T>> {
    let Some(first) = sections.first() else {
        return Err(Error::InvalidInput(
            "cannot merge an empty list of sections".to_string(),
        ));
    };

    let mut allowed = first.allowed_devices.clone();
    for s in &sections[1..] {
        allowed = allowed
            .intersection(&s.allowed_devices)
            .cloned()
            .collect();
    }
    let joined = sections
        .iter()
        .map(|s| s.id.as_str())
        .collect::<Vec<_>>()
        .join("+");
    if allowed.is_empty() {
        return Err(Error::NoCommonDevice { sections: joined });
    }

    let mut groups = Vec::new();
    for s in sections {
        let trip = T::from_count(s.trip_count);
        for g in &s.groups {
            let mut scaled = g.clone();
            scaled.freq = trip * g.freq;
            groups.push(scaled);
        }
    }

    Ok(Section {
        id: joined,
        trip_count: 1,
        groups,
        allowed_devices: allowed,
    })
}
