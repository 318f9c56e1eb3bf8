//! Collocation groups, device-constraint feasibility and static memory
//! accounting shared by the partitioners, plus the polynomial-time solution
//! validator.
//!
//! Partitioners enforce a static memory bound: the summed volume of all edges
//! whose destination lives on a device must stay strictly below its capacity.
//! The set of simultaneously resident tensors at any instant is a subset of
//! those edges, so the bound holds for every schedule.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::cluster::{DeviceCluster, DeviceIndex};
use crate::graph::{DataflowGraph, VertexIndex};
use crate::sim::{memory_profile, ExecutionTrace};

pub type GroupIndex = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("contradictory device constraints in group {group}: {first} vs {second}")]
    Contradictory {
        group: String,
        first: String,
        second: String,
    },
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    /// Annotation label, or the vertex id for an unannotated singleton.
    pub label: String,
    /// Sorted ascending.
    pub members: Vec<VertexIndex>,
    /// The one device every explicitly constrained member names, if any.
    pub device: Option<String>,
    pub cost: f64,
    /// Static memory footprint of the member set.
    pub footprint: f64,
}

/// Partition of the vertex set into collocation groups.
///
/// Groups are ordered by their smallest member, which doubles as the group
/// id for tie-breaking.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationGroups {
    group_of: Vec<GroupIndex>,
    groups: Vec<Group>,
}

impl CollocationGroups {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group_of(&self, v: VertexIndex) -> GroupIndex {
        self.group_of[v]
    }

    pub fn group(&self, g: GroupIndex) -> &Group {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn members(&self, g: GroupIndex) -> &[VertexIndex] {
        &self.groups[g].members
    }

    /// Resolves the group's merged device constraint against `cluster`.
    /// `Some(None)` means the constraint names a device the cluster lacks.
    pub fn pinned_device(
        &self,
        g: GroupIndex,
        cluster: &DeviceCluster,
    ) -> Option<Option<DeviceIndex>> {
        self.groups[g]
            .device
            .as_deref()
            .map(|id| cluster.index_of(id))
    }
}

/// Builds collocation groups from the vertices' group annotations.
pub fn build_groups(graph: &DataflowGraph) -> Result<CollocationGroups, ConstraintError> {
    build_groups_from_pairs(graph, &[])
}

/// Builds groups as the transitive closure of the annotation labels together
/// with an explicit pairwise collocation relation.
pub fn build_groups_from_pairs(
    graph: &DataflowGraph,
    pairs: &[(VertexIndex, VertexIndex)],
) -> Result<CollocationGroups, ConstraintError> {
    let n = graph.len();
    let mut uf = UnionFind::new(n);
    let mut first_with_label: BTreeMap<&str, VertexIndex> = BTreeMap::new();
    for (v, record) in graph.vertices().iter().enumerate() {
        if let Some(label) = &record.colocation_group {
            let first = *first_with_label.entry(label).or_insert(v);
            uf.union(first, v);
        }
    }
    for &(a, b) in pairs {
        uf.union(a, b);
    }

    let mut root_to_group: Vec<Option<GroupIndex>> = vec![None; n];
    let mut group_of = vec![0; n];
    let mut members: Vec<Vec<VertexIndex>> = Vec::new();
    // ascending vertex order makes groups ordered by smallest member
    for v in 0..n {
        let root = uf.find(v);
        let g = *root_to_group[root].get_or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        group_of[v] = g;
        members[g].push(v);
    }

    let mut groups = Vec::with_capacity(members.len());
    for members in members {
        let label = members
            .iter()
            .find_map(|&v| graph.vertex(v).colocation_group.clone())
            .unwrap_or_else(|| graph.id(members[0]).to_string());
        let mut device: Option<String> = None;
        for &v in &members {
            if let Some(d) = &graph.vertex(v).device_constraint {
                match &device {
                    Some(existing) if existing != d => {
                        return Err(ConstraintError::Contradictory {
                            group: label,
                            first: existing.clone(),
                            second: d.clone(),
                        });
                    }
                    _ => device = Some(d.clone()),
                }
            }
        }
        let cost = members.iter().map(|&v| graph.cost(v)).sum();
        let footprint = static_footprint(&members, graph);
        groups.push(Group {
            label,
            members,
            device,
            cost,
            footprint,
        });
    }
    Ok(CollocationGroups { group_of, groups })
}

/// Summed volume of every edge whose destination is in `vertices`.
pub fn static_footprint(vertices: &[VertexIndex], graph: &DataflowGraph) -> f64 {
    vertices
        .iter()
        .flat_map(|&v| graph.predecessors(v))
        .map(|&(_, e)| graph.edge(e).volume)
        .sum()
}

/// Partition under construction: group placements and the static memory
/// already committed on each device.
#[derive(Debug, Clone)]
pub struct PartialAssignment {
    vertex_device: Vec<Option<DeviceIndex>>,
    group_device: Vec<Option<DeviceIndex>>,
    used_memory: Vec<f64>,
}

impl PartialAssignment {
    pub fn new(graph: &DataflowGraph, groups: &CollocationGroups, cluster: &DeviceCluster) -> Self {
        PartialAssignment {
            vertex_device: vec![None; graph.len()],
            group_device: vec![None; groups.len()],
            used_memory: vec![0.0; cluster.len()],
        }
    }

    pub fn device_of(&self, v: VertexIndex) -> Option<DeviceIndex> {
        self.vertex_device[v]
    }

    pub fn group_device(&self, g: GroupIndex) -> Option<DeviceIndex> {
        self.group_device[g]
    }

    pub fn used_memory(&self, d: DeviceIndex) -> f64 {
        self.used_memory[d]
    }

    /// Whether group `g` fits under the static bound of device `d`.
    pub fn fits(
        &self,
        g: GroupIndex,
        d: DeviceIndex,
        groups: &CollocationGroups,
        cluster: &DeviceCluster,
    ) -> bool {
        self.used_memory[d] + groups.group(g).footprint < cluster.memory(d)
    }

    /// Places every member of `g` on `d`. Re-assigning a placed group is a bug.
    pub fn assign(&mut self, g: GroupIndex, d: DeviceIndex, groups: &CollocationGroups) {
        assert!(self.group_device[g].is_none(), "group {g} assigned twice");
        self.group_device[g] = Some(d);
        self.used_memory[d] += groups.group(g).footprint;
        for &v in groups.members(g) {
            self.vertex_device[v] = Some(d);
        }
    }

    pub fn is_complete(&self) -> bool {
        self.group_device.iter().all(Option::is_some)
    }

    /// The assignment, if every vertex is placed.
    pub fn into_assignment(self) -> Option<Vec<DeviceIndex>> {
        self.vertex_device.into_iter().collect()
    }
}

/// Devices group `g` may be placed on, ascending: those matching its merged
/// device constraint with enough spare static capacity. A group that is
/// already placed only admits its own device.
pub fn feasible_devices(
    g: GroupIndex,
    groups: &CollocationGroups,
    cluster: &DeviceCluster,
    current: &PartialAssignment,
) -> Vec<DeviceIndex> {
    if let Some(d) = current.group_device(g) {
        return vec![d];
    }
    let candidates: Vec<DeviceIndex> = match groups.pinned_device(g, cluster) {
        Some(Some(d)) => vec![d],
        Some(None) => Vec::new(),
        None => (0..cluster.len()).collect(),
    };
    candidates
        .into_iter()
        .filter(|&d| current.fits(g, d, groups, cluster))
        .collect()
}

/// Checks a complete assignment without a schedule: totality, collocation,
/// device constraints and the static memory bound.
pub fn check_assignment(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    groups: &CollocationGroups,
    assignment: &[DeviceIndex],
) -> Vec<SolutionViolation> {
    let mut out = Vec::new();
    if assignment.len() != graph.len() {
        for v in assignment.len()..graph.len() {
            out.push(SolutionViolation::Unassigned {
                vertex: graph.id(v).to_string(),
            });
        }
        return out;
    }
    if let Some(v) = (0..graph.len()).find(|&v| assignment[v] >= cluster.len()) {
        out.push(SolutionViolation::UnknownDevice {
            vertex: graph.id(v).to_string(),
        });
        return out;
    }
    let mut used = vec![0.0; cluster.len()];
    for (g, group) in groups.groups().iter().enumerate() {
        let d = assignment[group.members[0]];
        for &v in &group.members[1..] {
            if assignment[v] != d {
                out.push(SolutionViolation::Collocation {
                    a: graph.id(group.members[0]).to_string(),
                    b: graph.id(v).to_string(),
                });
            }
        }
        if let Some(pin) = groups.pinned_device(g, cluster) {
            for &v in &group.members {
                if pin != Some(assignment[v]) {
                    out.push(SolutionViolation::DeviceConstraint {
                        vertex: graph.id(v).to_string(),
                        required: group.device.clone().unwrap_or_default(),
                        actual: cluster.id(assignment[v]).to_string(),
                    });
                }
            }
        }
    }
    for v in 0..graph.len() {
        used[assignment[v]] += static_footprint(&[v], graph);
    }
    for (d, &usage) in used.iter().enumerate() {
        if usage >= cluster.memory(d) {
            out.push(SolutionViolation::StaticMemory {
                device: cluster.id(d).to_string(),
                usage,
                capacity: cluster.memory(d),
            });
        }
    }
    out
}

/// A way in which a (partition, trace) pair fails the problem constraints.
#[derive(Debug, Clone, PartialEq)]
pub enum SolutionViolation {
    Unassigned {
        vertex: String,
    },
    UnknownDevice {
        vertex: String,
    },
    Collocation {
        a: String,
        b: String,
    },
    ContradictoryGroup(String),
    DeviceConstraint {
        vertex: String,
        required: String,
        actual: String,
    },
    Memory {
        device: String,
        time: f64,
        usage: f64,
        capacity: f64,
    },
    StaticMemory {
        device: String,
        usage: f64,
        capacity: f64,
    },
    Precedence {
        src: String,
        dst: String,
    },
    Duration {
        vertex: String,
    },
    Exclusivity {
        device: String,
        first: String,
        second: String,
    },
    Multiplicity {
        vertex: String,
        count: usize,
    },
    WrongDevice {
        vertex: String,
        device: String,
    },
}

impl SolutionViolation {
    pub fn kind(&self) -> &'static str {
        match self {
            SolutionViolation::Unassigned { .. } | SolutionViolation::UnknownDevice { .. } => {
                "totality"
            }
            SolutionViolation::Collocation { .. } | SolutionViolation::ContradictoryGroup(_) => {
                "collocation"
            }
            SolutionViolation::DeviceConstraint { .. } => "device constraint",
            SolutionViolation::Memory { .. } => "memory",
            SolutionViolation::StaticMemory { .. } => "static memory",
            SolutionViolation::Precedence { .. } | SolutionViolation::Duration { .. } => {
                "precedence"
            }
            SolutionViolation::Exclusivity { .. } => "device exclusivity",
            SolutionViolation::Multiplicity { .. } | SolutionViolation::WrongDevice { .. } => {
                "multiplicity"
            }
        }
    }
}

impl fmt::Display for SolutionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.kind())?;
        match self {
            SolutionViolation::Unassigned { vertex } => write!(f, "{vertex} has no device"),
            SolutionViolation::UnknownDevice { vertex } => {
                write!(f, "{vertex} is on an unknown device")
            }
            SolutionViolation::Collocation { a, b } => {
                write!(f, "{a} and {b} on different devices")
            }
            SolutionViolation::ContradictoryGroup(msg) => write!(f, "{msg}"),
            SolutionViolation::DeviceConstraint {
                vertex,
                required,
                actual,
            } => write!(f, "{vertex} requires {required}, placed on {actual}"),
            SolutionViolation::Memory {
                device,
                time,
                usage,
                capacity,
            } => write!(f, "{device} holds {usage} of {capacity} at t={time}"),
            SolutionViolation::StaticMemory {
                device,
                usage,
                capacity,
            } => write!(
                f,
                "{device} static footprint {usage} reaches capacity {capacity}"
            ),
            SolutionViolation::Precedence { src, dst } => {
                write!(f, "{dst} starts before tensor from {src} arrives")
            }
            SolutionViolation::Duration { vertex } => {
                write!(f, "{vertex} finish does not match its execution time")
            }
            SolutionViolation::Exclusivity {
                device,
                first,
                second,
            } => write!(f, "{first} and {second} overlap on {device}"),
            SolutionViolation::Multiplicity { vertex, count } => {
                write!(f, "{vertex} executed {count} times")
            }
            SolutionViolation::WrongDevice { vertex, device } => {
                write!(f, "{vertex} executed on {device}, not its assigned device")
            }
        }
    }
}

/// Checks a complete solution: collocation, device constraints, the exact
/// time-varying memory bound, precedence including transfer delays, device
/// exclusivity, and that every vertex runs exactly once on its device.
pub fn validate_solution(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    assignment: &[DeviceIndex],
    trace: &ExecutionTrace,
) -> Vec<SolutionViolation> {
    let mut out = Vec::new();
    let n = graph.len();
    if assignment.len() != n {
        for v in assignment.len()..n {
            out.push(SolutionViolation::Unassigned {
                vertex: graph.id(v).to_string(),
            });
        }
        return out;
    }
    if let Some(v) = (0..n).find(|&v| assignment[v] >= cluster.len()) {
        out.push(SolutionViolation::UnknownDevice {
            vertex: graph.id(v).to_string(),
        });
        return out;
    }

    match build_groups(graph) {
        Ok(groups) => {
            for group in groups.groups() {
                let first = group.members[0];
                for &v in &group.members[1..] {
                    if assignment[v] != assignment[first] {
                        out.push(SolutionViolation::Collocation {
                            a: graph.id(first).to_string(),
                            b: graph.id(v).to_string(),
                        });
                    }
                }
            }
        }
        Err(e) => out.push(SolutionViolation::ContradictoryGroup(e.to_string())),
    }

    for v in 0..n {
        if let Some(required) = &graph.vertex(v).device_constraint {
            if cluster.index_of(required) != Some(assignment[v]) {
                out.push(SolutionViolation::DeviceConstraint {
                    vertex: graph.id(v).to_string(),
                    required: required.clone(),
                    actual: cluster.id(assignment[v]).to_string(),
                });
            }
        }
    }

    let mut count = vec![0usize; n];
    for (d, order) in trace.device_order.iter().enumerate() {
        for &v in order {
            count[v] += 1;
            if assignment[v] != d {
                out.push(SolutionViolation::WrongDevice {
                    vertex: graph.id(v).to_string(),
                    device: cluster.id(d).to_string(),
                });
            }
        }
    }
    for v in 0..n {
        if count[v] != 1 {
            out.push(SolutionViolation::Multiplicity {
                vertex: graph.id(v).to_string(),
                count: count[v],
            });
        }
    }
    if out.iter().any(|v| v.kind() == "multiplicity") {
        return out;
    }

    for v in 0..n {
        if trace.finish[v] != trace.start[v] + cluster.exec_time(graph.cost(v), assignment[v]) {
            out.push(SolutionViolation::Duration {
                vertex: graph.id(v).to_string(),
            });
        }
    }
    for (i, edge) in graph.edges().iter().enumerate() {
        let (src_dev, dst_dev) = (assignment[edge.src], assignment[edge.dst]);
        let transfer = &trace.transfers[i];
        let arrival_ok = match cluster.transfer_time(edge.volume, src_dev, dst_dev) {
            Ok(t) => {
                transfer.start >= trace.finish[edge.src]
                    && transfer.end >= transfer.start + t
                    && transfer.src_device == src_dev
                    && transfer.dst_device == dst_dev
            }
            Err(_) => false,
        };
        if !arrival_ok || trace.start[edge.dst] < transfer.end {
            out.push(SolutionViolation::Precedence {
                src: graph.id(edge.src).to_string(),
                dst: graph.id(edge.dst).to_string(),
            });
        }
    }

    for (d, order) in trace.device_order.iter().enumerate() {
        let mut intervals: Vec<VertexIndex> = order.clone();
        intervals.sort_by(|&a, &b| trace.start[a].total_cmp(&trace.start[b]).then(a.cmp(&b)));
        for w in intervals.windows(2) {
            let (a, b) = (w[0], w[1]);
            // zero-length executions may share an instant with a neighbour
            let overlap = trace.start[b] < trace.finish[a]
                && trace.finish[a] > trace.start[a]
                && trace.finish[b] > trace.start[b];
            if overlap {
                out.push(SolutionViolation::Exclusivity {
                    device: cluster.id(d).to_string(),
                    first: graph.id(a).to_string(),
                    second: graph.id(b).to_string(),
                });
            }
        }
    }

    for (d, peak) in memory_profile(graph, cluster.len(), assignment, trace)
        .into_iter()
        .enumerate()
    {
        if peak.usage >= cluster.memory(d) {
            out.push(SolutionViolation::Memory {
                device: cluster.id(d).to_string(),
                time: peak.time,
                usage: peak.usage,
                capacity: cluster.memory(d),
            });
        }
    }
    out
}
