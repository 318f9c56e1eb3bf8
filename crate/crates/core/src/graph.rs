//! Dataflow DAG representation and the structural quantities computed on it:
//! validation, upward/downward/total ranks, the critical path and the
//! artificial sink.
//!
//! Vertices are stored sorted by id, so "smallest id" tie-breaking anywhere in
//! the crate is the same as "smallest index".

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type VertexIndex = usize;
pub type EdgeIndex = usize;

/// One operation of the dataflow graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexRecord {
    pub id: String,
    /// Computational complexity in operations.
    pub cost: f64,
    #[serde(default, rename = "group", skip_serializing_if = "Option::is_none")]
    pub colocation_group: Option<String>,
    #[serde(default, rename = "device", skip_serializing_if = "Option::is_none")]
    pub device_constraint: Option<String>,
}

impl VertexRecord {
    pub fn new(id: impl Into<String>, cost: f64) -> Self {
        VertexRecord {
            id: id.into(),
            cost,
            colocation_group: None,
            device_constraint: None,
        }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.colocation_group = Some(group.into());
        self
    }

    pub fn with_device(mut self, device: impl Into<String>) -> Self {
        self.device_constraint = Some(device.into());
        self
    }
}

/// A tensor flowing from `src` to `dst`; `volume` is in bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub src: String,
    pub dst: String,
    pub volume: f64,
}

impl EdgeRecord {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, volume: f64) -> Self {
        EdgeRecord {
            src: src.into(),
            dst: dst.into(),
            volume,
        }
    }
}

/// A broken structural invariant found by [`validate_dag`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateVertex(String),
    NegativeCost(String),
    UnknownEndpoint {
        edge: EdgeIndex,
        id: String,
    },
    SelfLoop(String),
    DuplicateEdge {
        src: String,
        dst: String,
    },
    NegativeVolume {
        src: String,
        dst: String,
    },
    /// Members of one cycle, sorted by id.
    Cycle(Vec<String>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateVertex(id) => write!(f, "duplicate vertex id {id}"),
            Violation::NegativeCost(id) => write!(f, "negative cost on vertex {id}"),
            Violation::UnknownEndpoint { edge, id } => {
                write!(f, "unknown endpoint {id} on edge #{edge}")
            }
            Violation::SelfLoop(id) => write!(f, "self-loop on vertex {id}"),
            Violation::DuplicateEdge { src, dst } => write!(f, "duplicate edge {src}->{dst}"),
            Violation::NegativeVolume { src, dst } => {
                write!(f, "negative volume on edge {src}->{dst}")
            }
            Violation::Cycle(members) => write!(f, "cycle {{{}}}", members.join(",")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid graph: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("graph is empty")]
    Empty,
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Checks every structural invariant of a dataflow graph given as raw records.
/// Returns an empty list iff the records form a valid DAG.
pub fn validate_dag(vertices: &[VertexRecord], edges: &[EdgeRecord]) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::with_capacity(vertices.len());
    for v in vertices {
        if index.insert(v.id.as_str(), index.len()).is_some() {
            violations.push(Violation::DuplicateVertex(v.id.clone()));
        }
        if !(v.cost >= 0.0) {
            violations.push(Violation::NegativeCost(v.id.clone()));
        }
    }

    let mut seen = HashSet::new();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); index.len()];
    for (i, e) in edges.iter().enumerate() {
        let mut resolved = true;
        for endpoint in [&e.src, &e.dst] {
            if !index.contains_key(endpoint.as_str()) {
                violations.push(Violation::UnknownEndpoint {
                    edge: i,
                    id: endpoint.clone(),
                });
                resolved = false;
            }
        }
        if !(e.volume >= 0.0) {
            violations.push(Violation::NegativeVolume {
                src: e.src.clone(),
                dst: e.dst.clone(),
            });
        }
        if !resolved {
            continue;
        }
        if e.src == e.dst {
            violations.push(Violation::SelfLoop(e.src.clone()));
            continue;
        }
        if !seen.insert((e.src.as_str(), e.dst.as_str())) {
            violations.push(Violation::DuplicateEdge {
                src: e.src.clone(),
                dst: e.dst.clone(),
            });
            continue;
        }
        adjacency[index[e.src.as_str()]].push(index[e.dst.as_str()]);
    }

    if let Some(cycle) = find_cycle(&adjacency) {
        let mut ids: Vec<String> = cycle.into_iter().map(|i| vertices[i].id.clone()).collect();
        ids.sort();
        violations.push(Violation::Cycle(ids));
    }
    violations
}

/// Kahn's algorithm; when vertices are left over, walks predecessor links
/// inside the leftover set until a vertex repeats.
fn find_cycle(successors: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = successors.len();
    let mut indegree = vec![0usize; n];
    let mut predecessors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, succ) in successors.iter().enumerate() {
        for &v in succ {
            indegree[v] += 1;
            predecessors[v].push(u);
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut removed = vec![false; n];
    while let Some(u) = stack.pop() {
        removed[u] = true;
        for &v in &successors[u] {
            indegree[v] -= 1;
            if indegree[v] == 0 {
                stack.push(v);
            }
        }
    }
    let start = (0..n).find(|&v| !removed[v])?;
    let mut position = vec![usize::MAX; n];
    let mut walk = Vec::new();
    let mut current = start;
    while position[current] == usize::MAX {
        position[current] = walk.len();
        walk.push(current);
        current = *predecessors[current]
            .iter()
            .find(|&&p| !removed[p])
            .expect("leftover vertex has a leftover predecessor");
    }
    Some(walk.split_off(position[current]))
}

/// Edge with endpoints resolved to vertex indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: VertexIndex,
    pub dst: VertexIndex,
    pub volume: f64,
}

/// Weighted, validated DAG. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DataflowGraph {
    vertices: Vec<VertexRecord>,
    edges: Vec<Edge>,
    index: HashMap<String, VertexIndex>,
    successors: Vec<Vec<(VertexIndex, EdgeIndex)>>,
    predecessors: Vec<Vec<(VertexIndex, EdgeIndex)>>,
    topo: Vec<VertexIndex>,
}

impl DataflowGraph {
    /// Validates the records and builds the graph. Vertices are reordered by
    /// id; edges keep their input order.
    pub fn new(
        mut vertices: Vec<VertexRecord>,
        edges: Vec<EdgeRecord>,
    ) -> Result<Self, GraphError> {
        let violations = validate_dag(&vertices, &edges);
        if !violations.is_empty() {
            return Err(GraphError::Invalid(violations));
        }
        vertices.sort_by(|a, b| a.id.cmp(&b.id));
        let index: HashMap<String, VertexIndex> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.clone(), i))
            .collect();
        let n = vertices.len();
        let mut successors = vec![Vec::new(); n];
        let mut predecessors = vec![Vec::new(); n];
        let edges: Vec<Edge> = edges
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                let (src, dst) = (index[&e.src], index[&e.dst]);
                successors[src].push((dst, i));
                predecessors[dst].push((src, i));
                Edge {
                    src,
                    dst,
                    volume: e.volume,
                }
            })
            .collect();
        for list in successors.iter_mut().chain(predecessors.iter_mut()) {
            list.sort_unstable();
        }
        let topo = topological_order(&successors, &predecessors);
        Ok(DataflowGraph {
            vertices,
            edges,
            index,
            successors,
            predecessors,
            topo,
        })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[VertexRecord] {
        &self.vertices
    }

    pub fn vertex(&self, v: VertexIndex) -> &VertexRecord {
        &self.vertices[v]
    }

    pub fn cost(&self, v: VertexIndex) -> f64 {
        self.vertices[v].cost
    }

    pub fn id(&self, v: VertexIndex) -> &str {
        &self.vertices[v].id
    }

    pub fn index_of(&self, id: &str) -> Option<VertexIndex> {
        self.index.get(id).copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeIndex) -> &Edge {
        &self.edges[e]
    }

    /// `(successor, edge)` pairs sorted by successor index.
    pub fn successors(&self, v: VertexIndex) -> &[(VertexIndex, EdgeIndex)] {
        &self.successors[v]
    }

    /// `(predecessor, edge)` pairs sorted by predecessor index.
    pub fn predecessors(&self, v: VertexIndex) -> &[(VertexIndex, EdgeIndex)] {
        &self.predecessors[v]
    }

    /// A fixed topological order (Kahn, smallest index first).
    pub fn topological_order(&self) -> &[VertexIndex] {
        &self.topo
    }

    pub fn is_source(&self, v: VertexIndex) -> bool {
        self.predecessors[v].is_empty()
    }

    pub fn is_sink(&self, v: VertexIndex) -> bool {
        self.successors[v].is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = VertexIndex> + '_ {
        (0..self.len()).filter(|&v| self.is_source(v))
    }

    pub fn sinks(&self) -> impl Iterator<Item = VertexIndex> + '_ {
        (0..self.len()).filter(|&v| self.is_sink(v))
    }

    /// Records in canonical order, suitable for rebuilding or serializing.
    pub fn edge_records(&self) -> Vec<EdgeRecord> {
        self.edges
            .iter()
            .map(|e| EdgeRecord::new(self.id(e.src), self.id(e.dst), e.volume))
            .collect()
    }

    /// Re-checks the invariants on the stored records. Always empty for a
    /// graph obtained from [`DataflowGraph::new`].
    pub fn validate(&self) -> Vec<Violation> {
        validate_dag(&self.vertices, &self.edge_records())
    }

    /// Returns a copy in which every sink gets a zero-volume edge into one new
    /// zero-cost vertex.
    pub fn add_virtual_sink(&self) -> Result<DataflowGraph, GraphError> {
        if self.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut id = String::from("__sink");
        while self.index.contains_key(&id) {
            id.push('_');
        }
        let mut edges = self.edge_records();
        edges.extend(
            self.sinks()
                .map(|s| EdgeRecord::new(self.id(s), id.clone(), 0.0)),
        );
        let mut vertices = self.vertices.clone();
        vertices.push(VertexRecord::new(id, 0.0));
        DataflowGraph::new(vertices, edges)
    }
}

fn topological_order(
    successors: &[Vec<(VertexIndex, EdgeIndex)>],
    predecessors: &[Vec<(VertexIndex, EdgeIndex)>],
) -> Vec<VertexIndex> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut indegree: Vec<usize> = predecessors.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<VertexIndex>> = (0..successors.len())
        .filter(|&v| indegree[v] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(successors.len());
    while let Some(Reverse(u)) = ready.pop() {
        order.push(u);
        for &(v, _) in &successors[u] {
            indegree[v] -= 1;
            if indegree[v] == 0 {
                ready.push(Reverse(v));
            }
        }
    }
    order
}

/// Longest computational path from each vertex down to any sink, counting the
/// vertex itself. Sinks rank at their own cost.
pub fn up_rank(graph: &DataflowGraph) -> Vec<f64> {
    let mut up = vec![0.0; graph.len()];
    for &v in graph.topological_order().iter().rev() {
        let best = graph
            .successors(v)
            .iter()
            .map(|&(s, _)| up[s])
            .fold(0.0, f64::max);
        up[v] = best + graph.cost(v);
    }
    up
}

/// Longest computational path from any source to each vertex, counting the
/// vertex itself. Sources rank at their own cost.
pub fn down_rank(graph: &DataflowGraph) -> Vec<f64> {
    let mut down = vec![0.0; graph.len()];
    for &v in graph.topological_order() {
        let best = graph
            .predecessors(v)
            .iter()
            .map(|&(p, _)| down[p])
            .fold(0.0, f64::max);
        down[v] = best + graph.cost(v);
    }
    down
}

/// Upward, downward and total rank per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub up: Vec<f64>,
    pub down: Vec<f64>,
    /// `up + down`; a vertex's own cost is counted in both terms.
    pub total: Vec<f64>,
}

impl RankTable {
    pub fn max_total(&self) -> f64 {
        self.total.iter().copied().fold(0.0, f64::max)
    }
}

pub fn total_rank(graph: &DataflowGraph) -> RankTable {
    let up = up_rank(graph);
    let down = down_rank(graph);
    let total = up.iter().zip(&down).map(|(u, d)| u + d).collect();
    RankTable { up, down, total }
}

/// Source-to-sink path of maximal summed cost, source first.
///
/// Starts at the sink with the largest downward rank and walks predecessors,
/// always taking the one with the largest downward rank. Ties go to the
/// smallest id.
pub fn critical_path(graph: &DataflowGraph) -> Result<Vec<VertexIndex>, GraphError> {
    let down = down_rank(graph);
    critical_path_with(graph, &down)
}

pub(crate) fn critical_path_with(
    graph: &DataflowGraph,
    down: &[f64],
) -> Result<Vec<VertexIndex>, GraphError> {
    let mut current = argmax_first(graph.sinks(), down).ok_or(GraphError::Empty)?;
    let mut path = vec![current];
    while let Some(p) = argmax_first(graph.predecessors(current).iter().map(|&(p, _)| p), down) {
        path.push(p);
        current = p;
    }
    path.reverse();
    Ok(path)
}

/// First index (in iteration order) holding the maximal value.
fn argmax_first(candidates: impl Iterator<Item = usize>, values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for c in candidates {
        if best.map_or(true, |b| values[c] > values[b]) {
            best = Some(c);
        }
    }
    best
}

/// Summed vertex cost along `path`.
pub fn path_cost(graph: &DataflowGraph, path: &[VertexIndex]) -> f64 {
    path.iter().map(|&v| graph.cost(v)).sum()
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn by_id(graph: &DataflowGraph, values: &[f64]) -> Vec<(String, f64)> {
        (0..graph.len())
            .map(|v| (graph.id(v).to_string(), values[v]))
            .collect()
    }

    fn ids(graph: &DataflowGraph, path: &[VertexIndex]) -> Vec<String> {
        path.iter().map(|&v| graph.id(v).to_string()).collect()
    }

    #[test]
    fn chain_validates() {
        let g = chain(&[1.0, 1.0, 1.0], 0.0);
        assert!(g.validate().is_empty());
        assert_eq!(g.topological_order(), &[0, 1, 2]);
    }

    #[test]
    fn two_cycle_is_reported() {
        let violations = validate_dag(
            &[VertexRecord::new("v1", 1.0), VertexRecord::new("v2", 1.0)],
            &[
                EdgeRecord::new("v1", "v2", 1.0),
                EdgeRecord::new("v2", "v1", 1.0),
            ],
        );
        assert_eq!(
            violations,
            vec![Violation::Cycle(vec!["v1".into(), "v2".into()])]
        );
        assert_eq!(violations[0].to_string(), "cycle {v1,v2}");
    }

    #[test]
    fn cycle_excludes_downstream_vertices() {
        let violations = validate_dag(
            &[
                VertexRecord::new("a", 1.0),
                VertexRecord::new("b", 1.0),
                VertexRecord::new("c", 1.0),
                VertexRecord::new("d", 1.0),
            ],
            &[
                EdgeRecord::new("a", "b", 1.0),
                EdgeRecord::new("b", "c", 1.0),
                EdgeRecord::new("c", "b", 1.0),
                EdgeRecord::new("c", "d", 1.0),
            ],
        );
        assert_eq!(
            violations,
            vec![Violation::Cycle(vec!["b".into(), "c".into()])]
        );
    }

    #[test]
    fn unknown_endpoint_is_reported() {
        let violations = validate_dag(
            &[VertexRecord::new("v1", 1.0)],
            &[EdgeRecord::new("v1", "ghost", 1.0)],
        );
        assert_eq!(
            violations,
            vec![Violation::UnknownEndpoint {
                edge: 0,
                id: "ghost".into()
            }]
        );
        assert!(violations[0].to_string().starts_with("unknown endpoint"));
    }

    #[test]
    fn self_loops_duplicates_and_negatives() {
        let violations = validate_dag(
            &[
                VertexRecord::new("a", -1.0),
                VertexRecord::new("a", 1.0),
                VertexRecord::new("b", 1.0),
            ],
            &[
                EdgeRecord::new("b", "b", 1.0),
                EdgeRecord::new("a", "b", 1.0),
                EdgeRecord::new("a", "b", -2.0),
            ],
        );
        assert!(violations.contains(&Violation::DuplicateVertex("a".into())));
        assert!(violations.contains(&Violation::NegativeCost("a".into())));
        assert!(violations.contains(&Violation::SelfLoop("b".into())));
        assert!(violations.contains(&Violation::DuplicateEdge {
            src: "a".into(),
            dst: "b".into()
        }));
        assert!(violations.contains(&Violation::NegativeVolume {
            src: "a".into(),
            dst: "b".into()
        }));
    }

    #[test]
    fn construction_rejects_invalid_records() {
        let err = DataflowGraph::new(
            vec![VertexRecord::new("v1", 1.0), VertexRecord::new("v2", 1.0)],
            vec![
                EdgeRecord::new("v1", "v2", 1.0),
                EdgeRecord::new("v2", "v1", 1.0),
            ],
        )
        .unwrap_err();
        assert!(err.to_string().contains("cycle {v1,v2}"));
    }

    #[test]
    fn virtual_sink_joins_all_sinks() {
        let g = DataflowGraph::new(
            vec![
                VertexRecord::new("a", 1.0),
                VertexRecord::new("s1", 2.0),
                VertexRecord::new("s2", 3.0),
            ],
            vec![
                EdgeRecord::new("a", "s1", 4.0),
                EdgeRecord::new("a", "s2", 4.0),
            ],
        )
        .unwrap();
        let h = g.add_virtual_sink().unwrap();
        assert_eq!(h.len(), 4);
        assert_eq!(h.sinks().count(), 1);
        let omega = h.index_of("__sink").unwrap();
        assert_eq!(h.cost(omega), 0.0);
        assert_eq!(h.predecessors(omega).len(), 2);
        for &(_, e) in h.predecessors(omega) {
            assert_eq!(h.edge(e).volume, 0.0);
        }
        // original untouched
        assert_eq!(g.len(), 3);
        assert_eq!(g.sinks().count(), 2);
    }

    #[test]
    fn virtual_sink_on_single_sink_and_single_vertex() {
        let g = chain(&[1.0, 2.0], 5.0);
        let h = g.add_virtual_sink().unwrap();
        assert_eq!((h.len(), h.edge_count()), (3, 2));

        let single = chain(&[5.0], 0.0);
        let h = single.add_virtual_sink().unwrap();
        assert_eq!((h.len(), h.edge_count()), (2, 1));
        assert_eq!(h.edges()[0].volume, 0.0);
    }

    #[test]
    fn virtual_sink_id_avoids_collisions() {
        let g = DataflowGraph::new(vec![VertexRecord::new("__sink", 1.0)], vec![]).unwrap();
        let h = g.add_virtual_sink().unwrap();
        assert!(h.index_of("__sink_").is_some());
    }

    #[test]
    fn virtual_sink_on_empty_graph_fails() {
        let g = DataflowGraph::new(vec![], vec![]).unwrap();
        assert_eq!(g.add_virtual_sink().unwrap_err(), GraphError::Empty);
    }

    #[test]
    fn diamond_ranks() {
        let g = diamond();
        let ranks = total_rank(&g);
        let expect = |pairs: [(&str, f64); 4]| {
            pairs
                .iter()
                .map(|(id, r)| (id.to_string(), *r))
                .collect::<Vec<_>>()
        };
        assert_eq!(
            by_id(&g, &ranks.up),
            expect([("v1", 7.0), ("v2", 4.0), ("v3", 5.0), ("v4", 1.0)])
        );
        assert_eq!(
            by_id(&g, &ranks.down),
            expect([("v1", 2.0), ("v2", 5.0), ("v3", 6.0), ("v4", 7.0)])
        );
        assert_eq!(
            by_id(&g, &ranks.total),
            expect([("v1", 9.0), ("v2", 9.0), ("v3", 11.0), ("v4", 8.0)])
        );
    }

    #[test]
    fn single_vertex_and_chain_ranks() {
        let g = chain(&[5.0], 0.0);
        assert_eq!(up_rank(&g), vec![5.0]);
        assert_eq!(down_rank(&g), vec![5.0]);
        assert_eq!(total_rank(&g).total, vec![10.0]);

        let g = chain(&[2.0, 3.0], 1.0);
        assert_eq!(up_rank(&g), vec![5.0, 3.0]);
        assert_eq!(down_rank(&g), vec![2.0, 5.0]);
        assert_eq!(total_rank(&g).total, vec![7.0, 8.0]);
    }

    #[test]
    fn diamond_critical_path() {
        let g = diamond();
        let path = critical_path(&g).unwrap();
        assert_eq!(ids(&g, &path), ["v1", "v3", "v4"]);
        assert_eq!(path_cost(&g, &path), 7.0);
    }

    #[test]
    fn chain_critical_path_is_whole_chain() {
        let g = chain(&[1.0, 2.0, 3.0], 0.0);
        assert_eq!(critical_path(&g).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn parallel_chains_pick_heavier() {
        // s -> a -> t and s -> b -> t where a costs 10 and b costs 9
        let g = DataflowGraph::new(
            vec![
                VertexRecord::new("s", 1.0),
                VertexRecord::new("a", 10.0),
                VertexRecord::new("b", 9.0),
                VertexRecord::new("t", 1.0),
            ],
            vec![
                EdgeRecord::new("s", "b", 1.0),
                EdgeRecord::new("s", "a", 1.0),
                EdgeRecord::new("b", "t", 1.0),
                EdgeRecord::new("a", "t", 1.0),
            ],
        )
        .unwrap();
        assert_eq!(ids(&g, &critical_path(&g).unwrap()), ["s", "a", "t"]);
    }

    #[test]
    fn critical_path_ties_follow_smallest_id() {
        let g = DataflowGraph::new(
            vec![
                VertexRecord::new("a", 1.0),
                VertexRecord::new("b", 1.0),
                VertexRecord::new("c", 1.0),
            ],
            vec![
                EdgeRecord::new("b", "c", 0.0),
                EdgeRecord::new("a", "c", 0.0),
            ],
        )
        .unwrap();
        assert_eq!(ids(&g, &critical_path(&g).unwrap()), ["a", "c"]);
    }

    #[test]
    fn critical_path_of_empty_graph_fails() {
        let g = DataflowGraph::new(vec![], vec![]).unwrap();
        assert_eq!(critical_path(&g), Err(GraphError::Empty));
    }

    /// Random DAG on up to `max_n` vertices: edges only go from lower to
    /// higher position in a shuffled id order.
    fn arb_dag(max_n: usize) -> impl Strategy<Value = DataflowGraph> {
        (1..=max_n)
            .prop_flat_map(|n| {
                (
                    proptest::collection::vec(0u8..20, n),
                    proptest::collection::vec(any::<bool>(), n * (n - 1) / 2),
                    Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
                )
            })
            .prop_map(|(costs, mask, perm)| {
                let n = costs.len();
                let vertices = (0..n)
                    .map(|i| VertexRecord::new(format!("v{}", perm[i]), costs[i] as f64))
                    .collect();
                let mut edges = Vec::new();
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        if mask[k] {
                            edges.push(EdgeRecord::new(
                                format!("v{}", perm[i]),
                                format!("v{}", perm[j]),
                                1.0,
                            ));
                        }
                        k += 1;
                    }
                }
                DataflowGraph::new(vertices, edges).unwrap()
            })
    }

    proptest! {
        #[test]
        fn ranks_are_monotone_along_edges(g in arb_dag(10)) {
            let r = total_rank(&g);
            for e in g.edges() {
                prop_assert!(r.up[e.src] >= r.up[e.dst] + g.cost(e.src));
                prop_assert!(r.down[e.dst] >= r.down[e.src] + g.cost(e.dst));
            }
            for v in 0..g.len() {
                prop_assert_eq!(r.total[v], r.up[v] + r.down[v]);
                prop_assert!(r.up[v] >= g.cost(v) && r.down[v] >= g.cost(v));
            }
        }

        #[test]
        fn three_longest_path_routes_agree(g in arb_dag(10)) {
            let r = total_rank(&g);
            let path = critical_path(&g).unwrap();
            let via_down = g.sinks().map(|s| r.down[s]).fold(0.0, f64::max);
            let via_up = g.sources().map(|s| r.up[s]).fold(0.0, f64::max);
            prop_assert_eq!(via_down, via_up);
            prop_assert_eq!(via_down, path_cost(&g, &path));
            prop_assert!(g.is_source(path[0]));
            prop_assert!(g.is_sink(*path.last().unwrap()));
            for w in path.windows(2) {
                prop_assert!(g.successors(w[0]).iter().any(|&(s, _)| s == w[1]));
            }
        }

        #[test]
        fn virtual_sink_keeps_up_ranks(g in arb_dag(10)) {
            let h = g.add_virtual_sink().unwrap();
            let (before, after) = (up_rank(&g), up_rank(&h));
            for v in 0..g.len() {
                prop_assert_eq!(before[v], after[h.index_of(g.id(v)).unwrap()]);
            }
        }
    }
}
