//! Instance builders and brute-force reference computations shared by the
//! integration tests. Nothing here calls into the algorithms under test.

#![allow(dead_code)]

use dfsched::cluster::{DeviceCluster, DeviceIndex, DeviceRecord};
use dfsched::graph::{DataflowGraph, EdgeRecord, VertexIndex, VertexRecord};
use dfsched::sim::ExecutionTrace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random DAG on `n` vertices with integer costs and volumes; edges only go
/// from lower to higher index, so any density is acyclic.
pub fn random_dag(
    rng: &mut ChaCha8Rng,
    n: usize,
    density: f64,
    max_cost: u32,
    max_volume: u32,
) -> (Vec<VertexRecord>, Vec<EdgeRecord>) {
    let vertices = (0..n)
        .map(|i| VertexRecord::new(format!("v{i}"), rng.gen_range(0..=max_cost) as f64))
        .collect();
    let mut edges = Vec::new();
    for j in 1..n {
        for i in 0..j {
            if rng.gen_bool(density) {
                edges.push(EdgeRecord::new(
                    format!("v{i}"),
                    format!("v{j}"),
                    rng.gen_range(0..=max_volume) as f64,
                ));
            }
        }
    }
    (vertices, edges)
}

pub fn random_cluster(rng: &mut ChaCha8Rng, k: usize, memory: f64) -> DeviceCluster {
    let devices = (0..k)
        .map(|d| DeviceRecord::new(format!("d{d}"), rng.gen_range(1..=5) as f64, memory))
        .collect();
    let matrix = (0..k)
        .map(|_| (0..k).map(|_| rng.gen_range(1..=10) as f64).collect())
        .collect();
    DeviceCluster::new(devices, matrix).unwrap()
}

/// Small instance with collocation pairs, device pins and memory that is
/// sometimes tight.
pub fn small_constrained_instance(
    seed: u64,
    max_vertices: usize,
    max_devices: usize,
) -> (DataflowGraph, DeviceCluster) {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=max_vertices);
    let k = rng.gen_range(1..=max_devices);
    let (mut vertices, edges) = random_dag(&mut rng, n, 0.4, 20, 20);
    let mut label = 0;
    for i in 0..n {
        if i + 1 < n && rng.gen_bool(0.25) {
            let j = rng.gen_range(i + 1..n);
            if vertices[i].colocation_group.is_none() && vertices[j].colocation_group.is_none() {
                vertices[i].colocation_group = Some(format!("g{label}"));
                vertices[j].colocation_group = Some(format!("g{label}"));
                label += 1;
            }
        }
    }
    for i in 0..n {
        if rng.gen_bool(0.2) {
            let d = format!("d{}", rng.gen_range(0..k));
            let group = vertices[i].colocation_group.clone();
            for v in vertices.iter_mut() {
                if v.id == format!("v{i}") || (group.is_some() && v.colocation_group == group) {
                    v.device_constraint = Some(d.clone());
                }
            }
        }
    }
    let total: f64 = edges.iter().map(|e| e.volume).sum();
    let memory = if rng.gen_bool(0.3) {
        total * 0.6 + 1.0
    } else {
        total + 1.0
    };
    let cluster = random_cluster(&mut rng, k, memory);
    (DataflowGraph::new(vertices, edges).unwrap(), cluster)
}

/// Every directed path, each listed once, by depth-first enumeration from
/// every vertex.
pub fn all_paths(graph: &DataflowGraph) -> Vec<Vec<VertexIndex>> {
    fn walk(graph: &DataflowGraph, path: &mut Vec<VertexIndex>, out: &mut Vec<Vec<VertexIndex>>) {
        out.push(path.clone());
        let last = *path.last().unwrap();
        for &(s, _) in graph.successors(last) {
            path.push(s);
            walk(graph, path, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    for v in 0..graph.len() {
        walk(graph, &mut vec![v], &mut out);
    }
    out
}

pub fn cost_of(graph: &DataflowGraph, path: &[VertexIndex]) -> f64 {
    path.iter().map(|&v| graph.cost(v)).sum()
}

/// Path computation time by direct recursion, no tables.
pub fn naive_pct(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    a: &[DeviceIndex],
    v: VertexIndex,
) -> f64 {
    let mut tail = 0.0f64;
    for &(s, e) in graph.successors(v) {
        let volume = graph.edge(e).volume;
        let transfer = if a[v] == a[s] || volume == 0.0 {
            0.0
        } else {
            volume / cluster.bandwidth(a[v], a[s])
        };
        tail = tail.max(naive_pct(graph, cluster, a, s) + transfer);
    }
    tail + graph.cost(v) / cluster.speed(a[v])
}

/// Peak tensor volume resident on each device. A tensor is resident from its
/// arrival up to and including its consumer's start, so the peak is reached
/// at some arrival; every arrival on the device is tried against every
/// tensor headed there.
pub fn naive_peaks(
    graph: &DataflowGraph,
    k: usize,
    a: &[DeviceIndex],
    trace: &ExecutionTrace,
) -> Vec<f64> {
    let mut resident: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); k];
    for (e, edge) in graph.edges().iter().enumerate() {
        resident[a[edge.dst]].push((trace.transfers[e].end, trace.start[edge.dst], edge.volume));
    }
    resident
        .iter()
        .map(|tensors| {
            tensors
                .iter()
                .map(|&(l, ..)| {
                    tensors
                        .iter()
                        .filter(|&&(from, to, _)| from <= l && l <= to)
                        .map(|t| t.2)
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Sum of in-edge volumes of the vertices placed on each device.
pub fn static_footprints(graph: &DataflowGraph, k: usize, a: &[DeviceIndex]) -> Vec<f64> {
    let mut out = vec![0.0; k];
    for edge in graph.edges() {
        out[a[edge.dst]] += edge.volume;
    }
    out
}

/// Heaviest source-to-sink path cost over the fastest speed.
pub fn lower_bound(graph: &DataflowGraph, cluster: &DeviceCluster) -> f64 {
    let mut best = vec![0.0f64; graph.len()];
    for &v in graph.topological_order() {
        let head = graph
            .predecessors(v)
            .iter()
            .map(|&(u, _)| best[u])
            .fold(0.0, f64::max);
        best[v] = head + graph.cost(v);
    }
    best.into_iter().fold(0.0, f64::max) / cluster.max_speed()
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}
