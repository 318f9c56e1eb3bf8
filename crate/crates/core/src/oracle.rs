//! Exhaustive minimum-makespan solver for tiny instances.
//!
//! Every constraint-respecting group to device assignment is paired with
//! every per-device execution order that respects precedence, and each pair
//! is timed semi-actively: a vertex starts as soon as its device is free and
//! all its inputs have arrived. The simulator always produces such a
//! schedule for the order it happens to pick, so the minimum found here is a
//! lower bound for every policy the simulator runs.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cluster::{DeviceCluster, DeviceIndex};
use crate::constraints::{feasible_devices, CollocationGroups, PartialAssignment};
use crate::graph::{DataflowGraph, VertexIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_vertices: usize,
    pub max_devices: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_vertices: 8,
            max_devices: 3,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance too large: {vertices} vertices on {devices} devices (limit {max_vertices} and {max_devices})")]
    TooLarge {
        vertices: usize,
        devices: usize,
        max_vertices: usize,
        max_devices: usize,
    },
    #[error("infeasible instance: no assignment satisfies the placement constraints")]
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalSolution {
    pub makespan: f64,
    pub assignment: Vec<DeviceIndex>,
    pub device_order: Vec<Vec<VertexIndex>>,
    pub vertices: usize,
    pub devices: usize,
    /// Number of (assignment, order) pairs that were timed.
    pub evaluated: u64,
}

pub fn optimal(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    groups: &CollocationGroups,
    limits: Limits,
) -> Result<OptimalSolution, OracleError> {
    if graph.len() > limits.max_vertices || cluster.len() > limits.max_devices {
        return Err(OracleError::TooLarge {
            vertices: graph.len(),
            devices: cluster.len(),
            max_vertices: limits.max_vertices,
            max_devices: limits.max_devices,
        });
    }
    let mut assignments = Vec::new();
    enumerate_assignments(
        0,
        groups,
        cluster,
        &mut PartialAssignment::new(graph, groups, cluster),
        &mut assignments,
    );
    if assignments.is_empty() {
        return Err(OracleError::Infeasible);
    }
    let reach = reachability(graph);

    let best = assignments
        .par_iter()
        .map(|assignment| best_for_assignment(graph, cluster, assignment, &reach))
        .collect::<Vec<_>>();
    let evaluated = best.iter().map(|b| b.1).sum();
    // assignments were generated in lexicographic order, so the first minimum wins ties
    let winner = assignments
        .into_iter()
        .zip(best)
        .filter_map(|(a, (found, _))| found.map(|(m, order)| (a, m, order)))
        .reduce(|best, next| if next.1 < best.1 { next } else { best });
    match winner {
        Some((assignment, makespan, device_order)) => Ok(OptimalSolution {
            makespan,
            assignment,
            device_order,
            vertices: graph.len(),
            devices: cluster.len(),
            evaluated,
        }),
        None => Err(OracleError::Infeasible),
    }
}

/// Decision version: is there a schedule finishing strictly before `t_max`?
pub fn decision(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    groups: &CollocationGroups,
    t_max: f64,
    limits: Limits,
) -> Result<bool, OracleError> {
    Ok(optimal(graph, cluster, groups, limits)?.makespan < t_max)
}

/// Depth-first over groups in index order and devices in index order. Since
/// groups are numbered by their smallest member the output is sorted
/// lexicographically as vertex-level assignment vectors.
fn enumerate_assignments(
    g: usize,
    groups: &CollocationGroups,
    cluster: &DeviceCluster,
    current: &mut PartialAssignment,
    out: &mut Vec<Vec<DeviceIndex>>,
) {
    if g == groups.len() {
        out.push(
            current
                .clone()
                .into_assignment()
                .expect("every group is placed"),
        );
        return;
    }
    for d in feasible_devices(g, groups, cluster, current) {
        let mut next = current.clone();
        next.assign(g, d, groups);
        enumerate_assignments(g + 1, groups, cluster, &mut next, out);
    }
}

/// `reach[u][v]` is true when a directed path leads from `u` to `v`.
fn reachability(graph: &DataflowGraph) -> Vec<Vec<bool>> {
    let n = graph.len();
    let mut reach = vec![vec![false; n]; n];
    for &u in graph.topological_order().iter().rev() {
        for &(s, _) in graph.successors(u) {
            reach[u][s] = true;
            for v in 0..n {
                if reach[s][v] {
                    reach[u][v] = true;
                }
            }
        }
    }
    reach
}

/// Every ordering of `members` in which no vertex precedes one it depends on.
fn linear_extensions(members: &[VertexIndex], reach: &[Vec<bool>]) -> Vec<Vec<VertexIndex>> {
    fn extend(
        members: &[VertexIndex],
        reach: &[Vec<bool>],
        used: &mut Vec<bool>,
        prefix: &mut Vec<VertexIndex>,
        out: &mut Vec<Vec<VertexIndex>>,
    ) {
        if prefix.len() == members.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..members.len() {
            if used[i] {
                continue;
            }
            let v = members[i];
            let blocked = (0..members.len()).any(|j| !used[j] && j != i && reach[members[j]][v]);
            if blocked {
                continue;
            }
            used[i] = true;
            prefix.push(v);
            extend(members, reach, used, prefix, out);
            prefix.pop();
            used[i] = false;
        }
    }
    let mut out = Vec::new();
    extend(
        members,
        reach,
        &mut vec![false; members.len()],
        &mut Vec::new(),
        &mut out,
    );
    out
}

type Found = Option<(f64, Vec<Vec<VertexIndex>>)>;

fn best_for_assignment(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    assignment: &[DeviceIndex],
    reach: &[Vec<bool>],
) -> (Found, u64) {
    let k = cluster.len();
    // an unreachable link makes the assignment unusable
    for edge in graph.edges() {
        if cluster
            .transfer_time(edge.volume, assignment[edge.src], assignment[edge.dst])
            .is_err()
        {
            return (None, 0);
        }
    }
    let per_device: Vec<Vec<Vec<VertexIndex>>> = (0..k)
        .map(|d| {
            let members: Vec<VertexIndex> =
                (0..graph.len()).filter(|&v| assignment[v] == d).collect();
            linear_extensions(&members, reach)
        })
        .collect();

    let mut choice = vec![0usize; k];
    let mut best: Found = None;
    let mut evaluated = 0u64;
    loop {
        let orders: Vec<&Vec<VertexIndex>> = (0..k).map(|d| &per_device[d][choice[d]]).collect();
        evaluated += 1;
        if let Some(m) = semi_active_makespan(graph, cluster, assignment, &orders) {
            if best.as_ref().map_or(true, |(b, _)| m < *b) {
                best = Some((m, orders.iter().map(|o| o.to_vec()).collect()));
            }
        }
        // odometer over the per-device choices
        let mut d = 0;
        while d < k {
            choice[d] += 1;
            if choice[d] < per_device[d].len() {
                break;
            }
            choice[d] = 0;
            d += 1;
        }
        if d == k {
            break;
        }
    }
    (best, evaluated)
}

/// Times the fixed per-device orders; `None` when the orders deadlock.
fn semi_active_makespan(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    assignment: &[DeviceIndex],
    orders: &[&Vec<VertexIndex>],
) -> Option<f64> {
    let n = graph.len();
    let mut finish = vec![f64::NAN; n];
    let mut done = vec![false; n];
    let mut cursor = vec![0usize; orders.len()];
    let mut free = vec![0.0f64; orders.len()];
    let mut remaining = n;
    while remaining > 0 {
        let mut progressed = false;
        for d in 0..orders.len() {
            while let Some(&v) = orders[d].get(cursor[d]) {
                if !graph.predecessors(v).iter().all(|&(u, _)| done[u]) {
                    break;
                }
                let mut start = free[d];
                for &(u, e) in graph.predecessors(v) {
                    let transfer = cluster
                        .transfer_time(graph.edge(e).volume, assignment[u], d)
                        .expect("links checked up front");
                    start = start.max(finish[u] + transfer);
                }
                finish[v] = start + cluster.exec_time(graph.cost(v), d);
                free[d] = finish[v];
                done[v] = true;
                cursor[d] += 1;
                remaining -= 1;
                progressed = true;
            }
        }
        if !progressed {
            return None;
        }
    }
    Some(finish.iter().copied().fold(0.0, f64::max))
}
