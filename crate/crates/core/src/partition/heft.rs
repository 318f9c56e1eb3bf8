//! HEFT adapted to placement constraints. Only the resulting assignment is
//! kept; execution order is left to the local schedulers.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{finish, require_feasible, Partition, PartitionError, Strategy};
use crate::cluster::{DeviceCluster, DeviceIndex};
use crate::constraints::{CollocationGroups, PartialAssignment};
use crate::graph::{DataflowGraph, VertexIndex};

/// Upward rank over mean execution and mean transfer times.
pub(crate) fn heft_ranks(graph: &DataflowGraph, cluster: &DeviceCluster) -> Vec<f64> {
    let k = cluster.len();
    let mean_inverse_speed = (0..k).map(|d| 1.0 / cluster.speed(d)).sum::<f64>() / k as f64;
    let inverse_rates: Vec<f64> = (0..k)
        .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| cluster.bandwidth(i, j))
        .filter(|&b| b > 0.0)
        .map(|b| 1.0 / b)
        .collect();
    let mean_inverse_rate = if inverse_rates.is_empty() {
        0.0
    } else {
        inverse_rates.iter().sum::<f64>() / inverse_rates.len() as f64
    };

    let mut rank = vec![0.0; graph.len()];
    for &v in graph.topological_order().iter().rev() {
        let tail = graph
            .successors(v)
            .iter()
            .map(|&(s, e)| graph.edge(e).volume * mean_inverse_rate + rank[s])
            .fold(0.0, f64::max);
        rank[v] = graph.cost(v) * mean_inverse_speed + tail;
    }
    rank
}

#[derive(PartialEq)]
struct Ready {
    rank: f64,
    vertex: VertexIndex,
}

impl Eq for Ready {}

impl Ord for Ready {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank
            .total_cmp(&other.rank)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Ready {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Earliest start of a `duration`-long job no earlier than `ready` that fits
/// in a gap of the sorted, disjoint `slots` or after the last one.
fn insertion_start(slots: &[(f64, f64)], ready: f64, duration: f64) -> f64 {
    let mut prev_end = 0.0f64;
    for &(start, end) in slots {
        let candidate = ready.max(prev_end);
        if candidate + duration <= start {
            return candidate;
        }
        prev_end = prev_end.max(end);
    }
    ready.max(prev_end)
}

fn insert_slot(slots: &mut Vec<(f64, f64)>, slot: (f64, f64)) {
    let at = slots.partition_point(|s| s.0 <= slot.0);
    slots.insert(at, slot);
}

/// Processes vertices by descending HEFT rank (among those whose
/// predecessors are already scheduled) and places each unplaced group on the
/// feasible device with the earliest finish time, using insertion-based slot
/// search. Members of an already placed group only get a slot.
pub fn heft_partition(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    groups: &CollocationGroups,
) -> Result<Partition, PartitionError> {
    let rank = heft_ranks(graph, cluster);
    let mut current = PartialAssignment::new(graph, groups, cluster);
    let mut slots: Vec<Vec<(f64, f64)>> = vec![Vec::new(); cluster.len()];
    let mut finish_time = vec![0.0; graph.len()];
    let mut waiting: Vec<usize> = (0..graph.len())
        .map(|v| graph.predecessors(v).len())
        .collect();
    let mut ready: BinaryHeap<Ready> = graph
        .sources()
        .map(|v| Ready {
            rank: rank[v],
            vertex: v,
        })
        .collect();

    while let Some(Ready { vertex: v, .. }) = ready.pop() {
        let g = groups.group_of(v);
        let devices = require_feasible(g, groups, cluster, &current)?;
        let mut best: Option<(f64, f64, DeviceIndex)> = None;
        for &d in &devices {
            let mut data_ready = 0.0f64;
            for &(u, e) in graph.predecessors(v) {
                let src = current
                    .device_of(u)
                    .expect("predecessors are scheduled first");
                let arrival = match cluster.transfer_time(graph.edge(e).volume, src, d) {
                    Ok(t) => finish_time[u] + t,
                    Err(_) => f64::INFINITY,
                };
                data_ready = data_ready.max(arrival);
            }
            let duration = cluster.exec_time(graph.cost(v), d);
            let start = insertion_start(&slots[d], data_ready, duration);
            if best.map_or(true, |(_, eft, _)| start + duration < eft) {
                best = Some((start, start + duration, d));
            }
        }
        let (start, eft, d) = best.expect("feasible set is nonempty");
        if current.group_device(g).is_none() {
            current.assign(g, d, groups);
        }
        insert_slot(&mut slots[d], (start, eft));
        finish_time[v] = eft;
        for &(s, _) in graph.successors(v) {
            waiting[s] -= 1;
            if waiting[s] == 0 {
                ready.push(Ready {
                    rank: rank[s],
                    vertex: s,
                });
            }
        }
    }
    Ok(finish(current, Strategy::Heft, None))
}
