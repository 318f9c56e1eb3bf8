//! Discrete-event execution of a partitioned graph.
//!
//! Two event kinds drive the loop: a tensor transfer completing and a vertex
//! finishing. Transfers start the instant their producer finishes, never
//! contend for links and overlap with computation. All events sharing a
//! timestamp are applied before any idle device picks its next vertex, and
//! devices pick in index order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::cluster::{ClusterError, DeviceCluster, DeviceIndex};
use crate::graph::{DataflowGraph, EdgeIndex, VertexIndex};
use crate::sched::{compute_pct, DecisionContext, Policy, SchedulerState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("assignment covers {got} vertices, graph has {expected}")]
    AssignmentLength { expected: usize, got: usize },
    #[error("vertex {vertex} assigned to unknown device index {device}")]
    UnknownDevice { vertex: String, device: DeviceIndex },
    #[error("deadlock: {finished} of {total} vertices finished and nothing is runnable")]
    Deadlock { finished: usize, total: usize },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transfer {
    pub start: f64,
    pub end: f64,
    pub src_device: DeviceIndex,
    pub dst_device: DeviceIndex,
}

/// Timing of one run. Vectors are indexed by vertex, edge and device index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionTrace {
    pub start: Vec<f64>,
    pub finish: Vec<f64>,
    pub transfers: Vec<Transfer>,
    /// Vertices in the order each device ran them.
    pub device_order: Vec<Vec<VertexIndex>>,
    /// Number of events the engine processed.
    pub events: usize,
}

impl ExecutionTrace {
    pub fn makespan(&self) -> f64 {
        self.finish.iter().copied().fold(0.0, f64::max)
    }

    /// Gaps between consecutive executions on `device` within `[0, makespan]`.
    pub fn idle_intervals(&self, device: DeviceIndex) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut cursor = 0.0;
        for &v in &self.device_order[device] {
            if self.start[v] > cursor {
                out.push((cursor, self.start[v]));
            }
            cursor = f64::max(cursor, self.finish[v]);
        }
        let end = self.makespan();
        if end > cursor {
            out.push((cursor, end));
        }
        out
    }

    /// One `kind,time,id,device` line per event, ordered by time. Transfers
    /// are named `src->dst` and report their destination device.
    pub fn export_lines(&self, graph: &DataflowGraph, cluster: &DeviceCluster) -> String {
        let mut rows: Vec<(f64, u8, usize, String)> = Vec::new();
        for (d, order) in self.device_order.iter().enumerate() {
            for &v in order {
                let dev = cluster.id(d);
                rows.push((
                    self.start[v],
                    2,
                    v,
                    format!("start,{},{},{dev}", self.start[v], graph.id(v)),
                ));
                rows.push((
                    self.finish[v],
                    1,
                    v,
                    format!("finish,{},{},{dev}", self.finish[v], graph.id(v)),
                ));
            }
        }
        for (e, t) in self.transfers.iter().enumerate() {
            let edge = graph.edge(e);
            let name = format!("{}->{}", graph.id(edge.src), graph.id(edge.dst));
            let dev = cluster.id(t.dst_device);
            rows.push((
                t.start,
                1,
                e,
                format!("transfer_start,{},{name},{dev}", t.start),
            ));
            rows.push((t.end, 0, e, format!("transfer_end,{},{name},{dev}", t.end)));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut out = String::from("kind,time,id,device\n");
        for (.., line) in rows {
            let _ = writeln!(out, "{line}");
        }
        out
    }
}

/// Highest active-edge volume on one device and the first time it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryPeak {
    pub usage: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryBreach {
    pub device: DeviceIndex,
    pub time: f64,
    pub usage: f64,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub makespan: f64,
    /// Busy time over makespan, per device.
    pub utilization: Vec<f64>,
    pub peak_memory: Vec<f64>,
    pub memory_violations: Vec<MemoryBreach>,
    pub event_count: usize,
}

impl SimReport {
    pub fn mean_utilization(&self) -> f64 {
        if self.utilization.is_empty() {
            0.0
        } else {
            self.utilization.iter().sum::<f64>() / self.utilization.len() as f64
        }
    }
}

/// Time at which the tensor of `e` is present on its consumer's device.
fn arrival(trace: &ExecutionTrace, e: EdgeIndex) -> f64 {
    trace.transfers[e].end
}

/// Edges whose tensor sits on device `j` at time `l`: arrived at or before
/// `l` and not yet consumed. A tensor still counts at the instant its
/// consumer starts.
pub fn active_edges(
    graph: &DataflowGraph,
    assignment: &[DeviceIndex],
    trace: &ExecutionTrace,
    l: f64,
    j: DeviceIndex,
) -> Vec<EdgeIndex> {
    graph
        .edges()
        .iter()
        .enumerate()
        .filter(|(e, edge)| {
            assignment[edge.dst] == j && arrival(trace, *e) <= l && l <= trace.start[edge.dst]
        })
        .map(|(e, _)| e)
        .collect()
}

/// Exact peak of the active-edge volume on every device. Each edge holds its
/// volume over the closed interval `[arrival, start(dst)]`, so at any instant
/// arrivals are applied, the level is sampled, and only then are consumed
/// tensors released.
pub fn memory_profile(
    graph: &DataflowGraph,
    devices: usize,
    assignment: &[DeviceIndex],
    trace: &ExecutionTrace,
) -> Vec<MemoryPeak> {
    // (time, release?, volume); arrivals sort before releases at equal times
    let mut changes: Vec<Vec<(f64, bool, f64)>> = vec![Vec::new(); devices];
    for (e, edge) in graph.edges().iter().enumerate() {
        if edge.volume > 0.0 {
            let d = assignment[edge.dst];
            changes[d].push((arrival(trace, e), false, edge.volume));
            changes[d].push((trace.start[edge.dst], true, edge.volume));
        }
    }
    changes
        .into_iter()
        .map(|mut deltas| {
            deltas.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut peak = MemoryPeak {
                usage: 0.0,
                time: 0.0,
            };
            let mut level = 0.0;
            for (t, release, volume) in deltas {
                if release {
                    level -= volume;
                } else {
                    level += volume;
                    if level > peak.usage {
                        peak = MemoryPeak {
                            usage: level,
                            time: t,
                        };
                    }
                }
            }
            peak
        })
        .collect()
}

/// Summarises a finished trace.
pub fn report(
    trace: &ExecutionTrace,
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    assignment: &[DeviceIndex],
) -> SimReport {
    let makespan = trace.makespan();
    let utilization = (0..cluster.len())
        .map(|d| {
            if makespan > 0.0 {
                let busy: f64 = trace.device_order[d]
                    .iter()
                    .map(|&v| trace.finish[v] - trace.start[v])
                    .sum();
                busy / makespan
            } else {
                0.0
            }
        })
        .collect();
    let peaks = memory_profile(graph, cluster.len(), assignment, trace);
    let memory_violations = peaks
        .iter()
        .enumerate()
        .filter(|(d, p)| p.usage >= cluster.memory(*d))
        .map(|(d, p)| MemoryBreach {
            device: d,
            time: p.time,
            usage: p.usage,
            capacity: cluster.memory(d),
        })
        .collect();
    SimReport {
        makespan,
        utilization,
        peak_memory: peaks.iter().map(|p| p.usage).collect(),
        memory_violations,
        event_count: trace.events,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    TransferComplete,
    VertexFinish,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
    id: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl Ord for Event {
    // reversed so the max-heap pops the earliest event first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind.cmp(&self.kind))
            .then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Executes `graph` under `assignment` with `policy`. `seed` drives FIFO's
/// tie-breaking and nothing else.
pub fn run(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    assignment: &[DeviceIndex],
    policy: &Policy,
    seed: u64,
) -> Result<(ExecutionTrace, SimReport), SimError> {
    let n = graph.len();
    let k = cluster.len();
    if assignment.len() != n {
        return Err(SimError::AssignmentLength {
            expected: n,
            got: assignment.len(),
        });
    }
    if let Some(v) = (0..n).find(|&v| assignment[v] >= k) {
        return Err(SimError::UnknownDevice {
            vertex: graph.id(v).to_string(),
            device: assignment[v],
        });
    }
    let pct = match policy {
        Policy::Pct => Some(compute_pct(graph, cluster, assignment)?),
        _ => None,
    };

    let mut state = SchedulerState::new(*policy, k, seed);
    let mut trace = ExecutionTrace {
        start: vec![f64::NAN; n],
        finish: vec![f64::NAN; n],
        transfers: graph
            .edges()
            .iter()
            .map(|e| Transfer {
                start: f64::NAN,
                end: f64::NAN,
                src_device: assignment[e.src],
                dst_device: assignment[e.dst],
            })
            .collect(),
        device_order: vec![Vec::new(); k],
        events: 0,
    };
    let mut missing: Vec<usize> = (0..n).map(|v| graph.predecessors(v).len()).collect();
    let mut idle = vec![true; k];
    let mut finished = 0;
    let mut heap = BinaryHeap::new();
    for v in graph.sources() {
        state.push(assignment[v], v, 0.0);
    }

    let mut now = 0.0;
    loop {
        while heap.peek().is_some_and(|e: &Event| e.time == now) {
            let event = heap.pop().expect("peeked");
            trace.events += 1;
            match event.kind {
                EventKind::VertexFinish => {
                    let v = event.id;
                    idle[assignment[v]] = true;
                    finished += 1;
                    for &(_, e) in graph.successors(v) {
                        let t = &mut trace.transfers[e];
                        let duration = cluster.transfer_time(
                            graph.edge(e).volume,
                            t.src_device,
                            t.dst_device,
                        )?;
                        t.start = now;
                        t.end = now + duration;
                        heap.push(Event {
                            time: t.end,
                            kind: EventKind::TransferComplete,
                            id: e,
                        });
                    }
                }
                EventKind::TransferComplete => {
                    let dst = graph.edge(event.id).dst;
                    missing[dst] -= 1;
                    if missing[dst] == 0 {
                        state.push(assignment[dst], dst, now);
                    }
                }
            }
        }

        for d in 0..k {
            if !idle[d] {
                continue;
            }
            // the deciding device is about to run something, so it is not idle
            idle[d] = false;
            let ctx = DecisionContext {
                graph,
                assignment,
                pct: pct.as_ref(),
                idle: &idle,
            };
            match state.pick_next(d, &ctx) {
                Some(v) => {
                    trace.start[v] = now;
                    trace.finish[v] = now + cluster.exec_time(graph.cost(v), d);
                    trace.device_order[d].push(v);
                    heap.push(Event {
                        time: trace.finish[v],
                        kind: EventKind::VertexFinish,
                        id: v,
                    });
                }
                None => idle[d] = true,
            }
        }

        match heap.peek() {
            Some(e) => now = e.time,
            None => break,
        }
    }

    if finished < n {
        return Err(SimError::Deadlock { finished, total: n });
    }
    let summary = report(&trace, graph, cluster, assignment);
    Ok((trace, summary))
}
