//! Per-device, non-preemptive local scheduling policies. Each answers one
//! question: which executable vertex does this idle device run next?
//!
//! * FIFO: earliest time of becoming executable, random among ties.
//! * PCT: highest upward path computation time (static, computed once).
//! * MSR: highest successor score, rewarding cross-device successors and the
//!   activation of idle devices (dynamic, reads device state at decision time).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ClusterError, DeviceCluster, DeviceIndex};
use crate::graph::{DataflowGraph, VertexIndex};

/// Weights of the four MSR terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsrWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for MsrWeights {
    fn default() -> Self {
        MsrWeights {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            delta: 5.0,
        }
    }
}

impl fmt::Display for MsrWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.alpha, self.beta, self.gamma, self.delta
        )
    }
}

impl FromStr for MsrWeights {
    type Err = SchedError;

    /// Parses `alpha,beta,gamma,delta`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SchedError::BadWeights(s.to_string());
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        match parts[..] {
            [alpha, beta, gamma, delta] if parts.iter().all(|w| w.is_finite()) => Ok(MsrWeights {
                alpha,
                beta,
                gamma,
                delta,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedError {
    #[error("unknown scheduling policy {0:?} (expected fifo|pct|msr)")]
    UnknownPolicy(String),
    #[error("bad MSR weights {0:?} (expected four comma-separated numbers)")]
    BadWeights(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    Fifo,
    Pct,
    Msr(MsrWeights),
}

impl Policy {
    pub const NAMES: [&'static str; 3] = ["fifo", "pct", "msr"];

    pub fn msr_default() -> Self {
        Policy::Msr(MsrWeights::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Fifo => "fifo",
            Policy::Pct => "pct",
            Policy::Msr(_) => "msr",
        }
    }

    /// Resolves a policy name; `weights` only applies to MSR.
    pub fn from_name(name: &str, weights: MsrWeights) -> Result<Self, SchedError> {
        match name {
            "fifo" => Ok(Policy::Fifo),
            "pct" => Ok(Policy::Pct),
            "msr" => Ok(Policy::Msr(weights)),
            other => Err(SchedError::UnknownPolicy(other.to_string())),
        }
    }

    pub fn all(weights: MsrWeights) -> [Policy; 3] {
        [Policy::Fifo, Policy::Pct, Policy::Msr(weights)]
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Upward path computation time per vertex for a fixed partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PctTable(pub Vec<f64>);

impl PctTable {
    pub fn get(&self, v: VertexIndex) -> f64 {
        self.0[v]
    }
}

/// Reverse-topological evaluation of
/// `pct(v) = max over successors s of (pct(s) + transfer(v -> s)) + exec(v)`.
pub fn compute_pct(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    assignment: &[DeviceIndex],
) -> Result<PctTable, ClusterError> {
    let mut pct = vec![0.0; graph.len()];
    for &v in graph.topological_order().iter().rev() {
        let mut tail = 0.0f64;
        for &(s, e) in graph.successors(v) {
            let transfer =
                cluster.transfer_time(graph.edge(e).volume, assignment[v], assignment[s])?;
            tail = tail.max(pct[s] + transfer);
        }
        pct[v] = tail + cluster.exec_time(graph.cost(v), assignment[v]);
    }
    Ok(PctTable(pct))
}

/// MSR score of `v`. `idle[d]` tells whether device `d` counts as idle at
/// the moment of the decision.
pub fn msr_score(
    v: VertexIndex,
    graph: &DataflowGraph,
    assignment: &[DeviceIndex],
    idle: &[bool],
    weights: &MsrWeights,
) -> f64 {
    let indicator = |b: bool| if b { 1.0 } else { 0.0 };
    graph
        .successors(v)
        .iter()
        .map(|&(s, _)| {
            let single_input = graph.predecessors(s).len() == 1;
            weights.alpha
                + weights.beta * indicator(assignment[s] != assignment[v])
                + weights.gamma * indicator(single_input)
                + weights.delta * indicator(idle[assignment[s]] && single_input)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadyEntry {
    pub vertex: VertexIndex,
    /// Time at which every input tensor had arrived.
    pub ready_at: f64,
}

/// Read-only view handed to the policy at each decision.
pub struct DecisionContext<'a> {
    pub graph: &'a DataflowGraph,
    pub assignment: &'a [DeviceIndex],
    pub pct: Option<&'a PctTable>,
    pub idle: &'a [bool],
}

/// Ready queues of every device plus the policy's own state.
#[derive(Debug, Clone)]
pub struct SchedulerState {
    policy: Policy,
    queues: Vec<Vec<ReadyEntry>>,
    rng: ChaCha8Rng,
}

impl SchedulerState {
    pub fn new(policy: Policy, devices: usize, seed: u64) -> Self {
        SchedulerState {
            policy,
            queues: vec![Vec::new(); devices],
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    /// Marks `vertex` executable on `device`.
    pub fn push(&mut self, device: DeviceIndex, vertex: VertexIndex, ready_at: f64) {
        self.queues[device].push(ReadyEntry { vertex, ready_at });
    }

    pub fn queue(&self, device: DeviceIndex) -> &[ReadyEntry] {
        &self.queues[device]
    }

    /// Removes and returns the vertex `device` should run next, or `None`
    /// when nothing assigned to it is executable.
    pub fn pick_next(
        &mut self,
        device: DeviceIndex,
        ctx: &DecisionContext<'_>,
    ) -> Option<VertexIndex> {
        let queue = &self.queues[device];
        if queue.is_empty() {
            return None;
        }
        let position = match &self.policy {
            Policy::Fifo => {
                let earliest = queue
                    .iter()
                    .map(|r| r.ready_at)
                    .fold(f64::INFINITY, f64::min);
                let mut tied: Vec<usize> = (0..queue.len())
                    .filter(|&i| queue[i].ready_at == earliest)
                    .collect();
                tied.sort_by_key(|&i| queue[i].vertex);
                if tied.len() == 1 {
                    tied[0]
                } else {
                    tied[self.rng.gen_range(0..tied.len())]
                }
            }
            Policy::Pct => {
                let pct = ctx.pct.expect("PCT policy needs a PCT table");
                best_position(queue, |v| pct.get(v))
            }
            Policy::Msr(weights) => best_position(queue, |v| {
                msr_score(v, ctx.graph, ctx.assignment, ctx.idle, weights)
            }),
        };
        Some(self.queues[device].swap_remove(position).vertex)
    }
}

/// Position of the highest-scoring entry, ties by smallest vertex index.
fn best_position(queue: &[ReadyEntry], score: impl Fn(VertexIndex) -> f64) -> usize {
    let mut best = 0;
    let mut best_score = score(queue[0].vertex);
    for (i, entry) in queue.iter().enumerate().skip(1) {
        let s = score(entry.vertex);
        if s > best_score || (s == best_score && entry.vertex < queue[best].vertex) {
            best = i;
            best_score = s;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::fixtures::cluster;
    use crate::graph::fixtures::{chain, diamond};
    use crate::graph::{EdgeRecord, VertexRecord};
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    #[test]
    fn pct_chain_same_device() {
        let g = chain(&[2.0, 3.0], 10.0);
        let c = cluster(&[1.0], 5.0);
        assert_eq!(compute_pct(&g, &c, &[0, 0]).unwrap().0, vec![5.0, 3.0]);
    }

    #[test]
    fn pct_chain_split() {
        let g = chain(&[2.0, 3.0], 10.0);
        let c = cluster(&[1.0, 1.0], 5.0);
        assert_eq!(compute_pct(&g, &c, &[0, 1]).unwrap().0, vec![7.0, 3.0]);
    }

    #[test]
    fn pct_diamond_single_device() {
        let g = diamond();
        let c = cluster(&[1.0], 1.0);
        assert_eq!(
            compute_pct(&g, &c, &[0; 4]).unwrap().0,
            vec![7.0, 4.0, 5.0, 1.0]
        );
    }

    #[test]
    fn pct_reports_unreachable_link() {
        let g = chain(&[1.0, 1.0], 1.0);
        let c = cluster(&[1.0, 1.0], 0.0);
        assert!(compute_pct(&g, &c, &[0, 1]).is_err());
    }

    /// v -> s1 (s1 also fed by w, same device as v), v -> s2 (other device, only input)
    fn msr_fixture() -> (DataflowGraph, Vec<DeviceIndex>) {
        let g = DataflowGraph::new(
            vec![
                VertexRecord::new("s1", 1.0),
                VertexRecord::new("s2", 1.0),
                VertexRecord::new("v", 1.0),
                VertexRecord::new("w", 1.0),
            ],
            vec![
                EdgeRecord::new("v", "s1", 1.0),
                EdgeRecord::new("w", "s1", 1.0),
                EdgeRecord::new("v", "s2", 1.0),
            ],
        )
        .unwrap();
        // s1 d0, s2 d1, v d0, w d0
        (g, vec![0, 1, 0, 0])
    }

    #[test]
    fn msr_examples() {
        let (g, assignment) = msr_fixture();
        let v = g.index_of("v").unwrap();
        let idle = [false, true];
        let ones = MsrWeights {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            delta: 1.0,
        };
        assert_eq!(msr_score(v, &g, &assignment, &idle, &ones), 5.0);
        assert_eq!(
            msr_score(v, &g, &assignment, &idle, &MsrWeights::default()),
            9.0
        );
        let sink = g.index_of("s2").unwrap();
        assert_eq!(msr_score(sink, &g, &assignment, &idle, &ones), 0.0);
    }

    #[test]
    fn weights_parse() {
        assert_eq!(
            "1,1,1,5".parse::<MsrWeights>().unwrap(),
            MsrWeights::default()
        );
        assert!("1,2,3".parse::<MsrWeights>().is_err());
        assert!("a,b,c,d".parse::<MsrWeights>().is_err());
        assert_eq!(MsrWeights::default().to_string(), "1,1,1,5");
    }

    #[test]
    fn policy_names() {
        for name in Policy::NAMES {
            assert_eq!(
                Policy::from_name(name, MsrWeights::default())
                    .unwrap()
                    .name(),
                name
            );
        }
        assert!(Policy::from_name("lifo", MsrWeights::default()).is_err());
    }

    fn ctx<'a>(
        g: &'a DataflowGraph,
        a: &'a [DeviceIndex],
        pct: Option<&'a PctTable>,
        idle: &'a [bool],
    ) -> DecisionContext<'a> {
        DecisionContext {
            graph: g,
            assignment: a,
            pct,
            idle,
        }
    }

    #[test]
    fn fifo_takes_earliest() {
        let g = diamond();
        let a = [0; 4];
        let mut state = SchedulerState::new(Policy::Fifo, 1, 0);
        state.push(0, 1, 1.0);
        state.push(0, 2, 0.0);
        assert_eq!(state.pick_next(0, &ctx(&g, &a, None, &[true])), Some(2));
        assert_eq!(state.pick_next(0, &ctx(&g, &a, None, &[true])), Some(1));
        assert_eq!(state.pick_next(0, &ctx(&g, &a, None, &[true])), None);
    }

    #[test]
    fn fifo_ties_are_random_but_seeded() {
        let g = DataflowGraph::new(
            (0..8)
                .map(|i| VertexRecord::new(format!("v{i}"), 1.0))
                .collect(),
            vec![],
        )
        .unwrap();
        let a = [0; 8];
        let drain = |seed| {
            let mut state = SchedulerState::new(Policy::Fifo, 1, seed);
            for v in 0..8 {
                state.push(0, v, 0.0);
            }
            std::iter::from_fn(|| state.pick_next(0, &ctx(&g, &a, None, &[true])))
                .collect::<Vec<_>>()
        };
        assert_eq!(drain(3), drain(3));
        assert!((0..20).any(|s| drain(s) != drain(3)));
    }

    #[test]
    fn pct_takes_highest() {
        let g = diamond();
        let c = cluster(&[1.0], 1.0);
        let a = [0; 4];
        let pct = compute_pct(&g, &c, &a).unwrap();
        let mut state = SchedulerState::new(Policy::Pct, 1, 0);
        state.push(0, 1, 0.0);
        state.push(0, 2, 0.0);
        assert_eq!(
            state.pick_next(0, &ctx(&g, &a, Some(&pct), &[true])),
            Some(2)
        );
    }

    /// Path computation time by plain recursion, no memoisation.
    fn naive_pct(g: &DataflowGraph, c: &DeviceCluster, a: &[DeviceIndex], v: VertexIndex) -> f64 {
        let mut tail = 0.0f64;
        for &(s, e) in g.successors(v) {
            let t = c.transfer_time(g.edge(e).volume, a[v], a[s]).unwrap();
            tail = tail.max(naive_pct(g, c, a, s) + t);
        }
        tail + c.exec_time(g.cost(v), a[v])
    }

    proptest! {
        #[test]
        fn pct_matches_naive_recursion(n in 1usize..10, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vertices = (0..n).map(|i| VertexRecord::new(format!("v{i}"), rng.gen_range(0..10) as f64)).collect();
            let mut edges = Vec::new();
            for j in 1..n { for i in 0..j { if rng.gen_bool(0.35) {
                edges.push(EdgeRecord::new(format!("v{i}"), format!("v{j}"), rng.gen_range(0..10) as f64));
            }}}
            let g = DataflowGraph::new(vertices, edges).unwrap();
            let c = cluster(&[1.0, 2.0, 5.0], 3.0);
            let a: Vec<DeviceIndex> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let table = compute_pct(&g, &c, &a).unwrap();
            for v in 0..n {
                prop_assert_eq!(table.get(v), naive_pct(&g, &c, &a, v));
                prop_assert!(table.get(v) >= c.exec_time(g.cost(v), a[v]));
            }
        }

        #[test]
        fn msr_is_monotone_in_weights(
            base in proptest::array::uniform4(0.0f64..10.0),
            bump in 0.0f64..5.0,
            which in 0usize..4,
            idle1 in any::<bool>(),
        ) {
            let (g, a) = msr_fixture();
            let w = MsrWeights { alpha: base[0], beta: base[1], gamma: base[2], delta: base[3] };
            let mut raised = base;
            raised[which] += bump;
            let w2 = MsrWeights { alpha: raised[0], beta: raised[1], gamma: raised[2], delta: raised[3] };
            let idle = [false, idle1];
            for v in 0..g.len() {
                prop_assert!(msr_score(v, &g, &a, &idle, &w2) >= msr_score(v, &g, &a, &idle, &w));
            }
        }
    }
}
