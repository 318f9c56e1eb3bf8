//! Synthetic layered instances.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Instance;
use crate::cluster::{ClusterError, DeviceCluster, DeviceRecord};
use crate::constraints::{build_groups, ConstraintError, PartialAssignment};
use crate::graph::{DataflowGraph, EdgeRecord, GraphError, VertexRecord};

/// Closed interval `[lo, hi]` sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }

    fn mean(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub vertices: usize,
    /// Edges per vertex; the graph gets `round(vertices * degree)` edges.
    pub degree: f64,
    /// Average number of vertices per layer.
    pub layer_width: usize,
    pub cost: Range,
    pub volume: Range,
    /// Share of vertices that end up in a collocation group of two or more.
    pub collocation_fraction: f64,
    pub max_group_size: usize,
    /// Share of groups pinned to a random device.
    pub device_constraint_fraction: f64,
    pub devices: usize,
    pub speed: Range,
    pub bandwidth: Range,
    pub memory: Range,
    pub seed: u64,
}

/// Named sizes modelled on three real convolutional and recurrent networks.
pub const PRESETS: [(&str, usize, f64, usize); 3] = [
    ("convolutional_network", 347, 531.0 / 347.0, 104),
    ("recurrent_network", 3069, 5533.0 / 3069.0, 533),
    ("dynamic_rnn", 5271, 9214.0 / 5271.0, 1356),
];

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams::preset("convolutional_network").expect("known preset")
    }
}

impl GeneratorParams {
    /// Parameters for one of [`PRESETS`] on 50 devices. Memory is scaled to
    /// the expected total edge volume so every device can hold a sizeable
    /// slice of the graph.
    pub fn preset(name: &str) -> Option<Self> {
        let &(_, vertices, degree, colocated) = PRESETS.iter().find(|p| p.0 == name)?;
        let volume = Range::new(1.0, 100.0);
        let total_volume = vertices as f64 * degree * volume.mean();
        Some(GeneratorParams {
            vertices,
            degree,
            layer_width: 8,
            cost: Range::new(1.0, 100.0),
            volume,
            collocation_fraction: colocated as f64 / vertices as f64,
            max_group_size: 4,
            device_constraint_fraction: 0.0,
            devices: 50,
            speed: Range::new(10.0, 100.0),
            bandwidth: Range::new(10.0, 60.0),
            memory: Range::new(0.1 * total_volume, 0.5 * total_volume),
            seed: 0,
        })
    }

    pub fn edge_target(&self) -> usize {
        (self.vertices as f64 * self.degree).round() as usize
    }

    fn check(&self) -> Result<(), GenerateError> {
        let bad = |what: &str| Err(GenerateError::InvalidParams(what.to_string()));
        for (name, r, positive) in [
            ("cost", self.cost, false),
            ("volume", self.volume, false),
            ("speed", self.speed, true),
            ("bandwidth", self.bandwidth, true),
            ("memory", self.memory, true),
        ] {
            if !(r.lo <= r.hi && r.lo.is_finite() && r.hi.is_finite())
                || r.lo < 0.0
                || (positive && r.lo <= 0.0)
            {
                return bad(&format!("{name} range [{}, {}]", r.lo, r.hi));
            }
        }
        if self.devices == 0 {
            return bad("device count must be positive");
        }
        if self.layer_width == 0 || self.max_group_size < 2 {
            return bad("layer width must be positive and group size at least 2");
        }
        if !(0.0..=1.0).contains(&self.collocation_fraction)
            || !(0.0..=1.0).contains(&self.device_constraint_fraction)
            || !(self.degree >= 0.0)
        {
            return bad("fractions must lie in [0, 1] and degree must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerateError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("{edges} edges cannot fit a layered graph of {vertices} vertices (possible range {min}..={max})")]
    Density {
        vertices: usize,
        edges: usize,
        min: usize,
        max: usize,
    },
    #[error("generated instance admits no feasible placement")]
    Infeasible,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
}

/// Builds a random layered instance. Identical parameters give identical
/// instances.
pub fn generate_instance(params: &GeneratorParams) -> Result<Instance, GenerateError> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.vertices;

    let layer_count = n.div_ceil(params.layer_width).max(1);
    // contiguous layers; every layer is nonempty since layer_count <= n
    let layer_of: Vec<usize> = (0..n).map(|v| v * layer_count / n.max(1)).collect();
    let mut layer_start = vec![n; layer_count + 1];
    for v in (0..n).rev() {
        layer_start[layer_of[v]] = v;
    }

    let first_layer = layer_start[1.min(layer_count)];
    let min_edges = n - first_layer;
    let max_edges: usize = (first_layer..n).map(|v| layer_start[layer_of[v]]).sum();
    let target = params.edge_target();
    if target < min_edges || target > max_edges {
        return Err(GenerateError::Density {
            vertices: n,
            edges: target,
            min: min_edges,
            max: max_edges,
        });
    }

    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(target);
    let mut seen = std::collections::HashSet::with_capacity(target);
    for v in first_layer..n {
        let l = layer_of[v];
        let u = rng.gen_range(layer_start[l - 1]..layer_start[l]);
        seen.insert((u, v));
        pairs.push((u, v));
    }
    // extra edges favour nearby layers: the span back is geometric
    let mut attempts = 0usize;
    while pairs.len() < target && attempts < 64 * target + 64 {
        attempts += 1;
        let v = rng.gen_range(first_layer..n);
        let l = layer_of[v];
        let mut back = 1;
        while back < l && rng.gen_bool(0.5) {
            back += 1;
        }
        let src_layer = l - back;
        let u = rng.gen_range(layer_start[src_layer]..layer_start[src_layer + 1]);
        if seen.insert((u, v)) {
            pairs.push((u, v));
        }
    }
    if pairs.len() < target {
        let mut rest: Vec<(usize, usize)> = (first_layer..n)
            .flat_map(|v| (0..layer_start[layer_of[v]]).map(move |u| (u, v)))
            .filter(|p| !seen.contains(p))
            .collect();
        rest.shuffle(&mut rng);
        pairs.extend(rest.into_iter().take(target - pairs.len()));
    }
    pairs.sort_unstable();

    let group = collocate(n, &pairs, params, &mut rng);
    let width = n.saturating_sub(1).to_string().len().max(4);
    let vid = |v: usize| format!("v{v:0width$}");
    let device_width = params.devices.saturating_sub(1).to_string().len().max(2);
    let did = |d: usize| format!("d{d:0device_width$}");

    let mut vertices: Vec<VertexRecord> = (0..n)
        .map(|v| {
            let mut record = VertexRecord::new(vid(v), params.cost.sample(&mut rng));
            record.colocation_group = group[v].map(|g| format!("g{g:0width$}"));
            record
        })
        .collect();
    let edges: Vec<EdgeRecord> = pairs
        .iter()
        .map(|&(u, v)| EdgeRecord::new(vid(u), vid(v), params.volume.sample(&mut rng)))
        .collect();

    let devices: Vec<DeviceRecord> = (0..params.devices)
        .map(|d| {
            DeviceRecord::new(
                did(d),
                params.speed.sample(&mut rng),
                params.memory.sample(&mut rng),
            )
        })
        .collect();
    let k = params.devices;
    let mut matrix = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let b = params.bandwidth.sample(&mut rng);
            matrix[i][j] = b;
            matrix[j][i] = b;
        }
    }

    if params.device_constraint_fraction > 0.0 {
        // pin whole groups so members never disagree
        let mut roots: Vec<usize> = (0..n)
            .filter(|&v| group[v].map_or(true, |g| g == v))
            .collect();
        roots.shuffle(&mut rng);
        let pinned = (roots.len() as f64 * params.device_constraint_fraction).round() as usize;
        for &root in &roots[..pinned] {
            let d = did(rng.gen_range(0..k));
            for v in 0..n {
                if v == root || (group[v].is_some() && group[v] == group[root]) {
                    vertices[v].device_constraint = Some(d.clone());
                }
            }
        }
    }

    let graph = DataflowGraph::new(vertices, edges)?;
    let cluster = DeviceCluster::new(devices, matrix)?;
    first_fit(&graph, &cluster)?;
    Ok(Instance { graph, cluster })
}

/// Merges endpoints of random edges into groups (labelled by their smallest
/// member) until the requested share of vertices is grouped.
fn collocate(
    n: usize,
    pairs: &[(usize, usize)],
    params: &GeneratorParams,
    rng: &mut ChaCha8Rng,
) -> Vec<Option<usize>> {
    let target = (n as f64 * params.collocation_fraction).round() as usize;
    let mut members: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut root: Vec<usize> = (0..n).collect();
    let mut grouped = 0;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(rng);
    for i in order {
        if grouped >= target {
            break;
        }
        let (a, b) = (root[pairs[i].0], root[pairs[i].1]);
        if a == b || members[a].len() + members[b].len() > params.max_group_size {
            continue;
        }
        grouped += [a, b].iter().filter(|&&r| members[r].len() == 1).count();
        let (keep, gone) = (a.min(b), a.max(b));
        let moved = std::mem::take(&mut members[gone]);
        for &v in &moved {
            root[v] = keep;
        }
        members[keep].extend(moved);
    }
    (0..n)
        .map(|v| (members[root[v]].len() > 1).then_some(root[v]))
        .collect()
}

/// Places groups one by one on the first device that takes them.
fn first_fit(graph: &DataflowGraph, cluster: &DeviceCluster) -> Result<(), GenerateError> {
    let groups = build_groups(graph)?;
    let mut current = PartialAssignment::new(graph, &groups, cluster);
    for g in 0..groups.len() {
        let d = crate::constraints::feasible_devices(g, &groups, cluster, &current)
            .first()
            .copied()
            .ok_or(GenerateError::Infeasible)?;
        current.assign(g, d, &groups);
    }
    Ok(())
}
