use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{finish, require_feasible, Partition, PartitionError, Strategy};
use crate::cluster::DeviceCluster;
use crate::constraints::{CollocationGroups, PartialAssignment};
use crate::graph::DataflowGraph;

/// Places each group on a random feasible device, drawn with probability
/// proportional to the device's memory capacity.
pub fn hash_partition(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    groups: &CollocationGroups,
    seed: u64,
) -> Result<Partition, PartitionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = PartialAssignment::new(graph, groups, cluster);
    for g in 0..groups.len() {
        let devices = require_feasible(g, groups, cluster, &current)?;
        let d = if devices.len() == 1 {
            devices[0]
        } else {
            let weights = WeightedIndex::new(devices.iter().map(|&d| cluster.memory(d)))
                .expect("capacities are positive");
            devices[weights.sample(&mut rng)]
        };
        current.assign(g, d, groups);
    }
    Ok(finish(current, Strategy::Hash, Some(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::DeviceRecord;
    use crate::constraints::build_groups;
    use crate::graph::VertexRecord;

    fn isolated(n: usize) -> DataflowGraph {
        DataflowGraph::new(
            (0..n)
                .map(|i| VertexRecord::new(format!("v{i:05}"), 1.0))
                .collect(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn single_device_takes_everything() {
        let g = isolated(20);
        let c = DeviceCluster::uniform(vec![DeviceRecord::new("d", 1.0, 5.0)], 1.0).unwrap();
        let groups = build_groups(&g).unwrap();
        for seed in 0..5 {
            let p = hash_partition(&g, &c, &groups, seed).unwrap();
            assert!(p.assignment.iter().all(|&d| d == 0));
            assert_eq!(p.seed, Some(seed));
        }
    }

    #[test]
    fn draws_follow_capacity() {
        let g = isolated(10_000);
        let c = DeviceCluster::uniform(
            vec![
                DeviceRecord::new("d1", 1.0, 90.0),
                DeviceRecord::new("d2", 1.0, 10.0),
            ],
            1.0,
        )
        .unwrap();
        let groups = build_groups(&g).unwrap();
        let p = hash_partition(&g, &c, &groups, 2024).unwrap();
        let on_d1 = p.assignment.iter().filter(|&&d| d == 0).count() as f64 / 10_000.0;
        assert!((on_d1 - 0.9).abs() <= 0.02, "d1 frequency {on_d1}");
    }

    #[test]
    fn same_seed_same_partition() {
        let g = isolated(50);
        let c = DeviceCluster::uniform(
            (0..5)
                .map(|i| DeviceRecord::new(format!("d{i}"), 1.0, 10.0 + i as f64))
                .collect(),
            1.0,
        )
        .unwrap();
        let groups = build_groups(&g).unwrap();
        let a = hash_partition(&g, &c, &groups, 9).unwrap();
        assert_eq!(a, hash_partition(&g, &c, &groups, 9).unwrap());
        assert_ne!(a, hash_partition(&g, &c, &groups, 10).unwrap());
    }
}
