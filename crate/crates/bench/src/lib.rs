//! Fixed instances shared by the benchmarks.

use dfsched::workbench::{generate_instance, GeneratorParams};
use dfsched::{build_groups, CollocationGroups, Instance};

/// A generated preset instance together with its collocation groups.
pub fn preset(name: &str, seed: u64) -> (Instance, CollocationGroups) {
    let mut params = GeneratorParams::preset(name).expect("known preset");
    params.seed = seed;
    let instance = generate_instance(&params).expect("preset parameters are feasible");
    let groups = build_groups(&instance.graph).expect("generated groups are consistent");
    (instance, groups)
}

/// A small instance the exhaustive search finishes on in milliseconds.
pub fn small(vertices: usize, devices: usize, seed: u64) -> (Instance, CollocationGroups) {
    let params = GeneratorParams {
        vertices,
        degree: 1.0,
        layer_width: 2,
        collocation_fraction: 0.0,
        devices,
        seed,
        ..GeneratorParams::default()
    };
    let instance = generate_instance(&params).expect("small parameters are feasible");
    let groups = build_groups(&instance.graph).expect("no collocation");
    (instance, groups)
}
