//! Shared helpers for the integration suites: fixture loading and a
//! seeded random-instance generator.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use layplan::model::{
    AccessGroup, AccessPattern, Architecture, Device, Field, Link, ProfileEntry, Program, Section,
    TuningProfile,
};
use layplan::{io, ods};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn load_arch() -> Architecture<f64> {
    io::load_architecture(fixture_path("arch.json")).expect("arch fixture loads")
}

pub fn load_medical() -> (Program<f64>, Architecture<f64>, TuningProfile<f64>) {
    let p = io::load_program(fixture_path("medical.program.json")).expect("program loads");
    let prof = io::load_profile(fixture_path("medical.profile.json")).expect("profile loads");
    (p, load_arch(), prof)
}

pub fn load_kmeans() -> (Program<f64>, Architecture<f64>, TuningProfile<f64>) {
    let p = io::load_program(fixture_path("kmeans.program.json")).expect("program loads");
    let prof = io::load_profile(fixture_path("kmeans.profile.json")).expect("profile loads");
    (p, load_arch(), prof)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, options: &[T]) -> T {
    options[rng.gen_range(0..options.len())]
}

/// Random program/architecture pair (plus optional profile) within the
/// exhaustive-search guards: up to `max_sections` sections, up to
/// `max_fields` fields, one or two devices.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_sections: usize,
    max_fields: usize,
    with_profile: bool,
) -> (Program<f64>, Architecture<f64>, Option<TuningProfile<f64>>) {
    let field_count = rng.gen_range(1..=max_fields);
    let names = ["a", "b", "c", "d", "e", "f", "g", "h"];
    let fields: Vec<Field> = (0..field_count)
        .map(|i| Field {
            name: names[i].to_string(),
            elem_bytes: pick(rng, &[2u64, 4, 8]),
            decl_index: i,
        })
        .collect();

    let device_count = rng.gen_range(1..=2usize);
    let mut devices = vec![Device {
        name: "cpu".to_string(),
        line_bytes: pick(rng, &[32u64, 64]),
        line_time_ns: pick(rng, &[1.0, 2.0]),
        throughput_ops_per_ns: pick(rng, &[4.0, 8.0]),
        coalescing: false,
        stream_cluster_penalty: 2.0,
        cluster_capacity_bytes: pick(rng, &[8u64, 16, 32]),
    }];
    if device_count == 2 {
        devices.push(Device {
            name: "gpu".to_string(),
            line_bytes: pick(rng, &[64u64, 128]),
            line_time_ns: pick(rng, &[0.5, 4.0]),
            throughput_ops_per_ns: pick(rng, &[16.0, 64.0]),
            coalescing: true,
            stream_cluster_penalty: pick(rng, &[1.5, 2.0]),
            cluster_capacity_bytes: pick(rng, &[16u64, 32]),
        });
    }
    let device_names: Vec<String> = devices.iter().map(|d| d.name.clone()).collect();
    let links = if device_count == 2 {
        vec![Link {
            from: "cpu".to_string(),
            to: "gpu".to_string(),
            bandwidth_bytes_per_ns: pick(rng, &[4.0, 8.0, 16.0]),
            latency_ns: pick(rng, &[0.0, 100.0]),
        }]
    } else {
        Vec::new()
    };
    let arch = Architecture {
        devices,
        links,
        same_device_remap_bandwidth_bytes_per_ns: pick(rng, &[8.0, 16.0]),
        remap_fixed_overhead_ns: pick(rng, &[0.0, 50.0]),
    };

    let section_count = rng.gen_range(1..=max_sections);
    let mut sections = Vec::with_capacity(section_count);
    for si in 0..section_count {
        let group_count = rng.gen_range(1..=3usize);
        let mut groups = Vec::with_capacity(group_count);
        for _ in 0..group_count {
            let size = rng.gen_range(1..=field_count);
            let mut chosen: Vec<usize> = (0..field_count).collect();
            chosen.shuffle(rng);
            chosen.truncate(size);
            groups.push(AccessGroup {
                fields: chosen.iter().map(|&i| names[i].to_string()).collect(),
                freq: pick(rng, &[0.25, 0.5, 1.0, 2.0, 3.0]),
                pattern: if rng.gen_bool(0.5) {
                    AccessPattern::Irregular
                } else {
                    AccessPattern::Streaming
                },
                ops: pick(rng, &[0.0, 1.0, 2.0, 8.0]),
            });
        }
        let allowed: BTreeSet<String> = if device_count == 2 && rng.gen_bool(0.4) {
            BTreeSet::from([device_names[rng.gen_range(0..2)].clone()])
        } else {
            device_names.iter().cloned().collect()
        };
        sections.push(Section {
            id: format!("s{}", si + 1),
            trip_count: rng.gen_range(1..=64),
            groups,
            allowed_devices: allowed,
        });
    }

    let program = Program {
        name: "random".to_string(),
        record_count: pick(rng, &[64u64, 256, 1024]),
        order: sections.iter().map(|s| s.id.clone()).collect(),
        fields,
        sections,
    };

    let profile = if with_profile && rng.gen_bool(0.5) {
        let mut entries = Vec::new();
        for s in &program.sections {
            if !rng.gen_bool(0.4) {
                continue;
            }
            let allowed: Vec<&String> = s.allowed_devices.iter().collect();
            let dev_name = allowed[rng.gen_range(0..allowed.len())].clone();
            let device = arch.device(&dev_name).unwrap();
            if let Ok(layout) = ods(s, device, &program) {
                entries.push(ProfileEntry {
                    section: s.id.clone(),
                    device: dev_name,
                    layout: layout.canonical_string(),
                    time_ns: pick(rng, &[1000.0, 5000.0, 20000.0]),
                });
            }
        }
        Some(TuningProfile::from_entries(entries).unwrap())
    } else {
        None
    };

    (program, arch, profile)
}
