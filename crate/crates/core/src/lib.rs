//! Automatic data layout selection for programs running on heterogeneous
//! (e.g. CPU+GPU) machines.
//!
//! The crate works in two levels. The per-section pass ([`ods`]) builds a
//! field affinity graph from a section's access groups and greedily
//! clusters fields under a device's capacity bound, yielding an AoS/SoA
//! hybrid layout. The whole-program pass ([`pdl`]) turns every contiguous
//! chain of sections into a candidate run, prices runs with an analytic
//! cost model (or measured tuning-profile entries) and boundaries with a
//! remap cost, and extracts the cheapest plan (layouts, device mapping,
//! and remap points) by shortest path over the resulting DAG.
//!
//! The [`oracle`] module carries the ground truth used to validate both
//! passes: exhaustive layout/plan search and a set-associative LRU cache
//! simulator.
//!
//! All numeric work is generic over the scalar type via [`scalar::Scalar`]
//! (any `num_traits::Float`); the `*64` aliases at the crate root pin the
//! common `f64` instantiation.

pub mod cost;
pub mod error;
pub mod io;
pub mod layout;
pub mod model;
pub mod ods;
pub mod oracle;
pub mod pdl;
pub mod scalar;

pub use cost::{combine_loss, exec_cost, remap_cost, remap_estimate, CostBreakdown, CostSource};
pub use error::{Error, Result};
pub use layout::Layout;
pub use model::{
    validate_program, validate_profile, AccessGroup, AccessPattern, Architecture, Device,
    Diagnostic, Field, FieldTable, Link, ProfileEntry, Program, Section, TuningProfile,
};
pub use ods::{build_affinity_graph, greedy_cluster, merge_sections, ods, AffinityGraph};
pub use oracle::{
    brute_force_ods, brute_force_plan, enumerate_layouts, simulate_misses, CacheConfig,
};
pub use pdl::{build_run_graph, explain_plan, shortest_plan, Plan, RunGraph};
pub use scalar::Scalar;

pub type Program64 = Program<f64>;
pub type Architecture64 = Architecture<f64>;
pub type TuningProfile64 = TuningProfile<f64>;
pub type AffinityGraph64 = AffinityGraph<f64>;
pub type CostBreakdown64 = CostBreakdown<f64>;
pub type RunGraph64 = RunGraph<f64>;
pub type Plan64 = Plan<f64>;
