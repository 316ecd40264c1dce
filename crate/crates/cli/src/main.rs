//! Batch front door: loads program/architecture/profile files, runs the
//! layout passes, and writes plans, reports, DOT graphs, and oracle
//! verdicts.
//!
//! Exit status: 0 on success, 1 on validation failure (diagnostics on
//! stderr), 2 on I/O or parse failure. All outputs are deterministic for
//! fixed inputs and seed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use layplan::model::{Architecture, Program, TuningProfile};
use layplan::{
    brute_force_ods, brute_force_plan, build_affinity_graph, build_run_graph, exec_cost, io, ods,
    oracle, shortest_plan, validate_program, validate_profile, CacheConfig, Error, Layout,
};

#[derive(Parser)]
#[command(
    name = "layplan",
    version,
    about = "Data layout selection for heterogeneous programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-section layouts for one device
    Ods(OdsArgs),
    /// Whole-program plan: layouts, device mapping, remap points
    Pdl(PdlArgs),
    /// Human-readable report of the whole-program plan
    Explain(CommonArgs),
    /// Replay one section through a set-associative LRU cache
    Simulate(SimulateArgs),
    /// Greedy-vs-exhaustive and plan-equivalence verdicts
    OracleCheck(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Program description (JSON)
    #[arg(long)]
    program: PathBuf,
    /// Architecture description (JSON)
    #[arg(long)]
    arch: PathBuf,
    /// Tuning profile (JSON) overriding the analytic model
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for every pseudorandom draw
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OdsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Target device name
    #[arg(long)]
    device: String,
    /// Also write the affinity graphs as DOT next to --out
    #[arg(long, requires = "out")]
    dot: bool,
}

#[derive(Args)]
struct PdlArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write the run graph (chosen path highlighted) as DOT next to --out
    #[arg(long, requires = "out")]
    dot: bool,
    /// Also write the human-readable report to this path
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Device providing the line size (and the default layout)
    #[arg(long)]
    device: String,
    /// Section to replay
    #[arg(long)]
    section: String,
    /// Layout to replay under (canonical string); defaults to the
    /// section's per-device layout
    #[arg(long)]
    layout: Option<String>,
    /// Iterations to replay
    #[arg(long, default_value_t = 4096)]
    iters: u64,
    /// Total cache capacity in bytes
    #[arg(long, default_value_t = 32768)]
    cache_bytes: u64,
    /// Cache associativity
    #[arg(long, default_value_t = 8)]
    ways: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io_or_parse() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

struct Inputs {
    program: Program<f64>,
    arch: Architecture<f64>,
    profile: Option<TuningProfile<f64>>,
}

/// Load all inputs and reject invalid ones with diagnostics on stderr.
fn load(common: &CommonArgs) -> Result<Inputs, Error> {
    let program: Program<f64> = io::load_program(&common.program)?;
    let arch: Architecture<f64> = io::load_architecture(&common.arch)?;
    let profile: Option<TuningProfile<f64>> = match &common.profile {
        Some(path) => Some(io::load_profile(path)?),
        None => None,
    };

    let mut diagnostics = validate_program(&program, &arch);
    if let Some(prof) = &profile {
        diagnostics.extend(validate_profile(prof, &program, &arch));
    }
    if !diagnostics.is_empty() {
        for d in &diagnostics {
            eprintln!("invalid input: {d}");
        }
        return Err(Error::InvalidInput(format!(
            "{} validation issue(s)",
            diagnostics.len()
        )));
    }
    Ok(Inputs {
        program,
        arch,
        profile,
    })
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn dot_path(out: &Path) -> PathBuf {
    out.with_extension("dot")
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
    text.push('\n');
    text
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Ods(args) => run_ods(args),
        Command::Pdl(args) => run_pdl(args),
        Command::Explain(args) => run_explain(args),
        Command::Simulate(args) => run_simulate(args),
        Command::OracleCheck(args) => run_oracle_check(args),
    }
}

#[derive(Serialize)]
struct SectionLayout {
    section: String,
    layout: Layout,
}

#[derive(Serialize)]
struct OdsOutput<'a> {
    schema_version: u64,
    program: &'a str,
    device: &'a str,
    layouts: Vec<SectionLayout>,
    skipped_sections: Vec<String>,
}

fn run_ods(args: OdsArgs) -> Result<(), Error> {
    let inputs = load(&args.common)?;
    let device = inputs
        .arch
        .device(&args.device)
        .ok_or_else(|| Error::UnknownDevice {
            device: args.device.clone(),
        })?;

    let mut layouts = Vec::new();
    let mut skipped = Vec::new();
    let mut dot = String::new();
    let table = inputs.program.field_table()?;
    for section in inputs.program.sections_in_order()? {
        if !section.allowed_devices.contains(&device.name) {
            skipped.push(section.id.clone());
            continue;
        }
        let layout = ods(section, device, &inputs.program)?;
        if args.dot {
            let graph = build_affinity_graph(section, device, &table)?;
            dot.push_str(&graph.to_dot(&format!("affinity_{}_{}", section.id, device.name)));
        }
        layouts.push(SectionLayout {
            section: section.id.clone(),
            layout,
        });
    }

    let output = OdsOutput {
        schema_version: io::SCHEMA_VERSION,
        program: &inputs.program.name,
        device: &device.name,
        layouts,
        skipped_sections: skipped,
    };
    emit(args.common.out.as_ref(), &json_line(&output))?;
    if args.dot {
        let out = args.common.out.as_ref().expect("--dot requires --out");
        std::fs::write(dot_path(out), dot)?;
    }
    Ok(())
}

fn run_pdl(args: PdlArgs) -> Result<(), Error> {
    let inputs = load(&args.common)?;
    let graph = build_run_graph(&inputs.program, &inputs.arch, inputs.profile.as_ref())?;
    let plan = shortest_plan(&graph)?;

    emit(
        args.common.out.as_ref(),
        &io::plan_to_json(&plan, &inputs.program.name),
    )?;
    if let Some(report_path) = &args.report {
        std::fs::write(report_path, layplan::explain_plan(&plan, &inputs.program))?;
    }
    if args.dot {
        let out = args.common.out.as_ref().expect("--dot requires --out");
        std::fs::write(dot_path(out), graph.to_dot(Some(&plan)))?;
    }
    Ok(())
}

fn run_explain(args: CommonArgs) -> Result<(), Error> {
    let inputs = load(&args)?;
    let graph = build_run_graph(&inputs.program, &inputs.arch, inputs.profile.as_ref())?;
    let plan = shortest_plan(&graph)?;
    emit(args.out.as_ref(), &layplan::explain_plan(&plan, &inputs.program))
}

#[derive(Serialize)]
struct CacheShape {
    line_bytes: u64,
    num_sets: u64,
    ways: usize,
    total_bytes: u64,
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    schema_version: u64,
    program: &'a str,
    section: &'a str,
    device: &'a str,
    layout: Layout,
    iters: u64,
    seed: u64,
    cache: CacheShape,
    accesses: u64,
    misses: u64,
}

fn run_simulate(args: SimulateArgs) -> Result<(), Error> {
    let inputs = load(&args.common)?;
    let device = inputs
        .arch
        .device(&args.device)
        .ok_or_else(|| Error::UnknownDevice {
            device: args.device.clone(),
        })?;
    let section = inputs
        .program
        .section(&args.section)
        .ok_or_else(|| Error::UnknownSection {
            section: args.section.clone(),
        })?;

    let table = inputs.program.field_table()?;
    let layout = match &args.layout {
        Some(text) => Layout::parse(text)?.canonicalized(&table)?,
        None => ods(section, device, &inputs.program)?,
    };
    let cfg = CacheConfig::with_capacity(args.cache_bytes, device.line_bytes, args.ways)?;
    let misses = layplan::simulate_misses(
        section,
        &layout,
        cfg,
        &inputs.program,
        args.iters,
        args.common.seed,
    )?;
    let accesses: u64 = args.iters
        * section
            .groups
            .iter()
            .map(|g| g.fields.len() as u64)
            .sum::<u64>();

    let output = SimulateOutput {
        schema_version: io::SCHEMA_VERSION,
        program: &inputs.program.name,
        section: &section.id,
        device: &device.name,
        layout,
        iters: args.iters,
        seed: args.common.seed,
        cache: CacheShape {
            line_bytes: cfg.line_bytes,
            num_sets: cfg.num_sets,
            ways: cfg.ways,
            total_bytes: cfg.total_bytes(),
        },
        accesses,
        misses,
    };
    emit(args.common.out.as_ref(), &json_line(&output))
}

#[derive(Serialize)]
struct OdsCheck {
    section: String,
    device: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    layouts_equal: Option<bool>,
    /// Greedy found a layout as cheap as the exhaustive optimum.
    #[serde(skip_serializing_if = "Option::is_none")]
    cost_matches: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    greedy_layout: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_layout: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    greedy_cost_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_cost_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cost_ratio: Option<f64>,
}

#[derive(Serialize)]
struct PlanCheck {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    totals_equal: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shortest_total_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_total_ns: Option<f64>,
}

#[derive(Serialize)]
struct OracleCheckOutput<'a> {
    schema_version: u64,
    program: &'a str,
    ods_checks: Vec<OdsCheck>,
    plan_check: PlanCheck,
    all_ok: bool,
}

fn run_oracle_check(args: CommonArgs) -> Result<(), Error> {
    let inputs = load(&args)?;
    let program = &inputs.program;
    let mut all_ok = true;

    let mut ods_checks = Vec::new();
    for section in program.sections_in_order()? {
        for device in &inputs.arch.devices {
            if !section.allowed_devices.contains(&device.name) {
                continue;
            }
            let touched = section.touched_fields().len();
            if touched > oracle::MAX_ENUM_FIELDS {
                ods_checks.push(OdsCheck {
                    section: section.id.clone(),
                    device: device.name.clone(),
                    status: "skipped",
                    reason: Some(format!(
                        "{touched} fields exceed the exhaustive bound of {}",
                        oracle::MAX_ENUM_FIELDS
                    )),
                    layouts_equal: None,
                    cost_matches: None,
                    greedy_layout: None,
                    oracle_layout: None,
                    greedy_cost_ns: None,
                    oracle_cost_ns: None,
                    cost_ratio: None,
                });
                continue;
            }
            let greedy_layout = ods(section, device, program)?;
            let greedy_cost = exec_cost(section, &greedy_layout, device, program, None)?.total_ns;
            let (oracle_layout, oracle_cost) = brute_force_ods(section, device, program)?;
            // Cost ties can leave several optimal layouts; the verdict is
            // about the cost gap, layout identity is informational.
            let cost_matches = greedy_cost <= oracle_cost * (1.0 + 1e-12);
            all_ok &= cost_matches;
            ods_checks.push(OdsCheck {
                section: section.id.clone(),
                device: device.name.clone(),
                status: "ok",
                reason: None,
                layouts_equal: Some(greedy_layout == oracle_layout),
                cost_matches: Some(cost_matches),
                greedy_layout: Some(greedy_layout.canonical_string()),
                oracle_layout: Some(oracle_layout.canonical_string()),
                greedy_cost_ns: Some(greedy_cost),
                oracle_cost_ns: Some(oracle_cost),
                cost_ratio: Some(greedy_cost / oracle_cost),
            });
        }
    }

    let k = program.sections.len();
    let plan_check = if k > oracle::MAX_PLAN_SECTIONS {
        PlanCheck {
            status: "skipped",
            reason: Some(format!(
                "{k} sections exceed the exhaustive bound of {}",
                oracle::MAX_PLAN_SECTIONS
            )),
            totals_equal: None,
            shortest_total_ns: None,
            oracle_total_ns: None,
        }
    } else {
        let fast = shortest_plan(&build_run_graph(program, &inputs.arch, inputs.profile.as_ref())?)?;
        let (_, oracle_total) = brute_force_plan(program, &inputs.arch, inputs.profile.as_ref())?;
        let equal =
            (fast.total_ns - oracle_total).abs() <= 1e-12 * fast.total_ns.abs().max(1.0);
        all_ok &= equal;
        PlanCheck {
            status: "ok",
            reason: None,
            totals_equal: Some(equal),
            shortest_total_ns: Some(fast.total_ns),
            oracle_total_ns: Some(oracle_total),
        }
    };

    let output = OracleCheckOutput {
        schema_version: io::SCHEMA_VERSION,
        program: &program.name,
        ods_checks,
        plan_check,
        all_ok,
    };
    emit(args.out.as_ref(), &json_line(&output))
}
