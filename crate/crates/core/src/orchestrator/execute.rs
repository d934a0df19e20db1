//! Plan execution.
//!
//! Dry-run writes one directory per step (`commands.sh`, a `schedule` file
//! for staggered steps, and any artifacts) and never touches the adapter.
//! Apply runs the steps in order, stops at the first failing command and
//! marks every later step skipped.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::inflation::{parse_prog_id, PROGRAM_NAME, PROG_ID_PLACEHOLDER};
use crate::preflight::{audit, parse_readings, recommend, PerNode, PreflightOptions};
use crate::rational::Rational;

use super::adapter::RuntimeAdapter;
use super::inventory::gather_interfaces;
use super::plan::{veth_placeholder, PhasedPlan, PlanStep, StepKind, Unit};
use super::stats::{parse_docker_stats, summarize_stats};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mode {
    DryRun { out_dir: PathBuf },
    Apply { work_dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecOptions {
    /// Interfaces configured concurrently in tc steps; 1 runs them in order.
    pub tc_parallelism: usize,
    /// Sleep until each staggered unit's offset.
    pub honor_stagger: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            tc_parallelism: 1,
            honor_stagger: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum StepStatus {
    Written,
    Ok,
    Failed { reason: String },
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommandRecord {
    pub unit: String,
    pub command: String,
    /// Exit status; `None` when the adapter could not run the command.
    pub status: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepReport {
    pub index: usize,
    pub name: String,
    pub status: StepStatus,
    pub commands: Vec<CommandRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionReport {
    pub dry_run: bool,
    pub steps: Vec<StepReport>,
}

impl ExecutionReport {
    pub fn succeeded(&self) -> bool {
        self.steps
            .iter()
            .all(|s| matches!(s.status, StepStatus::Ok | StepStatus::Written))
    }

    pub fn failed_step(&self) -> Option<&StepReport> {
        self.steps
            .iter()
            .find(|s| matches!(s.status, StepStatus::Failed { .. }))
    }
}

fn write(path: &Path, content: &str) -> Result<(), ExecError> {
    fs::write(path, content).map_err(|source| ExecError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn mkdir(path: &Path) -> Result<(), ExecError> {
    fs::create_dir_all(path).map_err(|source| ExecError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_step(dir: &Path, step: &PlanStep) -> Result<(), ExecError> {
    mkdir(dir)?;
    write(&dir.join("commands.sh"), &step.render())?;
    let schedule = step.schedule();
    if !schedule.is_empty() {
        write(&dir.join("schedule"), &schedule)?;
    }
    for (name, content) in &step.artifacts {
        write(&dir.join(name), content)?;
    }
    Ok(())
}

pub fn execute(
    plan: &PhasedPlan,
    mode: &Mode,
    adapter: &dyn RuntimeAdapter,
    opts: &ExecOptions,
) -> Result<ExecutionReport, ExecError> {
    match mode {
        Mode::DryRun { out_dir } => dry_run(plan, out_dir),
        Mode::Apply { work_dir } => apply(plan, work_dir, adapter, opts),
    }
}

fn dry_run(plan: &PhasedPlan, out: &Path) -> Result<ExecutionReport, ExecError> {
    mkdir(out)?;
    write(&out.join("plan.txt"), &plan.to_string())?;
    let mut steps = Vec::new();
    for step in &plan.steps {
        write_step(&out.join(step.dir_name()), step)?;
        steps.push(StepReport {
            index: step.index,
            name: step.dir_name(),
            status: StepStatus::Written,
            commands: Vec::new(),
            warnings: Vec::new(),
        });
    }
    Ok(ExecutionReport { dry_run: true, steps })
}

/// Values learned while applying: interface names and the BPF program ID.
#[derive(Debug, Default)]
struct Bindings {
    veths: BTreeMap<String, String>,
    prog_id: Option<u32>,
}

impl Bindings {
    fn substitute(&self, line: &str) -> Result<String, String> {
        let mut out = line.to_string();
        while let Some(start) = out.find("<VETH:") {
            let end = out[start..]
                .find('>')
                .ok_or_else(|| format!("unterminated placeholder in `{line}`"))?
                + start;
            let node = &out[start + 6..end];
            let veth = self
                .veths
                .get(node)
                .ok_or_else(|| format!("no interface known for node `{node}`"))?;
            out.replace_range(start..=end, veth);
        }
        if out.contains(PROG_ID_PLACEHOLDER) {
            let id = self.prog_id.ok_or("BPF program ID not yet known")?;
            out = out.replace(PROG_ID_PLACEHOLDER, &id.to_string());
        }
        Ok(out)
    }
}

struct UnitOutcome {
    records: Vec<CommandRecord>,
    outputs: Vec<String>,
    failure: Option<String>,
}

fn run_unit(unit: &Unit, bindings: &Bindings, adapter: &dyn RuntimeAdapter, cwd: &Path) -> UnitOutcome {
    let mut o = UnitOutcome {
        records: Vec::new(),
        outputs: Vec::new(),
        failure: None,
    };
    for line in unit.script.lines() {
        if line.starts_with('#') {
            continue;
        }
        let cmd = match bindings.substitute(line) {
            Ok(c) => c,
            Err(e) => {
                o.failure = Some(e);
                break;
            }
        };
        match adapter.run(&cmd, cwd) {
            Ok(out) => {
                o.records.push(CommandRecord {
                    unit: unit.label.clone(),
                    command: cmd.clone(),
                    status: Some(out.status),
                });
                if !out.success() {
                    o.failure = Some(format!("`{cmd}` exited with {}: {}", out.status, out.stderr.trim()));
                    break;
                }
                o.outputs.push(out.stdout);
            }
            Err(e) => {
                o.records.push(CommandRecord {
                    unit: unit.label.clone(),
                    command: cmd,
                    status: None,
                });
                o.failure = Some(e.to_string());
                break;
            }
        }
    }
    o
}

fn apply(
    plan: &PhasedPlan,
    work: &Path,
    adapter: &dyn RuntimeAdapter,
    opts: &ExecOptions,
) -> Result<ExecutionReport, ExecError> {
    mkdir(work)?;
    let mut bindings = Bindings::default();
    let mut reports = Vec::new();
    let mut failed = false;
    for step in &plan.steps {
        let mut report = StepReport {
            index: step.index,
            name: step.dir_name(),
            status: StepStatus::Skipped,
            commands: Vec::new(),
            warnings: Vec::new(),
        };
        if failed {
            reports.push(report);
            continue;
        }
        let dir = work.join(step.dir_name());
        write_step(&dir, step)?;
        let result = match &step.kind {
            StepKind::Inventory { .. } => run_inventory(plan, step, adapter, &dir, &mut bindings, &mut report),
            StepKind::Tc { .. } if opts.tc_parallelism > 1 => {
                run_parallel(step, adapter, &dir, &bindings, opts.tc_parallelism, &mut report)
            }
            _ => run_sequential(step, adapter, &dir, &mut bindings, opts, &mut report),
        };
        match result {
            Ok(outputs) => {
                post_step(plan, step, &outputs, &dir, &mut report)?;
                report.status = StepStatus::Ok;
            }
            Err(reason) => {
                log::error!("step {} failed: {reason}", step.dir_name());
                report.status = StepStatus::Failed { reason };
                failed = true;
            }
        }
        reports.push(report);
    }
    Ok(ExecutionReport {
        dry_run: false,
        steps: reports,
    })
}

fn run_sequential(
    step: &PlanStep,
    adapter: &dyn RuntimeAdapter,
    dir: &Path,
    bindings: &mut Bindings,
    opts: &ExecOptions,
    report: &mut StepReport,
) -> Result<Vec<String>, String> {
    let start = Instant::now();
    let mut outputs = Vec::new();
    for unit in &step.units {
        if let (true, Some(offset)) = (opts.honor_stagger, unit.offset_ms) {
            let due = Duration::from_micros((offset * Rational::from(1000u32)).floor().max(0) as u64);
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        // Lines run one at a time so a program ID printed by one command is
        // available to the next.
        for line in unit.script.lines() {
            let single = Unit {
                label: unit.label.clone(),
                script: {
                    let mut s = crate::script::CommandScript::new();
                    s.push(line.clone());
                    s
                },
                offset_ms: None,
            };
            let o = run_unit(&single, bindings, adapter, dir);
            report.commands.extend(o.records);
            if let Some(f) = o.failure {
                return Err(f);
            }
            for out in &o.outputs {
                if line.trim() == "bpftool prog show" {
                    bindings.prog_id = parse_prog_id(out, PROGRAM_NAME);
                    if bindings.prog_id.is_none() {
                        return Err(format!("`{PROGRAM_NAME}` not found in `bpftool prog show` output"));
                    }
                }
            }
            outputs.extend(o.outputs);
        }
    }
    Ok(outputs)
}

fn run_parallel(
    step: &PlanStep,
    adapter: &dyn RuntimeAdapter,
    dir: &Path,
    bindings: &Bindings,
    width: usize,
    report: &mut StepReport,
) -> Result<Vec<String>, String> {
    let mut outcomes: Vec<Option<UnitOutcome>> = (0..step.units.len()).map(|_| None).collect();
    for (chunk_idx, chunk) in step.units.chunks(width).enumerate() {
        let done: Vec<UnitOutcome> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|u| s.spawn(move || run_unit(u, bindings, adapter, dir)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("unit thread panicked"))
                .collect()
        });
        let stop = done.iter().any(|o| o.failure.is_some());
        for (k, o) in done.into_iter().enumerate() {
            outcomes[chunk_idx * width + k] = Some(o);
        }
        if stop {
            break;
        }
    }
    let mut outputs = Vec::new();
    let mut failure = None;
    for o in outcomes.into_iter().flatten() {
        report.commands.extend(o.records);
        outputs.extend(o.outputs);
        if failure.is_none() {
            failure = o.failure;
        }
    }
    match failure {
        Some(f) => Err(f),
        None => Ok(outputs),
    }
}

fn run_inventory(
    plan: &PhasedPlan,
    step: &PlanStep,
    adapter: &dyn RuntimeAdapter,
    dir: &Path,
    bindings: &mut Bindings,
    report: &mut StepReport,
) -> Result<Vec<String>, String> {
    let nodes: Vec<_> = step.nodes.iter().map(|n| (n.clone(), plan.hosts[n])).collect();
    let inv = gather_interfaces(adapter, &nodes, &plan.iface, &plan.mac_prefix, dir).map_err(|e| e.to_string())?;
    report.warnings.extend(inv.warnings.iter().cloned());
    let mut listing = String::new();
    for e in &inv.entries {
        listing.push_str(&format!("{} {} {} {}\n", e.node, e.veth, e.mac, e.ip));
        report.commands.push(CommandRecord {
            unit: e.node.clone(),
            command: format!("resolve {}", veth_placeholder(&e.node)),
            status: Some(0),
        });
    }
    bindings.veths.extend(inv.veth_map());
    Ok(vec![listing])
}

fn post_step(
    plan: &PhasedPlan,
    step: &PlanStep,
    outputs: &[String],
    dir: &Path,
    report: &mut StepReport,
) -> Result<(), ExecError> {
    match &step.kind {
        StepKind::Preflight => {
            let readings = parse_readings(&outputs.concat());
            let pf = recommend(
                plan.hosts.len() as u64,
                PerNode::default(),
                &PreflightOptions::default(),
            );
            let audit = audit(&pf, &readings);
            write(&dir.join("audit.txt"), &audit.to_string())?;
            if !audit.all_pass() {
                report.warnings.push(format!(
                    "host settings below recommendation: see {}",
                    dir.join("audit.txt").display()
                ));
            }
        }
        StepKind::Inventory { .. } => write(&dir.join("interfaces.txt"), &outputs.concat())?,
        StepKind::Checkpoint { name, .. } => {
            let raw = outputs.concat();
            write(&dir.join("stats.txt"), &raw)?;
            let summary = parse_docker_stats(&raw)
                .map_err(|e| e.to_string())
                .and_then(|(per_node, limit)| {
                    let available = limit.ok_or("no memory limit in output")?.floor().max(0) as u64;
                    summarize_stats(&[(name.clone(), per_node)], available).map_err(|e| e.to_string())
                });
            match summary {
                Ok(rep) => write(&dir.join("memory.txt"), &rep.to_string())?,
                Err(e) => report.warnings.push(format!("no memory summary for `{name}`: {e}")),
            }
        }
        _ => {}
    }
    Ok(())
}
