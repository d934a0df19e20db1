//! Ordered startup plan.
//!
//! For every batch of containers:
//!
//! 1. launch the containers,
//! 2. gather their host-side interfaces,
//! 3. install static FDB entries,
//! 4. switch neighbour resolution to the in-container helper,
//! 5. (first batch only) install the marking ruleset and the RTO override,
//! 6. build the qdisc tree on each new interface,
//! 7. dispatch the phases to the new nodes, taking memory checkpoints.
//!
//! A preflight step reads the host settings before anything else. Interface
//! names are unknown until step 2 runs, so later steps refer to them as
//! `<VETH:node>`; execution substitutes them.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::net::Ipv4Addr;

use serde::Serialize;

use crate::autoarpd::emit_neigh_sysctls;
use crate::delay_model::{build_classes, load_matrix, DelayClassMap, DelayError, DelayMatrix};
use crate::inflation::{emit_bpf_commands, recommend_rto_with_margin, render_bpf_source, BpfRtoConfig, InflationError};
use crate::link_layer::{emit_fdb_script, mac_for_ip, LinkError, MacPattern};
use crate::nft::{emit_nft_script, NftError, NftOptions};
use crate::preflight::{emit_conf, reading_commands, recommend, PerNode, PreflightOptions};
use crate::rational::Rational;
use crate::script::CommandScript;
use crate::tc::{compute_bands, emit_tc_script, TcError};
use crate::topology::{neighbor_lists, TopologyError};

use super::batches::{plan_batches, BatchRounding, BatchSchedule, InfeasibleError};
use super::manifest::{ExperimentManifest, NodeSpec, PhaseAction};

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Delay(#[from] DelayError),
    #[error(transparent)]
    Nft(#[from] NftError),
    #[error(transparent)]
    Tc(#[from] TcError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Batch(#[from] InfeasibleError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Inflation(#[from] InflationError),
}

/// Placeholder for the host-side interface of `node`.
pub fn veth_placeholder(node: &str) -> String {
    format!("<VETH:{node}>")
}

/// Quotes `s` for a POSIX shell when needed.
pub fn sh_quote(s: &str) -> String {
    let safe = !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "_./:=,@%+-".contains(c));
    if safe {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepKind {
    Preflight,
    Launch { batch: usize },
    Inventory { batch: usize },
    Fdb { batch: usize },
    NeighSysctls { batch: usize },
    Nft,
    Bpf,
    Tc { batch: usize },
    Phase { batch: usize, phase: String },
    Checkpoint { batch: usize, name: String },
}

impl StepKind {
    fn slug(&self) -> String {
        match self {
            StepKind::Preflight => "preflight".into(),
            StepKind::Launch { batch } => format!("b{batch}-launch"),
            StepKind::Inventory { batch } => format!("b{batch}-inventory"),
            StepKind::Fdb { batch } => format!("b{batch}-fdb"),
            StepKind::NeighSysctls { batch } => format!("b{batch}-neigh-sysctls"),
            StepKind::Nft => "nft".into(),
            StepKind::Bpf => "bpf-rto".into(),
            StepKind::Tc { batch } => format!("b{batch}-tc"),
            StepKind::Phase { batch, phase } => format!("b{batch}-phase-{phase}"),
            StepKind::Checkpoint { batch, name } => {
                let name: String = name
                    .chars()
                    .map(|c| {
                        if c.is_ascii_alphanumeric() {
                            c.to_ascii_lowercase()
                        } else {
                            '-'
                        }
                    })
                    .collect();
                format!("b{batch}-stats-{name}")
            }
        }
    }
}

/// Commands addressed to one target, optionally delayed from step start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Unit {
    pub label: String,
    pub script: CommandScript,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset_ms: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlanStep {
    pub index: usize,
    pub kind: StepKind,
    pub units: Vec<Unit>,
    /// Files written next to the step's commands (name, content).
    pub artifacts: Vec<(String, String)>,
    /// Nodes the step concerns, in order.
    pub nodes: Vec<String>,
}

impl PlanStep {
    pub fn dir_name(&self) -> String {
        format!("{:03}-{}", self.index, self.kind.slug())
    }

    pub fn command_count(&self) -> usize {
        self.units
            .iter()
            .map(|u| u.script.lines().iter().filter(|l| !l.starts_with('#')).count())
            .sum()
    }

    /// All units rendered into one script, each headed by its label.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for u in &self.units {
            out.push_str(&format!("# {}\n", u.label));
            out.push_str(&u.script.render());
        }
        out
    }

    /// `offset_ms label` lines for staggered steps, empty otherwise.
    pub fn schedule(&self) -> String {
        self.units
            .iter()
            .filter_map(|u| {
                u.offset_ms
                    .map(|o| format!("{} {}\n", (o / Rational::from(1000u32)).to_decimal_string(3), u.label))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasedPlan {
    pub steps: Vec<PlanStep>,
    pub schedule: BatchSchedule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<DelayClassMap>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands: Option<u32>,
    /// Node addresses, for interface inventory.
    pub hosts: BTreeMap<String, Ipv4Addr>,
    pub iface: String,
    pub mac_prefix: MacPattern,
}

impl PhasedPlan {
    pub fn step(&self, kind: &StepKind) -> Option<&PlanStep> {
        self.steps.iter().find(|s| &s.kind == kind)
    }

    pub fn position(&self, pred: impl Fn(&StepKind) -> bool) -> Option<usize> {
        self.steps.iter().position(|s| pred(&s.kind))
    }
}

impl fmt::Display for PhasedPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            let n = s.command_count();
            writeln!(f, "{} ({n} command{})", s.dir_name(), if n == 1 { "" } else { "s" })?;
        }
        Ok(())
    }
}

/// Loads the delay matrix named by the manifest (if any) and builds the plan.
pub fn build_startup_plan(m: &ExperimentManifest) -> Result<PhasedPlan, PlanError> {
    let matrix = match m.matrix_path() {
        None => None,
        Some(path) => {
            let d = m.delay.as_ref().expect("matrix path implies delay section");
            let file =
                File::open(&path).map_err(|e| PlanError::Config(format!("delay matrix {}: {e}", path.display())))?;
            Some(load_matrix(BufReader::new(file), d.format)?)
        }
    };
    build_startup_plan_with(m, matrix.as_ref())
}

/// Delay classes for the manifest's nodes, in manifest order.
pub fn manifest_classes(m: &ExperimentManifest, matrix: &DelayMatrix) -> Result<DelayClassMap, PlanError> {
    let d = m
        .delay
        .as_ref()
        .ok_or_else(|| PlanError::Config("manifest has no delay section".into()))?;
    let n = m.nodes.len();
    let matrix = if matrix.n() == n {
        matrix.clone()
    } else if let (true, Some(seed)) = (matrix.n() > n, d.subsample_seed) {
        matrix.subsample(n, seed)?
    } else {
        return Err(PlanError::Config(format!(
            "delay matrix has {} rows for {n} nodes{}",
            matrix.n(),
            if matrix.n() > n {
                "; set delay.subsample_seed"
            } else {
                ""
            }
        )));
    };
    let policy = d.policy();
    let q = matrix.inflate(d.inflation.value())?.quantize(&policy);
    let ips: Vec<Ipv4Addr> = m.nodes.iter().map(|n| n.ip).collect();
    Ok(build_classes(&q, &ips, &policy)?)
}

pub fn build_startup_plan_with(m: &ExperimentManifest, matrix: Option<&DelayMatrix>) -> Result<PhasedPlan, PlanError> {
    let classes = match (&m.delay, matrix) {
        (None, _) => None,
        (Some(_), None) => {
            return Err(PlanError::Config(
                "delay classes requested but no matrix supplied".into(),
            ))
        }
        (Some(_), Some(mx)) => Some(manifest_classes(m, mx)?),
    };
    let classes = classes.filter(|c| {
        if c.is_empty() {
            log::warn!("every pair quantized to zero delay; skipping nft and tc");
        }
        !c.is_empty()
    });
    let bands = classes.as_ref().map(|c| compute_bands(c.len() as u32)).transpose()?;

    let schedule = match &m.resources {
        Some(r) => {
            let rounding = if r.percent_rounding {
                BatchRounding::WholePercent
            } else {
                BatchRounding::Exact
            };
            let s = plan_batches(m.nodes.len(), r, rounding)?;
            if !s.is_complete() {
                return Err(PlanError::Config(format!(
                    "{} of {} nodes do not fit under the RAM cap",
                    s.unplaced,
                    m.nodes.len()
                )));
            }
            s
        }
        None => plan_batches(
            m.nodes.len(),
            &super::manifest::Resources {
                ram_cap_fraction: Rational::ONE,
                per_node_startup_fraction: Rational::new(1, m.nodes.len().max(1) as i128),
                per_node_steady_fraction: Rational::new(1, m.nodes.len().max(1) as i128),
                available_mib: None,
                percent_rounding: false,
            },
            BatchRounding::Exact,
        )?,
    };

    let peers = peer_env(m)?;
    let mut steps = Vec::new();
    let mut push = |kind: StepKind, units: Vec<Unit>, artifacts: Vec<(String, String)>, nodes: Vec<String>| {
        let index = steps.len() + 1;
        steps.push(PlanStep {
            index,
            kind,
            units,
            artifacts,
            nodes,
        });
    };
    let single = |label: &str, script: CommandScript| {
        vec![Unit {
            label: label.to_string(),
            script,
            offset_ms: None,
        }]
    };

    // Preflight: read current settings; the fragments are there to apply.
    let pf = recommend(m.nodes.len() as u64, PerNode::default(), &PreflightOptions::default());
    let conf = emit_conf(&pf);
    let mut read = CommandScript::new();
    read.extend(reading_commands(&pf));
    push(
        StepKind::Preflight,
        single("host", read),
        vec![
            ("limits.conf".into(), conf.limits_conf),
            ("sysctl.conf".into(), conf.sysctl_conf),
        ],
        Vec::new(),
    );

    let class_delays = classes.as_ref().map(|c| c.class_delays());
    let mut offset = 0;
    for (bi, batch) in schedule.batches.iter().enumerate() {
        let b = bi + 1;
        let nodes = &m.nodes[offset..offset + batch.size];
        offset += batch.size;
        let names: Vec<String> = nodes.iter().map(|n| n.name.clone()).collect();

        let launch = nodes
            .iter()
            .map(|n| {
                let mut s = CommandScript::new();
                s.push(launch_command(m, n, peers.get(&n.name)));
                Unit {
                    label: n.name.clone(),
                    script: s,
                    offset_ms: None,
                }
            })
            .collect();
        push(StepKind::Launch { batch: b }, launch, Vec::new(), names.clone());

        let iface = &m.runtime.iface;
        let inventory = nodes
            .iter()
            .map(|n| {
                let mut s = CommandScript::new();
                s.push(format!("docker exec {} cat /sys/class/net/{iface}/iflink", n.name));
                s.push(format!("docker exec {} cat /sys/class/net/{iface}/address", n.name));
                Unit {
                    label: n.name.clone(),
                    script: s,
                    offset_ms: None,
                }
            })
            .collect();
        push(StepKind::Inventory { batch: b }, inventory, Vec::new(), names.clone());

        let fdb_input: Vec<(Ipv4Addr, String)> = nodes.iter().map(|n| (n.ip, veth_placeholder(&n.name))).collect();
        let fdb = emit_fdb_script(&fdb_input, &m.runtime.mac_prefix)?;
        push(
            StepKind::Fdb { batch: b },
            single("host", fdb),
            Vec::new(),
            names.clone(),
        );

        let sysctl_lines = emit_neigh_sysctls(iface, m.runtime.reachable_ms).lines().join("; ");
        let neigh = nodes
            .iter()
            .map(|n| {
                let mut s = CommandScript::new();
                s.push(format!(
                    "docker exec --privileged {} sh -c {}",
                    n.name,
                    sh_quote(&sysctl_lines)
                ));
                Unit {
                    label: n.name.clone(),
                    script: s,
                    offset_ms: None,
                }
            })
            .collect();
        push(StepKind::NeighSysctls { batch: b }, neigh, Vec::new(), names.clone());

        if b == 1 {
            if let Some(c) = &classes {
                let nft = emit_nft_script(c, &NftOptions::default())?;
                push(StepKind::Nft, single("host", nft), Vec::new(), Vec::new());
            }
            if let Some(rto) = &m.rto {
                let timeout = match (rto.timeout_s, &classes) {
                    (Some(t), _) => t,
                    (None, Some(c)) => {
                        let max = c.classes().iter().map(|k| k.delay_ms as u64).max().unwrap_or(0);
                        recommend_rto_with_margin(max, rto.margin_ms)
                    }
                    (None, None) => {
                        return Err(PlanError::Config(
                            "rto.timeout_s required without a delay matrix".into(),
                        ));
                    }
                };
                let source = render_bpf_source(&BpfRtoConfig::new(timeout, rto.hz)?)?;
                let cmds = emit_bpf_commands(&rto.object, &rto.pin, &rto.cgroup)?;
                let src_name = match rto.object.strip_suffix(".o") {
                    Some(stem) => format!("{stem}.c"),
                    None => format!("{}.c", rto.object),
                };
                push(
                    StepKind::Bpf,
                    single("host", cmds.load),
                    vec![(src_name, source), ("unload.sh".into(), cmds.unload.render())],
                    Vec::new(),
                );
            }
        }

        if let (Some(cd), Some(bands)) = (&class_delays, bands) {
            let units = nodes
                .iter()
                .map(|n| {
                    Ok(Unit {
                        label: veth_placeholder(&n.name),
                        script: emit_tc_script(cd, &veth_placeholder(&n.name), bands)?,
                        offset_ms: None,
                    })
                })
                .collect::<Result<Vec<_>, TcError>>()?;
            push(StepKind::Tc { batch: b }, units, Vec::new(), names.clone());
        }

        for phase in &m.phases {
            let targets: Vec<&NodeSpec> = nodes.iter().filter(|n| phase.target.matches(n)).collect();
            let units = match phase.action {
                PhaseAction::Launch => Vec::new(),
                PhaseAction::Signal => {
                    let sig = phase.signal.as_deref().expect("validated signal phase");
                    targets
                        .iter()
                        .enumerate()
                        .map(|(k, n)| {
                            let mut s = CommandScript::new();
                            s.push(format!("docker kill -s {sig} {}", n.name));
                            Unit {
                                label: n.name.clone(),
                                script: s,
                                offset_ms: Some(Rational::from(k) * phase.stagger_ms),
                            }
                        })
                        .collect()
                }
                PhaseAction::RunHostScript => {
                    let mut s = CommandScript::new();
                    let list: Vec<&str> = targets.iter().map(|n| n.name.as_str()).collect();
                    let script = m
                        .base_dir
                        .join(phase.script.as_deref().expect("validated script phase"));
                    s.push(format!(
                        "LATEM_NODES={} {}",
                        sh_quote(&list.join(",")),
                        sh_quote(&script.display().to_string())
                    ));
                    single("host", s)
                }
            };
            // Launch phases are carried out by the launch step itself.
            if phase.action != PhaseAction::Launch {
                let target_names = targets.iter().map(|n| n.name.clone()).collect();
                push(
                    StepKind::Phase {
                        batch: b,
                        phase: phase.name.clone(),
                    },
                    units,
                    Vec::new(),
                    target_names,
                );
            }
            for cp in m.checkpoints.iter().filter(|c| c.after_phase == phase.name) {
                let mut s = CommandScript::new();
                s.push(format!(
                    "docker stats --no-stream --format '{{{{.Name}}}}\\t{{{{.MemUsage}}}}' {}",
                    names.join(" ")
                ));
                push(
                    StepKind::Checkpoint {
                        batch: b,
                        name: cp.name.clone(),
                    },
                    single("host", s),
                    Vec::new(),
                    names.clone(),
                );
            }
        }
    }

    Ok(PhasedPlan {
        steps,
        schedule,
        classes,
        bands,
        hosts: m.nodes.iter().map(|n| (n.name.clone(), n.ip)).collect(),
        iface: m.runtime.iface.clone(),
        mac_prefix: m.runtime.mac_prefix.clone(),
    })
}

/// `LATEM_PEERS_<NETWORK>` values per node: comma-separated peer addresses.
fn peer_env(m: &ExperimentManifest) -> Result<BTreeMap<String, Vec<(String, String)>>, PlanError> {
    let mut out: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    let names: Vec<&str> = m.nodes.iter().map(|n| n.name.as_str()).collect();
    let ip_of: BTreeMap<&str, Ipv4Addr> = m.nodes.iter().map(|n| (n.name.as_str(), n.ip)).collect();
    for (network, spec) in &m.networks {
        let g = spec.generate(m.nodes.len())?;
        let var: String = network
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() {
                    c.to_ascii_uppercase()
                } else {
                    '_'
                }
            })
            .collect();
        for (node, peers) in neighbor_lists(&g, &names)? {
            let ips: Vec<String> = peers.iter().map(|p| ip_of[p.as_str()].to_string()).collect();
            out.entry(node)
                .or_default()
                .push((format!("LATEM_PEERS_{var}"), ips.join(",")));
        }
    }
    Ok(out)
}

fn launch_command(m: &ExperimentManifest, n: &NodeSpec, peers: Option<&Vec<(String, String)>>) -> String {
    let rt = &m.runtime;
    let mut parts = vec![
        "docker run -d".to_string(),
        format!("--name {}", n.name),
        format!("--hostname {}", n.name),
        format!("--network {}", rt.network),
        format!("--ip {}", n.ip),
        format!("--mac-address {}", mac_for_ip(n.ip, &rt.mac_prefix)),
        "--cap-add NET_ADMIN".to_string(),
        format!("-e LATEM_NODE={}", n.name),
        format!("-e LATEM_IFACE={}", rt.iface),
        format!("-e LATEM_MAC_PREFIX={}", rt.mac_prefix),
    ];
    let phases: Vec<&str> = m
        .phases
        .iter()
        .filter(|p| p.action == PhaseAction::Signal && p.target.matches(n))
        .map(|p| p.name.as_str())
        .collect();
    parts.push(format!("-e LATEM_PHASES={}", sh_quote(&phases.join(","))));
    for (i, p) in n.processes.iter().enumerate() {
        let mut cmd = vec![p.binary.clone()];
        cmd.extend(p.args.iter().cloned());
        parts.push(format!(
            "-e LATEM_PROC_{}={}",
            i + 1,
            sh_quote(&format!("{}|{}", p.phase, cmd.join(" ")))
        ));
    }
    for (var, value) in peers.into_iter().flatten() {
        parts.push(format!("-e {var}={}", sh_quote(value)));
    }
    parts.push(m.image_of(n).to_string());
    parts.push(rt.agent.clone());
    parts.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::manifest::parse_manifest_toml;

    const TWO: &str = r#"
[delay]
matrix = "unused"

[[phases]]
name = "geth"
action = "signal"
signal = "SIGUSR1"
stagger_ms = 500

[[nodes]]
name = "a"
ip = "10.0.0.1"
processes = [{ binary = "geth", args = ["--dev"], phase = "geth" }]

[[nodes]]
name = "b"
ip = "10.0.0.2"
"#;

    fn two_node_matrix() -> DelayMatrix {
        DelayMatrix::from_rows(&[vec![0.0, 42.0], vec![42.0, 0.0]]).unwrap()
    }

    #[test]
    fn two_node_plan() {
        let m = parse_manifest_toml(TWO, ".").unwrap();
        let plan = build_startup_plan_with(&m, Some(&two_node_matrix())).unwrap();
        let tc = plan.step(&StepKind::Tc { batch: 1 }).unwrap();
        assert_eq!(tc.units.len(), 2);
        assert_eq!(tc.units[0].label, "<VETH:a>");
        assert_eq!(plan.bands, Some(2));
        let nft = plan.position(|k| *k == StepKind::Nft).unwrap();
        let tcpos = plan.position(|k| matches!(k, StepKind::Tc { .. })).unwrap();
        let fdb = plan.position(|k| matches!(k, StepKind::Fdb { .. })).unwrap();
        let sys = plan.position(|k| matches!(k, StepKind::NeighSysctls { .. })).unwrap();
        let sig = plan.position(|k| matches!(k, StepKind::Phase { .. })).unwrap();
        assert!(fdb < sig && sys < sig && nft < tcpos);
        assert_eq!(plan.steps[0].kind, StepKind::Preflight);
    }

    #[test]
    fn launch_line() {
        let m = parse_manifest_toml(TWO, ".").unwrap();
        let plan = build_startup_plan_with(&m, Some(&two_node_matrix())).unwrap();
        let launch = &plan.step(&StepKind::Launch { batch: 1 }).unwrap().units[0]
            .script
            .lines()[0];
        assert!(launch.starts_with("docker run -d --name a --hostname a --network latem --ip 10.0.0.1"));
        assert!(launch.contains("--mac-address 02:42:0a:00:00:01"));
        assert!(launch.contains("-e LATEM_PROC_1='geth|geth --dev'"));
        assert!(launch.ends_with("latem/node /usr/local/bin/latem-agent"));
    }

    #[test]
    fn stagger_offsets() {
        let mut text =
            String::from("[[phases]]\nname = \"go\"\naction = \"signal\"\nsignal = \"SIGUSR1\"\nstagger_ms = 500\n\n");
        text.push_str("[[node_groups]]\nprefix = \"n\"\ncount = 100\nfirst_ip = \"10.0.0.1\"\n");
        let m = parse_manifest_toml(&text, ".").unwrap();
        let plan = build_startup_plan_with(&m, None).unwrap();
        let step = plan
            .step(&StepKind::Phase {
                batch: 1,
                phase: "go".into(),
            })
            .unwrap();
        let offsets: Vec<Rational> = step.units.iter().map(|u| u.offset_ms.unwrap()).collect();
        assert_eq!(offsets.len(), 100);
        for (k, o) in offsets.iter().enumerate() {
            assert_eq!(*o, Rational::from(500 * k as u64));
        }
        assert!(step.schedule().starts_with("0 n1\n0.5 n2\n"));
        assert!(step.schedule().ends_with("49.5 n100\n"));
        assert!(plan.step(&StepKind::Nft).is_none());
        assert!(plan.position(|k| matches!(k, StepKind::Tc { .. })).is_none());
    }

    #[test]
    fn missing_matrix_is_config_error() {
        let m = parse_manifest_toml(TWO, ".").unwrap();
        assert!(matches!(build_startup_plan_with(&m, None), Err(PlanError::Config(_))));
        assert!(matches!(build_startup_plan(&m), Err(PlanError::Config(_))));
    }

    #[test]
    fn batches_split_sections() {
        let text = "[resources]\nram_cap_fraction = \"0.5\"\nper_node_startup_fraction = \"0.2\"\nper_node_steady_fraction = \"0.1\"\n\n\
                    [[phases]]\nname = \"go\"\naction = \"signal\"\nsignal = \"SIGUSR2\"\n\n\
                    [[node_groups]]\nprefix = \"n\"\ncount = 3\nfirst_ip = \"10.0.0.1\"\n";
        let m = parse_manifest_toml(text, ".").unwrap();
        let plan = build_startup_plan_with(&m, None).unwrap();
        assert_eq!(plan.schedule.sizes(), [2, 1]);
        assert_eq!(plan.step(&StepKind::Launch { batch: 2 }).unwrap().nodes, ["n3"]);
    }

    #[test]
    fn quoting() {
        assert_eq!(sh_quote("abc-1.2"), "abc-1.2");
        assert_eq!(sh_quote("a b"), "'a b'");
        assert_eq!(sh_quote("it's"), r"'it'\''s'");
        assert_eq!(sh_quote(""), "''");
    }
}
