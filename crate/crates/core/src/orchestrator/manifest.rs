//! Experiment manifest.
//!
//! TOML is the editable form; every validation error carries the line it
//! refers to. JSON is the interchange form: it has the same schema (with
//! `node_groups` already expanded into `nodes`) and its errors carry no line.
//!
//! ```toml
//! [runtime]
//! network = "latem"
//! image = "latem/node"
//!
//! [resources]
//! ram_cap_fraction = "0.80"
//! per_node_startup_fraction = "0.8/750"
//! per_node_steady_fraction = "0.54/750"
//!
//! [delay]
//! matrix = "delays.txt"      # relative to the manifest
//! quantum_ms = 10
//! inflation = "2"
//!
//! [timers.block_time]
//! value = "12"
//! unit = "s"                 # s | ms | per-s
//! inflate = true             # required; false marks a non-time value
//!
//! [networks.blocks]
//! model = "nws"
//! k = 4
//! p = 0.1
//! seed = 1
//!
//! [[phases]]
//! name = "geth"
//! action = "signal"          # launch | signal | run-host-script
//! signal = "SIGUSR1"
//! target = "all"             # all | role:<tag>
//! stagger_ms = 500
//!
//! [[nodes]]
//! name = "n1"
//! ip = "10.0.0.1"
//! roles = ["validator"]
//! processes = [{ binary = "geth", args = ["--dev"], phase = "geth" }]
//!
//! [[node_groups]]            # expands to n2..n4 with consecutive addresses
//! prefix = "n"
//! first_index = 2
//! count = 3
//! first_ip = "10.0.0.2"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::delay_model::{MatrixFormat, QuantizationPolicy, Rounding};
use crate::inflation::{InflationFactor, DEFAULT_CGROUP, DEFAULT_OBJECT, DEFAULT_PIN};
use crate::link_layer::MacPattern;
use crate::rational::Rational;
use crate::topology::TopologySpec;

/// Signals the node agent understands.
pub const SIGNALS: [&str; 9] = [
    "SIGHUP", "SIGINT", "SIGQUIT", "SIGUSR1", "SIGUSR2", "SIGALRM", "SIGTERM", "SIGCONT", "SIGWINCH",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub line: Option<usize>,
    pub kind: ValidationKind,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationKind {
    #[error("{0}")]
    Parse(String),
    #[error("manifest declares no nodes")]
    NoNodes,
    #[error("node name `{name}` already used on line {first_line}")]
    DuplicateName { name: String, first_line: usize },
    #[error("address {ip} assigned to both `{first}` and `{second}`")]
    DuplicateIp {
        ip: Ipv4Addr,
        first: String,
        second: String,
    },
    #[error("node `{node}`: invalid IPv4 address `{value}`")]
    InvalidIp { node: String, value: String },
    #[error("node group `{prefix}`: {reason}")]
    Group { prefix: String, reason: String },
    #[error("node `{node}`: process `{binary}` references undeclared phase `{phase}`")]
    UndeclaredPhase {
        node: String,
        binary: String,
        phase: String,
    },
    #[error("node `{node}`: phase `{phase}` runs on the host and cannot start processes")]
    HostPhaseProcess { node: String, phase: String },
    #[error("phase `{0}` declared twice")]
    DuplicatePhase(String),
    #[error("launch phase `{0}` must be the first phase")]
    LaunchNotFirst(String),
    #[error("phase `{0}` sends a signal but names none")]
    SignalRequired(String),
    #[error("phase `{0}` names a signal but does not send one")]
    SignalNotAllowed(String),
    #[error("phase `{phase}`: unknown signal `{signal}`")]
    UnknownSignal { phase: String, signal: String },
    #[error("phase `{0}` runs a host script but names none")]
    ScriptRequired(String),
    #[error("phase `{phase}`: no node carries role `{role}`")]
    UnknownRole { phase: String, role: String },
    #[error("phase `{phase}`: invalid target `{target}` (expected `all` or `role:<tag>`)")]
    InvalidTarget { phase: String, target: String },
    #[error("phase `{0}`: stagger must not be negative")]
    NegativeStagger(String),
    #[error("{field} must lie in (0, 1], got {value}")]
    Fraction { field: &'static str, value: Rational },
    #[error("per_node_startup_fraction is below per_node_steady_fraction")]
    StartupBelowSteady,
    #[error("checkpoint `{checkpoint}` follows undeclared phase `{phase}`")]
    UnknownCheckpointPhase { checkpoint: String, phase: String },
    #[error("network `{network}`: {reason}")]
    Topology { network: String, reason: String },
    #[error("delay: {0}")]
    Delay(String),
    #[error("timer `{name}`: {reason}")]
    Timer { name: String, reason: String },
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<ValidationError>),
}

impl ManifestError {
    pub fn errors(&self) -> &[ValidationError] {
        match self {
            ManifestError::Invalid(v) => v,
            ManifestError::Io { .. } => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub binary: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<String>,
    pub phase: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeSpec {
    pub name: String,
    pub ip: Ipv4Addr,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub processes: Vec<ProcessSpec>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub roles: Vec<String>,
}

impl NodeSpec {
    pub fn has_role(&self, role: &str) -> bool {
        self.roles.iter().any(|r| r == role)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    All,
    Role(String),
}

impl Target {
    pub fn matches(&self, node: &NodeSpec) -> bool {
        match self {
            Target::All => true,
            Target::Role(r) => node.has_role(r),
        }
    }

    fn parse(s: &str) -> Option<Target> {
        match s {
            "all" => Some(Target::All),
            _ => s
                .strip_prefix("role:")
                .filter(|r| !r.is_empty())
                .map(|r| Target::Role(r.to_string())),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::All => f.write_str("all"),
            Target::Role(r) => write!(f, "role:{r}"),
        }
    }
}

impl Serialize for Target {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseAction {
    Launch,
    Signal,
    RunHostScript,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Phase {
    pub name: String,
    pub target: Target,
    pub action: PhaseAction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub script: Option<String>,
    /// Delay between consecutive targets. May become fractional after
    /// inflation.
    pub stagger_ms: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resources {
    pub ram_cap_fraction: Rational,
    pub per_node_startup_fraction: Rational,
    pub per_node_steady_fraction: Rational,
    /// Memory available to containers, for stats percentages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub available_mib: Option<u64>,
    /// Round steady occupancy to a whole percent before planning each batch.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub percent_rounding: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterKind {
    #[default]
    Docker,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeSpec {
    pub adapter: AdapterKind,
    /// Container network the nodes join.
    pub network: String,
    /// Host bridge backing `network`.
    pub bridge: String,
    pub image: String,
    /// Command run as each container's entry point.
    pub agent: String,
    /// Interface name inside the containers.
    pub iface: String,
    pub mac_prefix: MacPattern,
    pub reachable_ms: u64,
}

impl Default for RuntimeSpec {
    fn default() -> Self {
        RuntimeSpec {
            adapter: AdapterKind::Docker,
            network: "latem".into(),
            bridge: "br-latem".into(),
            image: "latem/node".into(),
            agent: "/usr/local/bin/latem-agent".into(),
            iface: "eth0".into(),
            mac_prefix: MacPattern::default(),
            reachable_ms: crate::autoarpd::DEFAULT_REACHABLE_MS,
        }
    }
}

fn default_quantum() -> u32 {
    10
}

fn default_true() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_identity(x: &InflationFactor) -> bool {
    *x == InflationFactor::IDENTITY
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    pub matrix: PathBuf,
    #[serde(default)]
    pub format: MatrixFormat,
    #[serde(default = "default_quantum")]
    pub quantum_ms: u32,
    #[serde(default)]
    pub rounding: Rounding,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub drop_zero_class: bool,
    #[serde(default = "identity", skip_serializing_if = "is_identity")]
    pub inflation: InflationFactor,
    /// Pick `nodes.len()` rows of a larger matrix with this seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample_seed: Option<u64>,
}

fn identity() -> InflationFactor {
    InflationFactor::IDENTITY
}

impl DelaySpec {
    pub fn policy(&self) -> QuantizationPolicy {
        QuantizationPolicy {
            quantum_ms: self.quantum_ms,
            rounding: self.rounding,
            drop_zero_class: self.drop_zero_class,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimerUnit {
    #[serde(rename = "s")]
    Seconds,
    #[serde(rename = "ms")]
    Millis,
    /// A rate; inflation divides it.
    #[serde(rename = "per-s")]
    PerSecond,
}

impl TimerUnit {
    pub fn inflate(self, v: Rational, x: Rational) -> Rational {
        match self {
            TimerUnit::Seconds | TimerUnit::Millis => v * x,
            TimerUnit::PerSecond => v / x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timer {
    pub value: Rational,
    pub unit: TimerUnit,
    /// `None` is a lint error at inflation time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflate: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RtoSpec {
    /// Kernel HZ of the host; never guessed.
    pub hz: u32,
    /// Fixed timeout; derived from the largest inflated delay when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_s: Option<u32>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub margin_ms: u64,
    #[serde(default = "default_object")]
    pub object: String,
    #[serde(default = "default_pin")]
    pub pin: String,
    #[serde(default = "default_cgroup")]
    pub cgroup: String,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

fn default_object() -> String {
    DEFAULT_OBJECT.into()
}

fn default_pin() -> String {
    DEFAULT_PIN.into()
}

fn default_cgroup() -> String {
    DEFAULT_CGROUP.into()
}

/// A memory snapshot taken once the named phase has been dispatched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub name: String,
    pub after_phase: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentManifest {
    pub nodes: Vec<NodeSpec>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub networks: BTreeMap<String, TopologySpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay: Option<DelaySpec>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub timers: BTreeMap<String, Timer>,
    pub phases: Vec<Phase>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resources: Option<Resources>,
    pub runtime: RuntimeSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rto: Option<RtoSpec>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<Checkpoint>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentManifest {
    pub fn node(&self, name: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn phase(&self, name: &str) -> Option<&Phase> {
        self.phases.iter().find(|p| p.name == name)
    }

    pub fn image_of<'a>(&'a self, node: &'a NodeSpec) -> &'a str {
        node.image.as_deref().unwrap_or(&self.runtime.image)
    }

    pub fn matrix_path(&self) -> Option<PathBuf> {
        self.delay.as_ref().map(|d| self.base_dir.join(&d.matrix))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

// ---------------------------------------------------------------------------
// Raw form

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProcess {
    binary: String,
    #[serde(default)]
    args: Vec<String>,
    phase: Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    name: Spanned<String>,
    ip: Spanned<String>,
    image: Option<String>,
    #[serde(default)]
    processes: Vec<RawProcess>,
    #[serde(default)]
    roles: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroup {
    prefix: Spanned<String>,
    count: usize,
    #[serde(default = "one")]
    first_index: usize,
    first_ip: Spanned<String>,
    image: Option<String>,
    #[serde(default)]
    processes: Vec<RawProcess>,
    #[serde(default)]
    roles: Vec<String>,
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhase {
    name: Spanned<String>,
    #[serde(default)]
    target: Option<Spanned<String>>,
    action: PhaseAction,
    signal: Option<Spanned<String>>,
    script: Option<String>,
    #[serde(default)]
    stagger_ms: Option<Spanned<Rational>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    #[serde(default)]
    nodes: Vec<RawNode>,
    #[serde(default)]
    node_groups: Vec<RawGroup>,
    #[serde(default)]
    networks: BTreeMap<Spanned<String>, Spanned<TopologySpec>>,
    delay: Option<Spanned<DelaySpec>>,
    #[serde(default)]
    timers: BTreeMap<String, Spanned<Timer>>,
    #[serde(default)]
    phases: Vec<RawPhase>,
    resources: Option<Spanned<Resources>>,
    #[serde(default)]
    runtime: RuntimeSpec,
    rto: Option<RtoSpec>,
    #[serde(default)]
    checkpoints: Vec<Spanned<Checkpoint>>,
}

struct Lines<'a> {
    text: &'a str,
    enabled: bool,
}

impl Lines<'_> {
    fn of<T>(&self, s: &Spanned<T>) -> Option<usize> {
        self.at(s.span().start)
    }

    fn at(&self, offset: usize) -> Option<usize> {
        self.enabled
            .then(|| self.text[..offset.min(self.text.len())].matches('\n').count() + 1)
    }
}

fn normalize_signal(s: &str) -> Option<String> {
    let upper = s.trim().to_ascii_uppercase();
    let name = if upper.starts_with("SIG") {
        upper
    } else {
        format!("SIG{upper}")
    };
    SIGNALS.contains(&name.as_str()).then_some(name)
}

/// A node from `nodes` or a group expansion, before duplicate checks.
struct PendingNode {
    name: String,
    line: Option<usize>,
    /// The unparsed text on failure.
    ip: Result<Ipv4Addr, String>,
    ip_line: Option<usize>,
    image: Option<String>,
    processes: Vec<ProcessSpec>,
    roles: Vec<String>,
}

fn validate(raw: RawManifest, lines: &Lines<'_>, base_dir: PathBuf) -> Result<ExperimentManifest, ManifestError> {
    let mut errs = Vec::new();
    let mut err = |line: Option<usize>, kind| errs.push(ValidationError { line, kind });

    // Phases first; processes refer to them.
    let mut phases = Vec::new();
    let mut phase_kinds: BTreeMap<String, PhaseAction> = BTreeMap::new();
    let mut phase_targets = Vec::new();
    for (i, p) in raw.phases.into_iter().enumerate() {
        let line = lines.of(&p.name);
        let name = p.name.get_ref().clone();
        if phase_kinds.insert(name.clone(), p.action).is_some() {
            err(line, ValidationKind::DuplicatePhase(name.clone()));
        }
        if p.action == PhaseAction::Launch && i != 0 {
            err(line, ValidationKind::LaunchNotFirst(name.clone()));
        }
        let signal = match (&p.action, &p.signal) {
            (PhaseAction::Signal, None) => {
                err(line, ValidationKind::SignalRequired(name.clone()));
                None
            }
            (PhaseAction::Signal, Some(s)) => match normalize_signal(s.get_ref()) {
                Some(n) => Some(n),
                None => {
                    err(
                        lines.of(s),
                        ValidationKind::UnknownSignal {
                            phase: name.clone(),
                            signal: s.get_ref().clone(),
                        },
                    );
                    None
                }
            },
            (_, Some(s)) => {
                err(lines.of(s), ValidationKind::SignalNotAllowed(name.clone()));
                None
            }
            (_, None) => None,
        };
        if p.action == PhaseAction::RunHostScript && p.script.as_deref().is_none_or(|s| s.trim().is_empty()) {
            err(line, ValidationKind::ScriptRequired(name.clone()));
        }
        let target = match &p.target {
            None => Target::All,
            Some(t) => Target::parse(t.get_ref()).unwrap_or_else(|| {
                err(
                    lines.of(t),
                    ValidationKind::InvalidTarget {
                        phase: name.clone(),
                        target: t.get_ref().clone(),
                    },
                );
                Target::All
            }),
        };
        let stagger_ms = match &p.stagger_ms {
            None => Rational::ZERO,
            Some(s) if *s.get_ref() < Rational::ZERO => {
                err(lines.of(s), ValidationKind::NegativeStagger(name.clone()));
                Rational::ZERO
            }
            Some(s) => *s.get_ref(),
        };
        phase_targets.push((line, p.target.as_ref().and_then(|t| lines.of(t)).or(line)));
        phases.push(Phase {
            name,
            target,
            action: p.action,
            signal,
            script: p.script,
            stagger_ms,
        });
    }

    // Nodes, explicit then grouped.
    let mut nodes = Vec::new();
    let mut node_lines = Vec::new();
    let mut by_name: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_ip: BTreeMap<Ipv4Addr, String> = BTreeMap::new();
    let check_processes = |node: &str, procs: &[RawProcess], errs: &mut Vec<ValidationError>| {
        for pr in procs {
            let kind = match phase_kinds.get(pr.phase.get_ref()) {
                None => ValidationKind::UndeclaredPhase {
                    node: node.to_string(),
                    binary: pr.binary.clone(),
                    phase: pr.phase.get_ref().clone(),
                },
                Some(PhaseAction::RunHostScript) => ValidationKind::HostPhaseProcess {
                    node: node.to_string(),
                    phase: pr.phase.get_ref().clone(),
                },
                Some(_) => continue,
            };
            errs.push(ValidationError {
                line: lines.of(&pr.phase),
                kind,
            });
        }
    };
    let to_specs = |procs: &[RawProcess]| -> Vec<ProcessSpec> {
        procs
            .iter()
            .map(|p| ProcessSpec {
                binary: p.binary.clone(),
                args: p.args.clone(),
                phase: p.phase.get_ref().clone(),
            })
            .collect()
    };
    let mut expanded: Vec<PendingNode> = Vec::new();
    for n in &raw.nodes {
        check_processes(n.name.get_ref(), &n.processes, &mut errs);
        expanded.push(PendingNode {
            name: n.name.get_ref().clone(),
            line: lines.of(&n.name),
            ip: n.ip.get_ref().parse().map_err(|_| n.ip.get_ref().clone()),
            ip_line: lines.of(&n.ip),
            image: n.image.clone(),
            processes: to_specs(&n.processes),
            roles: n.roles.clone(),
        });
    }
    for g in &raw.node_groups {
        let line = lines.of(&g.prefix);
        check_processes(g.prefix.get_ref(), &g.processes, &mut errs);
        let first: Ipv4Addr = match g.first_ip.get_ref().parse() {
            Ok(ip) => ip,
            Err(_) => {
                errs.push(ValidationError {
                    line: lines.of(&g.first_ip),
                    kind: ValidationKind::Group {
                        prefix: g.prefix.get_ref().clone(),
                        reason: format!("invalid first_ip `{}`", g.first_ip.get_ref()),
                    },
                });
                continue;
            }
        };
        if u32::from(first).checked_add(g.count.saturating_sub(1) as u32).is_none() || g.count > u32::MAX as usize {
            errs.push(ValidationError {
                line,
                kind: ValidationKind::Group {
                    prefix: g.prefix.get_ref().clone(),
                    reason: "address range overflows".into(),
                },
            });
            continue;
        }
        for k in 0..g.count {
            expanded.push(PendingNode {
                name: format!("{}{}", g.prefix.get_ref(), g.first_index + k),
                line,
                ip: Ok(Ipv4Addr::from(u32::from(first) + k as u32)),
                ip_line: line,
                image: g.image.clone(),
                processes: to_specs(&g.processes),
                roles: g.roles.clone(),
            });
        }
    }
    for PendingNode {
        name,
        line,
        ip,
        ip_line,
        image,
        processes,
        roles,
    } in expanded
    {
        if let Some(&first) = by_name.get(&name) {
            errs.push(ValidationError {
                line,
                kind: ValidationKind::DuplicateName {
                    name: name.clone(),
                    first_line: node_lines[first],
                },
            });
            continue;
        }
        let ip = match ip {
            Ok(ip) => ip,
            Err(value) => {
                errs.push(ValidationError {
                    line: ip_line,
                    kind: ValidationKind::InvalidIp { node: name, value },
                });
                continue;
            }
        };
        if let Some(first) = by_ip.get(&ip) {
            errs.push(ValidationError {
                line: ip_line,
                kind: ValidationKind::DuplicateIp {
                    ip,
                    first: first.clone(),
                    second: name.clone(),
                },
            });
        }
        by_ip.entry(ip).or_insert_with(|| name.clone());
        by_name.insert(name.clone(), nodes.len());
        node_lines.push(line.unwrap_or(0));
        nodes.push(NodeSpec {
            name,
            ip,
            image,
            processes,
            roles,
        });
    }
    let mut err = |line: Option<usize>, kind| errs.push(ValidationError { line, kind });
    if nodes.is_empty() && raw.nodes.is_empty() && raw.node_groups.is_empty() {
        err(None, ValidationKind::NoNodes);
    }

    let roles: BTreeSet<&str> = nodes.iter().flat_map(|n| n.roles.iter().map(String::as_str)).collect();
    for (p, (_, tline)) in phases.iter().zip(&phase_targets) {
        if let Target::Role(r) = &p.target {
            if !roles.contains(r.as_str()) {
                err(
                    *tline,
                    ValidationKind::UnknownRole {
                        phase: p.name.clone(),
                        role: r.clone(),
                    },
                );
            }
        }
    }

    let resources = raw.resources.map(|r| {
        let line = lines.of(&r);
        let r = r.into_inner();
        for (field, value) in [
            ("ram_cap_fraction", r.ram_cap_fraction),
            ("per_node_startup_fraction", r.per_node_startup_fraction),
            ("per_node_steady_fraction", r.per_node_steady_fraction),
        ] {
            if !value.is_positive() || value > Rational::ONE {
                err(line, ValidationKind::Fraction { field, value });
            }
        }
        if r.per_node_startup_fraction < r.per_node_steady_fraction {
            err(line, ValidationKind::StartupBelowSteady);
        }
        r
    });

    let delay = raw.delay.map(|d| {
        let line = lines.of(&d);
        let d = d.into_inner();
        if let Err(e) = d.policy().validate() {
            err(line, ValidationKind::Delay(e.to_string()));
        }
        if d.matrix.as_os_str().is_empty() {
            err(line, ValidationKind::Delay("matrix path is empty".into()));
        }
        d
    });

    let mut timers = BTreeMap::new();
    for (name, t) in raw.timers {
        let line = lines.of(&t);
        let t = t.into_inner();
        if t.value < Rational::ZERO {
            err(
                line,
                ValidationKind::Timer {
                    name: name.clone(),
                    reason: "value must not be negative".into(),
                },
            );
        }
        timers.insert(name, t);
    }

    let mut networks = BTreeMap::new();
    for (name, spec) in raw.networks {
        let line = lines.of(&spec);
        let spec = spec.into_inner();
        if !nodes.is_empty() {
            if let Err(e) = spec.generate(nodes.len()) {
                err(
                    line,
                    ValidationKind::Topology {
                        network: name.get_ref().clone(),
                        reason: e.to_string(),
                    },
                );
            }
        }
        networks.insert(name.into_inner(), spec);
    }

    let mut checkpoints = Vec::new();
    for c in raw.checkpoints {
        let line = lines.of(&c);
        let c = c.into_inner();
        if !phases.iter().any(|p| p.name == c.after_phase) {
            err(
                line,
                ValidationKind::UnknownCheckpointPhase {
                    checkpoint: c.name.clone(),
                    phase: c.after_phase.clone(),
                },
            );
        }
        checkpoints.push(c);
    }

    if !errs.is_empty() {
        errs.sort_by_key(|e| e.line);
        return Err(ManifestError::Invalid(errs));
    }
    Ok(ExperimentManifest {
        nodes,
        networks,
        delay,
        timers,
        phases,
        resources,
        runtime: raw.runtime,
        rto: raw.rto,
        checkpoints,
        base_dir,
    })
}

fn parse_error(e: toml::de::Error, lines: &Lines<'_>) -> ManifestError {
    ManifestError::Invalid(vec![ValidationError {
        line: e.span().and_then(|s| lines.at(s.start)),
        kind: ValidationKind::Parse(e.message().trim().to_string()),
    }])
}

pub fn parse_manifest_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<ExperimentManifest, ManifestError> {
    let lines = Lines { text, enabled: true };
    let raw: RawManifest = toml::from_str(text).map_err(|e| parse_error(e, &lines))?;
    validate(raw, &lines, base_dir.into())
}

pub fn parse_manifest_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<ExperimentManifest, ManifestError> {
    let parse = |msg: String| {
        ManifestError::Invalid(vec![ValidationError {
            line: None,
            kind: ValidationKind::Parse(msg),
        }])
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| parse(e.to_string()))?;
    let as_toml = toml::to_string(&value).map_err(|e| parse(e.to_string()))?;
    let lines = Lines {
        text: &as_toml,
        enabled: false,
    };
    let raw: RawManifest = toml::from_str(&as_toml).map_err(|e| parse_error(e, &lines))?;
    validate(raw, &lines, base_dir.into())
}

/// Loads `.json` files as JSON and anything else as TOML. Relative paths in
/// the manifest resolve against its absolute directory, so host scripts
/// still run from an apply work directory.
pub fn load_manifest(path: &Path) -> Result<ExperimentManifest, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let base = std::path::absolute(&base).unwrap_or(base);
    if path.extension().is_some_and(|e| e == "json") {
        parse_manifest_json(&text, base)
    } else {
        parse_manifest_toml(&text, base)
    }
}
