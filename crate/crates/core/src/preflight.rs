//! Kernel and ulimit settings for running thousands of containers on one
//! host: recommendation, audit against live readings, and config fragments
//! for `/etc/security/limits.conf` and `/etc/sysctl.conf`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Floor for root's open-file and process limits.
pub const DEFAULT_ULIMIT_FLOOR: u64 = 1_574_415;
pub const DEFAULT_PTY_MAX: u64 = 11_000;
pub const DEFAULT_PTY_MARGIN: u64 = 1024;
pub const SOCKET_BUFFER_MAX: u64 = 2_147_483_647;
pub const TCP_BUFFER_TRIPLE: [u64; 3] = [10240, 87380, 16777216];
pub const NEIGH_GC_THRESH: u64 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitKind {
    Hard,
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitItem {
    Nofile,
    Nproc,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ParamKey {
    Sysctl { name: String },
    Ulimit { kind: LimitKind, item: LimitItem },
}

impl ParamKey {
    pub fn sysctl(name: &str) -> Self {
        ParamKey::Sysctl { name: name.to_string() }
    }
}

impl fmt::Display for ParamKey {
    /// Sysctl names as-is; ulimits as `ulimit.<kind>.<item>`, the key used
    /// for readings.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamKey::Sysctl { name } => f.write_str(name),
            ParamKey::Ulimit { kind, item } => {
                let kind = match kind {
                    LimitKind::Hard => "hard",
                    LimitKind::Soft => "soft",
                };
                let item = match item {
                    LimitItem::Nofile => "nofile",
                    LimitItem::Nproc => "nproc",
                };
                write!(f, "ulimit.{kind}.{item}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(u64),
    Triple([u64; 3]),
}

impl ParamValue {
    /// Integers, or three whitespace-separated integers (quotes allowed).
    pub fn parse(s: &str) -> Option<ParamValue> {
        let s = s.trim().trim_matches('"');
        let nums: Vec<u64> = s.split_whitespace().map(|t| t.parse().ok()).collect::<Option<_>>()?;
        match nums.as_slice() {
            [v] => Some(ParamValue::Int(*v)),
            [a, b, c] => Some(ParamValue::Triple([*a, *b, *c])),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Triple([a, b, c]) => write!(f, "{a} {b} {c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub key: ParamKey,
    pub required: ParamValue,
    pub current: Option<ParamValue>,
    pub rationale: String,
}

impl fmt::Display for ParamEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.key, self.required)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterPlan {
    pub entries: Vec<ParamEntry>,
}

impl ParameterPlan {
    pub fn get(&self, key: &ParamKey) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| &e.key == key)
    }

    pub fn sysctl_names(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter_map(|e| match &e.key {
                ParamKey::Sysctl { name } => Some(name.as_str()),
                ParamKey::Ulimit { .. } => None,
            })
            .collect()
    }

    /// Required values keyed the way readings are keyed.
    pub fn required_readings(&self) -> BTreeMap<String, ParamValue> {
        self.entries
            .iter()
            .map(|e| (e.key.to_string(), e.required.clone()))
            .collect()
    }

    fn push(&mut self, key: ParamKey, required: ParamValue, rationale: &str) {
        debug_assert!(self.get(&key).is_none(), "duplicate key {key}");
        self.entries.push(ParamEntry {
            key,
            required,
            current: None,
            rationale: rationale.to_string(),
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerNode {
    pub files: u64,
    pub procs: u64,
}

impl Default for PerNode {
    fn default() -> Self {
        PerNode { files: 64, procs: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreflightOptions {
    pub ulimit_floor: u64,
    pub pty_floor: u64,
    pub pty_margin: u64,
}

impl Default for PreflightOptions {
    fn default() -> Self {
        PreflightOptions {
            ulimit_floor: DEFAULT_ULIMIT_FLOOR,
            pty_floor: DEFAULT_PTY_MAX,
            pty_margin: DEFAULT_PTY_MARGIN,
        }
    }
}

/// Settings for `node_count` containers. Fixed values are floors; the node
/// count can only raise the ulimits and the pty limit.
pub fn recommend(node_count: u64, per_node: PerNode, opts: &PreflightOptions) -> ParameterPlan {
    let node_count = node_count.max(1);
    let nofile = (node_count * per_node.files.max(1)).max(opts.ulimit_floor);
    let nproc = (node_count * per_node.procs.max(1)).max(opts.ulimit_floor);
    let pty = (node_count + opts.pty_margin).max(opts.pty_floor);

    let mut plan = ParameterPlan::default();
    for (item, value) in [(LimitItem::Nofile, nofile), (LimitItem::Nproc, nproc)] {
        for kind in [LimitKind::Hard, LimitKind::Soft] {
            plan.push(
                ParamKey::Ulimit { kind, item },
                ParamValue::Int(value),
                "containers and their processes run as root",
            );
        }
    }
    plan.push(
        ParamKey::sysctl("kernel.pty.max"),
        ParamValue::Int(pty),
        "each container normally holds one pseudo-terminal",
    );
    for name in [
        "net.core.rmem_max",
        "net.core.rmem_default",
        "net.core.wmem_max",
        "net.core.wmem_default",
    ] {
        plan.push(
            ParamKey::sysctl(name),
            ParamValue::Int(SOCKET_BUFFER_MAX),
            "socket buffers for many concurrent peers",
        );
    }
    for name in ["net.ipv4.tcp_rmem", "net.ipv4.tcp_wmem"] {
        plan.push(
            ParamKey::sysctl(name),
            ParamValue::Triple(TCP_BUFFER_TRIPLE),
            "TCP buffer min/default/max",
        );
    }
    for name in [
        "net.ipv4.neigh.default.gc_thresh1",
        "net.ipv4.neigh.default.gc_thresh2",
        "net.ipv4.neigh.default.gc_thresh3",
    ] {
        plan.push(
            ParamKey::sysctl(name),
            ParamValue::Int(NEIGH_GC_THRESH),
            "neighbour cache must hold an entry per peer",
        );
    }
    plan
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "UPPERCASE")]
pub enum AuditStatus {
    Pass,
    Fail {
        current: ParamValue,
        /// `required - current` for integer keys.
        delta: Option<i128>,
    },
    Missing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditLine {
    pub key: ParamKey,
    pub required: ParamValue,
    pub status: AuditStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub lines: Vec<AuditLine>,
}

impl AuditReport {
    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(|l| l.status == AuditStatus::Pass)
    }

    pub fn failing(&self) -> BTreeSet<String> {
        self.lines
            .iter()
            .filter(|l| matches!(l.status, AuditStatus::Fail { .. }))
            .map(|l| l.key.to_string())
            .collect()
    }

    pub fn status(&self, key: &str) -> Option<&AuditStatus> {
        self.lines.iter().find(|l| l.key.to_string() == key).map(|l| &l.status)
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            match &l.status {
                AuditStatus::Pass => writeln!(f, "PASS    {} (>= {})", l.key, l.required)?,
                AuditStatus::Missing => writeln!(f, "MISSING {} (want {})", l.key, l.required)?,
                AuditStatus::Fail { current, delta } => {
                    write!(f, "FAIL    {} = {current}, want {}", l.key, l.required)?;
                    if let Some(d) = delta {
                        write!(f, " (short by {d})")?;
                    }
                    writeln!(f)?;
                }
            }
        }
        Ok(())
    }
}

/// Integers pass when `current >= required`; triples must match exactly.
pub fn audit(plan: &ParameterPlan, readings: &BTreeMap<String, ParamValue>) -> AuditReport {
    let lines = plan
        .entries
        .iter()
        .map(|e| {
            let status = match readings.get(&e.key.to_string()) {
                None => AuditStatus::Missing,
                Some(cur) => match (&e.required, cur) {
                    (ParamValue::Int(req), ParamValue::Int(c)) if c >= req => AuditStatus::Pass,
                    (ParamValue::Int(req), ParamValue::Int(c)) => AuditStatus::Fail {
                        current: cur.clone(),
                        delta: Some(*req as i128 - *c as i128),
                    },
                    (ParamValue::Triple(req), ParamValue::Triple(c)) if req == c => AuditStatus::Pass,
                    _ => AuditStatus::Fail {
                        current: cur.clone(),
                        delta: None,
                    },
                },
            };
            AuditLine {
                key: e.key.clone(),
                required: e.required.clone(),
                status,
            }
        })
        .collect();
    AuditReport { lines }
}

/// Parses `sysctl` output (`key = value` per line) and `ulimit.*` lines in
/// the same shape. Unparseable lines are skipped.
pub fn parse_readings(text: &str) -> BTreeMap<String, ParamValue> {
    text.lines()
        .filter_map(|l| {
            let (k, v) = l.split_once('=')?;
            Some((k.trim().to_string(), ParamValue::parse(v)?))
        })
        .collect()
}

/// Commands printing live values in the shape [`parse_readings`] accepts.
pub fn reading_commands(plan: &ParameterPlan) -> Vec<String> {
    let mut cmds = Vec::new();
    let names = plan.sysctl_names();
    if !names.is_empty() {
        cmds.push(format!("sysctl {}", names.join(" ")));
    }
    for e in &plan.entries {
        if let ParamKey::Ulimit { kind, item } = &e.key {
            let flag = match (kind, item) {
                (LimitKind::Hard, LimitItem::Nofile) => "-Hn",
                (LimitKind::Soft, LimitItem::Nofile) => "-Sn",
                (LimitKind::Hard, LimitItem::Nproc) => "-Hu",
                (LimitKind::Soft, LimitItem::Nproc) => "-Su",
            };
            cmds.push(format!("echo \"{} = $(ulimit {flag})\"", e.key));
        }
    }
    cmds
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfFragments {
    pub limits_conf: String,
    pub sysctl_conf: String,
}

pub fn emit_conf(plan: &ParameterPlan) -> ConfFragments {
    let mut out = ConfFragments::default();
    for e in &plan.entries {
        match (&e.key, &e.required) {
            (ParamKey::Ulimit { kind, item }, v) => {
                let kind = match kind {
                    LimitKind::Hard => "hard",
                    LimitKind::Soft => "soft",
                };
                let item = match item {
                    LimitItem::Nofile => "nofile",
                    LimitItem::Nproc => "nproc",
                };
                out.limits_conf.push_str(&format!("root {kind} {item} {v}\n"));
            }
            (ParamKey::Sysctl { name }, ParamValue::Int(v)) => {
                out.sysctl_conf.push_str(&format!("{name}={v}\n"));
            }
            (ParamKey::Sysctl { name }, v @ ParamValue::Triple(_)) => {
                out.sysctl_conf.push_str(&format!("{name}=\"{v}\"\n"));
            }
        }
    }
    out
}

/// Reads fragments produced by [`emit_conf`] back into `(key, value)` pairs.
pub fn parse_conf(fragments: &ConfFragments) -> BTreeMap<String, ParamValue> {
    let mut out = BTreeMap::new();
    for line in fragments.limits_conf.lines() {
        if let ["root", kind @ ("hard" | "soft"), item @ ("nofile" | "nproc"), v] =
            line.split_whitespace().collect::<Vec<_>>().as_slice()
        {
            if let Some(v) = ParamValue::parse(v) {
                out.insert(format!("ulimit.{kind}.{item}"), v);
            }
        }
    }
    out.extend(parse_readings(&fragments.sysctl_conf));
    out
}
