//! Time inflation: every time-bearing quantity of an experiment is multiplied
//! by one factor, and TCP's initial retransmission timeout, which is a kernel
//! constant, is overridden through a `sock_ops` BPF program.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::orchestrator::manifest::ExperimentManifest;
use crate::rational::Rational;
use crate::script::CommandScript;

pub const PROG_ID_PLACEHOLDER: &str = "<PROG_ID>";
pub const DEFAULT_OBJECT: &str = "tcp-rto.o";
pub const DEFAULT_PIN: &str = "/sys/fs/bpf/tcp-rto";
pub const DEFAULT_CGROUP: &str = "/sys/fs/cgroup";
pub const PROGRAM_NAME: &str = "set_initial_rto";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum InflationError {
    #[error("inflation factor must be positive, got {0}")]
    Factor(Rational),
    #[error("timeout {timeout_s}s at HZ={hz} does not fit a 32-bit int")]
    Overflow { timeout_s: u32, hz: u32 },
    #[error("timeout and HZ must both be at least 1")]
    Zero,
    #[error("{0} must not be empty")]
    EmptyPath(&'static str),
}

/// Timers without an explicit `inflate` tag. Inflation refuses to guess.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("timers lack an `inflate` tag: {}", timers.join(", "))]
pub struct InflationLintError {
    pub timers: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Rational", into = "Rational")]
pub struct InflationFactor(Rational);

impl InflationFactor {
    pub const IDENTITY: InflationFactor = InflationFactor(Rational::ONE);

    pub fn new(x: Rational) -> Result<Self, InflationError> {
        if x.is_positive() {
            Ok(InflationFactor(x))
        } else {
            Err(InflationError::Factor(x))
        }
    }

    pub fn value(self) -> Rational {
        self.0
    }

    pub fn compose(self, other: InflationFactor) -> InflationFactor {
        InflationFactor(self.0 * other.0)
    }
}

impl TryFrom<Rational> for InflationFactor {
    type Error = InflationError;

    fn try_from(x: Rational) -> Result<Self, Self::Error> {
        InflationFactor::new(x)
    }
}

impl From<InflationFactor> for Rational {
    fn from(x: InflationFactor) -> Rational {
        x.0
    }
}

impl FromStr for InflationFactor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let r: Rational = s.parse().map_err(|e| format!("{e}"))?;
        InflationFactor::new(r).map_err(|e| e.to_string())
    }
}

impl fmt::Display for InflationFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Multiplies the delay factor, every tagged timer and every phase stagger
/// by `x`. Rates (`per-s` timers) are divided instead. Fails if any timer
/// carries no `inflate` tag.
pub fn inflate_manifest(m: &ExperimentManifest, x: InflationFactor) -> Result<ExperimentManifest, InflationLintError> {
    let untagged: Vec<String> = m
        .timers
        .iter()
        .filter(|(_, t)| t.inflate.is_none())
        .map(|(k, _)| k.clone())
        .collect();
    if !untagged.is_empty() {
        return Err(InflationLintError { timers: untagged });
    }
    let mut out = m.clone();
    if let Some(d) = &mut out.delay {
        d.inflation = d.inflation.compose(x);
    }
    for t in out.timers.values_mut() {
        if t.inflate == Some(true) {
            t.value = t.unit.inflate(t.value, x.value());
        }
    }
    for p in &mut out.phases {
        p.stagger_ms = p.stagger_ms * x.value();
    }
    Ok(out)
}

/// Smallest whole number of seconds `s >= 1` with `1000·s > 2·d`, so the
/// SYN/SYN-ACK exchange over a one-way delay of `d` ms completes before the
/// first retransmission.
pub fn recommend_rto(max_one_way_delay_ms: u64) -> u32 {
    recommend_rto_with_margin(max_one_way_delay_ms, 0)
}

/// Like [`recommend_rto`] with `margin_ms` added to the round trip.
pub fn recommend_rto_with_margin(max_one_way_delay_ms: u64, margin_ms: u64) -> u32 {
    let rtt = 2 * max_one_way_delay_ms + margin_ms;
    ((rtt / 1000 + 1).max(1)) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BpfRtoConfig {
    pub timeout_s: u32,
    /// The host's `CONFIG_HZ`; see `grep 'CONFIG_HZ=' /boot/config-$(uname -r)`.
    pub hz: u32,
}

impl BpfRtoConfig {
    pub fn new(timeout_s: u32, hz: u32) -> Result<Self, InflationError> {
        let c = BpfRtoConfig { timeout_s, hz };
        c.reply()?;
        Ok(c)
    }

    /// Value written to `skops->reply`, in jiffies.
    pub fn reply(&self) -> Result<i32, InflationError> {
        if self.timeout_s == 0 || self.hz == 0 {
            return Err(InflationError::Zero);
        }
        (self.timeout_s as i64 * self.hz as i64)
            .try_into()
            .map_err(|_| InflationError::Overflow {
                timeout_s: self.timeout_s,
                hz: self.hz,
            })
    }
}

const BPF_HEAD: &str = "#include <linux/bpf.h>

#ifndef __section
# define __section(NAME)     \\
__attribute__((section(NAME), used))
#endif


__section(\"sockops\")
int set_initial_rto(struct bpf_sock_ops *skops)
{
";

const BPF_TAIL: &str = "
\tint op = (int) skops->op;
\tif (op == BPF_SOCK_OPS_TIMEOUT_INIT) {
\t\tskops->reply =  timeout * hz;
\t\treturn 1;
\t}

\treturn 1;
}

char _license[] __section(\"license\") = \"GPL\";
";

pub fn render_bpf_source(c: &BpfRtoConfig) -> Result<String, InflationError> {
    c.reply()?;
    Ok(format!(
        "{BPF_HEAD}\tconst int timeout = {}; // initial RTO timout in seconds\n\
         \tconst int hz = {};  // this value has to match the HZ value of the system\n{BPF_TAIL}",
        c.timeout_s, c.hz
    ))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpfCommands {
    pub load: CommandScript,
    pub unload: CommandScript,
}

/// Compile, load, and attach the program; the attach and detach lines carry
/// [`PROG_ID_PLACEHOLDER`] until the ID is read from `bpftool prog show`.
pub fn emit_bpf_commands(obj_name: &str, pinned_path: &str, cgroup_path: &str) -> Result<BpfCommands, InflationError> {
    for (v, what) in [
        (obj_name, "object name"),
        (pinned_path, "pin path"),
        (cgroup_path, "cgroup path"),
    ] {
        if v.trim().is_empty() {
            return Err(InflationError::EmptyPath(what));
        }
    }
    let source = match obj_name.strip_suffix(".o") {
        Some(stem) => format!("{stem}.c"),
        None => format!("{obj_name}.c"),
    };
    let mut load = CommandScript::with_phase("bpf-load");
    load.push(format!("clang -O2 -target bpf -c {source} -o {obj_name}"));
    load.push(format!("bpftool prog load {obj_name} {pinned_path}"));
    load.push(format!(
        "# {PROG_ID_PLACEHOLDER} is the id of `{PROGRAM_NAME}` in the next output"
    ));
    load.push("bpftool prog show");
    load.push(format!(
        "bpftool cgroup attach {cgroup_path} sock_ops id {PROG_ID_PLACEHOLDER}"
    ));
    let mut unload = CommandScript::with_phase("bpf-unload");
    unload.push(format!("rm {pinned_path}"));
    unload.push(format!(
        "bpftool cgroup detach {cgroup_path} sock_ops id {PROG_ID_PLACEHOLDER}"
    ));
    Ok(BpfCommands { load, unload })
}

/// Highest program ID of a `sock_ops` program named `name` in
/// `bpftool prog show` output.
pub fn parse_prog_id(output: &str, name: &str) -> Option<u32> {
    output
        .lines()
        .filter_map(|l| {
            let (id, rest) = l.trim().split_once(':')?;
            let mut words = rest.split_whitespace();
            (words.next()? == "sock_ops" && words.next()? == "name" && words.next()? == name)
                .then(|| id.trim().parse().ok())
                .flatten()
        })
        .max()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn rto_examples() {
        assert_eq!(recommend_rto(400), 1);
        assert_eq!(recommend_rto(500), 2);
        assert_eq!(recommend_rto(1990), 4);
        assert_eq!(recommend_rto(0), 1);
        assert_eq!(recommend_rto(499), 1);
        assert_eq!(recommend_rto_with_margin(400, 300), 2);
    }

    #[test]
    fn rto_minimality() {
        for d in 0..5000u64 {
            let s = recommend_rto(d) as u64;
            assert!(1000 * s > 2 * d);
            if d >= 500 {
                assert!(1000 * (s - 1) <= 2 * d);
            }
        }
    }

    #[test]
    fn bpf_source_constants() {
        let src = render_bpf_source(&BpfRtoConfig::new(3, 250).unwrap()).unwrap();
        assert!(src.contains("timeout = 3;") && src.contains("hz = 250;"));
        assert!(src.contains("__section(\"sockops\")"));
        assert!(src.ends_with("char _license[] __section(\"license\") = \"GPL\";\n"));
        assert_eq!(BpfRtoConfig::new(3, 250).unwrap().reply(), Ok(750));
        assert_eq!(BpfRtoConfig::new(1, 250).unwrap().reply(), Ok(250));
        assert_eq!(BpfRtoConfig::new(10, 1000).unwrap().reply(), Ok(10_000));
    }

    #[test]
    fn bpf_config_overflow() {
        assert_eq!(
            BpfRtoConfig::new(u32::MAX, 1000),
            Err(InflationError::Overflow {
                timeout_s: u32::MAX,
                hz: 1000
            })
        );
        let bad = BpfRtoConfig {
            timeout_s: 3_000_000,
            hz: 1000,
        };
        assert!(render_bpf_source(&bad).is_err());
        assert_eq!(BpfRtoConfig::new(0, 250), Err(InflationError::Zero));
    }

    #[test]
    fn bpf_commands() {
        let c = emit_bpf_commands(DEFAULT_OBJECT, DEFAULT_PIN, DEFAULT_CGROUP).unwrap();
        let load = c.load.lines();
        assert_eq!(load[0], "clang -O2 -target bpf -c tcp-rto.c -o tcp-rto.o");
        assert!(load.contains(&"bpftool prog load tcp-rto.o /sys/fs/bpf/tcp-rto".to_string()));
        assert!(load.contains(&"bpftool prog show".to_string()));
        assert_eq!(
            load.last().unwrap(),
            "bpftool cgroup attach /sys/fs/cgroup sock_ops id <PROG_ID>"
        );
        assert_eq!(
            c.unload.lines(),
            [
                "rm /sys/fs/bpf/tcp-rto",
                "bpftool cgroup detach /sys/fs/cgroup sock_ops id <PROG_ID>"
            ]
        );
        assert!(emit_bpf_commands("x.o", "", DEFAULT_CGROUP).is_err());
    }

    #[test]
    fn prog_id_from_show_output() {
        let out = "3: cgroup_skb  tag 6deef7357e7b4530  gpl\n\
                   169: sock_ops  name set_initial_rto  tag e4384b8da577553a  gpl\n\
                   \tloaded_at 2021-04-29T15:49:03+0800  uid 0\n\
                   \txlated 296B  jited 186B  memlock 4096B\n";
        assert_eq!(parse_prog_id(out, PROGRAM_NAME), Some(169));
        assert_eq!(parse_prog_id("3: cgroup_skb  tag 6d  gpl\n", PROGRAM_NAME), None);
    }

    #[test]
    fn factor_validation() {
        assert!(InflationFactor::new(r("0")).is_err());
        assert!(InflationFactor::new(r("-1")).is_err());
        let a = InflationFactor::new(r("3/2")).unwrap();
        assert_eq!(a.compose(a).value(), r("9/4"));
        assert_eq!("2".parse::<InflationFactor>().unwrap().value(), r("2"));
    }
}
