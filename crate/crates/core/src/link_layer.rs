//! MAC addresses computed from IPv4 addresses, static bridge forwarding
//! entries, and the bridge port-count check.

use std::collections::BTreeSet;
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::script::CommandScript;

/// Ports a stock Linux bridge accepts (`1 << BR_PORT_BITS`, bits = 10).
pub const DEFAULT_BRIDGE_PORTS: usize = 1024;
pub const DEFAULT_BR_PORT_BITS: u32 = 10;
/// Value used for a 3500-container deployment on a patched kernel.
pub const REFERENCE_BR_PORT_BITS: u32 = 17;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LinkError {
    #[error("MAC prefix must be 2 octets so the address is 6 octets long, got {0}")]
    PrefixLength(usize),
    #[error("MAC prefix {0:02x} lacks the locally administered bit (0x02)")]
    NotLocal(u8),
    #[error("invalid MAC `{0}`")]
    Mac(String),
    #[error("interface `{0}` listed more than once")]
    DuplicateVeth(String),
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MacAddr(pub [u8; 6]);

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            o[0], o[1], o[2], o[3], o[4], o[5]
        )
    }
}

impl fmt::Debug for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MacAddr({self})")
    }
}

impl FromStr for MacAddr {
    type Err = LinkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 6];
        let mut parts = s.trim().split(':');
        for o in out.iter_mut() {
            let p = parts.next().ok_or_else(|| LinkError::Mac(s.to_string()))?;
            if p.is_empty() || p.len() > 2 {
                return Err(LinkError::Mac(s.to_string()));
            }
            *o = u8::from_str_radix(p, 16).map_err(|_| LinkError::Mac(s.to_string()))?;
        }
        if parts.next().is_some() {
            return Err(LinkError::Mac(s.to_string()));
        }
        Ok(MacAddr(out))
    }
}

impl Serialize for MacAddr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Fixed leading octets followed by the four octets of the IPv4 address.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MacPattern {
    prefix: [u8; 2],
}

impl MacPattern {
    pub fn new(prefix: &[u8]) -> Result<Self, LinkError> {
        let prefix: [u8; 2] = prefix.try_into().map_err(|_| LinkError::PrefixLength(prefix.len()))?;
        if prefix[0] & 0x02 == 0 {
            return Err(LinkError::NotLocal(prefix[0]));
        }
        Ok(MacPattern { prefix })
    }

    pub fn prefix(&self) -> [u8; 2] {
        self.prefix
    }
}

impl Default for MacPattern {
    /// `02:42`, the container runtime's default.
    fn default() -> Self {
        MacPattern { prefix: [0x02, 0x42] }
    }
}

impl fmt::Display for MacPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02x}:{:02x}", self.prefix[0], self.prefix[1])
    }
}

impl fmt::Debug for MacPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MacPattern({self})")
    }
}

impl FromStr for MacPattern {
    type Err = LinkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let octets = s
            .split(':')
            .map(|p| u8::from_str_radix(p, 16))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| LinkError::Mac(s.to_string()))?;
        MacPattern::new(&octets)
    }
}

impl Serialize for MacPattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacPattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

pub fn mac_for_ip(ip: Ipv4Addr, pattern: &MacPattern) -> MacAddr {
    let [a, b] = pattern.prefix;
    let [c, d, e, f] = ip.octets();
    MacAddr([a, b, c, d, e, f])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FdbEntry {
    pub mac: MacAddr,
    pub veth: String,
}

impl FdbEntry {
    pub fn command(&self) -> String {
        format!("bridge fdb add {} dev {} master static", self.mac, self.veth)
    }
}

/// One static forwarding entry per `(ip, veth)`, in input order.
pub fn emit_fdb_script(nodes: &[(Ipv4Addr, String)], pattern: &MacPattern) -> Result<CommandScript, LinkError> {
    let mut seen = BTreeSet::new();
    let mut script = CommandScript::new();
    for (ip, veth) in nodes {
        if !seen.insert(veth.as_str()) {
            return Err(LinkError::DuplicateVeth(veth.clone()));
        }
        let entry = FdbEntry {
            mac: mac_for_ip(*ip, pattern),
            veth: veth.clone(),
        };
        script.push(entry.command());
    }
    Ok(script)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BridgeDiagnostic {
    Ok { ports: usize },
    TooManyPorts { ports: usize, required_bits: u32 },
}

impl fmt::Display for BridgeDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BridgeDiagnostic::Ok { ports } => {
                write!(f, "ok: {ports} ports fit a stock bridge ({DEFAULT_BRIDGE_PORTS} max)")
            }
            BridgeDiagnostic::TooManyPorts { ports, required_bits } => write!(
                f,
                "warning: {ports} ports exceed the stock bridge limit of {DEFAULT_BRIDGE_PORTS}; \
                 rebuild the kernel with BR_PORT_BITS >= {required_bits} in net/bridge/br_private.h \
                 (a 3500-container deployment used BR_PORT_BITS={REFERENCE_BR_PORT_BITS})"
            ),
        }
    }
}

pub fn check_bridge_capacity(port_count: usize) -> BridgeDiagnostic {
    if port_count <= DEFAULT_BRIDGE_PORTS {
        return BridgeDiagnostic::Ok { ports: port_count };
    }
    let required_bits = usize::BITS - (port_count - 1).leading_zeros();
    BridgeDiagnostic::TooManyPorts {
        ports: port_count,
        required_bits,
    }
}
