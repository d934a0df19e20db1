//! Host-side interface discovery. A container's `iflink` is the ifindex of
//! its peer on the host; `ip -o link` maps that index to a name.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::path::Path;

use serde::Serialize;

use crate::link_layer::{mac_for_ip, MacAddr, MacPattern};

use super::adapter::{AdapterError, CommandOutput, RuntimeAdapter};

#[derive(Debug, thiserror::Error)]
pub enum InventoryError {
    #[error("node `{node}` has no discoverable host interface{}", .iflink.map(|i| format!(" (iflink {i})")).unwrap_or_default())]
    NoVeth { node: String, iflink: Option<u32> },
    #[error("`{command}` exited with {status}: {stderr}")]
    Command {
        command: String,
        status: i32,
        stderr: String,
    },
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InterfaceEntry {
    pub node: String,
    pub veth: String,
    pub mac: MacAddr,
    pub ip: Ipv4Addr,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Inventory {
    pub entries: Vec<InterfaceEntry>,
    pub warnings: Vec<String>,
}

impl Inventory {
    pub fn veth_map(&self) -> BTreeMap<String, String> {
        self.entries.iter().map(|e| (e.node.clone(), e.veth.clone())).collect()
    }
}

/// `ifindex → name` from `ip -o link` output.
pub fn parse_ip_link(output: &str) -> BTreeMap<u32, String> {
    output
        .lines()
        .filter_map(|l| {
            let mut f = l.split_whitespace();
            let idx = f.next()?.strip_suffix(':')?.parse().ok()?;
            let name = f.next()?.trim_end_matches(':');
            let name = name.split('@').next()?;
            Some((idx, name.to_string()))
        })
        .collect()
}

fn checked(adapter: &dyn RuntimeAdapter, command: &str, cwd: &Path) -> Result<CommandOutput, InventoryError> {
    let out = adapter.run(command, cwd)?;
    if !out.success() {
        return Err(InventoryError::Command {
            command: command.to_string(),
            status: out.status,
            stderr: out.stderr.trim().to_string(),
        });
    }
    Ok(out)
}

pub fn gather_interfaces(
    adapter: &dyn RuntimeAdapter,
    nodes: &[(String, Ipv4Addr)],
    iface: &str,
    pattern: &MacPattern,
    cwd: &Path,
) -> Result<Inventory, InventoryError> {
    let mut inv = Inventory::default();
    if nodes.is_empty() {
        inv.warnings.push("no containers to inventory".into());
        return Ok(inv);
    }
    let links = parse_ip_link(&checked(adapter, "ip -o link", cwd)?.stdout);
    for (node, ip) in nodes {
        let iflink = checked(
            adapter,
            &format!("docker exec {node} cat /sys/class/net/{iface}/iflink"),
            cwd,
        )?
        .stdout
        .trim()
        .parse::<u32>()
        .ok();
        let veth = iflink
            .and_then(|i| links.get(&i))
            .ok_or_else(|| InventoryError::NoVeth {
                node: node.clone(),
                iflink,
            })?;
        let addr = checked(
            adapter,
            &format!("docker exec {node} cat /sys/class/net/{iface}/address"),
            cwd,
        )?
        .stdout;
        let expected = mac_for_ip(*ip, pattern);
        let mac = match addr.trim().parse::<MacAddr>() {
            Ok(mac) => {
                if mac != expected {
                    inv.warnings
                        .push(format!("{node}: MAC {mac} differs from {expected} computed from {ip}"));
                }
                mac
            }
            Err(_) => {
                inv.warnings.push(format!("{node}: unreadable MAC `{}`", addr.trim()));
                expected
            }
        };
        inv.entries.push(InterfaceEntry {
            node: node.clone(),
            veth: veth.clone(),
            mac,
            ip: *ip,
        });
    }
    Ok(inv)
}
