//! Neighbour resolution without ARP traffic.
//!
//! With `app_solicit = 1` and `mcast_solicit = 0` on an interface the kernel
//! stops broadcasting ARP requests and instead asks a user-space helper for
//! every unresolved address. The helper here answers by computing the MAC
//! from the IP ([`mac_for_ip`]) and installs the entry as `REACHABLE`, so the
//! kernel never issues a confirmation probe either. Nothing is cached.

use std::fmt;
use std::net::Ipv4Addr;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::link_layer::{mac_for_ip, MacAddr, MacPattern};
use crate::script::CommandScript;

pub mod netlink;

/// Reachable time long enough to outlast an experiment (20 hours).
pub const DEFAULT_REACHABLE_MS: u64 = 72_000_000;

/// Neighbour Unreachability Detection state of a cache entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Nud {
    Reachable,
    Stale,
}

impl fmt::Display for Nud {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Nud::Reachable => "REACHABLE",
            Nud::Stale => "STALE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborEntry {
    pub ip: Ipv4Addr,
    pub mac: MacAddr,
    pub nud: Nud,
}

/// A kernel request to resolve `ip` on interface `ifindex`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Solicitation {
    pub ip: Ipv4Addr,
    pub ifindex: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("transport i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("solicitation transport failed after {received} requests: {source}")]
    Transport {
        received: u64,
        #[source]
        source: TransportError,
    },
}

#[derive(Debug)]
pub enum Recv {
    Solicit(Solicitation),
    /// Nothing arrived within the transport's poll interval.
    Idle,
    /// The channel is gone; the loop ends normally.
    Closed,
}

/// Source of solicitations and sink for neighbour entries.
pub trait SolicitTransport {
    fn receive(&mut self) -> Result<Recv, TransportError>;
    fn reply(&mut self, request: &Solicitation, entry: &NeighborEntry) -> Result<(), TransportError>;
}

pub fn resolve(ip: Ipv4Addr, pattern: &MacPattern) -> NeighborEntry {
    NeighborEntry {
        ip,
        mac: mac_for_ip(ip, pattern),
        nud: Nud::Reachable,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServeStats {
    pub received: u64,
    pub replied: u64,
}

/// Answers solicitations until `stop` is set or the transport closes.
pub fn serve<T: SolicitTransport + ?Sized>(
    transport: &mut T,
    pattern: &MacPattern,
    stop: &AtomicBool,
) -> Result<ServeStats, ServeError> {
    let mut stats = ServeStats::default();
    let fail = |stats: &ServeStats, source| {
        log::error!("autoarpd: {source}");
        ServeError::Transport {
            received: stats.received,
            source,
        }
    };
    while !stop.load(Ordering::Relaxed) {
        match transport.receive() {
            Ok(Recv::Solicit(req)) => {
                stats.received += 1;
                let entry = resolve(req.ip, pattern);
                log::debug!("autoarpd: {} -> {} on if{}", entry.ip, entry.mac, req.ifindex);
                transport.reply(&req, &entry).map_err(|e| fail(&stats, e))?;
                stats.replied += 1;
            }
            Ok(Recv::Idle) => {}
            Ok(Recv::Closed) => break,
            Err(e) => return Err(fail(&stats, e)),
        }
    }
    Ok(stats)
}

/// Interface settings that route resolution through the helper.
pub fn emit_neigh_sysctls(iface: &str, reachable_ms: u64) -> CommandScript {
    assert!(!iface.is_empty(), "interface name required");
    let mut s = CommandScript::new();
    for (key, value) in [
        ("mcast_solicit", 0),
        ("app_solicit", 1),
        ("base_reachable_time_ms", reachable_ms),
    ] {
        s.push(format!("echo \"net.ipv4.neigh.{iface}.{key} = {value}\" | sysctl -p -"));
    }
    s
}

/// In-memory transport: replays queued solicitations and records replies.
#[derive(Debug, Default)]
pub struct MockTransport {
    queue: std::collections::VecDeque<Solicitation>,
    pub replies: Vec<(Solicitation, NeighborEntry)>,
    close_when_drained: bool,
    fail_after: Option<usize>,
}

impl MockTransport {
    pub fn new(requests: impl IntoIterator<Item = Solicitation>) -> Self {
        MockTransport {
            queue: requests.into_iter().collect(),
            replies: Vec::new(),
            close_when_drained: true,
            fail_after: None,
        }
    }

    /// Keep returning [`Recv::Idle`] once drained instead of closing.
    pub fn stay_open(mut self) -> Self {
        self.close_when_drained = false;
        self
    }

    /// Fail the receive that follows `n` delivered solicitations.
    pub fn fail_after(mut self, n: usize) -> Self {
        self.fail_after = Some(n);
        self
    }

    pub fn push(&mut self, req: Solicitation) {
        self.queue.push_back(req);
    }
}

impl SolicitTransport for MockTransport {
    fn receive(&mut self) -> Result<Recv, TransportError> {
        if let Some(n) = self.fail_after {
            if self.replies.len() >= n {
                return Err(TransportError::Other("injected failure".into()));
            }
        }
        Ok(match self.queue.pop_front() {
            Some(r) => Recv::Solicit(r),
            None if self.close_when_drained => Recv::Closed,
            None => {
                std::thread::yield_now();
                Recv::Idle
            }
        })
    }

    fn reply(&mut self, request: &Solicitation, entry: &NeighborEntry) -> Result<(), TransportError> {
        self.replies.push((*request, *entry));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    fn sol(ip: &str) -> Solicitation {
        Solicitation {
            ip: ip.parse().unwrap(),
            ifindex: 2,
        }
    }

    #[test]
    fn resolve_examples() {
        let p = MacPattern::default();
        let e = resolve("10.0.0.7".parse().unwrap(), &p);
        assert_eq!(e.mac.to_string(), "02:42:0a:00:00:07");
        assert_eq!(e.nud, Nud::Reachable);
        assert_eq!(resolve(Ipv4Addr::UNSPECIFIED, &p).mac.to_string(), "02:42:00:00:00:00");
        assert_eq!(e, resolve("10.0.0.7".parse().unwrap(), &p));
    }

    #[test]
    fn serves_queued_requests() {
        let mut t = MockTransport::new([sol("10.0.0.1"), sol("10.0.0.2"), sol("10.0.0.3")]);
        let stats = serve(&mut t, &MacPattern::default(), &AtomicBool::new(false)).unwrap();
        assert_eq!(
            stats,
            ServeStats {
                received: 3,
                replied: 3
            }
        );
        for (req, entry) in &t.replies {
            assert_eq!(req.ip, entry.ip);
        }
    }

    #[test]
    fn stop_before_any_request() {
        let mut t = MockTransport::new([]).stay_open();
        let stop = AtomicBool::new(true);
        assert_eq!(
            serve(&mut t, &MacPattern::default(), &stop).unwrap(),
            ServeStats::default()
        );
    }

    #[test]
    fn stop_from_another_thread() {
        let stop = Arc::new(AtomicBool::new(false));
        let s2 = stop.clone();
        let handle = std::thread::spawn(move || {
            let mut t = MockTransport::new([sol("10.0.0.9")]).stay_open();
            serve(&mut t, &MacPattern::default(), &s2).unwrap()
        });
        std::thread::sleep(std::time::Duration::from_millis(20));
        stop.store(true, Ordering::Relaxed);
        assert_eq!(handle.join().unwrap().replied, 1);
    }

    #[test]
    fn transport_failure_is_fatal() {
        let mut t = MockTransport::new([sol("10.0.0.1"), sol("10.0.0.2")]).fail_after(1);
        let err = serve(&mut t, &MacPattern::default(), &AtomicBool::new(false)).unwrap_err();
        assert!(matches!(err, ServeError::Transport { received: 1, .. }));
    }

    #[test]
    fn sysctl_lines() {
        let s = emit_neigh_sysctls("eth0", DEFAULT_REACHABLE_MS);
        assert_eq!(s.len(), 3);
        assert!(s.lines()[0].contains("net.ipv4.neigh.eth0.mcast_solicit = 0"));
        assert!(s.lines()[1].contains("app_solicit = 1"));
        assert!(s.lines()[2].contains("base_reachable_time_ms = 72000000"));
        assert!(emit_neigh_sysctls("eth0", 1000).lines()[2].contains("base_reachable_time_ms = 1000"));
    }
}
