//! rtnetlink framing for neighbour solicitations and replies.
//!
//! The kernel multicasts an `RTM_GETNEIGH` request on the neighbour group
//! for each address it wants resolved; the helper answers with an
//! `RTM_NEWNEIGH` carrying `NDA_DST`, `NDA_LLADDR` and the NUD state.

use std::net::Ipv4Addr;

use super::{NeighborEntry, Nud, Recv, SolicitTransport, Solicitation, TransportError};

const NLMSG_HDRLEN: usize = 16;
const NDMSG_LEN: usize = 12;
const RTA_HDRLEN: usize = 4;

const NLMSG_ERROR: u16 = 2;
const NLMSG_DONE: u16 = 3;
pub const RTM_NEWNEIGH: u16 = 28;
pub const RTM_GETNEIGH: u16 = 30;

const NLM_F_REQUEST: u16 = 0x1;
const NLM_F_REPLACE: u16 = 0x100;
const NLM_F_CREATE: u16 = 0x400;

const NDA_DST: u16 = 1;
const NDA_LLADDR: u16 = 2;

const AF_INET: u8 = 2;
pub const RTMGRP_NEIGH: u32 = 0x4;

pub const NUD_REACHABLE: u16 = 0x02;
pub const NUD_STALE: u16 = 0x04;

fn align4(n: usize) -> usize {
    (n + 3) & !3
}

fn nud_bits(nud: Nud) -> u16 {
    match nud {
        Nud::Reachable => NUD_REACHABLE,
        Nud::Stale => NUD_STALE,
    }
}

fn push_attr(buf: &mut Vec<u8>, kind: u16, data: &[u8]) {
    let len = RTA_HDRLEN + data.len();
    buf.extend_from_slice(&(len as u16).to_ne_bytes());
    buf.extend_from_slice(&kind.to_ne_bytes());
    buf.extend_from_slice(data);
    buf.resize(align4(buf.len()), 0);
}

/// `RTM_NEWNEIGH` installing `entry` on interface `ifindex`.
pub fn encode_new_neigh(entry: &NeighborEntry, ifindex: u32, seq: u32) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64);
    buf.resize(NLMSG_HDRLEN, 0);
    // ndmsg
    buf.push(AF_INET);
    buf.extend_from_slice(&[0, 0, 0]);
    buf.extend_from_slice(&(ifindex as i32).to_ne_bytes());
    buf.extend_from_slice(&nud_bits(entry.nud).to_ne_bytes());
    buf.push(0); // ndm_flags
    buf.push(0); // ndm_type
    push_attr(&mut buf, NDA_DST, &entry.ip.octets());
    push_attr(&mut buf, NDA_LLADDR, &entry.mac.0);

    let len = buf.len() as u32;
    buf[0..4].copy_from_slice(&len.to_ne_bytes());
    buf[4..6].copy_from_slice(&RTM_NEWNEIGH.to_ne_bytes());
    buf[6..8].copy_from_slice(&(NLM_F_REQUEST | NLM_F_CREATE | NLM_F_REPLACE).to_ne_bytes());
    buf[8..12].copy_from_slice(&seq.to_ne_bytes());
    buf[12..16].copy_from_slice(&0u32.to_ne_bytes());
    buf
}

/// Decoded form of one neighbour message, used by tests and diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighMessage {
    pub kind: u16,
    pub flags: u16,
    pub ifindex: u32,
    pub state: u16,
    pub dst: Option<Ipv4Addr>,
    pub lladdr: Option<[u8; 6]>,
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_ne_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_ne_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Splits a datagram into neighbour messages. Non-neighbour messages and
/// non-IPv4 families are skipped.
pub fn decode_messages(buf: &[u8]) -> Result<Vec<NeighMessage>, TransportError> {
    let mut out = Vec::new();
    let mut off = 0;
    while off + NLMSG_HDRLEN <= buf.len() {
        let len = read_u32(buf, off) as usize;
        if len < NLMSG_HDRLEN || off + len > buf.len() {
            return Err(TransportError::Malformed(format!(
                "message length {len} at offset {off}"
            )));
        }
        let kind = read_u16(buf, off + 4);
        let flags = read_u16(buf, off + 6);
        let body = &buf[off + NLMSG_HDRLEN..off + len];
        off += align4(len);
        match kind {
            NLMSG_DONE => break,
            NLMSG_ERROR => continue,
            RTM_NEWNEIGH | RTM_GETNEIGH => {}
            _ => continue,
        }
        if body.len() < NDMSG_LEN {
            return Err(TransportError::Malformed("short ndmsg".into()));
        }
        if body[0] != AF_INET {
            continue;
        }
        let mut msg = NeighMessage {
            kind,
            flags,
            ifindex: read_u32(body, 4),
            state: read_u16(body, 8),
            dst: None,
            lladdr: None,
        };
        let mut a = NDMSG_LEN;
        while a + RTA_HDRLEN <= body.len() {
            let alen = read_u16(body, a) as usize;
            let akind = read_u16(body, a + 2);
            if alen < RTA_HDRLEN || a + alen > body.len() {
                return Err(TransportError::Malformed(format!("attribute length {alen}")));
            }
            let data = &body[a + RTA_HDRLEN..a + alen];
            match (akind, data.len()) {
                (NDA_DST, 4) => msg.dst = Some(Ipv4Addr::new(data[0], data[1], data[2], data[3])),
                (NDA_LLADDR, 6) => msg.lladdr = Some(data.try_into().unwrap()),
                _ => {}
            }
            a += align4(alen);
        }
        out.push(msg);
    }
    Ok(out)
}

/// Solicitations contained in a datagram.
pub fn decode_solicitations(buf: &[u8]) -> Result<Vec<Solicitation>, TransportError> {
    Ok(decode_messages(buf)?
        .into_iter()
        .filter(|m| m.kind == RTM_GETNEIGH)
        .filter_map(|m| m.dst.map(|ip| Solicitation { ip, ifindex: m.ifindex }))
        .collect())
}

/// Kernel neighbour channel over an `AF_NETLINK` route socket. Requires
/// `CAP_NET_ADMIN` to install entries.
#[cfg(target_os = "linux")]
pub struct NetlinkTransport {
    fd: std::os::fd::OwnedFd,
    pending: std::collections::VecDeque<Solicitation>,
    buf: Vec<u8>,
    seq: u32,
    /// Only solicitations for this interface are answered, when set.
    ifindex: Option<u32>,
}

#[cfg(target_os = "linux")]
impl NetlinkTransport {
    pub fn open(poll: std::time::Duration, ifindex: Option<u32>) -> std::io::Result<Self> {
        use std::os::fd::FromRawFd;

        // SAFETY: plain socket syscalls on a descriptor we own.
        unsafe {
            let raw = libc::socket(
                libc::AF_NETLINK,
                libc::SOCK_RAW | libc::SOCK_CLOEXEC,
                libc::NETLINK_ROUTE,
            );
            if raw < 0 {
                return Err(std::io::Error::last_os_error());
            }
            let fd = std::os::fd::OwnedFd::from_raw_fd(raw);
            let mut addr: libc::sockaddr_nl = std::mem::zeroed();
            addr.nl_family = libc::AF_NETLINK as libc::sa_family_t;
            addr.nl_groups = RTMGRP_NEIGH;
            if libc::bind(
                raw,
                &addr as *const libc::sockaddr_nl as *const libc::sockaddr,
                std::mem::size_of::<libc::sockaddr_nl>() as libc::socklen_t,
            ) < 0
            {
                return Err(std::io::Error::last_os_error());
            }
            let tv = libc::timeval {
                tv_sec: poll.as_secs() as libc::time_t,
                tv_usec: poll.subsec_micros() as libc::suseconds_t,
            };
            if libc::setsockopt(
                raw,
                libc::SOL_SOCKET,
                libc::SO_RCVTIMEO,
                &tv as *const libc::timeval as *const libc::c_void,
                std::mem::size_of::<libc::timeval>() as libc::socklen_t,
            ) < 0
            {
                return Err(std::io::Error::last_os_error());
            }
            Ok(NetlinkTransport {
                fd,
                pending: Default::default(),
                buf: vec![0; 16384],
                seq: 1,
                ifindex,
            })
        }
    }
}

#[cfg(target_os = "linux")]
impl SolicitTransport for NetlinkTransport {
    fn receive(&mut self) -> Result<Recv, TransportError> {
        use std::os::fd::AsRawFd;

        if let Some(s) = self.pending.pop_front() {
            return Ok(Recv::Solicit(s));
        }
        // SAFETY: buffer is valid for its full length.
        let n = unsafe {
            libc::recv(
                self.fd.as_raw_fd(),
                self.buf.as_mut_ptr() as *mut libc::c_void,
                self.buf.len(),
                0,
            )
        };
        if n < 0 {
            let err = std::io::Error::last_os_error();
            return match err.kind() {
                std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut | std::io::ErrorKind::Interrupted => {
                    Ok(Recv::Idle)
                }
                _ => Err(err.into()),
            };
        }
        if n == 0 {
            return Ok(Recv::Closed);
        }
        let wanted = self.ifindex;
        self.pending.extend(
            decode_solicitations(&self.buf[..n as usize])?
                .into_iter()
                .filter(|s| wanted.is_none_or(|i| i == s.ifindex)),
        );
        Ok(self.pending.pop_front().map_or(Recv::Idle, Recv::Solicit))
    }

    fn reply(&mut self, request: &Solicitation, entry: &NeighborEntry) -> Result<(), TransportError> {
        use std::os::fd::AsRawFd;

        let msg = encode_new_neigh(entry, request.ifindex, self.seq);
        self.seq = self.seq.wrapping_add(1);
        // SAFETY: sockaddr_nl is zero-initialised and addresses the kernel.
        let rc = unsafe {
            let mut addr: libc::sockaddr_nl = std::mem::zeroed();
            addr.nl_family = libc::AF_NETLINK as libc::sa_family_t;
            libc::sendto(
                self.fd.as_raw_fd(),
                msg.as_ptr() as *const libc::c_void,
                msg.len(),
                0,
                &addr as *const libc::sockaddr_nl as *const libc::sockaddr,
                std::mem::size_of::<libc::sockaddr_nl>() as libc::socklen_t,
            )
        };
        if rc < 0 {
            return Err(std::io::Error::last_os_error().into());
        }
        Ok(())
    }
}
