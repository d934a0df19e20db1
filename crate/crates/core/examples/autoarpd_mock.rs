//! The neighbour helper answering queued solicitations through the in-memory
//! transport, plus the interface settings that hand resolution to it.
//!
//! cargo run --example autoarpd_mock

use std::net::Ipv4Addr;
use std::sync::atomic::AtomicBool;

use latem::autoarpd::{emit_neigh_sysctls, serve, MockTransport, Solicitation, DEFAULT_REACHABLE_MS};
use latem::link_layer::MacPattern;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    print!("{}", emit_neigh_sysctls("eth0", DEFAULT_REACHABLE_MS).render());

    let requests = (2..6).map(|i| Solicitation {
        ip: Ipv4Addr::new(172, 17, 0, i),
        ifindex: 7,
    });
    let mut transport = MockTransport::new(requests);
    let stats = serve(&mut transport, &MacPattern::default(), &AtomicBool::new(false))?;
    for (req, entry) in &transport.replies {
        println!("if{} {} -> {} {:?}", req.ifindex, entry.ip, entry.mac, entry.nud);
    }
    println!("{} solicitations, {} replies", stats.received, stats.replied);
    Ok(())
}
