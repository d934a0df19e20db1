//! Container MACs derived from addresses, the matching static FDB entries,
//! and the bridge port check.
//!
//! cargo run --example fdb_and_mac

use std::net::Ipv4Addr;

use latem::link_layer::{check_bridge_capacity, emit_fdb_script, mac_for_ip, MacPattern};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pattern = MacPattern::default();
    for ip in [Ipv4Addr::new(172, 17, 0, 2), Ipv4Addr::new(10, 0, 13, 200)] {
        println!("{ip} -> {}", mac_for_ip(ip, &pattern));
    }

    let nodes: Vec<(Ipv4Addr, String)> = (1..=4)
        .map(|i| (Ipv4Addr::new(10, 0, 0, i), format!("veth{i:02}")))
        .collect();
    print!("{}", emit_fdb_script(&nodes, &pattern)?.render());

    for ports in [750, 1024, 3500] {
        println!("{}", check_bridge_capacity(ports));
    }
    Ok(())
}
