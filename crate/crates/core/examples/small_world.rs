//! Overlay graphs for peer discovery: small-world and random regular.
//!
//! cargo run --example small_world

use latem::topology::{neighbor_lists, nws_graph, random_graph};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ring = nws_graph(12, 4, 0.0, 1)?;
    let sw = nws_graph(12, 4, 0.3, 1)?;
    let reg = random_graph(12, 3, 1)?;
    for (name, g) in [("ring lattice", &ring), ("small world", &sw), ("3-regular", &reg)] {
        println!("{name:<12} {g}, connected: {}", g.is_connected());
    }
    let names: Vec<String> = (1..=12).map(|i| format!("n{i}")).collect();
    for (node, peers) in neighbor_lists(&sw, &names)? {
        println!("{node}: {}", peers.join(","));
    }
    Ok(())
}
