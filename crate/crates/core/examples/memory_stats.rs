//! Memory checkpoints summarized from `docker stats` snapshots.
//!
//! cargo run --example memory_stats

use latem::orchestrator::stats::{parse_docker_stats, summarize_stats};

const AFTER_GETH: &str = "n1\t314.3MiB / 384GiB\nn2\t347.8MiB / 384GiB\nn3\t319.5MiB / 384GiB\n";
const AFTER_VALIDATOR: &str = "n1\t398.4MiB / 384GiB\nn2\t451.4MiB / 384GiB\nn3\t411.7MiB / 384GiB\n";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut samples = Vec::new();
    let mut available = None;
    for (name, text) in [("after geth", AFTER_GETH), ("after validator", AFTER_VALIDATOR)] {
        let (per_node, limit) = parse_docker_stats(text)?;
        available = available.or(limit);
        samples.push((name.to_string(), per_node));
    }
    let available = available.ok_or("no limit column")?.floor() as u64;
    print!("{}", summarize_stats(&samples, available)?);
    Ok(())
}
