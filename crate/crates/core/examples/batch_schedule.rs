//! Startup batches that keep RAM under the cap while nodes boot.
//!
//! cargo run --example batch_schedule

use latem::orchestrator::manifest::Resources;
use latem::orchestrator::{plan_batches, BatchRounding};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = Resources {
        ram_cap_fraction: "0.80".parse()?,
        per_node_startup_fraction: "0.8/750".parse()?,
        per_node_steady_fraction: "0.54/750".parse()?,
        available_mib: Some(393216),
        percent_rounding: false,
    };
    for rounding in [BatchRounding::Exact, BatchRounding::WholePercent] {
        let s = plan_batches(1100, &r, rounding)?;
        println!("{rounding:?}: {:?}", s.sizes());
        print!("{s}");
    }
    Ok(())
}
