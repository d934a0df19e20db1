//! Marking ruleset and qdisc tree for a small matrix, checked by simulating
//! every pair through both.
//!
//! cargo run --example nft_tc_plan

use std::net::Ipv4Addr;

use latem::delay_model::{build_classes, sequential_ips, DelayMatrix, QuantizationPolicy};
use latem::nft::{emit_nft_script, NftOptions};
use latem::script::CommandScript;
use latem::tc::{compute_bands, emit_tc_script, verify_plan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Two sites of three nodes: close within a site, far across.
    let matrix = DelayMatrix::from_fn(6, |i, j| if i / 3 == j / 3 { 4.0 } else { 38.0 + (i + j) as f64 })?;
    let policy = QuantizationPolicy::default();
    let ips = sequential_ips(Ipv4Addr::new(172, 18, 0, 2), matrix.n())?;
    let classes = build_classes(&matrix.quantize(&policy), &ips, &policy)?;
    let bands = compute_bands(classes.len() as u32)?;

    let nft = emit_nft_script(&classes, &NftOptions::default())?;
    let mut tc = CommandScript::new();
    for i in 0..2 {
        tc.append(emit_tc_script(&classes.class_delays(), &format!("veth{i}"), bands)?);
    }
    print!("{}", nft.render());
    print!("{}", tc.render());

    let report = verify_plan(&nft, &tc, &classes)?;
    println!(
        "# {} classes, {} bands, {} directed pairs on {} interfaces: {}",
        classes.len(),
        bands,
        report.pairs_checked,
        report.devices.len(),
        if report.is_clean() {
            "all reach their leaf"
        } else {
            "MISMATCH"
        }
    );
    Ok(())
}
