//! Quantize a delay matrix under each rounding mode and list the classes.
//!
//! cargo run --example delay_classes [-- matrix.csv]

use std::fs::File;
use std::io::BufReader;
use std::net::Ipv4Addr;

use latem::delay_model::{build_classes, load_matrix, sequential_ips, MatrixFormat, QuantizationPolicy, Rounding};
use latem::rational::Rational;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/manifests/five_nodes.csv").into());
    let matrix = load_matrix(BufReader::new(File::open(&path)?), MatrixFormat::Auto)?;
    let ips = sequential_ips(Ipv4Addr::new(10, 0, 0, 1), matrix.n())?;
    println!("{path}: {} nodes, max delay {} ms", matrix.n(), matrix.max_delay());

    for factor in ["1", "2"] {
        let inflated = matrix.inflate(factor.parse::<Rational>()?)?;
        for rounding in Rounding::ALL {
            let policy = QuantizationPolicy {
                rounding,
                ..QuantizationPolicy::default()
            };
            let classes = build_classes(&inflated.quantize(&policy), &ips, &policy)?;
            let summary: Vec<String> = classes
                .classes()
                .iter()
                .map(|c| format!("{}:{}ms/{}", c.mark, c.delay_ms, c.pairs.len()))
                .collect();
            println!(
                "x{factor} {rounding:<16} {} classes  {}",
                classes.len(),
                summary.join(" ")
            );
        }
    }
    Ok(())
}
