//! Build the startup plan of the sample manifest with time doubled again and
//! write it as a directory of scripts without touching the host.
//!
//! cargo run --example dry_run [-- out-dir]

use std::path::{Path, PathBuf};

use latem::inflation::inflate_manifest;
use latem::orchestrator::adapter::SpyAdapter;
use latem::orchestrator::manifest::load_manifest;
use latem::orchestrator::{build_startup_plan, execute, ExecOptions, MockAdapter, Mode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/manifests/five_nodes.toml");
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("latem-dry-run"));

    let m = inflate_manifest(&load_manifest(&manifest)?, "2".parse()?)?;
    let plan = build_startup_plan(&m)?;
    print!("{plan}");

    let spy = SpyAdapter::new(MockAdapter::new());
    let report = execute(
        &plan,
        &Mode::DryRun { out_dir: out.clone() },
        &spy,
        &ExecOptions::default(),
    )?;
    println!(
        "{} steps written to {}, {} runtime calls",
        report.steps.len(),
        out.display(),
        spy.call_count()
    );
    Ok(())
}
