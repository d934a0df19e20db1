//! Host settings for 3500 containers, audited against stock kernel values,
//! then written as config fragments.
//!
//! cargo run --example preflight_audit

use latem::preflight::{audit, emit_conf, parse_readings, recommend, PerNode, PreflightOptions};

const STOCK: &str = "kernel.pty.max = 4096
net.core.rmem_max = 212992
net.core.wmem_max = 212992
net.ipv4.tcp_rmem = 4096\t131072\t6291456
net.ipv4.neigh.default.gc_thresh3 = 1024
ulimit.soft.nofile = 1024
";

fn main() {
    let plan = recommend(3500, PerNode::default(), &PreflightOptions::default());
    for e in &plan.entries {
        println!("{e}");
    }
    println!();
    print!("{}", audit(&plan, &parse_readings(STOCK)));
    let conf = emit_conf(&plan);
    println!("\n# /etc/security/limits.conf\n{}", conf.limits_conf);
    println!("# /etc/sysctl.d/90-latem.conf\n{}", conf.sysctl_conf);
}
