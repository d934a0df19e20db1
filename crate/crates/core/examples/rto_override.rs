//! Initial TCP retransmission timeout for long emulated delays: pick the
//! timeout, render the sock_ops program and its bpftool commands.
//!
//! cargo run --example rto_override

use latem::inflation::{
    emit_bpf_commands, recommend_rto, recommend_rto_with_margin, render_bpf_source, BpfRtoConfig, DEFAULT_CGROUP,
    DEFAULT_OBJECT, DEFAULT_PIN,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for d in [400, 500, 1990] {
        println!("max one-way delay {d:>4} ms -> initial RTO {} s", recommend_rto(d));
    }
    let timeout = recommend_rto_with_margin(1660, 100);
    println!("1660 ms + 100 ms margin -> {timeout} s\n");

    let config = BpfRtoConfig::new(timeout, 250)?;
    println!("reply = {} jiffies", config.reply()?);
    print!("{}", render_bpf_source(&config)?);
    let cmds = emit_bpf_commands(DEFAULT_OBJECT, DEFAULT_PIN, DEFAULT_CGROUP)?;
    println!("\n# load\n{}# unload\n{}", cmds.load.render(), cmds.unload.render());
    Ok(())
}
