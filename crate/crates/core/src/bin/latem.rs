use std::fs::File;
use std::io::BufReader;
use std::net::Ipv4Addr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use latem::autoarpd;
use latem::delay_model::{
    build_classes, load_matrix, sequential_ips, DelayClassMap, MatrixFormat, QuantizationPolicy, Rounding,
};
use latem::inflation::{self, BpfRtoConfig, InflationFactor};
use latem::link_layer::{check_bridge_capacity, emit_fdb_script, MacPattern};
use latem::nft::{emit_nft_script, NftOptions};
use latem::orchestrator::manifest::{load_manifest, Resources};
use latem::orchestrator::plan::veth_placeholder;
use latem::orchestrator::stats::{parse_docker_stats, summarize_stats};
use latem::orchestrator::{build_startup_plan, execute, plan_batches, BatchRounding, DockerAdapter, ExecOptions, Mode};
use latem::preflight::{audit, emit_conf, parse_readings, recommend, PerNode, PreflightOptions};
use latem::rational::Rational;
use latem::tc::{compute_bands, emit_tc_script};
use latem::topology::{neighbor_lists, nws_graph, random_graph};

type Res = Result<(), Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(
    name = "latem",
    version,
    about = "Plan and run latency-emulated container experiments on one host"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct MatrixArgs {
    /// Symmetric one-way delay matrix in ms.
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, default_value = "auto")]
    format: MatrixFormat,
    #[arg(long, default_value_t = 10)]
    quantum_ms: u32,
    #[arg(long, default_value = "nearest-half-up")]
    rounding: Rounding,
    /// Give zero-delay pairs their own class instead of leaving them unmarked.
    #[arg(long)]
    keep_zero: bool,
    #[arg(long, default_value = "1")]
    inflate: InflationFactor,
    /// Use only this many randomly chosen nodes.
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Address of node 0; the others follow consecutively.
    #[arg(long, default_value = "10.0.0.1")]
    first_ip: Ipv4Addr,
}

impl MatrixArgs {
    fn classes(&self) -> Result<DelayClassMap, Box<dyn std::error::Error>> {
        let mut m = load_matrix(BufReader::new(File::open(&self.matrix)?), self.format)?;
        if let Some(k) = self.subsample {
            m = m.subsample(k, self.seed)?;
        }
        let policy = QuantizationPolicy {
            quantum_ms: self.quantum_ms,
            rounding: self.rounding,
            drop_zero_class: !self.keep_zero,
        };
        policy.validate()?;
        let q = m.inflate(self.inflate.value())?.quantize(&policy);
        let ips = sequential_ips(self.first_ip, q.n())?;
        Ok(build_classes(&q, &ips, &policy)?)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Recommend host settings, audit current ones, or write config fragments.
    Preflight {
        #[arg(long)]
        nodes: u64,
        #[arg(long, default_value_t = 64)]
        files_per_node: u64,
        #[arg(long, default_value_t = 32)]
        procs_per_node: u64,
        /// `key = value` readings (e.g. saved `sysctl` output) to audit.
        #[arg(long)]
        readings: Option<PathBuf>,
        /// Write limits.conf and sysctl.conf fragments here.
        #[arg(long)]
        emit_conf: Option<PathBuf>,
    },
    /// Quantize a delay matrix and list the resulting classes.
    PlanDelays {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long)]
        json: bool,
    },
    /// Print the nft marking script for a delay matrix.
    EmitNft {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long, default_value_t = 1000)]
        chunk_pairs: usize,
    },
    /// Print the tc tree for one interface.
    EmitTc {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long)]
        veth: String,
    },
    /// Print static FDB entries for a manifest's nodes.
    EmitFdb {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Print an overlay graph as an edge list, or as neighbour lists.
    GenTopology {
        #[arg(long, value_parser = ["nws", "random"])]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        #[arg(long, default_value_t = 4)]
        degree: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print `node: neighbours` using names `<prefix><index+1>`.
        #[arg(long)]
        names: Option<String>,
    },
    /// Write the TCP initial-RTO BPF program and its load/unload scripts.
    GenBpf {
        /// Kernel HZ (`grep 'CONFIG_HZ=' /boot/config-$(uname -r)`).
        #[arg(long)]
        hz: u32,
        #[arg(long, conflicts_with = "max_delay_ms")]
        timeout_s: Option<u32>,
        /// Derive the timeout from the largest one-way delay.
        #[arg(long)]
        max_delay_ms: Option<u64>,
        #[arg(long, default_value_t = 0)]
        margin_ms: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Split a node count into RAM-bounded startup batches.
    PlanBatches {
        #[arg(long)]
        total: usize,
        #[arg(long, default_value = "0.80")]
        cap: Rational,
        #[arg(long, default_value = "0.8/750")]
        startup: Rational,
        #[arg(long, default_value = "0.54/750")]
        steady: Rational,
        /// Round settled occupancy to a whole percent before each batch.
        #[arg(long)]
        percent_rounding: bool,
    },
    /// Build the startup plan of a manifest and write or apply it.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(
            long,
            value_name = "DIR",
            conflicts_with = "apply",
            required_unless_present = "apply"
        )]
        dry_run: Option<PathBuf>,
        #[arg(long, value_name = "WORKDIR")]
        apply: Option<PathBuf>,
        /// Multiply all delays and timers by this factor first.
        #[arg(long)]
        inflate: Option<InflationFactor>,
        #[arg(long, default_value_t = 1)]
        tc_parallelism: usize,
    },
    /// Answer kernel neighbour solicitations with computed MACs.
    Autoarpd {
        #[arg(long, default_value = "02:42")]
        prefix: MacPattern,
        /// Only answer for this interface index.
        #[arg(long)]
        ifindex: Option<u32>,
    },
    /// Summarize `docker stats` snapshots (`name=file` per checkpoint).
    Stats {
        #[arg(required = true)]
        snapshots: Vec<String>,
        /// Defaults to the limit column of the first snapshot.
        #[arg(long)]
        available_mib: Option<u64>,
    },
}

fn main() -> ExitCode {
    // Exit quietly when piped into `head`.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Cmd) -> Res {
    match cmd {
        Cmd::Preflight {
            nodes,
            files_per_node,
            procs_per_node,
            readings,
            emit_conf: out,
        } => {
            let plan = recommend(
                nodes,
                PerNode {
                    files: files_per_node,
                    procs: procs_per_node,
                },
                &PreflightOptions::default(),
            );
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                let conf = emit_conf(&plan);
                std::fs::write(dir.join("limits.conf"), conf.limits_conf)?;
                std::fs::write(dir.join("sysctl.conf"), conf.sysctl_conf)?;
            }
            println!("{}", check_bridge_capacity(nodes as usize));
            match readings {
                Some(path) => {
                    let report = audit(&plan, &parse_readings(&std::fs::read_to_string(path)?));
                    print!("{report}");
                    if !report.all_pass() {
                        return Err("host settings below recommendation".into());
                    }
                }
                None => plan.entries.iter().for_each(|e| println!("{e}")),
            }
        }
        Cmd::PlanDelays { matrix, json } => {
            let classes = matrix.classes()?;
            if json {
                println!("{}", serde_json::to_string_pretty(&classes)?);
            } else {
                println!("{} classes, {} unmarked pairs", classes.len(), classes.unmarked().len());
                for c in classes.classes() {
                    println!("mark {:>3}  {:>6} ms  {} pairs", c.mark, c.delay_ms, c.pairs.len());
                }
            }
        }
        Cmd::EmitNft { matrix, chunk_pairs } => {
            let opts = NftOptions {
                chunk_pairs,
                ..NftOptions::default()
            };
            print!("{}", emit_nft_script(&matrix.classes()?, &opts)?);
        }
        Cmd::EmitTc { matrix, veth } => {
            let classes = matrix.classes()?;
            let bands = compute_bands(classes.len() as u32)?;
            print!("{}", emit_tc_script(&classes.class_delays(), &veth, bands)?);
        }
        Cmd::EmitFdb { manifest } => {
            let m = load_manifest(&manifest)?;
            let nodes: Vec<_> = m.nodes.iter().map(|n| (n.ip, veth_placeholder(&n.name))).collect();
            print!("{}", emit_fdb_script(&nodes, &m.runtime.mac_prefix)?);
            eprintln!("{}", check_bridge_capacity(m.nodes.len()));
        }
        Cmd::GenTopology {
            model,
            n,
            k,
            p,
            degree,
            seed,
            names,
        } => {
            let g = match model.as_str() {
                "nws" => nws_graph(n, k, p, seed)?,
                _ => random_graph(n, degree, seed)?,
            };
            match names {
                None => print!("{}", g.to_edge_list()),
                Some(prefix) => {
                    let ids: Vec<String> = (1..=n).map(|i| format!("{prefix}{i}")).collect();
                    for (node, peers) in neighbor_lists(&g, &ids)? {
                        println!("{node}: {}", peers.join(" "));
                    }
                }
            }
        }
        Cmd::GenBpf {
            hz,
            timeout_s,
            max_delay_ms,
            margin_ms,
            out_dir,
        } => {
            let timeout = match (timeout_s, max_delay_ms) {
                (Some(t), _) => t,
                (None, Some(d)) => inflation::recommend_rto_with_margin(d, margin_ms),
                (None, None) => return Err("give --timeout-s or --max-delay-ms".into()),
            };
            let cfg = BpfRtoConfig::new(timeout, hz)?;
            let cmds = inflation::emit_bpf_commands(
                inflation::DEFAULT_OBJECT,
                inflation::DEFAULT_PIN,
                inflation::DEFAULT_CGROUP,
            )?;
            std::fs::create_dir_all(&out_dir)?;
            std::fs::write(out_dir.join("tcp-rto.c"), inflation::render_bpf_source(&cfg)?)?;
            std::fs::write(out_dir.join("load.sh"), cmds.load.render())?;
            std::fs::write(out_dir.join("unload.sh"), cmds.unload.render())?;
            println!("timeout {timeout}s at HZ={hz}: reply {} jiffies", cfg.reply()?);
        }
        Cmd::PlanBatches {
            total,
            cap,
            startup,
            steady,
            percent_rounding,
        } => {
            let r = Resources {
                ram_cap_fraction: cap,
                per_node_startup_fraction: startup,
                per_node_steady_fraction: steady,
                available_mib: None,
                percent_rounding,
            };
            let mode = if percent_rounding {
                BatchRounding::WholePercent
            } else {
                BatchRounding::Exact
            };
            print!("{}", plan_batches(total, &r, mode)?);
        }
        Cmd::Run {
            manifest,
            dry_run,
            apply,
            inflate,
            tc_parallelism,
        } => {
            let mut m = load_manifest(&manifest)?;
            if let Some(x) = inflate {
                m = inflation::inflate_manifest(&m, x)?;
            }
            let plan = build_startup_plan(&m)?;
            let mode = match (dry_run, apply) {
                (Some(out_dir), _) => Mode::DryRun { out_dir },
                (None, Some(work_dir)) => Mode::Apply { work_dir },
                (None, None) => unreachable!("clap requires one mode"),
            };
            let opts = ExecOptions {
                tc_parallelism: tc_parallelism.max(1),
                ..ExecOptions::default()
            };
            let report = execute(&plan, &mode, &DockerAdapter, &opts)?;
            for s in &report.steps {
                println!("{:<40} {:?}", s.name, s.status);
                for w in &s.warnings {
                    println!("  warning: {w}");
                }
            }
            if !report.succeeded() {
                return Err("execution stopped at a failing step".into());
            }
        }
        Cmd::Autoarpd { prefix, ifindex } => serve_autoarpd(prefix, ifindex)?,
        Cmd::Stats {
            snapshots,
            available_mib,
        } => {
            let mut samples = Vec::new();
            let mut limit = None;
            for s in snapshots {
                let (name, path) = s.split_once('=').ok_or("snapshots are given as name=file")?;
                let (per_node, lim) = parse_docker_stats(&std::fs::read_to_string(path)?)?;
                limit = limit.or(lim);
                samples.push((name.to_string(), per_node));
            }
            let available = match (available_mib, limit) {
                (Some(a), _) => a,
                (None, Some(l)) => l.floor() as u64,
                (None, None) => return Err("no limit column found; pass --available-mib".into()),
            };
            print!("{}", summarize_stats(&samples, available)?);
        }
    }
    Ok(())
}

#[cfg(target_os = "linux")]
fn serve_autoarpd(prefix: MacPattern, ifindex: Option<u32>) -> Res {
    use std::sync::atomic::AtomicBool;
    let mut t = autoarpd::netlink::NetlinkTransport::open(std::time::Duration::from_millis(500), ifindex)?;
    let stop = AtomicBool::new(false);
    log::info!("autoarpd: answering with prefix {prefix}");
    let stats = autoarpd::serve(&mut t, &prefix, &stop)?;
    log::info!("autoarpd: {} requests, {} replies", stats.received, stats.replied);
    Ok(())
}

#[cfg(not(target_os = "linux"))]
fn serve_autoarpd(_: MacPattern, _: Option<u32>) -> Res {
    Err("autoarpd needs Linux rtnetlink".into())
}
