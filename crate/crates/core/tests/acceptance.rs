//! Acceptance criteria. Runs as a plain binary (`harness = false`) so every
//! criterion prints one PASS/FAIL line even when `cargo test` captures output.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use latem::autoarpd::{serve, MockTransport, Nud, Solicitation};
use latem::delay_model::{
    build_classes, load_matrix, sequential_ips, DelayClassMap, DelayMatrix, IpPair, MatrixFormat, QuantizationPolicy,
    Rounding,
};
use latem::inflation::{emit_bpf_commands, recommend_rto, render_bpf_source, BpfRtoConfig};
use latem::link_layer::{emit_fdb_script, mac_for_ip, MacPattern};
use latem::nft::{emit_nft_script, NftOptions};
use latem::orchestrator::manifest::{load_manifest, parse_manifest_toml, Resources};
use latem::orchestrator::stats::summarize_stats;
use latem::orchestrator::{
    build_startup_plan, build_startup_plan_with, execute, plan_batches, BatchRounding, ExecOptions, MockAdapter, Mode,
    PhasedPlan, SpyAdapter, StepStatus,
};
use latem::preflight::{audit, parse_readings, recommend, AuditStatus, PerNode, PreflightOptions};
use latem::rational::Rational;
use latem::script::CommandScript;
use latem::tc::{compute_bands, emit_tc_script, leaf_position, verify_plan};
use latem::topology::nws_graph;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($fmt)+)),
        }
    };
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    if took > limit {
        return Err(format!("took {took:?}, limit {limit:?}"));
    }
    Ok(took)
}

fn c1_band_arithmetic() -> Outcome {
    let start = Instant::now();
    ensure!(
        compute_bands(184) == Ok(14),
        "compute_bands(184) = {:?}",
        compute_bands(184)
    );
    for k in 1..=255u32 {
        let mut brute = 2;
        while brute * brute < k + 1 {
            brute += 1;
        }
        let b = compute_bands(k).map_err(|e| format!("K={k}: {e}"))?;
        ensure!(b == brute, "K={k}: got {b}, brute force {brute}");
    }
    ensure!(compute_bands(256).is_err(), "K=256 accepted");
    let took = within(Duration::from_secs(1), start)?;
    Ok(format!("b(184)=14, K=1..255 minimal ({took:?})"))
}

fn c2_leaf_layout() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for b in 2..=16u32 {
        let mut seen = BTreeSet::new();
        for m in 1..b * b {
            let (f, s) = leaf_position(m, b).map_err(|e| format!("b={b} m={m}: {e}"))?;
            ensure!(
                (1..=b).contains(&f) && (1..=b).contains(&s),
                "b={b} m={m}: ({f},{s}) out of range"
            );
            ensure!((f, s) != (b, b), "b={b} m={m} lands on the default leaf");
            ensure!(seen.insert((f, s)), "b={b} m={m}: ({f},{s}) reused");
            checked += 1;
        }
        ensure!(leaf_position(b * b, b).is_err(), "b={b}: mark b² accepted");
    }
    let took = within(Duration::from_secs(1), start)?;
    Ok(format!("{checked} (b, mark) combinations injective ({took:?})"))
}

fn random_class_map(rng: &mut ChaCha8Rng) -> DelayClassMap {
    let n = rng.random_range(2..=50usize);
    let ips: Vec<Ipv4Addr> = (0..n)
        .map(|i| Ipv4Addr::new(10, 1, (i / 200) as u8, (i % 200) as u8 + 1))
        .collect();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push(IpPair::new(ips[i], ips[j]).unwrap());
        }
    }
    pairs.shuffle(rng);
    // Some pairs stay unmarked.
    let keep = rng.random_range(1..=pairs.len());
    pairs.truncate(keep);
    let k = rng.random_range(1..=pairs.len().min(255));
    let mut delays = BTreeSet::new();
    while delays.len() < k {
        delays.insert(rng.random_range(1..=5000u32));
    }
    let delays: Vec<u32> = delays.into_iter().collect();
    let mut by_delay: BTreeMap<u32, Vec<IpPair>> = BTreeMap::new();
    for (i, p) in pairs.into_iter().enumerate() {
        let d = if i < k {
            delays[i]
        } else {
            delays[rng.random_range(0..k)]
        };
        by_delay.entry(d).or_default().push(p);
    }
    DelayClassMap::from_delays(by_delay).unwrap()
}

fn tc_for(classes: &DelayClassMap, devices: &[&str]) -> CommandScript {
    let bands = compute_bands(classes.len() as u32).unwrap();
    let mut tc = CommandScript::new();
    for dev in devices {
        tc.append(emit_tc_script(&classes.class_delays(), dev, bands).unwrap());
    }
    tc
}

fn c3_plan_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a7e);
    let devices = ["veth0", "veth1"];
    let (mut max_k, mut faults) = (0, 0);
    for round in 0..200 {
        let classes = random_class_map(&mut rng);
        max_k = max_k.max(classes.len());
        let nft = emit_nft_script(&classes, &NftOptions::default()).unwrap();
        let tc = tc_for(&classes, &devices);
        let report = verify_plan(&nft, &tc, &classes).map_err(|e| format!("map {round}: {e}"))?;
        ensure!(
            report.is_clean(),
            "map {round}: {} mismatches on a clean plan",
            report.mismatches.len()
        );
        ensure!(
            report.pairs_checked == 2 * classes.pair_count(),
            "map {round}: pairs not all simulated"
        );

        // Tamper with a few marks: drop the marking rule or alter the leaf delay.
        let marks: Vec<u32> = classes.classes().iter().map(|c| c.mark).collect();
        let count = rng.random_range(1..=marks.len().min(3));
        let tampered: BTreeSet<u32> = marks.choose_multiple(&mut rng, count).copied().collect();
        let (mut nft_bad, mut tc_bad) = (nft.clone(), tc.clone());
        for &m in &tampered {
            if rng.random_bool(0.5) {
                let suffix = format!(" meta mark set {m}");
                nft_bad.lines_mut().retain(|l| !l.ends_with(&suffix));
            } else {
                let d = classes.class(m).unwrap().delay_ms;
                let suffix = format!(" netem delay {d}ms");
                let line = tc_bad
                    .lines_mut()
                    .iter_mut()
                    .find(|l| l.contains("dev veth1 ") && l.ends_with(&suffix))
                    .ok_or_else(|| format!("map {round}: no netem line for mark {m}"))?;
                *line = line.replace(&suffix, &format!(" netem delay {}ms", d + 7));
            }
        }
        let bad = verify_plan(&nft_bad, &tc_bad, &classes).map_err(|e| format!("map {round}: {e}"))?;
        ensure!(
            bad.mismatched_marks() == tampered,
            "map {round}: tampered {tampered:?}, reported {:?}",
            bad.mismatched_marks()
        );
        faults += tampered.len();
    }
    let took = within(Duration::from_secs(30), start)?;
    Ok(format!(
        "200 maps (K up to {max_k}), {faults} injected faults located exactly ({took:?})"
    ))
}

fn golden_scripts() -> (String, String, String, usize, u32) {
    let m = load_matrix(
        std::io::BufReader::new(std::fs::File::open(fixture("tests/fixtures/golden/five_nodes.csv")).unwrap()),
        MatrixFormat::Auto,
    )
    .unwrap();
    let policy = QuantizationPolicy::default();
    let ips = sequential_ips(Ipv4Addr::new(10, 0, 0, 1), 5).unwrap();
    let classes = build_classes(&m.quantize(&policy), &ips, &policy).unwrap();
    let bands = compute_bands(classes.len() as u32).unwrap();
    let nft = emit_nft_script(&classes, &NftOptions::default()).unwrap().render();
    let tc = emit_tc_script(&classes.class_delays(), "vethn1", bands)
        .unwrap()
        .render();
    let nodes: Vec<(Ipv4Addr, String)> = ips
        .iter()
        .enumerate()
        .map(|(i, ip)| (*ip, format!("vethn{}", i + 1)))
        .collect();
    let fdb = emit_fdb_script(&nodes, &MacPattern::default()).unwrap().render();
    (nft, tc, fdb, classes.len(), bands)
}

fn c4_golden_scripts() -> Outcome {
    let first = golden_scripts();
    let second = golden_scripts();
    ensure!(first == second, "two runs differ");
    let (nft, tc, fdb, k, b) = first;
    ensure!(k == 3 && b == 2, "fixture gives K={k}, b={b}");
    ensure!(
        nft == read("tests/fixtures/golden/nft.sh"),
        "nft differs from golden:\n{nft}"
    );
    ensure!(
        tc == read("tests/fixtures/golden/tc.sh"),
        "tc differs from golden:\n{tc}"
    );
    ensure!(
        fdb == read("tests/fixtures/golden/fdb.sh"),
        "fdb differs from golden:\n{fdb}"
    );
    ensure!(
        nft.lines().count() == 2 + 3 * k,
        "nft has {} lines",
        nft.lines().count()
    );
    let tc_lines = 1 + b as usize + 3 * k + 2;
    ensure!(tc.lines().count() == tc_lines, "tc has {} lines", tc.lines().count());
    Ok(format!(
        "nft {} lines, tc {tc_lines} lines, fdb 5 lines match goldens",
        2 + 3 * k
    ))
}

fn c5_quantization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut matrices = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..40usize);
        let max = rng.random_range(1.0..400.0f64);
        let m = DelayMatrix::from_fn(n, |_, _| rng.random_range(0.0..=max)).unwrap();
        let quantum = [1u32, 5, 10, 20, 50][rng.random_range(0..5)];
        for rounding in Rounding::ALL {
            let policy = QuantizationPolicy {
                quantum_ms: quantum,
                rounding,
                drop_zero_class: true,
            };
            let ips = sequential_ips(Ipv4Addr::new(10, 0, 0, 1), n).unwrap();
            let classes = build_classes(&m.quantize(&policy), &ips, &policy).unwrap();
            let bound = (m.max_delay() / quantum as f64).floor() as usize + 1;
            ensure!(
                classes.len() <= bound,
                "n={n} max={} q={quantum} {rounding}: {} classes > {bound}",
                m.max_delay(),
                classes.len()
            );
        }
        matrices += 1;
    }
    let note = match std::env::var_os("LATEM_MATRIX1") {
        Some(path) => {
            let file = std::fs::File::open(&path).map_err(|e| format!("{}: {e}", Path::new(&path).display()))?;
            let m = load_matrix(std::io::BufReader::new(file), MatrixFormat::Auto).map_err(|e| e.to_string())?;
            let mut counts = Vec::new();
            for rounding in Rounding::ALL {
                let policy = QuantizationPolicy {
                    rounding,
                    ..QuantizationPolicy::default()
                };
                counts.push(format!("{rounding}={}", m.quantize(&policy).distinct_delays().len()));
            }
            format!(
                "Matrix1 ({} nodes) distinct 10ms delays: {} (reference 184)",
                m.n(),
                counts.join(", ")
            )
        }
        None => "Matrix1 not supplied (set LATEM_MATRIX1), report-only part skipped".to_string(),
    };
    Ok(format!(
        "bound holds on {matrices} synthetic matrices x 3 roundings; {note}"
    ))
}

fn c6_batches() -> Outcome {
    let r = Resources {
        ram_cap_fraction: "0.80".parse().unwrap(),
        per_node_startup_fraction: "0.8/750".parse().unwrap(),
        per_node_steady_fraction: "0.54/750".parse().unwrap(),
        available_mib: None,
        percent_rounding: false,
    };
    let exact = plan_batches(3000, &r, BatchRounding::Exact).map_err(|e| e.to_string())?;
    let pct = plan_batches(3000, &r, BatchRounding::WholePercent).map_err(|e| e.to_string())?;
    let (e, p) = (exact.sizes(), pct.sizes());
    ensure!(e.len() >= 3 && e[..3] == [750, 243, 79], "exact batches {e:?}");
    ensure!(
        p.len() >= 3 && p[..3] == [750, 243, 84],
        "percent-rounding batches {p:?}"
    );
    Ok(format!("exact {:?}, percent rounding {:?}", &e[..3], &p[..3]))
}

fn c7_memory() -> Outcome {
    // (avg MiB, total MiB, percent) per row.
    let rows = [
        ("after start", "28.9262", "21694.65", "5.51"),
        ("after geth", "327.211", "245408.25", "62.38"),
        ("after beacon", "412.807", "309605.25", "78.70"),
        ("after validator", "420.5", "315375", "80.16"),
        ("after transactions", "286.216", "214662", "54.56"),
    ];
    let samples: Vec<(String, BTreeMap<String, Rational>)> = rows
        .iter()
        .map(|(name, avg, _, _)| {
            (
                name.to_string(),
                (0..750).map(|i| (format!("n{i}"), avg.parse().unwrap())).collect(),
            )
        })
        .collect();
    let report = summarize_stats(&samples, 393216).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for ((name, _, total, pct), c) in rows.iter().zip(&report.checkpoints) {
        let total: Rational = total.parse().unwrap();
        ensure!(c.total_mib == total, "{name}: total {} != {total}", c.total_mib);
        let diff = (c.percent.to_f64() - pct.parse::<f64>().unwrap()).abs();
        ensure!(diff <= 0.1, "{name}: {}% vs {pct}%", c.percent.to_decimal_string(2));
        worst = worst.max(diff);
    }
    Ok(format!("5 totals exact, percent within {worst:.3}pp"))
}

fn c8_rto() -> Outcome {
    for (d, s) in [(400, 1), (500, 2), (1990, 4)] {
        ensure!(
            recommend_rto(d) == s,
            "recommend_rto({d}) = {}, expected {s}",
            recommend_rto(d)
        );
    }
    let reference = read("tests/fixtures/tcp-rto.c");
    let same = render_bpf_source(&BpfRtoConfig::new(3, 250).unwrap()).unwrap();
    ensure!(same == reference, "render(3, 250) differs from the reference listing");
    let other = render_bpf_source(&BpfRtoConfig::new(6, 1000).unwrap()).unwrap();
    let (a, b): (Vec<&str>, Vec<&str>) = (reference.lines().collect(), other.lines().collect());
    ensure!(a.len() == b.len(), "line count changed");
    let differing: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
    ensure!(differing.len() == 2, "{} lines differ", differing.len());
    ensure!(
        b[differing[0]].contains("timeout = 6;") && b[differing[1]].contains("hz = 1000;"),
        "unexpected differing lines {differing:?}"
    );
    let cmds = emit_bpf_commands("tcp-rto.o", "/sys/fs/bpf/tcp-rto", "/sys/fs/cgroup").unwrap();
    ensure!(
        cmds.load
            .lines()
            .iter()
            .any(|l| l == "bpftool prog load tcp-rto.o /sys/fs/bpf/tcp-rto"),
        "load line missing"
    );
    Ok("recommend_rto 400/500/1990 -> 1/2/4; source differs only on the 2 constant lines; load line present".into())
}

fn c9_autoarpd() -> Outcome {
    let pattern = MacPattern::default();
    let vector = mac_for_ip(Ipv4Addr::new(172, 17, 0, 2), &pattern).to_string();
    ensure!(vector == "02:42:ac:11:00:02", "172.17.0.2 -> {vector}");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let requests: Vec<Solicitation> = (0..100_000)
        .map(|_| Solicitation {
            ip: Ipv4Addr::from(rng.random::<u32>()),
            ifindex: rng.random_range(1..64),
        })
        .collect();
    let mut t = MockTransport::new(requests.clone());
    let stats = serve(&mut t, &pattern, &AtomicBool::new(false)).map_err(|e| e.to_string())?;
    ensure!(stats.received == 100_000 && stats.replied == 100_000, "{stats:?}");
    ensure!(t.replies.len() == requests.len(), "{} replies", t.replies.len());
    for (req, (answered, entry)) in requests.iter().zip(&t.replies) {
        ensure!(req == answered, "reply order broken at {}", req.ip);
        ensure!(entry.ip == req.ip && entry.nud == Nud::Reachable, "bad entry {entry:?}");
        ensure!(entry.mac == mac_for_ip(req.ip, &pattern), "MAC mismatch for {}", req.ip);
    }
    Ok("10^5 solicitations, one REACHABLE reply each; 172.17.0.2 -> 02:42:ac:11:00:02".into())
}

fn c10_topology() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let n = rng.random_range(3..400usize);
        let k = 2 * rng.random_range(1..=((n - 1) / 2).min(10));
        let seed = rng.random::<u64>();
        let g = nws_graph(n, k, 0.0, seed).map_err(|e| format!("n={n} k={k}: {e}"))?;
        ensure!(g.edge_count() == n * k / 2, "n={n} k={k}: {} edges", g.edge_count());
        ensure!(g.is_connected(), "n={n} k={k} disconnected");
        let p = rng.random_range(0.0..=1.0);
        let a = nws_graph(n, k, p, seed).unwrap();
        ensure!(
            a == nws_graph(n, k, p, seed).unwrap(),
            "n={n} k={k} p={p}: same seed differs"
        );
        ensure!(
            a.is_connected() && a.edge_count() >= n * k / 2,
            "n={n} k={k} p={p}: shortcut graph broken"
        );
    }
    Ok("100 draws: nk/2 edges, connected, deterministic".into())
}

const TWO_NODES: &str = r#"
[resources]
ram_cap_fraction = "0.80"
per_node_startup_fraction = "0.5"
per_node_steady_fraction = "0.3"

[delay]
matrix = "unused"

[[phases]]
name = "start"
action = "signal"
signal = "SIGUSR1"
stagger_ms = 100

[[checkpoints]]
name = "settled"
after_phase = "start"

[[nodes]]
name = "a"
ip = "10.0.0.1"

[[nodes]]
name = "b"
ip = "10.0.0.2"
"#;

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn plans() -> Vec<(&'static str, PhasedPlan)> {
    let sample = load_manifest(&fixture("examples/manifests/five_nodes.toml")).unwrap();
    let batched = parse_manifest_toml(TWO_NODES, ".").unwrap();
    let m2 = DelayMatrix::from_rows(&[vec![0.0, 35.0], vec![35.0, 0.0]]).unwrap();
    vec![
        ("five-node sample", build_startup_plan(&sample).unwrap()),
        ("two batches", build_startup_plan_with(&batched, Some(&m2)).unwrap()),
    ]
}

fn c11_dry_run() -> Outcome {
    let mut files = 0;
    for (name, plan) in plans() {
        let spy = SpyAdapter::new(MockAdapter::new());
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [&d1, &d2] {
            let rep = execute(
                &plan,
                &Mode::DryRun {
                    out_dir: d.path().to_path_buf(),
                },
                &spy,
                &ExecOptions::default(),
            )
            .map_err(|e| e.to_string())?;
            ensure!(rep.succeeded(), "{name}: dry run did not succeed");
        }
        ensure!(
            spy.call_count() == 0,
            "{name}: dry run made {} adapter calls",
            spy.call_count()
        );
        let (t1, t2) = (tree(d1.path()), tree(d2.path()));
        ensure!(!t1.is_empty() && t1 == t2, "{name}: dry-run trees differ");
        files += t1.len();
    }

    let (_, plan) = plans().remove(0);
    ensure!(
        plan.steps[2].dir_name() == "003-b1-inventory",
        "third step is {}",
        plan.steps[2].dir_name()
    );
    let mock = MockAdapter::new().fail_on("ip -o link", 1);
    let work = tempfile::tempdir().unwrap();
    let rep = execute(
        &plan,
        &Mode::Apply {
            work_dir: work.path().to_path_buf(),
        },
        &mock,
        &ExecOptions {
            honor_stagger: false,
            ..ExecOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let statuses: Vec<&StepStatus> = rep.steps.iter().map(|s| &s.status).collect();
    ensure!(
        matches!(statuses[..2], [StepStatus::Ok, StepStatus::Ok]),
        "steps 1-2: {:?}",
        &statuses[..2]
    );
    ensure!(
        matches!(statuses[2], StepStatus::Failed { .. }),
        "step 3: {:?}",
        statuses[2]
    );
    ensure!(
        statuses[3..].iter().all(|s| **s == StepStatus::Skipped),
        "later steps ran"
    );
    ensure!(
        mock.calls().last().is_some_and(|c| c == "ip -o link"),
        "commands after the failure: {:?}",
        mock.calls().last()
    );
    Ok(format!(
        "2 plans, 0 adapter calls, {files} files identical across runs; apply stops at step 3 of {}",
        rep.steps.len()
    ))
}

fn c12_preflight() -> Outcome {
    let plan = recommend(3500, PerNode::default(), &PreflightOptions::default());
    let stock = audit(&plan, &parse_readings(&read("tests/fixtures/stock_defaults.txt")));
    let fail = |k: &str| matches!(stock.status(k), Some(AuditStatus::Fail { .. }));
    ensure!(fail("kernel.pty.max"), "pty.max: {:?}", stock.status("kernel.pty.max"));
    ensure!(
        matches!(
            stock.status("kernel.pty.max"),
            Some(AuditStatus::Fail { delta: Some(6904), .. })
        ),
        "pty.max delta"
    );
    ensure!(
        fail("net.ipv4.tcp_rmem"),
        "tcp_rmem: {:?}",
        stock.status("net.ipv4.tcp_rmem")
    );
    for i in 1..=3 {
        let k = format!("net.ipv4.neigh.default.gc_thresh{i}");
        ensure!(fail(&k), "{k}: {:?}", stock.status(&k));
    }
    let tuned = audit(&plan, &plan.required_readings());
    ensure!(tuned.all_pass(), "recommended values fail: {:?}", tuned.failing());
    Ok(format!(
        "stock defaults: {} FAIL incl. pty.max, tcp_rmem, gc_thresh1-3; recommended: all PASS",
        stock.failing().len()
    ))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("band arithmetic", c1_band_arithmetic),
        ("leaf layout", c2_leaf_layout),
        ("plan oracle", c3_plan_oracle),
        ("golden scripts", c4_golden_scripts),
        ("quantization", c5_quantization),
        ("batch schedule", c6_batches),
        ("memory summary", c7_memory),
        ("RTO", c8_rto),
        ("AutoARPD", c9_autoarpd),
        ("topology", c10_topology),
        ("dry-run purity", c11_dry_run),
        ("preflight", c12_preflight),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} ({name}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} ({name}): {why}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
