//! Two-level prio/netem qdisc tree.
//!
//! The root prio qdisc `1:` has `b` bands; each band `i` carries a second
//! prio qdisc `1<hex i>:` with `b` bands of its own. Mark `m` lands on the
//! leaf `(f, s)` with `f = (m-1)/b + 1` and `s = (m-1) % b + 1`, where a
//! netem qdisc applies the class delay. The rightmost leaf `(b, b)` is kept
//! free for unmarked traffic and has no delay.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::net::Ipv4Addr;

use crate::delay_model::DelayClassMap;
use crate::script::CommandScript;

/// Bands available in a prio qdisc.
pub const MAX_BANDS: u32 = 16;
/// Classes a two-level tree can hold next to the default leaf.
pub const MAX_CLASSES: u32 = MAX_BANDS * MAX_BANDS - 1;

pub const FW_FILTER_PRIO: u32 = 10;
pub const DEFAULT_FILTER_PRIO: u32 = 20;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TcError {
    #[error("{classes} classes exceed the {MAX_CLASSES} a two-level tree can hold; use a coarser quantum")]
    TooManyClasses { classes: u32 },
    #[error("mark {mark} does not fit a {bands}-band tree (max {})", bands * bands - 1)]
    MarkOutOfRange { mark: u32, bands: u32 },
    #[error("band count {0} outside 2..=16")]
    Bands(u32),
    #[error("empty interface name")]
    Interface,
}

/// Smallest `b >= 2` with `b² >= class_count + 1`.
pub fn compute_bands(class_count: u32) -> Result<u32, TcError> {
    if class_count > MAX_CLASSES {
        return Err(TcError::TooManyClasses { classes: class_count });
    }
    let mut b = 2;
    while b * b < class_count + 1 {
        b += 1;
    }
    Ok(b)
}

/// First- and second-level band for `mark` in a `bands`-wide tree.
pub fn leaf_position(mark: u32, bands: u32) -> Result<(u32, u32), TcError> {
    if !(2..=MAX_BANDS).contains(&bands) {
        return Err(TcError::Bands(bands));
    }
    if mark == 0 || mark >= bands * bands {
        return Err(TcError::MarkOutOfRange { mark, bands });
    }
    Ok(((mark - 1) / bands + 1, (mark - 1) % bands + 1))
}

fn hex(v: u32) -> String {
    format!("{v:x}")
}

/// A computed tree for one interface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QdiscTreePlan {
    pub veth: String,
    pub bands: u32,
    /// mark → (first band, second band, delay ms)
    pub leaves: BTreeMap<u32, (u32, u32, u32)>,
}

impl QdiscTreePlan {
    pub fn new(class_delays: &BTreeMap<u32, u32>, veth: &str, bands: u32) -> Result<Self, TcError> {
        if veth.is_empty() {
            return Err(TcError::Interface);
        }
        if !(2..=MAX_BANDS).contains(&bands) {
            return Err(TcError::Bands(bands));
        }
        let mut leaves = BTreeMap::new();
        for (&mark, &delay) in class_delays {
            let (f, s) = leaf_position(mark, bands)?;
            leaves.insert(mark, (f, s, delay));
        }
        Ok(QdiscTreePlan {
            veth: veth.to_string(),
            bands,
            leaves,
        })
    }

    pub fn default_path(&self) -> (u32, u32) {
        (self.bands, self.bands)
    }

    pub fn to_script(&self) -> CommandScript {
        let v = &self.veth;
        let b = self.bands;
        let mut script = CommandScript::new();
        script.push(format!("tc qdisc add dev {v} root handle 1: prio bands {b}"));
        for i in 1..=b {
            let h = hex(i);
            script.push(format!("tc qdisc add dev {v} parent 1:{h} handle 1{h}: prio bands {b}"));
        }
        for (&m, &(f, s, d)) in &self.leaves {
            let (f, s) = (hex(f), hex(s));
            script.push(format!("tc qdisc add dev {v} parent 1{f}:{s} netem delay {d}ms"));
            script.push(format!(
                "tc filter add dev {v} protocol ip parent 1: prio {FW_FILTER_PRIO} handle {m} fw classid 1:{f}"
            ));
            script.push(format!(
                "tc filter add dev {v} protocol ip parent 1{f}: prio {FW_FILTER_PRIO} handle {m} fw classid 1{f}:{s}"
            ));
        }
        let hb = hex(b);
        script.push(format!(
            "tc filter add dev {v} protocol all parent 1: prio {DEFAULT_FILTER_PRIO} matchall classid 1:{hb}"
        ));
        script.push(format!(
            "tc filter add dev {v} protocol all parent 1{hb}: prio {DEFAULT_FILTER_PRIO} matchall classid 1{hb}:{hb}"
        ));
        script
    }
}

/// Commands building the tree for one interface.
pub fn emit_tc_script(class_delays: &BTreeMap<u32, u32>, veth: &str, bands: u32) -> Result<CommandScript, TcError> {
    Ok(QdiscTreePlan::new(class_delays, veth, bands)?.to_script())
}

/// Removes the tree from an interface.
pub fn emit_tc_teardown(veth: &str) -> CommandScript {
    let mut s = CommandScript::new();
    s.push(format!("tc qdisc del dev {veth} root"));
    s
}

// ---------------------------------------------------------------------------
// Offline verification

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("{script} script, line {line}: {reason}")]
pub struct ParseError {
    pub script: &'static str,
    pub line: usize,
    pub reason: String,
}

/// Where a simulated packet ended up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reached {
    /// Leaf bands along the path and the delay applied there.
    Leaf { path: Vec<u32>, delay_ms: u32 },
    /// No filter matched at the qdisc with this major handle.
    Unclassified { at: u32 },
    /// A classid pointed at a band that does not exist.
    BadClass { at: u32, classid: (u32, u32) },
}

impl fmt::Display for Reached {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reached::Leaf { path, delay_ms } => write!(f, "leaf {path:?} ({delay_ms}ms)"),
            Reached::Unclassified { at } => write!(f, "unclassified at {at:x}:"),
            Reached::BadClass { at, classid } => {
                write!(f, "bad classid {:x}:{:x} at {at:x}:", classid.0, classid.1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub dev: String,
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
    pub expected_mark: u32,
    pub found_mark: Option<u32>,
    pub expected_delay_ms: u32,
    pub reached: Reached,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerificationReport {
    pub devices: Vec<String>,
    /// Directed pairs simulated per device.
    pub pairs_checked: usize,
    pub mismatches: Vec<Mismatch>,
    /// Devices whose unmarked traffic does not reach the no-delay default leaf.
    pub default_failures: Vec<(String, Reached)>,
}

impl VerificationReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty() && self.default_failures.is_empty()
    }

    pub fn mismatched_marks(&self) -> BTreeSet<u32> {
        self.mismatches.iter().map(|m| m.expected_mark).collect()
    }
}

#[derive(Debug, Default)]
struct NftModel {
    sets: HashMap<String, std::collections::HashSet<(Ipv4Addr, Ipv4Addr)>>,
    rules: Vec<(String, u32)>,
}

impl NftModel {
    fn mark(&self, src: Ipv4Addr, dst: Ipv4Addr) -> Option<u32> {
        // `meta mark set` does not terminate evaluation: the last match wins.
        let mut mark = None;
        for (set, m) in &self.rules {
            if self.sets[set].contains(&(src, dst)) {
                mark = Some(*m);
            }
        }
        mark
    }
}

fn parse_nft(script: &CommandScript) -> Result<NftModel, ParseError> {
    let mut model = NftModel::default();
    for (idx, line) in script.lines().iter().enumerate() {
        let err = |reason: String| ParseError {
            script: "nft",
            line: idx + 1,
            reason,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["nft", "add", "table", "ip", _] => {}
            ["nft", "add", "chain", _, _, "{", "type", "filter", "hook", "forward", "priority", _, "\\;", "}"] => {}
            ["nft", "add", "set", _, set, "{", "type", "ipv4_addr", ".", "ipv4_addr", "\\;", "}"] => {
                model.sets.entry(set.to_string()).or_default();
            }
            ["nft", "add", "element", _, set, "{", .., "}"] => {
                let body = line
                    .split_once('{')
                    .and_then(|(_, rest)| rest.rsplit_once('}'))
                    .map(|(b, _)| b)
                    .ok_or_else(|| err("malformed element list".into()))?;
                let entries = model
                    .sets
                    .get_mut(*set)
                    .ok_or_else(|| err(format!("element for undeclared set `{set}`")))?;
                for tuple in body.split(',') {
                    let (s, d) = tuple
                        .split_once(" . ")
                        .ok_or_else(|| err(format!("malformed tuple `{}`", tuple.trim())))?;
                    let s: Ipv4Addr = s.trim().parse().map_err(|_| err(format!("bad address `{s}`")))?;
                    let d: Ipv4Addr = d.trim().parse().map_err(|_| err(format!("bad address `{d}`")))?;
                    entries.insert((s, d));
                }
            }
            ["nft", "add", "rule", _, _, "ip", "saddr", ".", "ip", "daddr", set, "meta", "mark", "set", m] => {
                let set = set
                    .strip_prefix('@')
                    .ok_or_else(|| err(format!("expected @set, got `{set}`")))?;
                if !model.sets.contains_key(set) {
                    return Err(err(format!("rule references undeclared set `{set}`")));
                }
                let m: u32 = m.parse().map_err(|_| err(format!("bad mark `{m}`")))?;
                model.rules.push((set.to_string(), m));
            }
            _ => return Err(err(format!("unrecognised command `{line}`"))),
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy)]
enum FilterMatch {
    Fw(u32),
    All,
}

#[derive(Debug, Clone, Copy)]
struct Filter {
    prio: u32,
    matcher: FilterMatch,
    classid: (u32, u32),
}

#[derive(Debug, Clone, Copy)]
enum Child {
    Prio(u32),
    Netem(u32),
}

#[derive(Debug, Default)]
struct TcDevice {
    root: Option<u32>,
    bands: HashMap<u32, u32>,
    children: HashMap<(u32, u32), Child>,
    filters: HashMap<u32, Vec<Filter>>,
}

impl TcDevice {
    fn route(&self, mark: Option<u32>) -> Reached {
        let mut at = self.root.expect("root checked at parse");
        let mut path = Vec::new();
        for _ in 0..8 {
            let mut filters: Vec<&Filter> = self.filters.get(&at).map(|v| v.iter().collect()).unwrap_or_default();
            filters.sort_by_key(|f| f.prio);
            let hit = filters.into_iter().find(|f| match f.matcher {
                FilterMatch::All => true,
                FilterMatch::Fw(m) => mark == Some(m),
            });
            let Some(filter) = hit else {
                return Reached::Unclassified { at };
            };
            let (major, minor) = filter.classid;
            let bands = self.bands.get(&at).copied().unwrap_or(0);
            if major != at || minor == 0 || minor > bands {
                return Reached::BadClass {
                    at,
                    classid: filter.classid,
                };
            }
            path.push(minor);
            match self.children.get(&(major, minor)) {
                Some(Child::Prio(next)) => at = *next,
                Some(Child::Netem(d)) => return Reached::Leaf { path, delay_ms: *d },
                None => return Reached::Leaf { path, delay_ms: 0 },
            }
        }
        Reached::Unclassified { at }
    }
}

fn parse_handle(tok: &str) -> Option<u32> {
    let major = tok.strip_suffix(':')?;
    u32::from_str_radix(major, 16).ok()
}

fn parse_classid(tok: &str) -> Option<(u32, u32)> {
    let (a, b) = tok.split_once(':')?;
    Some((u32::from_str_radix(a, 16).ok()?, u32::from_str_radix(b, 16).ok()?))
}

fn parse_delay(tok: &str) -> Option<u32> {
    tok.strip_suffix("ms")?.parse().ok()
}

fn parse_tc(script: &CommandScript) -> Result<BTreeMap<String, TcDevice>, ParseError> {
    let mut devices: BTreeMap<String, TcDevice> = BTreeMap::new();
    for (idx, line) in script.lines().iter().enumerate() {
        let err = |reason: String| ParseError {
            script: "tc",
            line: idx + 1,
            reason,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["tc", "qdisc", "add", "dev", dev, "root", "handle", h, "prio", "bands", b] => {
                let d = devices.entry(dev.to_string()).or_default();
                let h = parse_handle(h).ok_or_else(|| err(format!("bad handle `{h}`")))?;
                let b: u32 = b.parse().map_err(|_| err(format!("bad band count `{b}`")))?;
                if d.root.replace(h).is_some() {
                    return Err(err(format!("second root qdisc on {dev}")));
                }
                d.bands.insert(h, b);
            }
            ["tc", "qdisc", "add", "dev", dev, "parent", p, "handle", h, "prio", "bands", b] => {
                let d = devices.entry(dev.to_string()).or_default();
                let p = parse_classid(p).ok_or_else(|| err(format!("bad parent `{p}`")))?;
                let h = parse_handle(h).ok_or_else(|| err(format!("bad handle `{h}`")))?;
                let b: u32 = b.parse().map_err(|_| err(format!("bad band count `{b}`")))?;
                d.bands.insert(h, b);
                if d.children.insert(p, Child::Prio(h)).is_some() {
                    return Err(err(format!("band {:x}:{:x} already has a qdisc", p.0, p.1)));
                }
            }
            ["tc", "qdisc", "add", "dev", dev, "parent", p, "netem", "delay", delay] => {
                let d = devices.entry(dev.to_string()).or_default();
                let p = parse_classid(p).ok_or_else(|| err(format!("bad parent `{p}`")))?;
                let delay = parse_delay(delay).ok_or_else(|| err(format!("bad delay `{delay}`")))?;
                if d.children.insert(p, Child::Netem(delay)).is_some() {
                    return Err(err(format!("band {:x}:{:x} already has a qdisc", p.0, p.1)));
                }
            }
            ["tc", "filter", "add", "dev", dev, "protocol", "ip" | "all", "parent", p, "prio", prio, rest @ ..] => {
                let d = devices.entry(dev.to_string()).or_default();
                let p = parse_handle(p).ok_or_else(|| err(format!("bad parent `{p}`")))?;
                let prio: u32 = prio.parse().map_err(|_| err(format!("bad prio `{prio}`")))?;
                let (matcher, classid) = match rest {
                    ["handle", m, "fw", "classid", c] => (
                        FilterMatch::Fw(m.parse().map_err(|_| err(format!("bad fw handle `{m}`")))?),
                        c,
                    ),
                    ["matchall", "classid", c] => (FilterMatch::All, c),
                    _ => return Err(err(format!("unrecognised filter `{line}`"))),
                };
                let classid = parse_classid(classid).ok_or_else(|| err(format!("bad classid `{classid}`")))?;
                d.filters.entry(p).or_default().push(Filter { prio, matcher, classid });
            }
            _ => return Err(err(format!("unrecognised command `{line}`"))),
        }
    }
    for (dev, d) in &devices {
        if d.root.is_none() {
            return Err(ParseError {
                script: "tc",
                line: script.len(),
                reason: format!("no root qdisc on {dev}"),
            });
        }
    }
    Ok(devices)
}

/// Simulates every directed pair of every class through the marking ruleset
/// and each interface's qdisc tree, and checks that it reaches the leaf and
/// delay of its class. Unmarked traffic must reach `(b, b)` with no delay.
pub fn verify_plan(
    nft: &CommandScript,
    tc: &CommandScript,
    classes: &DelayClassMap,
) -> Result<VerificationReport, ParseError> {
    let model = parse_nft(nft)?;
    let devices = parse_tc(tc)?;
    if devices.is_empty() {
        return Err(ParseError {
            script: "tc",
            line: 0,
            reason: "no interfaces configured".into(),
        });
    }
    let mut report = VerificationReport {
        devices: devices.keys().cloned().collect(),
        ..Default::default()
    };

    let mut marked = Vec::new();
    for class in classes.classes() {
        for p in &class.pairs {
            for (s, d) in [(p.lo(), p.hi()), (p.hi(), p.lo())] {
                marked.push((s, d, class.mark, class.delay_ms, model.mark(s, d)));
            }
        }
    }
    report.pairs_checked = marked.len();

    for (dev, device) in &devices {
        let bands = device.bands[&device.root.unwrap()];
        let mut cache: HashMap<Option<u32>, Reached> = HashMap::new();
        for &(src, dst, mark, delay, found) in &marked {
            let reached = cache.entry(found).or_insert_with(|| device.route(found)).clone();
            let expected_path = leaf_position(mark, bands).ok().map(|(f, s)| vec![f, s]);
            let ok = found == Some(mark)
                && matches!(&reached, Reached::Leaf { path, delay_ms }
                    if Some(path) == expected_path.as_ref() && *delay_ms == delay);
            if !ok {
                report.mismatches.push(Mismatch {
                    dev: dev.clone(),
                    src,
                    dst,
                    expected_mark: mark,
                    found_mark: found,
                    expected_delay_ms: delay,
                    reached,
                });
            }
        }
        let default = device.route(None);
        let ok = matches!(&default, Reached::Leaf { path, delay_ms: 0 } if path == &vec![bands, bands]);
        if !ok {
            report.default_failures.push((dev.clone(), default));
        }
    }
    Ok(report)
}
