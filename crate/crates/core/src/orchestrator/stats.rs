//! Memory summaries from `docker stats` snapshots.
//!
//! Snapshots are read from
//! `docker stats --no-stream --format '{{.Name}}\t{{.MemUsage}}'`, one
//! `name<TAB>used / limit` line per container. Sizes are parsed exactly.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::rational::Rational;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("checkpoint `{0}` has no samples")]
    EmptyCheckpoint(String),
    #[error("available memory must be positive")]
    NoMemory,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckpointSummary {
    pub name: String,
    pub samples: usize,
    pub min_mib: Rational,
    pub max_mib: Rational,
    pub avg_mib: Rational,
    pub total_mib: Rational,
    /// Percent of available memory.
    pub percent: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MemoryReport {
    pub available_mib: u64,
    pub checkpoints: Vec<CheckpointSummary>,
}

impl fmt::Display for MemoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<28} {:>6} {:>10} {:>10} {:>10} {:>12} {:>7}",
            "checkpoint", "nodes", "min MiB", "max MiB", "avg MiB", "total MiB", "%"
        )?;
        for c in &self.checkpoints {
            writeln!(
                f,
                "{:<28} {:>6} {:>10} {:>10} {:>10} {:>12} {:>7}",
                c.name,
                c.samples,
                c.min_mib.to_decimal_string(2),
                c.max_mib.to_decimal_string(2),
                c.avg_mib.to_decimal_string(4),
                c.total_mib.to_decimal_string(2),
                c.percent.to_decimal_string(2),
            )?;
        }
        Ok(())
    }
}

/// `samples` holds, per checkpoint in order, each node's usage in MiB.
pub fn summarize_stats(
    samples: &[(String, BTreeMap<String, Rational>)],
    available_mib: u64,
) -> Result<MemoryReport, StatsError> {
    if available_mib == 0 {
        return Err(StatsError::NoMemory);
    }
    let available = Rational::from(available_mib);
    let checkpoints = samples
        .iter()
        .map(|(name, per_node)| {
            let values: Vec<Rational> = per_node.values().copied().collect();
            let (Some(&min), Some(&max)) = (values.iter().min(), values.iter().max()) else {
                return Err(StatsError::EmptyCheckpoint(name.clone()));
            };
            let total: Rational = values.iter().copied().sum();
            Ok(CheckpointSummary {
                name: name.clone(),
                samples: values.len(),
                min_mib: min,
                max_mib: max,
                avg_mib: total / Rational::from(values.len()),
                total_mib: total,
                percent: total / available * Rational::from(100u32),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(MemoryReport {
        available_mib,
        checkpoints,
    })
}

/// Size such as `327.2MiB`, `1.5GiB`, `512kB` in MiB.
pub fn parse_size_mib(s: &str) -> Option<Rational> {
    let s = s.trim();
    let split = s.find(|c: char| c.is_ascii_alphabetic())?;
    let (num, unit) = s.split_at(split);
    let v: Rational = num.trim().parse().ok()?;
    if v < Rational::ZERO {
        return None;
    }
    let factor = match unit {
        "B" => Rational::new(1, 1 << 20),
        "KiB" => Rational::new(1, 1 << 10),
        "MiB" => Rational::ONE,
        "GiB" => Rational::from(1024u32),
        "TiB" => Rational::from(1u32 << 20),
        "kB" | "KB" => Rational::new(1000, 1 << 20),
        "MB" => Rational::new(1_000_000, 1 << 20),
        "GB" => Rational::new(1_000_000_000, 1 << 20),
        _ => return None,
    };
    Some(v * factor)
}

/// One snapshot: container name → used MiB. Also returns the limit of the
/// first line, which is the memory visible to containers.
pub fn parse_docker_stats(text: &str) -> Result<(BTreeMap<String, Rational>, Option<Rational>), StatsError> {
    let mut out = BTreeMap::new();
    let mut limit = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: &str| StatsError::Parse {
            line: i + 1,
            reason: reason.to_string(),
        };
        let (name, usage) = line
            .split_once('\t')
            .ok_or_else(|| err("expected `name<TAB>used / limit`"))?;
        let (used, lim) = usage.split_once('/').ok_or_else(|| err("expected `used / limit`"))?;
        let used = parse_size_mib(used).ok_or_else(|| err("bad used size"))?;
        let lim = parse_size_mib(lim).ok_or_else(|| err("bad limit size"))?;
        limit.get_or_insert(lim);
        if out.insert(name.trim().to_string(), used).is_some() {
            return Err(err("container listed twice"));
        }
    }
    Ok((out, limit))
}
