//! RAM-bounded startup batches.
//!
//! A node needs more memory while starting than once settled. Each batch is
//! as large as the memory left over by the already settled nodes allows at
//! the startup footprint.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;

use super::manifest::Resources;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchRounding {
    /// Exact rational arithmetic throughout.
    #[default]
    Exact,
    /// Settled occupancy is rounded (half up) to a whole percent before
    /// computing each batch.
    WholePercent,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum InfeasibleError {
    #[error("one node needs {startup} of RAM at startup but the cap is {cap}")]
    StartupAboveCap { startup: Rational, cap: Rational },
    #[error("startup fraction {startup} is below steady fraction {steady}")]
    StartupBelowSteady { startup: Rational, steady: Rational },
    #[error("fractions must be positive")]
    NonPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchStep {
    pub size: usize,
    /// Nodes already running before this batch.
    pub launched_before: usize,
    /// Projected occupancy while this batch starts.
    pub startup_occupancy: Rational,
    /// Projected occupancy once this batch has settled.
    pub steady_occupancy: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSchedule {
    pub batches: Vec<BatchStep>,
    /// Nodes that could not be placed under the cap.
    pub unplaced: usize,
    pub rounding: BatchRounding,
}

impl BatchSchedule {
    pub fn sizes(&self) -> Vec<usize> {
        self.batches.iter().map(|b| b.size).collect()
    }

    pub fn launched(&self) -> usize {
        self.batches.iter().map(|b| b.size).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.unplaced == 0
    }
}

impl fmt::Display for BatchSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.batches.iter().enumerate() {
            writeln!(
                f,
                "batch {}: {} nodes (startup {}%, settled {}%)",
                i + 1,
                b.size,
                (b.startup_occupancy * Rational::from(100u32)).to_decimal_string(2),
                (b.steady_occupancy * Rational::from(100u32)).to_decimal_string(2),
            )?;
        }
        if self.unplaced > 0 {
            writeln!(f, "unplaced: {} nodes", self.unplaced)?;
        }
        Ok(())
    }
}

fn whole_percent(x: Rational) -> Rational {
    let hundred = Rational::from(100u32);
    Rational::from_integer((x * hundred).round_half_up()) / hundred
}

pub fn plan_batches(
    total_nodes: usize,
    r: &Resources,
    rounding: BatchRounding,
) -> Result<BatchSchedule, InfeasibleError> {
    let (cap, startup, steady) = (
        r.ram_cap_fraction,
        r.per_node_startup_fraction,
        r.per_node_steady_fraction,
    );
    if !cap.is_positive() || !startup.is_positive() || !steady.is_positive() {
        return Err(InfeasibleError::NonPositive);
    }
    if startup < steady {
        return Err(InfeasibleError::StartupBelowSteady { startup, steady });
    }
    if startup > cap {
        return Err(InfeasibleError::StartupAboveCap { startup, cap });
    }
    let mut batches = Vec::new();
    let mut launched = 0usize;
    while launched < total_nodes {
        let mut settled = Rational::from(launched) * steady;
        if rounding == BatchRounding::WholePercent {
            settled = whole_percent(settled);
        }
        let room = cap - settled;
        let fits = if room.is_positive() {
            (room / startup).floor()
        } else {
            0
        };
        let size = (fits.max(0) as usize).min(total_nodes - launched);
        if size == 0 {
            break;
        }
        batches.push(BatchStep {
            size,
            launched_before: launched,
            startup_occupancy: settled + Rational::from(size) * startup,
            steady_occupancy: Rational::from(launched + size) * steady,
        });
        launched += size;
    }
    Ok(BatchSchedule {
        batches,
        unplaced: total_nodes - launched,
        rounding,
    })
}
