//! Delay matrices and delay classes.
//!
//! A [`DelayMatrix`] holds symmetric one-way delays in milliseconds. It is
//! quantized into a [`QuantizedMatrix`] and then partitioned into
//! [`DelayClass`]es: one class per distinct quantized delay, sorted by delay,
//! with marks `1..=K` assigned in that order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::net::Ipv4Addr;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rational::Rational;

#[derive(Debug, thiserror::Error)]
pub enum DelayError {
    #[error("matrix is not square: {0}")]
    Shape(String),
    #[error("matrix is not symmetric at ({row}, {col}): {forward} vs {backward}")]
    Symmetry {
        row: usize,
        col: usize,
        forward: f64,
        backward: f64,
    },
    #[error("invalid entry at ({row}, {col}): {reason}")]
    Value { row: usize, col: usize, reason: String },
    #[error("invalid value: {0}")]
    InvalidFactor(String),
    #[error("cannot select {requested} nodes out of {available}")]
    Size { requested: usize, available: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error reading matrix: {0}")]
    Io(#[from] std::io::Error),
}

/// Column separator of a matrix file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Whitespace,
    Csv,
    /// Comma if the row contains one, whitespace otherwise.
    #[default]
    Auto,
}

impl FromStr for MatrixFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace" | "ws" => Ok(MatrixFormat::Whitespace),
            "csv" => Ok(MatrixFormat::Csv),
            "auto" => Ok(MatrixFormat::Auto),
            other => Err(format!("unknown matrix format `{other}`")),
        }
    }
}

#[inline]
fn tri_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Symmetric, zero-diagonal matrix of one-way delays in milliseconds.
///
/// Only the strict upper triangle is stored. Inflation is kept as an exact
/// rational scale applied on read, so repeated inflation composes exactly.
#[derive(Clone, PartialEq)]
pub struct DelayMatrix {
    n: usize,
    upper: Vec<f64>,
    scale: Rational,
}

impl fmt::Debug for DelayMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelayMatrix")
            .field("n", &self.n)
            .field("scale", &self.scale)
            .finish_non_exhaustive()
    }
}

impl DelayMatrix {
    /// Builds a matrix from full rows, checking every invariant.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DelayError> {
        let n = rows.len();
        let mut b = Builder::new(n);
        for (i, row) in rows.iter().enumerate() {
            b.push_row(i, row)?;
        }
        Ok(b.finish())
    }

    /// Builds a matrix from a function on `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, DelayError> {
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                check_value(i, j, v)?;
                upper.push(v);
            }
        }
        Ok(DelayMatrix {
            n,
            upper,
            scale: Rational::ONE,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Accumulated inflation factor relative to the ingested values.
    pub fn scale(&self) -> Rational {
        self.scale
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "index out of range");
        let raw = match i.cmp(&j) {
            std::cmp::Ordering::Equal => return 0.0,
            std::cmp::Ordering::Less => self.upper[tri_index(self.n, i, j)],
            std::cmp::Ordering::Greater => self.upper[tri_index(self.n, j, i)],
        };
        if self.scale == Rational::ONE {
            raw
        } else {
            raw * self.scale.numer() as f64 / self.scale.denom() as f64
        }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn max_delay(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| (i + 1..self.n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .fold(0.0, f64::max)
    }

    /// Principal submatrix on `count` indices drawn uniformly without
    /// replacement from a ChaCha8 stream seeded with `seed`. Selected
    /// indices keep their original relative order.
    pub fn subsample(&self, count: usize, seed: u64) -> Result<DelayMatrix, DelayError> {
        let indices = self.subsample_indices(count, seed)?;
        Ok(self.select(&indices))
    }

    /// The sorted original indices [`subsample`](Self::subsample) would keep.
    pub fn subsample_indices(&self, count: usize, seed: u64) -> Result<Vec<usize>, DelayError> {
        if count > self.n {
            return Err(DelayError::Size {
                requested: count,
                available: self.n,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, self.n, count).into_vec();
        idx.sort_unstable();
        Ok(idx)
    }

    fn select(&self, indices: &[usize]) -> DelayMatrix {
        let m = indices.len();
        let mut upper = Vec::with_capacity(m * m.saturating_sub(1) / 2);
        for (a, &i) in indices.iter().enumerate() {
            for &j in &indices[a + 1..] {
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                upper.push(self.upper[tri_index(self.n, lo, hi)]);
            }
        }
        DelayMatrix {
            n: m,
            upper,
            scale: self.scale,
        }
    }

    /// Multiplies every delay by `factor`.
    pub fn inflate(&self, factor: Rational) -> Result<DelayMatrix, DelayError> {
        if !factor.is_positive() {
            return Err(DelayError::InvalidFactor(format!(
                "inflation factor must be > 0, got {factor}"
            )));
        }
        Ok(DelayMatrix {
            n: self.n,
            upper: self.upper.clone(),
            scale: self.scale * factor,
        })
    }

    pub fn quantize(&self, policy: &QuantizationPolicy) -> QuantizedMatrix {
        let q = policy.quantum_ms as f64;
        let mut upper = Vec::with_capacity(self.upper.len());
        for i in 0..self.n {
            for j in i + 1..self.n {
                upper.push(policy.rounding.apply(self.get(i, j), q, policy.quantum_ms));
            }
        }
        QuantizedMatrix { n: self.n, upper }
    }
}

fn check_value(row: usize, col: usize, v: f64) -> Result<(), DelayError> {
    if !v.is_finite() {
        return Err(DelayError::Value {
            row,
            col,
            reason: format!("{v} is not finite"),
        });
    }
    if v < 0.0 {
        return Err(DelayError::Value {
            row,
            col,
            reason: format!("{v} is negative"),
        });
    }
    Ok(())
}

struct Builder {
    n: usize,
    upper: Vec<f64>,
}

impl Builder {
    fn new(n: usize) -> Self {
        Builder {
            n,
            upper: vec![0.0; n * n.saturating_sub(1) / 2],
        }
    }

    fn push_row(&mut self, i: usize, row: &[f64]) -> Result<(), DelayError> {
        if row.len() != self.n {
            return Err(DelayError::Shape(format!(
                "row {i} has {} columns, expected {}",
                row.len(),
                self.n
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            check_value(i, j, v)?;
            match i.cmp(&j) {
                std::cmp::Ordering::Equal => {
                    if v != 0.0 {
                        return Err(DelayError::Value {
                            row: i,
                            col: j,
                            reason: format!("diagonal entry is {v}, expected 0"),
                        });
                    }
                }
                std::cmp::Ordering::Less => self.upper[tri_index(self.n, i, j)] = v,
                std::cmp::Ordering::Greater => {
                    let forward = self.upper[tri_index(self.n, j, i)];
                    if forward != v {
                        return Err(DelayError::Symmetry {
                            row: i,
                            col: j,
                            forward,
                            backward: v,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> DelayMatrix {
        DelayMatrix {
            n: self.n,
            upper: self.upper,
            scale: Rational::ONE,
        }
    }
}

fn split_row(line: &str, format: MatrixFormat) -> Vec<&str> {
    let csv = match format {
        MatrixFormat::Csv => true,
        MatrixFormat::Whitespace => false,
        MatrixFormat::Auto => line.contains(','),
    };
    if csv {
        let mut fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.last() == Some(&"") {
            fields.pop();
        }
        fields
    } else {
        line.split_whitespace().collect()
    }
}

/// Reads a square matrix, one row per line. Blank lines are ignored.
pub fn load_matrix<R: BufRead>(source: R, format: MatrixFormat) -> Result<DelayMatrix, DelayError> {
    let mut builder: Option<Builder> = None;
    let mut row = 0usize;
    let mut values = Vec::new();
    for line in source.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        values.clear();
        for (col, field) in split_row(&line, format).into_iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| DelayError::Value {
                row,
                col,
                reason: format!("`{field}` is not a number"),
            })?;
            values.push(v);
        }
        let b = builder.get_or_insert_with(|| Builder::new(values.len()));
        if row >= b.n {
            return Err(DelayError::Shape(format!("more than {} rows for {} columns", b.n, b.n)));
        }
        b.push_row(row, &values)?;
        row += 1;
    }
    match builder {
        None => Ok(Builder::new(0).finish()),
        Some(b) if row != b.n => Err(DelayError::Shape(format!("{row} rows for {} columns", b.n))),
        Some(b) => Ok(b.finish()),
    }
}

/// Rounding applied when snapping a delay to the quantization grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rounding {
    #[default]
    NearestHalfUp,
    Floor,
    Ceil,
}

impl Rounding {
    pub const ALL: [Rounding; 3] = [Rounding::NearestHalfUp, Rounding::Floor, Rounding::Ceil];

    fn apply(self, v: f64, q: f64, quantum: u32) -> u32 {
        let steps = v / q;
        let k = match self {
            Rounding::NearestHalfUp => (steps + 0.5).floor(),
            Rounding::Floor => steps.floor(),
            Rounding::Ceil => steps.ceil(),
        };
        k as u32 * quantum
    }
}

impl FromStr for Rounding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nearest-half-up" | "nearest" => Ok(Rounding::NearestHalfUp),
            "floor" => Ok(Rounding::Floor),
            "ceil" => Ok(Rounding::Ceil),
            other => Err(format!("unknown rounding mode `{other}`")),
        }
    }
}

impl fmt::Display for Rounding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rounding::NearestHalfUp => "nearest-half-up",
            Rounding::Floor => "floor",
            Rounding::Ceil => "ceil",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantizationPolicy {
    pub quantum_ms: u32,
    pub rounding: Rounding,
    pub drop_zero_class: bool,
}

impl Default for QuantizationPolicy {
    fn default() -> Self {
        QuantizationPolicy {
            quantum_ms: 10,
            rounding: Rounding::NearestHalfUp,
            drop_zero_class: true,
        }
    }
}

impl QuantizationPolicy {
    pub fn validate(&self) -> Result<(), DelayError> {
        if self.quantum_ms == 0 {
            return Err(DelayError::Config("quantum_ms must be at least 1".into()));
        }
        Ok(())
    }
}

/// Free-function form of [`DelayMatrix::subsample`].
pub fn subsample(m: &DelayMatrix, count: usize, seed: u64) -> Result<DelayMatrix, DelayError> {
    m.subsample(count, seed)
}

/// Free-function form of [`DelayMatrix::inflate`].
pub fn inflate(m: &DelayMatrix, factor: Rational) -> Result<DelayMatrix, DelayError> {
    m.inflate(factor)
}

/// Free-function form of [`DelayMatrix::quantize`].
pub fn quantize(m: &DelayMatrix, policy: &QuantizationPolicy) -> Result<QuantizedMatrix, DelayError> {
    policy.validate()?;
    Ok(m.quantize(policy))
}

/// Symmetric integer matrix of quantized delays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedMatrix {
    n: usize,
    upper: Vec<u32>,
}

impl QuantizedMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> u32) -> Self {
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                upper.push(f(i, j));
            }
        }
        QuantizedMatrix { n, upper }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0,
            std::cmp::Ordering::Less => self.upper[tri_index(self.n, i, j)],
            std::cmp::Ordering::Greater => self.upper[tri_index(self.n, j, i)],
        }
    }

    pub fn distinct_delays(&self) -> BTreeSet<u32> {
        self.upper.iter().copied().collect()
    }

    pub fn to_delay_matrix(&self) -> DelayMatrix {
        DelayMatrix {
            n: self.n,
            upper: self.upper.iter().map(|&v| v as f64).collect(),
            scale: Rational::ONE,
        }
    }
}

/// An unordered pair of distinct IPv4 addresses, stored as `(min, max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IpPair {
    lo: Ipv4Addr,
    hi: Ipv4Addr,
}

impl IpPair {
    pub fn new(a: Ipv4Addr, b: Ipv4Addr) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(IpPair { lo: a, hi: b }),
            std::cmp::Ordering::Greater => Some(IpPair { lo: b, hi: a }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn lo(&self) -> Ipv4Addr {
        self.lo
    }

    pub fn hi(&self) -> Ipv4Addr {
        self.hi
    }
}

impl fmt::Display for IpPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayClass {
    pub mark: u32,
    pub delay_ms: u32,
    /// Sorted by `(min, max)`.
    pub pairs: Vec<IpPair>,
}

/// Delay classes ordered by delay, marks contiguous from 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayClassMap {
    classes: Vec<DelayClass>,
    /// Pairs whose delay quantized to zero and were left unmarked.
    #[serde(default)]
    unmarked: Vec<IpPair>,
}

impl DelayClassMap {
    /// Assigns marks in ascending delay order. Every class must have at
    /// least one pair and no pair may appear in two classes.
    pub fn from_delays(by_delay: BTreeMap<u32, Vec<IpPair>>) -> Result<Self, DelayError> {
        let mut seen = BTreeSet::new();
        let mut classes = Vec::with_capacity(by_delay.len());
        for (idx, (delay_ms, mut pairs)) in by_delay.into_iter().enumerate() {
            if pairs.is_empty() {
                return Err(DelayError::Config(format!(
                    "class with delay {delay_ms}ms has no pairs"
                )));
            }
            pairs.sort_unstable();
            pairs.dedup();
            for p in &pairs {
                if !seen.insert(*p) {
                    return Err(DelayError::Config(format!("pair {p} appears in more than one class")));
                }
            }
            classes.push(DelayClass {
                mark: idx as u32 + 1,
                delay_ms,
                pairs,
            });
        }
        Ok(DelayClassMap {
            classes,
            unmarked: Vec::new(),
        })
    }

    pub fn classes(&self) -> &[DelayClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn unmarked(&self) -> &[IpPair] {
        &self.unmarked
    }

    pub fn class(&self, mark: u32) -> Option<&DelayClass> {
        mark.checked_sub(1).and_then(|i| self.classes.get(i as usize))
    }

    /// mark → delay in milliseconds.
    pub fn class_delays(&self) -> BTreeMap<u32, u32> {
        self.classes.iter().map(|c| (c.mark, c.delay_ms)).collect()
    }

    pub fn mark_of(&self, a: Ipv4Addr, b: Ipv4Addr) -> Option<u32> {
        let p = IpPair::new(a, b)?;
        self.classes
            .iter()
            .find(|c| c.pairs.binary_search(&p).is_ok())
            .map(|c| c.mark)
    }

    pub fn pair_count(&self) -> usize {
        self.classes.iter().map(|c| c.pairs.len()).sum()
    }
}

/// Partitions all node pairs by quantized delay. `ips[i]` is the address of
/// matrix index `i`.
pub fn build_classes(
    q: &QuantizedMatrix,
    ips: &[Ipv4Addr],
    policy: &QuantizationPolicy,
) -> Result<DelayClassMap, DelayError> {
    if ips.len() != q.n() {
        return Err(DelayError::Config(format!(
            "{} addresses for a {}-node matrix",
            ips.len(),
            q.n()
        )));
    }
    let mut first_index: BTreeMap<Ipv4Addr, usize> = BTreeMap::new();
    for (i, ip) in ips.iter().enumerate() {
        if let Some(prev) = first_index.insert(*ip, i) {
            return Err(DelayError::Config(format!(
                "address {ip} assigned to nodes {prev} and {i}"
            )));
        }
    }
    let mut by_delay: BTreeMap<u32, Vec<IpPair>> = BTreeMap::new();
    let mut unmarked = Vec::new();
    for i in 0..q.n() {
        for j in i + 1..q.n() {
            let pair = IpPair::new(ips[i], ips[j]).expect("distinct addresses");
            let d = q.get(i, j);
            if d == 0 && policy.drop_zero_class {
                unmarked.push(pair);
            } else {
                by_delay.entry(d).or_default().push(pair);
            }
        }
    }
    let mut map = DelayClassMap::from_delays(by_delay)?;
    unmarked.sort_unstable();
    map.unmarked = unmarked;
    Ok(map)
}

/// Sequential addresses starting at `first`, one per node.
pub fn sequential_ips(first: Ipv4Addr, count: usize) -> Result<Vec<Ipv4Addr>, DelayError> {
    let base = u32::from(first);
    (0..count)
        .map(|k| {
            base.checked_add(k as u32)
                .map(Ipv4Addr::from)
                .ok_or_else(|| DelayError::Config(format!("address range from {first} overflows")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ip(last: u8) -> Ipv4Addr {
        Ipv4Addr::new(10, 0, 0, last)
    }

    #[test]
    fn loads_minimal_matrix() {
        let m = load_matrix("0 7\n7 0\n".as_bytes(), MatrixFormat::Auto).unwrap();
        assert_eq!(m.n(), 2);
        assert_eq!(m.rows(), vec![vec![0.0, 7.0], vec![7.0, 0.0]]);
    }

    #[test]
    fn rejects_asymmetric() {
        let err = load_matrix("0 7\n8 0".as_bytes(), MatrixFormat::Whitespace).unwrap_err();
        assert!(matches!(err, DelayError::Symmetry { row: 1, col: 0, .. }), "{err}");
    }

    #[test]
    fn rejects_ragged_and_short() {
        assert!(matches!(
            load_matrix("0 1 2\n1 0\n".as_bytes(), MatrixFormat::Auto),
            Err(DelayError::Shape(_))
        ));
        assert!(matches!(
            load_matrix("0 1\n".as_bytes(), MatrixFormat::Auto),
            Err(DelayError::Shape(_))
        ));
        assert!(matches!(
            load_matrix("0 1\n1 0\n0 0\n".as_bytes(), MatrixFormat::Auto),
            Err(DelayError::Shape(_))
        ));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(
            load_matrix("0 -1\n-1 0".as_bytes(), MatrixFormat::Auto),
            Err(DelayError::Value { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            load_matrix("0 NaN\nNaN 0".as_bytes(), MatrixFormat::Auto),
            Err(DelayError::Value { .. })
        ));
        assert!(matches!(
            load_matrix("1 2\n2 0".as_bytes(), MatrixFormat::Auto),
            Err(DelayError::Value { row: 0, col: 0, .. })
        ));
    }

    #[test]
    fn csv_with_trailing_commas_and_blank_lines() {
        let m = load_matrix("0, 5.5, 3,\n5.5,0,4\n\n3,4,0\n  \n".as_bytes(), MatrixFormat::Auto).unwrap();
        assert_eq!(m.n(), 3);
        assert_eq!(m.get(0, 1), 5.5);
        assert_eq!(m.get(2, 1), 4.0);
    }

    #[test]
    fn subsample_edge_cases() {
        let m = DelayMatrix::from_fn(5, |i, j| (i * 10 + j) as f64).unwrap();
        assert_eq!(m.subsample(5, 99).unwrap(), m);
        let one = m.subsample(1, 3).unwrap();
        assert_eq!(one.rows(), vec![vec![0.0]]);
        assert!(matches!(m.subsample(6, 0), Err(DelayError::Size { .. })));
        assert_eq!(m.subsample(3, 7).unwrap(), m.subsample(3, 7).unwrap());
    }

    #[test]
    fn inflation_examples() {
        let m = DelayMatrix::from_rows(&[vec![0.0, 30.0], vec![30.0, 0.0]]).unwrap();
        assert_eq!(m.inflate(Rational::ONE).unwrap(), m);
        assert_eq!(m.inflate(Rational::from_integer(4)).unwrap().get(0, 1), 120.0);
        assert_eq!(m.inflate(Rational::from_integer(2)).unwrap().get(1, 0), 60.0);
        assert!(m.inflate(Rational::ZERO).is_err());
        assert!(m.inflate(Rational::from_integer(-1)).is_err());
    }

    #[test]
    fn quantize_examples() {
        let p = QuantizationPolicy::default();
        let m = DelayMatrix::from_rows(&[vec![0.0, 23.0, 25.0], vec![23.0, 0.0, 0.0], vec![25.0, 0.0, 0.0]]).unwrap();
        let q = m.quantize(&p);
        assert_eq!(q.get(0, 1), 20);
        assert_eq!(q.get(0, 2), 30);
        assert_eq!(q.get(1, 2), 0);
        let floor = QuantizationPolicy {
            rounding: Rounding::Floor,
            ..p
        };
        assert_eq!(m.quantize(&floor).get(0, 2), 20);
        let ceil = QuantizationPolicy {
            rounding: Rounding::Ceil,
            ..p
        };
        assert_eq!(m.quantize(&ceil).get(0, 1), 30);
    }

    #[test]
    fn single_class() {
        let q = QuantizedMatrix::from_fn(3, |_, _| 50);
        let map = build_classes(&q, &[ip(1), ip(2), ip(3)], &QuantizationPolicy::default()).unwrap();
        assert_eq!(map.len(), 1);
        assert_eq!(map.classes()[0].mark, 1);
        assert_eq!(map.classes()[0].delay_ms, 50);
        assert_eq!(map.classes()[0].pairs.len(), 3);
    }

    #[test]
    fn two_classes_by_hand() {
        // A=0, B=1, C=2; AB=20, AC=50, BC=50
        let q = QuantizedMatrix::from_fn(3, |i, j| if (i, j) == (0, 1) { 20 } else { 50 });
        let (a, b, c) = (ip(1), ip(2), ip(3));
        let map = build_classes(&q, &[a, b, c], &QuantizationPolicy::default()).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map.classes()[0].delay_ms, 20);
        assert_eq!(map.classes()[0].pairs, vec![IpPair::new(a, b).unwrap()]);
        assert_eq!(map.classes()[1].mark, 2);
        assert_eq!(
            map.classes()[1].pairs,
            vec![IpPair::new(a, c).unwrap(), IpPair::new(b, c).unwrap()]
        );
        assert_eq!(map.mark_of(c, a), Some(2));
    }

    #[test]
    fn zero_class_dropped_or_kept() {
        let q = QuantizedMatrix::from_fn(3, |i, _| if i == 0 { 0 } else { 10 });
        let ips = [ip(1), ip(2), ip(3)];
        let dropped = build_classes(&q, &ips, &QuantizationPolicy::default()).unwrap();
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped.unmarked().len(), 2);
        let kept = build_classes(
            &q,
            &ips,
            &QuantizationPolicy {
                drop_zero_class: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(kept.len(), 2);
        assert_eq!(kept.classes()[0].delay_ms, 0);
    }

    #[test]
    fn duplicate_ips_rejected() {
        let q = QuantizedMatrix::from_fn(2, |_, _| 10);
        assert!(matches!(
            build_classes(&q, &[ip(1), ip(1)], &QuantizationPolicy::default()),
            Err(DelayError::Config(_))
        ));
        assert!(matches!(
            build_classes(&q, &[ip(1)], &QuantizationPolicy::default()),
            Err(DelayError::Config(_))
        ));
    }
}
