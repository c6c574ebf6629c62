//! The 13 SSB queries as tile pipelines, and a row-at-a-time reference
//! interpreter to check them against.

mod exec;
mod plan;
mod reference;

pub use exec::{run_plan, run_query, AggregateTable, ProbeStats};
pub use plan::{
    plan_for, plan_for_str, AggExpr, BuildStep, DimFilter, FactFilter, GroupDim, QueryPlan,
    Selector, Value,
};
pub use reference::run_reference;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::operators::OpError;
use crate::storage::StorageError;
use crate::tile_engine::TileError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum QueryId {
    Q11,
    Q12,
    Q13,
    Q21,
    Q22,
    Q23,
    Q31,
    Q32,
    Q33,
    Q34,
    Q41,
    Q42,
    Q43,
}

impl QueryId {
    pub const ALL: [QueryId; 13] = [
        QueryId::Q11,
        QueryId::Q12,
        QueryId::Q13,
        QueryId::Q21,
        QueryId::Q22,
        QueryId::Q23,
        QueryId::Q31,
        QueryId::Q32,
        QueryId::Q33,
        QueryId::Q34,
        QueryId::Q41,
        QueryId::Q42,
        QueryId::Q43,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryId::Q11 => "q11",
            QueryId::Q12 => "q12",
            QueryId::Q13 => "q13",
            QueryId::Q21 => "q21",
            QueryId::Q22 => "q22",
            QueryId::Q23 => "q23",
            QueryId::Q31 => "q31",
            QueryId::Q32 => "q32",
            QueryId::Q33 => "q33",
            QueryId::Q34 => "q34",
            QueryId::Q41 => "q41",
            QueryId::Q42 => "q42",
            QueryId::Q43 => "q43",
        }
    }
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accepts `q21`, `Q21` and `q2.1`.
impl FromStr for QueryId {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|&c| c != '.')
            .collect();
        QueryId::ALL
            .into_iter()
            .find(|q| q.as_str() == norm)
            .ok_or_else(|| QueryError::UnknownQuery(s.to_owned()))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("unknown query id {0:?} (expected one of q11..q43)")]
    UnknownQuery(String),
    #[error("no dictionary entry {label:?} for column {column}")]
    UnknownLabel { column: String, label: String },
    #[error("group column {column} value {value} outside its domain")]
    GroupOutOfRange { column: String, value: i32 },
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Tile(#[from] TileError),
}

/// Grouped sums keyed by the group column values, in group-by order. Codes
/// are returned for dictionary columns. Ungrouped queries (flight 1) hold a
/// single row with an empty key, even when no fact row qualifies.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct QueryResult {
    pub rows: BTreeMap<Vec<i32>, i64>,
}

impl QueryResult {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The single value of an ungrouped result.
    pub fn scalar(&self) -> Option<i64> {
        self.rows.get(&Vec::new()).copied()
    }

    /// Order-independent digest for reports.
    pub fn checksum(&self) -> u64 {
        self.rows.iter().fold(0u64, |acc, (k, v)| {
            let h = k.iter().fold(0x9e37_79b9_7f4a_7c15u64, |h, &x| {
                (h ^ x as u32 as u64).wrapping_mul(0x100_0000_01b3)
            });
            acc.wrapping_add((h ^ *v as u64).wrapping_mul(0xff51_afd7_ed55_8ccd))
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Mismatch {
    pub missing: Vec<(Vec<i32>, i64)>,
    pub unexpected: Vec<(Vec<i32>, i64)>,
    /// (group, expected, actual)
    pub differing: Vec<(Vec<i32>, i64, i64)>,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} missing, {} unexpected, {} differing groups",
            self.missing.len(),
            self.unexpected.len(),
            self.differing.len()
        )?;
        for (k, v) in self.missing.iter().take(3) {
            write!(f, "; missing {k:?}={v}")?;
        }
        for (k, v) in self.unexpected.iter().take(3) {
            write!(f, "; unexpected {k:?}={v}")?;
        }
        for (k, e, a) in self.differing.iter().take(3) {
            write!(f, "; {k:?} expected {e} got {a}")?;
        }
        Ok(())
    }
}

/// Exact comparison of a result against the reference.
pub fn validate(expected: &QueryResult, actual: &QueryResult) -> Result<(), Mismatch> {
    let mut m = Mismatch::default();
    for (k, &e) in &expected.rows {
        match actual.rows.get(k) {
            None => m.missing.push((k.clone(), e)),
            Some(&a) if a != e => m.differing.push((k.clone(), e, a)),
            Some(_) => {}
        }
    }
    for (k, &a) in &actual.rows {
        if !expected.rows.contains_key(k) {
            m.unexpected.push((k.clone(), a));
        }
    }
    if m == Mismatch::default() {
        Ok(())
    } else {
        Err(m)
    }
}
