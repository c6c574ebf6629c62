use serde::Serialize;

use crate::operators::LinearProbeHashTable;
use crate::storage::{SsbDatabase, StorageError, Table};
use crate::tile_engine::{
    block_load, block_load_sel, block_lookup, block_pred, BlockBitmap, BlockContext, Kernel,
    Predicate, PredicateSpec, Tile, TileConfig,
};

use super::plan::{plan_for, BuildStep, GroupDim, QueryPlan, Selector, Value};
use super::{QueryError, QueryId, QueryResult};

/// Dense group-by table addressed by a mixed-radix encoding of the group
/// columns (first column most significant).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregateTable {
    dims: Vec<(i32, usize)>,
    sums: Vec<i64>,
    occupied: Vec<bool>,
}

impl AggregateTable {
    pub fn new(dims: &[GroupDim]) -> Self {
        let dims: Vec<(i32, usize)> = dims.iter().map(|g| (g.base, g.extent)).collect();
        let cap = dims.iter().map(|d| d.1).product();
        Self {
            dims,
            sums: vec![0; cap],
            occupied: vec![false; cap],
        }
    }

    pub fn capacity(&self) -> usize {
        self.sums.len()
    }

    /// Cell index of a group, or `None` if a value is outside its domain.
    pub fn index(&self, values: &[i32]) -> Option<usize> {
        debug_assert_eq!(values.len(), self.dims.len());
        let mut idx = 0usize;
        for (&v, &(base, extent)) in values.iter().zip(&self.dims) {
            let off = usize::try_from(i64::from(v) - i64::from(base))
                .ok()
                .filter(|&o| o < extent)?;
            idx = idx * extent + off;
        }
        Some(idx)
    }

    #[inline(always)]
    pub fn add(&mut self, idx: usize, value: i64) {
        self.sums[idx] += value;
        self.occupied[idx] = true;
    }

    pub fn merge(&mut self, other: &AggregateTable) {
        assert_eq!(self.dims, other.dims, "merging tables of different shapes");
        for i in 0..self.sums.len() {
            self.sums[i] += other.sums[i];
            self.occupied[i] |= other.occupied[i];
        }
    }

    /// Occupied cells as result rows. A table without group columns always
    /// yields its single cell.
    pub fn into_result(self) -> QueryResult {
        let mut rows = std::collections::BTreeMap::new();
        if self.dims.is_empty() {
            rows.insert(Vec::new(), self.sums[0]);
            return QueryResult { rows };
        }
        for (i, (&s, &o)) in self.sums.iter().zip(&self.occupied).enumerate() {
            if !o {
                continue;
            }
            let mut key = vec![0; self.dims.len()];
            let mut rem = i;
            for (slot, &(base, extent)) in key.iter_mut().zip(&self.dims).rev() {
                *slot = base + (rem % extent) as i32;
                rem /= extent;
            }
            rows.insert(key, s);
        }
        QueryResult { rows }
    }
}

/// Row counts through the probe pipeline.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ProbeStats {
    pub fact_rows: u64,
    pub after_filters: u64,
    /// Dimension rows inserted into each join's hash table.
    pub build_rows: Vec<u64>,
    /// Fact rows still selected after each join, in probe order.
    pub after_join: Vec<u64>,
}

pub fn run_query(
    db: &SsbDatabase,
    id: QueryId,
    config: TileConfig,
    workers: usize,
) -> Result<QueryResult, QueryError> {
    let kernel = Kernel::new(config).workers(workers);
    Ok(run_plan(db, &plan_for(id), &kernel)?.0)
}

struct Join<'a> {
    table: LinearProbeHashTable,
    fact_key: &'a [i32],
}

struct Inputs<'a> {
    filters: Vec<(&'a [i32], Predicate<i32>)>,
    joins: Vec<Join<'a>>,
    agg_a: &'a [i32],
    agg_b: Option<&'a [i32]>,
    plan: &'a QueryPlan,
    rows: usize,
}

struct Scratch {
    col: Tile<i32>,
    payloads: Vec<Tile<i32>>,
    a: Tile<i32>,
    b: Tile<i32>,
    mask: BlockBitmap,
    found: BlockBitmap,
    group: Vec<i32>,
    agg: AggregateTable,
    stats: ProbeStats,
    error: Option<QueryError>,
}

pub fn run_plan(
    db: &SsbDatabase,
    plan: &QueryPlan,
    kernel: &Kernel,
) -> Result<(QueryResult, ProbeStats), QueryError> {
    let fact = &db.lineorder;
    let mut build_rows = Vec::new();
    let mut joins = Vec::new();
    for step in &plan.builds {
        let (table, rows) = build_join(db, step, kernel.worker_count())?;
        build_rows.push(rows);
        joins.push(Join {
            table,
            fact_key: fact.i32s(step.fact_key)?,
        });
    }
    let filters = plan
        .fact_filters
        .iter()
        .map(|f| Ok((fact.i32s(f.column)?, Predicate::between(f.lo, f.hi)?)))
        .collect::<Result<Vec<_>, QueryError>>()?;
    let (a, b) = plan.aggregate.columns();
    let inputs = Inputs {
        filters,
        joins,
        agg_a: fact.i32s(a)?,
        agg_b: b.map(|c| fact.i32s(c)).transpose()?,
        plan,
        rows: fact.rows(),
    };

    let config = kernel.config();
    let states = kernel.launch_with_state(
        inputs.rows,
        || Scratch {
            col: Tile::for_config(&config),
            payloads: (0..plan.builds.len())
                .map(|_| Tile::for_config(&config))
                .collect(),
            a: Tile::for_config(&config),
            b: Tile::for_config(&config),
            mask: BlockBitmap::new(config.tile_size()),
            found: BlockBitmap::new(config.tile_size()),
            group: vec![0; plan.group_by.len()],
            agg: AggregateTable::new(&plan.group_by),
            stats: ProbeStats {
                after_join: vec![0; plan.builds.len()],
                ..ProbeStats::default()
            },
            error: None,
        },
        |ctx, s| {
            if s.error.is_none() {
                if let Err(e) = process_block(ctx, s, &inputs) {
                    s.error = Some(e);
                }
            }
        },
    );

    let mut agg = AggregateTable::new(&plan.group_by);
    let mut stats = ProbeStats {
        build_rows,
        after_join: vec![0; plan.builds.len()],
        ..ProbeStats::default()
    };
    for s in states {
        if let Some(e) = s.error {
            return Err(e);
        }
        agg.merge(&s.agg);
        stats.fact_rows += s.stats.fact_rows;
        stats.after_filters += s.stats.after_filters;
        for (t, x) in stats.after_join.iter_mut().zip(&s.stats.after_join) {
            *t += x;
        }
    }
    Ok((agg.into_result(), stats))
}

fn process_block(
    ctx: &BlockContext<'_>,
    s: &mut Scratch,
    inp: &Inputs<'_>,
) -> Result<(), QueryError> {
    let len = ctx.tile_len(inp.rows);
    s.stats.fact_rows += len as u64;
    if inp.filters.is_empty() {
        s.mask.reset(len, true);
    }
    for (j, &(col, pred)) in inp.filters.iter().enumerate() {
        if j == 0 {
            block_load(col, ctx, &mut s.col);
            block_pred(&s.col, &PredicateSpec::init(pred), &mut s.mask)?;
        } else {
            block_load_sel(col, &s.mask, ctx, &mut s.col)?;
            block_pred(&s.col, &PredicateSpec::and(pred), &mut s.mask)?;
        }
    }
    let mut live = s.mask.count();
    s.stats.after_filters += live as u64;

    for (j, join) in inp.joins.iter().enumerate() {
        if live == 0 {
            return Ok(());
        }
        block_load_sel(join.fact_key, &s.mask, ctx, &mut s.col)?;
        block_lookup(
            &s.col,
            Some(&s.mask),
            &join.table,
            &mut s.payloads[j],
            &mut s.found,
        )?;
        std::mem::swap(&mut s.mask, &mut s.found);
        live = s.mask.count();
        s.stats.after_join[j] += live as u64;
    }
    if live == 0 {
        return Ok(());
    }

    block_load_sel(inp.agg_a, &s.mask, ctx, &mut s.a)?;
    if let Some(b) = inp.agg_b {
        block_load_sel(b, &s.mask, ctx, &mut s.b)?;
    }
    let expr = inp.plan.aggregate;
    for i in 0..len {
        if !s.mask.get(i) {
            continue;
        }
        for (slot, g) in s.group.iter_mut().zip(&inp.plan.group_by) {
            *slot = s.payloads[g.build].get(i);
        }
        let idx = s.agg.index(&s.group).ok_or_else(|| {
            let (g, v) = inp
                .plan
                .group_by
                .iter()
                .zip(&s.group)
                .find(|(g, &v)| v < g.base || (v - g.base) as usize >= g.extent)
                .expect("some group value is out of range");
            QueryError::GroupOutOfRange {
                column: g.column.into(),
                value: *v,
            }
        })?;
        let b = if inp.agg_b.is_some() { s.b.get(i) } else { 0 };
        s.agg.add(idx, expr.eval(s.a.get(i), b));
    }
    Ok(())
}

/// Inclusive code ranges a selector accepts.
pub(super) fn resolve(
    db: &SsbDatabase,
    column: &str,
    sel: &Selector,
) -> Result<Vec<(i32, i32)>, QueryError> {
    let value = |v: &Value| match *v {
        Value::Int(x) => Ok(x),
        Value::Label(l) => db
            .dictionary(column)
            .and_then(|d| d.code(l))
            .ok_or_else(|| QueryError::UnknownLabel {
                column: column.into(),
                label: l.into(),
            }),
    };
    Ok(match sel {
        Selector::Eq(v) => {
            let c = value(v)?;
            vec![(c, c)]
        }
        Selector::In(vs) => vs
            .iter()
            .map(|v| value(v).map(|c| (c, c)))
            .collect::<Result<_, _>>()?,
        Selector::Between(lo, hi) => vec![(value(lo)?, value(hi)?)],
        Selector::Nothing => Vec::new(),
    })
}

fn build_join(
    db: &SsbDatabase,
    step: &BuildStep,
    workers: usize,
) -> Result<(LinearProbeHashTable, u64), QueryError> {
    let dim: &Table = db
        .table(step.table)
        .ok_or_else(|| StorageError::MissingTable(step.table.into()))?;
    let keys = dim.i32s(step.key)?;
    let mut pass = vec![true; keys.len()];
    for f in &step.filters {
        let ranges = resolve(db, f.column, &f.selector)?;
        let col = dim.i32s(f.column)?;
        for (p, &v) in pass.iter_mut().zip(col) {
            *p = *p && ranges.iter().any(|&(lo, hi)| v >= lo && v <= hi);
        }
    }
    let payload = step.payload.map(|c| dim.i32s(c)).transpose()?;
    let mut bk = Vec::new();
    let mut bp = Vec::new();
    for (i, &k) in keys.iter().enumerate() {
        if pass[i] {
            bk.push(k);
            bp.push(payload.map_or(0, |p| p[i]));
        }
    }
    let capacity = (2 * bk.len()).next_power_of_two().max(16);
    let table = LinearProbeHashTable::build_parallel(&bk, &bp, capacity, workers)?;
    Ok((table, bk.len() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_radix_round_trip() {
        let dims = [
            GroupDim {
                build: 0,
                column: "d_year",
                base: 1992,
                extent: 7,
            },
            GroupDim {
                build: 1,
                column: "p_brand1",
                base: 0,
                extent: 1000,
            },
        ];
        let mut t = AggregateTable::new(&dims);
        assert_eq!(t.capacity(), 7000);
        assert_eq!(t.index(&[1992, 0]), Some(0));
        assert_eq!(t.index(&[1993, 5]), Some(1005));
        assert_eq!(t.index(&[1999, 5]), None);
        assert_eq!(t.index(&[1993, -1]), None);
        t.add(1005, 7);
        t.add(1005, -2);
        let mut u = AggregateTable::new(&dims);
        u.add(6999, 1);
        t.merge(&u);
        let r = t.into_result();
        assert_eq!(r.rows.get(&vec![1993, 5]), Some(&5));
        assert_eq!(r.rows.get(&vec![1998, 999]), Some(&1));
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn ungrouped_table_always_has_a_row() {
        let r = AggregateTable::new(&[]).into_result();
        assert_eq!(r.scalar(), Some(0));
    }
}
