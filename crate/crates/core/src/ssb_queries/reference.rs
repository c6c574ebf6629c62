//! Row-at-a-time evaluation written straight from the SSB query text. It
//! shares no code with the tile plans beyond dictionary lookups, so plan
//! rewrites (date ranges, join order, payload wiring) are checked by it.

use std::collections::{BTreeMap, HashMap};

use crate::storage::{SsbDatabase, StorageError, Table};

use super::{QueryError, QueryId, QueryResult};

struct Dim<'a> {
    table: &'a Table,
    rows: HashMap<i32, usize>,
}

impl<'a> Dim<'a> {
    fn new(db: &'a SsbDatabase, table: &str, key: &str) -> Result<Self, QueryError> {
        let table = db
            .table(table)
            .ok_or_else(|| StorageError::MissingTable(table.into()))?;
        let rows = table
            .i32s(key)?
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, i))
            .collect();
        Ok(Self { table, rows })
    }

    fn col(&self, name: &str) -> Result<&'a [i32], QueryError> {
        Ok(self.table.i32s(name)?)
    }
}

fn code(db: &SsbDatabase, column: &str, label: &str) -> Result<i32, QueryError> {
    db.dictionary(column)
        .and_then(|d| d.code(label))
        .ok_or_else(|| QueryError::UnknownLabel {
            column: column.into(),
            label: label.into(),
        })
}

pub fn run_reference(db: &SsbDatabase, id: QueryId) -> Result<QueryResult, QueryError> {
    let lo = &db.lineorder;
    let n = lo.rows();
    let orderdate = lo.i32s("lo_orderdate")?;
    let quantity = lo.i32s("lo_quantity")?;
    let discount = lo.i32s("lo_discount")?;
    let price = lo.i32s("lo_extendedprice")?;
    let revenue = lo.i32s("lo_revenue")?;
    let supplycost = lo.i32s("lo_supplycost")?;
    let custkey = lo.i32s("lo_custkey")?;
    let partkey = lo.i32s("lo_partkey")?;
    let suppkey = lo.i32s("lo_suppkey")?;

    let date = Dim::new(db, "date", "d_datekey")?;
    let supp = Dim::new(db, "supplier", "s_suppkey")?;
    let cust = Dim::new(db, "customer", "c_custkey")?;
    let part = Dim::new(db, "part", "p_partkey")?;
    let d_year = date.col("d_year")?;

    let mut rows: BTreeMap<Vec<i32>, i64> = BTreeMap::new();
    let mut add = |key: Vec<i32>, v: i64| *rows.entry(key).or_insert(0) += v;

    match id {
        QueryId::Q11 | QueryId::Q12 | QueryId::Q13 => {
            let ymn = date.col("d_yearmonthnum")?;
            let week = date.col("d_weeknuminyear")?;
            let mut sum = 0i64;
            for i in 0..n {
                let (q, d) = (quantity[i], discount[i]);
                let keep = match id {
                    QueryId::Q11 => {
                        (19930101..=19940101).contains(&orderdate[i])
                            && (1..=3).contains(&d)
                            && q < 25
                    }
                    QueryId::Q12 => {
                        date.rows
                            .get(&orderdate[i])
                            .is_some_and(|&r| ymn[r] == 199401)
                            && (4..=6).contains(&d)
                            && (26..=35).contains(&q)
                    }
                    _ => {
                        date.rows
                            .get(&orderdate[i])
                            .is_some_and(|&r| week[r] == 6 && d_year[r] == 1994)
                            && (5..=7).contains(&d)
                            && (26..=35).contains(&q)
                    }
                };
                if keep {
                    sum += i64::from(price[i]) * i64::from(d);
                }
            }
            add(Vec::new(), sum);
        }
        QueryId::Q21 | QueryId::Q22 | QueryId::Q23 => {
            let s_region = supp.col("s_region")?;
            let p_category = part.col("p_category")?;
            let p_brand = part.col("p_brand1")?;
            let (region, brands): (i32, Box<dyn Fn(usize) -> bool>) = match id {
                QueryId::Q21 => {
                    let c = code(db, "p_category", "MFGR#12")?;
                    (
                        code(db, "s_region", "AMERICA")?,
                        Box::new(move |r| p_category[r] == c),
                    )
                }
                QueryId::Q22 => {
                    let (b0, b1) = (
                        code(db, "p_brand1", "MFGR#2221")?,
                        code(db, "p_brand1", "MFGR#2228")?,
                    );
                    (
                        code(db, "s_region", "ASIA")?,
                        Box::new(move |r| (b0..=b1).contains(&p_brand[r])),
                    )
                }
                _ => {
                    let b = code(db, "p_brand1", "MFGR#2239")?;
                    (
                        code(db, "s_region", "EUROPE")?,
                        Box::new(move |r| p_brand[r] == b),
                    )
                }
            };
            for i in 0..n {
                let (Some(&s), Some(&p), Some(&d)) = (
                    supp.rows.get(&suppkey[i]),
                    part.rows.get(&partkey[i]),
                    date.rows.get(&orderdate[i]),
                ) else {
                    continue;
                };
                if s_region[s] == region && brands(p) {
                    add(vec![d_year[d], p_brand[p]], i64::from(revenue[i]));
                }
            }
        }
        QueryId::Q31 | QueryId::Q32 | QueryId::Q33 | QueryId::Q34 => {
            let (c_geo, s_geo) = if id == QueryId::Q31 {
                (cust.col("c_nation")?, supp.col("s_nation")?)
            } else {
                (cust.col("c_city")?, supp.col("s_city")?)
            };
            let (c_filter, s_filter): (&[i32], &[i32]) = match id {
                QueryId::Q31 => (cust.col("c_region")?, supp.col("s_region")?),
                QueryId::Q32 => (cust.col("c_nation")?, supp.col("s_nation")?),
                _ => (cust.col("c_city")?, supp.col("s_city")?),
            };
            let wanted: Vec<i32> = match id {
                QueryId::Q31 => vec![code(db, "c_region", "ASIA")?],
                QueryId::Q32 => vec![code(db, "c_nation", "UNITED STATES")?],
                _ => vec![
                    code(db, "c_city", "UNITED KI1")?,
                    code(db, "c_city", "UNITED KI5")?,
                ],
            };
            let s_wanted: Vec<i32> = match id {
                QueryId::Q31 => vec![code(db, "s_region", "ASIA")?],
                QueryId::Q32 => vec![code(db, "s_nation", "UNITED STATES")?],
                _ => vec![
                    code(db, "s_city", "UNITED KI1")?,
                    code(db, "s_city", "UNITED KI5")?,
                ],
            };
            let yearmonth = date.col("d_yearmonth")?;
            let dec97 = code(db, "d_yearmonth", "Dec1997")?;
            for i in 0..n {
                let (Some(&c), Some(&s), Some(&d)) = (
                    cust.rows.get(&custkey[i]),
                    supp.rows.get(&suppkey[i]),
                    date.rows.get(&orderdate[i]),
                ) else {
                    continue;
                };
                let date_ok = if id == QueryId::Q34 {
                    yearmonth[d] == dec97
                } else {
                    (1992..=1997).contains(&d_year[d])
                };
                if wanted.contains(&c_filter[c]) && s_wanted.contains(&s_filter[s]) && date_ok {
                    add(vec![c_geo[c], s_geo[s], d_year[d]], i64::from(revenue[i]));
                }
            }
        }
        QueryId::Q41 | QueryId::Q42 | QueryId::Q43 => {
            let c_region = cust.col("c_region")?;
            let c_nation = cust.col("c_nation")?;
            let s_region = supp.col("s_region")?;
            let s_nation = supp.col("s_nation")?;
            let s_city = supp.col("s_city")?;
            let p_mfgr = part.col("p_mfgr")?;
            let p_category = part.col("p_category")?;
            let p_brand = part.col("p_brand1")?;
            let america = code(db, "c_region", "AMERICA")?;
            let s_america = code(db, "s_region", "AMERICA")?;
            let us = code(db, "s_nation", "UNITED STATES")?;
            let mfgrs = [code(db, "p_mfgr", "MFGR#1")?, code(db, "p_mfgr", "MFGR#2")?];
            let mfgr14 = code(db, "p_category", "MFGR#14")?;
            for i in 0..n {
                let (Some(&c), Some(&s), Some(&p), Some(&d)) = (
                    cust.rows.get(&custkey[i]),
                    supp.rows.get(&suppkey[i]),
                    part.rows.get(&partkey[i]),
                    date.rows.get(&orderdate[i]),
                ) else {
                    continue;
                };
                if c_region[c] != america {
                    continue;
                }
                let profit = i64::from(revenue[i]) - i64::from(supplycost[i]);
                let y = d_year[d];
                match id {
                    QueryId::Q41 if s_region[s] == s_america && mfgrs.contains(&p_mfgr[p]) => {
                        add(vec![y, c_nation[c]], profit)
                    }
                    QueryId::Q42
                        if s_region[s] == s_america
                            && mfgrs.contains(&p_mfgr[p])
                            && (y == 1997 || y == 1998) =>
                    {
                        add(vec![y, s_nation[s], p_category[p]], profit)
                    }
                    QueryId::Q43
                        if s_nation[s] == us
                            && p_category[p] == mfgr14
                            && (y == 1997 || y == 1998) =>
                    {
                        add(vec![y, s_city[s], p_brand[p]], profit)
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(QueryResult { rows })
}
