//! Star Schema Benchmark data: a deterministic generator, the in-memory
//! database, and directory persistence with a JSON manifest.
//!
//! The generator is a simplified SSB: cardinalities follow the SSB scaling
//! rules and every attribute the 13 queries touch is drawn uniformly from its
//! domain. Nested attributes are derived from the finest one (city → nation →
//! region, brand → category → manufacturer), so e.g. a supplier region
//! predicate selects 1/5 of suppliers and a part category predicate 1/25 of
//! parts.
//!
//! Each generated column draws from its own ChaCha8 stream keyed by
//! (seed, scale factor, table.column). Row `i` consumes exactly word `i` of
//! the stream, so output does not depend on the worker count.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::parallel::{default_workers, run_workers, split_even};

use super::column::{load_column_as, save_column, ElemKind, FORMAT_VERSION};
use super::{dict_encode, Column, Dictionary, StorageError, Table};

pub const DATE_ROWS: usize = 2556;
pub const FIRST_YEAR: i32 = 1992;
pub const LAST_YEAR: i32 = 1998;

/// Region names in code order ("ASIA" is 2).
pub const REGIONS: [&str; 5] = ["AFRICA", "AMERICA", "ASIA", "EUROPE", "MIDDLE EAST"];

/// Nations grouped by region; nation code = region * 5 + position.
pub const NATIONS: [[&str; 5]; 5] = [
    ["ALGERIA", "ETHIOPIA", "KENYA", "MOROCCO", "MOZAMBIQUE"],
    ["ARGENTINA", "BRAZIL", "CANADA", "PERU", "UNITED STATES"],
    ["CHINA", "INDIA", "INDONESIA", "JAPAN", "VIETNAM"],
    ["FRANCE", "GERMANY", "ROMANIA", "RUSSIA", "UNITED KINGDOM"],
    ["EGYPT", "IRAN", "IRAQ", "JORDAN", "SAUDI ARABIA"],
];

pub const NUM_NATIONS: i32 = 25;
pub const CITIES_PER_NATION: i32 = 10;
pub const NUM_CITIES: i32 = NUM_NATIONS * CITIES_PER_NATION;
pub const NUM_MFGRS: i32 = 5;
pub const CATEGORIES_PER_MFGR: i32 = 5;
pub const NUM_CATEGORIES: i32 = NUM_MFGRS * CATEGORIES_PER_MFGR;
pub const BRANDS_PER_CATEGORY: i32 = 40;
pub const NUM_BRANDS: i32 = NUM_CATEGORIES * BRANDS_PER_CATEGORY;

/// Bumped whenever generated values change for a fixed (seed, SF).
const GENERATOR_VERSION: u64 = 1;

pub fn nation_name(code: i32) -> &'static str {
    NATIONS[(code / 5) as usize][(code % 5) as usize]
}

/// SSB city label: nation name cut or padded to 9 characters plus a digit.
pub fn city_name(code: i32) -> String {
    format!(
        "{:<9.9}{}",
        nation_name(code / CITIES_PER_NATION),
        code % CITIES_PER_NATION
    )
}

pub fn category_name(code: i32) -> String {
    format!(
        "MFGR#{}{}",
        code / CATEGORIES_PER_MFGR + 1,
        code % CATEGORIES_PER_MFGR + 1
    )
}

pub fn brand_name(code: i32) -> String {
    format!(
        "{}{}",
        category_name(code / BRANDS_PER_CATEGORY),
        code % BRANDS_PER_CATEGORY + 1
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cardinalities {
    pub lineorder: usize,
    pub supplier: usize,
    pub customer: usize,
    pub part: usize,
    pub date: usize,
}

impl Cardinalities {
    /// SSB scaling: lineorder 6M x SF, supplier 2k x SF, customer 30k x SF,
    /// part 200k x floor(1 + log2 SF), date fixed at 2556 days.
    pub fn for_scale_factor(sf: u32) -> Result<Self, StorageError> {
        if sf < 1 {
            return Err(StorageError::InvalidScaleFactor(sf));
        }
        let sf_us = sf as usize;
        Ok(Self {
            lineorder: 6_000_000 * sf_us,
            supplier: 2_000 * sf_us,
            customer: 30_000 * sf_us,
            part: 200_000 * (1 + sf.ilog2() as usize),
            date: DATE_ROWS,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SsbDatabase {
    pub scale_factor: u32,
    pub seed: u64,
    pub lineorder: Table,
    pub date: Table,
    pub supplier: Table,
    pub customer: Table,
    pub part: Table,
    /// Keyed by column name.
    pub dictionaries: BTreeMap<String, Dictionary>,
}

impl SsbDatabase {
    pub fn tables(&self) -> [&Table; 5] {
        [
            &self.lineorder,
            &self.date,
            &self.supplier,
            &self.customer,
            &self.part,
        ]
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables().into_iter().find(|t| t.name == name)
    }

    pub fn dictionary(&self, column: &str) -> Option<&Dictionary> {
        self.dictionaries.get(column)
    }
}

pub fn generate_ssb(scale_factor: u32, seed: u64) -> Result<SsbDatabase, StorageError> {
    let cards = Cardinalities::for_scale_factor(scale_factor)?;
    Ok(generate_ssb_with(
        cards,
        scale_factor,
        seed,
        default_workers(),
    ))
}

/// Generates with explicit cardinalities, e.g. a reduced lineorder for
/// tests. `scale_factor` only keys the random streams.
pub fn generate_ssb_with(
    cards: Cardinalities,
    scale_factor: u32,
    seed: u64,
    workers: usize,
) -> SsbDatabase {
    let g = Gen {
        seed,
        sf: scale_factor,
        workers,
    };
    let mut dictionaries = BTreeMap::new();

    let date = date_table(cards.date, &mut dictionaries);
    let datekeys = date
        .i32s("d_datekey")
        .expect("date table has d_datekey")
        .to_vec();

    let supplier = geo_table(
        &g,
        "supplier",
        "s",
        "s_suppkey",
        cards.supplier,
        &mut dictionaries,
    );
    let customer = geo_table(
        &g,
        "customer",
        "c",
        "c_custkey",
        cards.customer,
        &mut dictionaries,
    );
    let part = part_table(&g, cards.part, &mut dictionaries);

    let n = cards.lineorder;
    let date_idx = g.uniform(
        "lineorder",
        "lo_orderdate",
        n,
        0,
        datekeys.len().max(1) as i32 - 1,
    );
    let lo_orderdate: Vec<i32> = if datekeys.is_empty() {
        Vec::new()
    } else {
        date_idx.iter().map(|&i| datekeys[i as usize]).collect()
    };
    let lo_custkey = g.uniform("lineorder", "lo_custkey", n, 1, cards.customer as i32);
    let lo_partkey = g.uniform("lineorder", "lo_partkey", n, 1, cards.part as i32);
    let lo_suppkey = g.uniform("lineorder", "lo_suppkey", n, 1, cards.supplier as i32);
    let lo_quantity = g.uniform("lineorder", "lo_quantity", n, 1, 50);
    let lo_discount = g.uniform("lineorder", "lo_discount", n, 0, 10);
    let lo_extendedprice = g.uniform("lineorder", "lo_extendedprice", n, 1_000, 10_000_000);
    let lo_supplycost = g.uniform("lineorder", "lo_supplycost", n, 100, 100_000);
    let lo_revenue: Vec<i32> = lo_extendedprice
        .iter()
        .zip(&lo_discount)
        .map(|(&p, &d)| ((i64::from(p) * i64::from(100 - d)) / 100) as i32)
        .collect();

    let lineorder = Table::new(
        "lineorder",
        vec![
            Column::int32("lo_orderdate", lo_orderdate),
            Column::int32("lo_custkey", lo_custkey),
            Column::int32("lo_partkey", lo_partkey),
            Column::int32("lo_suppkey", lo_suppkey),
            Column::int32("lo_quantity", lo_quantity),
            Column::int32("lo_discount", lo_discount),
            Column::int32("lo_extendedprice", lo_extendedprice),
            Column::int32("lo_revenue", lo_revenue),
            Column::int32("lo_supplycost", lo_supplycost),
        ],
    );

    SsbDatabase {
        scale_factor,
        seed,
        lineorder,
        date,
        supplier,
        customer,
        part,
        dictionaries,
    }
}

struct Gen {
    seed: u64,
    sf: u32,
    workers: usize,
}

impl Gen {
    fn stream(&self, table: &str, column: &str) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&u64::from(self.sf).to_le_bytes());
        key[16..24].copy_from_slice(&fnv1a(format!("{table}.{column}").as_bytes()).to_le_bytes());
        key[24..32].copy_from_slice(&GENERATOR_VERSION.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    /// `rows` values uniform in `lo..=hi` by multiply-shift reduction of one
    /// 32-bit word per row.
    fn uniform(&self, table: &str, column: &str, rows: usize, lo: i32, hi: i32) -> Vec<i32> {
        assert!(lo <= hi, "empty range for {table}.{column}");
        let span = (i64::from(hi) - i64::from(lo) + 1) as u64;
        let base = self.stream(table, column);
        let workers = self.workers.max(1).min(rows / 65_536 + 1);
        let parts = split_even(rows, workers);
        let pieces = run_workers(workers, |w| {
            let r = parts[w].clone();
            let mut rng = base.clone();
            rng.set_word_pos(r.start as u128);
            r.map(|_| lo + ((u64::from(rng.next_u32()) * span) >> 32) as i32)
                .collect::<Vec<i32>>()
        });
        pieces.concat()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn register(dicts: &mut BTreeMap<String, Dictionary>, column: &str, domain: Vec<String>) {
    let (_, dict) = dict_encode(column, &domain);
    dicts.insert(column.to_owned(), dict);
}

/// Consecutive days starting 1992-01-01. `d_weeknuminyear` is
/// `day_of_year / 7 + 1` with a 1-based day of year.
fn date_table(rows: usize, dicts: &mut BTreeMap<String, Dictionary>) -> Table {
    let first = NaiveDate::from_ymd_opt(FIRST_YEAR, 1, 1).expect("valid date");
    let mut datekey = Vec::with_capacity(rows);
    let mut year = Vec::with_capacity(rows);
    let mut yearmonthnum = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    let mut week = Vec::with_capacity(rows);
    for i in 0..rows {
        let d = first + Duration::days(i as i64);
        let (y, m) = (d.year(), d.month() as i32);
        datekey.push(y * 10_000 + m * 100 + d.day() as i32);
        year.push(y);
        yearmonthnum.push(y * 100 + m);
        labels.push(format!("{}{}", d.format("%b"), y));
        week.push(d.ordinal() as i32 / 7 + 1);
    }
    let (yearmonth, dict) = dict_encode("d_yearmonth", &labels);
    dicts.insert("d_yearmonth".into(), dict);
    Table::new(
        "date",
        vec![
            Column::int32("d_datekey", datekey),
            Column::int32("d_year", year),
            Column::int32("d_yearmonthnum", yearmonthnum),
            yearmonth,
            Column::int32("d_weeknuminyear", week),
        ],
    )
}

/// Supplier or customer: key, city, nation, region.
fn geo_table(
    g: &Gen,
    table: &str,
    p: &str,
    key: &str,
    rows: usize,
    dicts: &mut BTreeMap<String, Dictionary>,
) -> Table {
    let city = g.uniform(table, &format!("{p}_city"), rows, 0, NUM_CITIES - 1);
    let nation: Vec<i32> = city.iter().map(|c| c / CITIES_PER_NATION).collect();
    let region: Vec<i32> = nation.iter().map(|n| n / 5).collect();
    register(
        dicts,
        &format!("{p}_city"),
        (0..NUM_CITIES).map(city_name).collect(),
    );
    register(
        dicts,
        &format!("{p}_nation"),
        (0..NUM_NATIONS)
            .map(|n| nation_name(n).to_owned())
            .collect(),
    );
    register(
        dicts,
        &format!("{p}_region"),
        REGIONS.iter().map(|r| r.to_string()).collect(),
    );
    Table::new(
        table,
        vec![
            Column::int32(key, (1..=rows as i32).collect()),
            Column::int32(format!("{p}_city"), city),
            Column::int32(format!("{p}_nation"), nation),
            Column::int32(format!("{p}_region"), region),
        ],
    )
}

fn part_table(g: &Gen, rows: usize, dicts: &mut BTreeMap<String, Dictionary>) -> Table {
    let brand = g.uniform("part", "p_brand1", rows, 0, NUM_BRANDS - 1);
    let category: Vec<i32> = brand.iter().map(|b| b / BRANDS_PER_CATEGORY).collect();
    let mfgr: Vec<i32> = category.iter().map(|c| c / CATEGORIES_PER_MFGR).collect();
    register(dicts, "p_brand1", (0..NUM_BRANDS).map(brand_name).collect());
    register(
        dicts,
        "p_category",
        (0..NUM_CATEGORIES).map(category_name).collect(),
    );
    register(
        dicts,
        "p_mfgr",
        (1..=NUM_MFGRS).map(|m| format!("MFGR#{m}")).collect(),
    );
    Table::new(
        "part",
        vec![
            Column::int32("p_partkey", (1..=rows as i32).collect()),
            Column::int32("p_mfgr", mfgr),
            Column::int32("p_category", category),
            Column::int32("p_brand1", brand),
        ],
    )
}

/// Foreign key columns of lineorder and the dimension keys they reference.
pub const FOREIGN_KEYS: [(&str, &str, &str); 4] = [
    ("lo_orderdate", "date", "d_datekey"),
    ("lo_custkey", "customer", "c_custkey"),
    ("lo_partkey", "part", "p_partkey"),
    ("lo_suppkey", "supplier", "s_suppkey"),
];

pub fn check_referential_integrity(db: &SsbDatabase) -> Result<(), StorageError> {
    for (fk, table, key) in FOREIGN_KEYS {
        let dim = db
            .table(table)
            .ok_or_else(|| StorageError::MissingTable(table.into()))?;
        let keys: HashSet<i32> = dim.i32s(key)?.iter().copied().collect();
        if let Some(&bad) = db.lineorder.i32s(fk)?.iter().find(|v| !keys.contains(v)) {
            return Err(StorageError::ReferentialIntegrity {
                column: fk.into(),
                value: bad,
            });
        }
    }
    Ok(())
}

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u16,
    pub scale_factor: u32,
    pub seed: u64,
    pub tables: Vec<TableEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub name: String,
    pub rows: u64,
    pub columns: Vec<ColumnEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnEntry {
    pub name: String,
    /// Relative to the manifest's directory.
    pub file: String,
    pub kind: ElemKind,
    pub len: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<Vec<String>>,
}

/// Writes one file per column under `dir/<table>/` plus `dir/manifest.json`.
pub fn save_database(dir: &Path, db: &SsbDatabase) -> Result<Manifest, StorageError> {
    let mut tables = Vec::new();
    for t in db.tables() {
        let tdir = dir.join(&t.name);
        std::fs::create_dir_all(&tdir).map_err(|e| StorageError::io(&tdir, e))?;
        let mut columns = Vec::new();
        for c in &t.columns {
            let rel = format!("{}/{}.col", t.name, c.name);
            save_column(&dir.join(&rel), c)?;
            columns.push(ColumnEntry {
                name: c.name.clone(),
                file: rel,
                kind: c.kind(),
                len: c.len() as u64,
                dictionary: db.dictionaries.get(&c.name).map(|d| d.values.clone()),
            });
        }
        tables.push(TableEntry {
            name: t.name.clone(),
            rows: t.rows() as u64,
            columns,
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        scale_factor: db.scale_factor,
        seed: db.seed,
        tables,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| StorageError::io(&path, e))?;
    Ok(manifest)
}

pub fn load_database(dir: &Path) -> Result<SsbDatabase, StorageError> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| StorageError::io(&path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| StorageError::Manifest(e.to_string()))?;
    let mut dictionaries = BTreeMap::new();
    let mut by_name = BTreeMap::new();
    for entry in &manifest.tables {
        let mut columns = Vec::new();
        for ce in &entry.columns {
            let mut c = load_column_as(&dir.join(&ce.file), ce.kind)?;
            if c.len() as u64 != ce.len || ce.len != entry.rows {
                return Err(StorageError::Manifest(format!(
                    "{}.{}: manifest says {} rows, file holds {}",
                    entry.name,
                    ce.name,
                    ce.len,
                    c.len()
                )));
            }
            c.name = ce.name.clone();
            if let Some(values) = &ce.dictionary {
                dictionaries.insert(
                    ce.name.clone(),
                    Dictionary {
                        column: ce.name.clone(),
                        values: values.clone(),
                    },
                );
            }
            columns.push(c);
        }
        by_name.insert(entry.name.clone(), Table::new(&entry.name, columns));
    }
    let mut take = |name: &str| {
        by_name
            .remove(name)
            .ok_or_else(|| StorageError::MissingTable(name.into()))
    };
    Ok(SsbDatabase {
        scale_factor: manifest.scale_factor,
        seed: manifest.seed,
        lineorder: take("lineorder")?,
        date: take("date")?,
        supplier: take("supplier")?,
        customer: take("customer")?,
        part: take("part")?,
        dictionaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Cardinalities {
        Cardinalities {
            lineorder: 5000,
            supplier: 200,
            customer: 300,
            part: 1000,
            date: DATE_ROWS,
        }
    }

    #[test]
    fn cardinality_rules() {
        let c1 = Cardinalities::for_scale_factor(1).unwrap();
        assert_eq!((c1.lineorder, c1.part, c1.date), (6_000_000, 200_000, 2556));
        let c20 = Cardinalities::for_scale_factor(20).unwrap();
        assert_eq!(
            (c20.lineorder, c20.supplier, c20.part),
            (120_000_000, 40_000, 1_000_000)
        );
        assert!(matches!(
            Cardinalities::for_scale_factor(0),
            Err(StorageError::InvalidScaleFactor(0))
        ));
    }

    #[test]
    fn names_and_codes() {
        assert_eq!(city_name(191), "UNITED KI1");
        assert_eq!(nation_name(9), "UNITED STATES");
        assert_eq!(category_name(1), "MFGR#12");
        assert_eq!(brand_name(260), "MFGR#2221");
        assert_eq!(brand_name(278), "MFGR#2239");
    }

    #[test]
    fn date_dimension_shape() {
        let db = generate_ssb_with(small(), 1, 7, 2);
        let keys = db.date.i32s("d_datekey").unwrap();
        assert_eq!(keys[0], 19920101);
        assert_eq!(*keys.last().unwrap(), 19981230);
        let dict = db.dictionary("d_yearmonth").unwrap();
        assert_eq!(dict.code("Dec1997"), Some(71));
        let weeks = db.date.i32s("d_weeknuminyear").unwrap();
        let i = keys.iter().position(|&k| k == 19940204).unwrap();
        assert_eq!(weeks[i], 6);
        assert_eq!(weeks[i + 6], 6);
        assert_eq!(weeks[i + 7], 7);
    }

    #[test]
    fn worker_count_does_not_change_data() {
        assert_eq!(
            generate_ssb_with(small(), 1, 3, 1),
            generate_ssb_with(small(), 1, 3, 4)
        );
        check_referential_integrity(&generate_ssb_with(small(), 1, 3, 4)).unwrap();
    }
}
