//! Hand-written physical plans for the 13 SSB queries.
//!
//! Every plan is one pass over `lineorder`: optional fact-column range
//! filters, then the dimension joins in the listed order, then a dense
//! group-by. Dimension predicates are applied while building the join hash
//! tables, so a fact row survives a join only if its dimension row passed.
//!
//! Flight 1 has no joins. Its date predicates are rewritten as ranges over
//! `lo_orderdate`:
//!
//! | query | original predicate                       | rewritten range           |
//! |-------|------------------------------------------|---------------------------|
//! | q11   | `lo_orderdate` in [19930101, 19940101]    | same                      |
//! | q12   | `d_yearmonthnum = 199401`                 | [19940101, 19940131]      |
//! | q13   | `d_weeknuminyear = 6 AND d_year = 1994`   | [19940204, 19940210]      |
//!
//! Brand ranges (q22) compare brand codes, not strings, so
//! `MFGR#2221..MFGR#2228` is eight brands.

use super::{QueryError, QueryId};

/// Inclusive range predicate on a fact column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactFilter {
    pub column: &'static str,
    pub lo: i32,
    pub hi: i32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Int(i32),
    /// Resolved to a code through the column's dictionary.
    Label(&'static str),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Selector {
    Eq(Value),
    In(Vec<Value>),
    /// Inclusive, on codes.
    Between(Value, Value),
    /// Matches no row.
    Nothing,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimFilter {
    pub column: &'static str,
    pub selector: Selector,
}

/// Filter a dimension table and build a hash table from its key to an
/// optional payload column. Without a payload the join only filters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuildStep {
    pub table: &'static str,
    pub key: &'static str,
    pub fact_key: &'static str,
    pub filters: Vec<DimFilter>,
    pub payload: Option<&'static str>,
}

/// One group-by column, taken from the payload of build step `build`, with
/// its dense domain `base..base + extent`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupDim {
    pub build: usize,
    pub column: &'static str,
    pub base: i32,
    pub extent: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AggExpr {
    /// `SUM(lo_extendedprice * lo_discount)`
    PriceTimesDiscount,
    /// `SUM(lo_revenue)`
    Revenue,
    /// `SUM(lo_revenue - lo_supplycost)`
    Profit,
}

impl AggExpr {
    pub fn columns(self) -> (&'static str, Option<&'static str>) {
        match self {
            AggExpr::PriceTimesDiscount => ("lo_extendedprice", Some("lo_discount")),
            AggExpr::Revenue => ("lo_revenue", None),
            AggExpr::Profit => ("lo_revenue", Some("lo_supplycost")),
        }
    }

    #[inline(always)]
    pub fn eval(self, a: i32, b: i32) -> i64 {
        match self {
            AggExpr::PriceTimesDiscount => i64::from(a) * i64::from(b),
            AggExpr::Revenue => i64::from(a),
            AggExpr::Profit => i64::from(a) - i64::from(b),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryPlan {
    pub id: QueryId,
    pub fact_filters: Vec<FactFilter>,
    /// Also the probe order.
    pub builds: Vec<BuildStep>,
    pub group_by: Vec<GroupDim>,
    pub aggregate: AggExpr,
}

impl QueryPlan {
    /// Fact columns read by the probe pipeline, in first-use order.
    pub fn fact_columns(&self) -> Vec<&'static str> {
        let mut cols: Vec<&'static str> = Vec::new();
        let (a, b) = self.aggregate.columns();
        let used = self
            .fact_filters
            .iter()
            .map(|f| f.column)
            .chain(self.builds.iter().map(|b| b.fact_key));
        for c in used.chain(std::iter::once(a)).chain(b) {
            if !cols.contains(&c) {
                cols.push(c);
            }
        }
        cols
    }

    /// Number of cells of the dense aggregate table.
    pub fn group_capacity(&self) -> usize {
        self.group_by.iter().map(|g| g.extent).product()
    }

    /// Replaces every dimension predicate with one that matches nothing.
    pub fn with_empty_dimensions(mut self) -> Self {
        for b in &mut self.builds {
            b.filters = vec![DimFilter {
                column: b.key,
                selector: Selector::Nothing,
            }];
        }
        self
    }
}

const YEARS: (i32, usize) = (1992, 7);
const NATIONS: (i32, usize) = (0, 25);
const CITIES: (i32, usize) = (0, 250);
const CATEGORIES: (i32, usize) = (0, 25);
const BRANDS: (i32, usize) = (0, 1000);

fn range(column: &'static str, lo: i32, hi: i32) -> FactFilter {
    FactFilter { column, lo, hi }
}

fn eq(column: &'static str, label: &'static str) -> DimFilter {
    DimFilter {
        column,
        selector: Selector::Eq(Value::Label(label)),
    }
}

fn labels(column: &'static str, values: &[&'static str]) -> DimFilter {
    DimFilter {
        column,
        selector: Selector::In(values.iter().map(|&v| Value::Label(v)).collect()),
    }
}

fn years(lo: i32, hi: i32) -> DimFilter {
    DimFilter {
        column: "d_year",
        selector: Selector::Between(Value::Int(lo), Value::Int(hi)),
    }
}

fn build(table: &'static str, filters: Vec<DimFilter>, payload: Option<&'static str>) -> BuildStep {
    let (key, fact_key) = match table {
        "supplier" => ("s_suppkey", "lo_suppkey"),
        "customer" => ("c_custkey", "lo_custkey"),
        "part" => ("p_partkey", "lo_partkey"),
        _ => ("d_datekey", "lo_orderdate"),
    };
    BuildStep {
        table,
        key,
        fact_key,
        filters,
        payload,
    }
}

fn group(build: usize, column: &'static str, (base, extent): (i32, usize)) -> GroupDim {
    GroupDim {
        build,
        column,
        base,
        extent,
    }
}

fn flight1(
    id: QueryId,
    dates: (i32, i32),
    discount: (i32, i32),
    quantity: FactFilter,
) -> QueryPlan {
    QueryPlan {
        id,
        fact_filters: vec![
            range("lo_orderdate", dates.0, dates.1),
            range("lo_discount", discount.0, discount.1),
            quantity,
        ],
        builds: Vec::new(),
        group_by: Vec::new(),
        aggregate: AggExpr::PriceTimesDiscount,
    }
}

/// Flight 2: supplier, part, date; grouped by year and brand.
fn flight2(id: QueryId, part: DimFilter, region: &'static str) -> QueryPlan {
    QueryPlan {
        id,
        fact_filters: Vec::new(),
        builds: vec![
            build("supplier", vec![eq("s_region", region)], None),
            build("part", vec![part], Some("p_brand1")),
            build("date", Vec::new(), Some("d_year")),
        ],
        group_by: vec![group(2, "d_year", YEARS), group(1, "p_brand1", BRANDS)],
        aggregate: AggExpr::Revenue,
    }
}

/// Flight 3: customer, supplier, date; grouped by customer geography,
/// supplier geography and year.
fn flight3(
    id: QueryId,
    cust: DimFilter,
    supp: DimFilter,
    date: DimFilter,
    geo: &'static str,
) -> QueryPlan {
    let (c_col, s_col, dom) = if geo == "nation" {
        ("c_nation", "s_nation", NATIONS)
    } else {
        ("c_city", "s_city", CITIES)
    };
    QueryPlan {
        id,
        fact_filters: Vec::new(),
        builds: vec![
            build("customer", vec![cust], Some(c_col)),
            build("supplier", vec![supp], Some(s_col)),
            build("date", vec![date], Some("d_year")),
        ],
        group_by: vec![
            group(0, c_col, dom),
            group(1, s_col, dom),
            group(2, "d_year", YEARS),
        ],
        aggregate: AggExpr::Revenue,
    }
}

pub fn plan_for(id: QueryId) -> QueryPlan {
    use QueryId::*;
    let uk = ["UNITED KI1", "UNITED KI5"];
    let mfgr12 = ["MFGR#1", "MFGR#2"];
    match id {
        Q11 => flight1(
            id,
            (19930101, 19940101),
            (1, 3),
            range("lo_quantity", i32::MIN, 24),
        ),
        Q12 => flight1(
            id,
            (19940101, 19940131),
            (4, 6),
            range("lo_quantity", 26, 35),
        ),
        Q13 => flight1(
            id,
            (19940204, 19940210),
            (5, 7),
            range("lo_quantity", 26, 35),
        ),
        Q21 => flight2(id, eq("p_category", "MFGR#12"), "AMERICA"),
        Q22 => flight2(
            id,
            DimFilter {
                column: "p_brand1",
                selector: Selector::Between(Value::Label("MFGR#2221"), Value::Label("MFGR#2228")),
            },
            "ASIA",
        ),
        Q23 => flight2(id, eq("p_brand1", "MFGR#2239"), "EUROPE"),
        Q31 => flight3(
            id,
            eq("c_region", "ASIA"),
            eq("s_region", "ASIA"),
            years(1992, 1997),
            "nation",
        ),
        Q32 => flight3(
            id,
            eq("c_nation", "UNITED STATES"),
            eq("s_nation", "UNITED STATES"),
            years(1992, 1997),
            "city",
        ),
        Q33 => flight3(
            id,
            labels("c_city", &uk),
            labels("s_city", &uk),
            years(1992, 1997),
            "city",
        ),
        Q34 => flight3(
            id,
            labels("c_city", &uk),
            labels("s_city", &uk),
            eq("d_yearmonth", "Dec1997"),
            "city",
        ),
        Q41 => QueryPlan {
            id,
            fact_filters: Vec::new(),
            builds: vec![
                build("supplier", vec![eq("s_region", "AMERICA")], None),
                build(
                    "customer",
                    vec![eq("c_region", "AMERICA")],
                    Some("c_nation"),
                ),
                build("part", vec![labels("p_mfgr", &mfgr12)], None),
                build("date", Vec::new(), Some("d_year")),
            ],
            group_by: vec![group(3, "d_year", YEARS), group(1, "c_nation", NATIONS)],
            aggregate: AggExpr::Profit,
        },
        Q42 => QueryPlan {
            id,
            fact_filters: Vec::new(),
            builds: vec![
                build(
                    "supplier",
                    vec![eq("s_region", "AMERICA")],
                    Some("s_nation"),
                ),
                build("customer", vec![eq("c_region", "AMERICA")], None),
                build("date", vec![years(1997, 1998)], Some("d_year")),
                build("part", vec![labels("p_mfgr", &mfgr12)], Some("p_category")),
            ],
            group_by: vec![
                group(2, "d_year", YEARS),
                group(0, "s_nation", NATIONS),
                group(3, "p_category", CATEGORIES),
            ],
            aggregate: AggExpr::Profit,
        },
        Q43 => QueryPlan {
            id,
            fact_filters: Vec::new(),
            builds: vec![
                build(
                    "supplier",
                    vec![eq("s_nation", "UNITED STATES")],
                    Some("s_city"),
                ),
                build("part", vec![eq("p_category", "MFGR#14")], Some("p_brand1")),
                build("customer", vec![eq("c_region", "AMERICA")], None),
                build("date", vec![years(1997, 1998)], Some("d_year")),
            ],
            group_by: vec![
                group(3, "d_year", YEARS),
                group(0, "s_city", CITIES),
                group(1, "p_brand1", BRANDS),
            ],
            aggregate: AggExpr::Profit,
        },
    }
}

/// Parses the id first; convenience for string ids.
pub fn plan_for_str(id: &str) -> Result<QueryPlan, QueryError> {
    Ok(plan_for(id.parse()?))
}
