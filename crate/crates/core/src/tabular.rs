//! Columnar tables, CSV ingestion and group-by-average views.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patterns::Pattern;

/// Sentinel code for a missing categorical cell.
pub const MISSING: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Categorical,
    Numeric,
}

/// One column. Categorical cells are dictionary codes into a sorted domain,
/// so code order is lexicographic value order.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Categorical { codes: Vec<u32>, domain: Vec<String> },
    Numeric { values: Vec<Option<f64>>, domain: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value<'a> {
    Text(&'a str),
    Number(f64),
    Missing,
}

impl Column {
    pub fn categorical<S: AsRef<str>>(cells: &[Option<S>]) -> Column {
        let mut domain: Vec<String> = cells
            .iter()
            .flatten()
            .map(|s| s.as_ref().to_string())
            .collect();
        domain.sort();
        domain.dedup();
        let lookup: HashMap<&str, u32> = domain
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i as u32))
            .collect();
        let codes = cells
            .iter()
            .map(|c| match c {
                Some(v) => lookup[v.as_ref()],
                None => MISSING,
            })
            .collect();
        Column::Categorical { codes, domain }
    }

    pub fn numeric(values: Vec<Option<f64>>) -> Column {
        let mut domain: Vec<f64> = values.iter().flatten().copied().collect();
        domain.sort_by(f64::total_cmp);
        domain.dedup();
        Column::Numeric { values, domain }
    }

    pub fn kind(&self) -> Kind {
        match self {
            Column::Categorical { .. } => Kind::Categorical,
            Column::Numeric { .. } => Kind::Numeric,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Column::Categorical { codes, .. } => codes.len(),
            Column::Numeric { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, row: usize) -> Value<'_> {
        match self {
            Column::Categorical { codes, domain } => match codes[row] {
                MISSING => Value::Missing,
                c => Value::Text(&domain[c as usize]),
            },
            Column::Numeric { values, .. } => match values[row] {
                Some(v) => Value::Number(v),
                None => Value::Missing,
            },
        }
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Categorical { codes, .. } => codes[row] == MISSING,
            Column::Numeric { values, .. } => values[row].is_none(),
        }
    }

    /// Hashable identity of a cell; missing maps to a value no real cell uses.
    pub(crate) fn key_at(&self, row: usize) -> u64 {
        match self {
            Column::Categorical { codes, .. } => codes[row] as u64,
            Column::Numeric { values, .. } => match values[row] {
                // normalize -0.0 so equal numbers share a key
                Some(v) => (v + 0.0).to_bits(),
                None => u64::MAX,
            },
        }
    }

    pub fn domain_len(&self) -> usize {
        match self {
            Column::Categorical { domain, .. } => domain.len(),
            Column::Numeric { domain, .. } => domain.len(),
        }
    }
}

/// Immutable table. Every column holds exactly `row_count` cells.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Vec<String>,
    columns: Vec<Column>,
    index: HashMap<String, usize>,
    row_count: usize,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema && self.columns == other.columns
    }
}

impl Dataset {
    pub fn new(columns: Vec<(String, Column)>) -> Result<Dataset> {
        let row_count = columns.first().map_or(0, |(_, c)| c.len());
        let mut index = HashMap::new();
        let mut schema = Vec::with_capacity(columns.len());
        let mut cols = Vec::with_capacity(columns.len());
        for (i, (name, col)) in columns.into_iter().enumerate() {
            if col.len() != row_count {
                return Err(Error::Schema(format!(
                    "column {name} has {} rows, expected {row_count}",
                    col.len()
                )));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate attribute {name}")));
            }
            schema.push(name);
            cols.push(col);
        }
        Ok(Dataset {
            schema,
            columns: cols,
            index,
            row_count,
        })
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn index_of(&self, attr: &str) -> Result<usize> {
        self.index
            .get(attr)
            .copied()
            .ok_or_else(|| Error::Schema(format!("unknown attribute {attr}")))
    }

    pub fn has(&self, attr: &str) -> bool {
        self.index.contains_key(attr)
    }

    pub fn column(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn column_by_name(&self, attr: &str) -> Result<&Column> {
        Ok(&self.columns[self.index_of(attr)?])
    }

    pub fn kind(&self, attr: &str) -> Result<Kind> {
        Ok(self.column_by_name(attr)?.kind())
    }

    pub fn value(&self, row: usize, col: usize) -> Value<'_> {
        self.columns[col].value(row)
    }

    /// Distinct non-missing values of a categorical attribute, sorted.
    pub fn categorical_domain(&self, attr: &str) -> Result<&[String]> {
        match self.column_by_name(attr)? {
            Column::Categorical { domain, .. } => Ok(domain),
            Column::Numeric { .. } => Err(Error::Schema(format!("{attr} is not categorical"))),
        }
    }

    /// Distinct non-missing values of a numeric attribute, sorted.
    pub fn numeric_domain(&self, attr: &str) -> Result<&[f64]> {
        match self.column_by_name(attr)? {
            Column::Numeric { domain, .. } => Ok(domain),
            Column::Categorical { .. } => Err(Error::Schema(format!("{attr} is not numeric"))),
        }
    }

    /// Non-missing numeric cell, `None` if missing. Panics on a categorical column.
    pub(crate) fn number(&self, col: usize, row: usize) -> Option<f64> {
        match &self.columns[col] {
            Column::Numeric { values, .. } => values[row],
            Column::Categorical { .. } => panic!("column {} is categorical", self.schema[col]),
        }
    }
}

fn is_decimal(cell: &str) -> bool {
    // f64::from_str also accepts "inf" and "NaN"; only finite decimals count.
    cell.parse::<f64>().map_or(false, f64::is_finite)
}

/// Reads a CSV file with a mandatory header. Empty cells are missing; a
/// column is numeric iff every non-missing cell is a decimal number, unless
/// `kind_overrides` says otherwise.
pub fn load_csv(path: impl AsRef<Path>, kind_overrides: &HashMap<String, Kind>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, kind_overrides)
}

pub fn read_csv<R: Read>(reader: R, kind_overrides: &HashMap<String, Kind>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Schema("missing header".into()));
    }
    let mut seen = HashMap::new();
    for name in &header {
        if seen.insert(name.as_str(), ()).is_some() {
            return Err(Error::Schema(format!("duplicate header name {name}")));
        }
    }
    for attr in kind_overrides.keys() {
        if !header.contains(attr) {
            return Err(Error::Schema(format!("kind override for unknown attribute {attr}")));
        }
    }

    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); header.len()];
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (col, cell) in cells.iter_mut().zip(record.iter()) {
            col.push(if cell.is_empty() { None } else { Some(cell.to_string()) });
        }
    }

    let mut columns = Vec::with_capacity(header.len());
    for (name, raw) in header.into_iter().zip(cells) {
        let inferred = if raw.iter().flatten().all(|c| is_decimal(c)) {
            Kind::Numeric
        } else {
            Kind::Categorical
        };
        let kind = kind_overrides.get(&name).copied().unwrap_or(inferred);
        let column = match kind {
            Kind::Categorical => Column::categorical(&raw),
            Kind::Numeric => {
                let mut values = Vec::with_capacity(raw.len());
                for (r, cell) in raw.iter().enumerate() {
                    values.push(match cell {
                        None => None,
                        Some(c) if is_decimal(c) => Some(c.parse::<f64>().unwrap()),
                        Some(c) => {
                            return Err(Error::Parse {
                                row: r + 1,
                                message: format!("{name}: {c:?} is not a number"),
                            })
                        }
                    });
                }
                Column::numeric(values)
            }
        };
        columns.push((name, column));
    }
    Dataset::new(columns)
}

/// Writes the table back as CSV; numbers use the shortest round-trip form.
pub fn write_csv<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let io_err = |e: csv::Error| Error::Io {
        path: "<csv writer>".into(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(d.schema()).map_err(io_err)?;
    let mut record = Vec::with_capacity(d.schema().len());
    for row in 0..d.row_count() {
        record.clear();
        for col in 0..d.schema().len() {
            record.push(match d.value(row, col) {
                Value::Text(s) => s.to_string(),
                Value::Number(v) => format!("{v}"),
                Value::Missing => String::new(),
            });
        }
        w.write_record(&record).map_err(io_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv writer>".into(),
        source,
    })?;
    Ok(())
}

/// `SELECT group_by, AVG(avg_attr) FROM D WHERE where_pred GROUP BY group_by`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySpec {
    pub group_by: Vec<String>,
    pub avg_attr: String,
    pub where_pred: Option<Pattern>,
}

impl QuerySpec {
    pub fn new(group_by: Vec<String>, avg_attr: impl Into<String>) -> QuerySpec {
        QuerySpec {
            group_by,
            avg_attr: avg_attr.into(),
            where_pred: None,
        }
    }

    pub fn with_where(mut self, pred: Pattern) -> QuerySpec {
        self.where_pred = Some(pred);
        self
    }

    pub fn validate(&self, d: &Dataset) -> Result<()> {
        if self.group_by.is_empty() {
            return Err(Error::Schema("group-by list is empty".into()));
        }
        for attr in &self.group_by {
            if d.kind(attr)? != Kind::Categorical {
                return Err(Error::Schema(format!("group-by attribute {attr} is not categorical")));
            }
            if *attr == self.avg_attr {
                return Err(Error::Schema(format!("{attr} is both grouped and averaged")));
            }
        }
        if d.kind(&self.avg_attr)? != Kind::Numeric {
            return Err(Error::Schema(format!("average attribute {} is not numeric", self.avg_attr)));
        }
        if let Some(p) = &self.where_pred {
            p.compile(d)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub key: Vec<String>,
    pub avg: f64,
    pub count: usize,
}

/// Result of a group-by-average query, plus the row bookkeeping the
/// explanation stages need.
#[derive(Debug, Clone)]
pub struct AggregateView {
    pub group_by: Vec<String>,
    pub avg_attr: String,
    /// Sorted by key.
    pub groups: Vec<Group>,
    /// Rows that survived the filter, ascending.
    pub rows: Vec<usize>,
    /// Group index of each entry of `rows`.
    pub row_group: Vec<usize>,
    /// First surviving row of each group.
    pub representatives: Vec<usize>,
}

impl AggregateView {
    pub fn m(&self) -> usize {
        self.groups.len()
    }
}

/// Evaluates the query: drops rows failing the WHERE pattern or missing the
/// averaged attribute or any group-by value, then averages per group.
pub fn evaluate_query(d: &Dataset, q: &QuerySpec) -> Result<AggregateView> {
    q.validate(d)?;
    let filter = q.where_pred.as_ref().map(|p| p.compile(d)).transpose()?;
    let gb_cols: Vec<usize> = q
        .group_by
        .iter()
        .map(|a| d.index_of(a))
        .collect::<Result<_>>()?;
    let avg_col = d.index_of(&q.avg_attr)?;

    let mut by_key: BTreeMap<Vec<u32>, (f64, usize, usize)> = BTreeMap::new();
    let mut rows = Vec::new();
    let mut keys = Vec::new();
    for row in 0..d.row_count() {
        if let Some(f) = &filter {
            if !f.matches(row) {
                continue;
            }
        }
        let Some(y) = d.number(avg_col, row) else { continue };
        let key: Vec<u32> = gb_cols
            .iter()
            .map(|&c| match d.column(c) {
                Column::Categorical { codes, .. } => codes[row],
                Column::Numeric { .. } => unreachable!("validated categorical"),
            })
            .collect();
        if key.contains(&MISSING) {
            continue;
        }
        let entry = by_key.entry(key.clone()).or_insert((0.0, 0, row));
        entry.0 += y;
        entry.1 += 1;
        rows.push(row);
        keys.push(key);
    }
    if rows.is_empty() {
        return Err(Error::EmptyView);
    }

    let mut group_index = HashMap::with_capacity(by_key.len());
    let mut groups = Vec::with_capacity(by_key.len());
    let mut representatives = Vec::with_capacity(by_key.len());
    for (i, (codes, (sum, count, rep))) in by_key.into_iter().enumerate() {
        let key = codes
            .iter()
            .zip(&gb_cols)
            .map(|(&c, &col)| match d.column(col) {
                Column::Categorical { domain, .. } => domain[c as usize].clone(),
                Column::Numeric { .. } => unreachable!(),
            })
            .collect();
        groups.push(Group {
            key,
            avg: sum / count as f64,
            count,
        });
        representatives.push(rep);
        group_index.insert(codes, i);
    }
    let row_group = keys.iter().map(|k| group_index[k]).collect();
    Ok(AggregateView {
        group_by: q.group_by.clone(),
        avg_attr: q.avg_attr.clone(),
        groups,
        rows,
        row_group,
        representatives,
    })
}

/// True iff rows agreeing on `gb` always agree on `w`. Missing counts as a
/// value of its own on both sides.
pub fn check_fd(d: &Dataset, gb: &[String], w: &str) -> Result<bool> {
    let gb_cols: Vec<usize> = gb.iter().map(|a| d.index_of(a)).collect::<Result<_>>()?;
    let w_col = d.index_of(w)?;
    if gb_cols.contains(&w_col) {
        return Ok(true);
    }
    let mut seen: HashMap<Vec<u64>, u64> = HashMap::new();
    for row in 0..d.row_count() {
        let key: Vec<u64> = gb_cols.iter().map(|&c| d.column(c).key_at(row)).collect();
        let val = d.column(w_col).key_at(row);
        if let Some(prev) = seen.insert(key, val) {
            if prev != val {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Split of the non-outcome attributes into grouping and treatment candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributePartition {
    pub group_by: Vec<String>,
    /// Group-by attributes plus every categorical attribute they determine.
    pub grouping: Vec<String>,
    pub treatment: Vec<String>,
}

impl AttributePartition {
    /// Attributes grouping patterns are mined over: the determined attributes,
    /// or the group-by attributes themselves when nothing else qualifies.
    pub fn mining_attrs(&self) -> Vec<String> {
        let extra: Vec<String> = self
            .grouping
            .iter()
            .filter(|a| !self.group_by.contains(a))
            .cloned()
            .collect();
        if extra.is_empty() {
            self.group_by.clone()
        } else {
            extra
        }
    }
}

pub fn partition_attributes(d: &Dataset, q: &QuerySpec) -> Result<AttributePartition> {
    q.validate(d)?;
    let mut grouping = Vec::new();
    let mut treatment = Vec::new();
    for attr in d.schema() {
        if *attr == q.avg_attr {
            continue;
        }
        if q.group_by.contains(attr)
            || (d.kind(attr)? == Kind::Categorical && check_fd(d, &q.group_by, attr)?)
        {
            grouping.push(attr.clone());
        } else {
            treatment.push(attr.clone());
        }
    }
    Ok(AttributePartition {
        group_by: q.group_by.clone(),
        grouping,
        treatment,
    })
}

/// Partition with an explicit list of grouping attributes. Each must be
/// categorical and functionally determined by the group-by attributes; all
/// other non-outcome attributes become treatment candidates.
///
/// Needed when the group-by attributes form a key, which makes every
/// attribute trivially determined.
pub fn partition_declared(d: &Dataset, q: &QuerySpec, declared: &[String]) -> Result<AttributePartition> {
    q.validate(d)?;
    for attr in declared {
        if *attr == q.avg_attr {
            return Err(Error::Schema(format!("{attr} is the averaged attribute")));
        }
        if d.kind(attr)? != Kind::Categorical {
            return Err(Error::Schema(format!("grouping attribute {attr} is not categorical")));
        }
        if !check_fd(d, &q.group_by, attr)? {
            return Err(Error::Schema(format!(
                "grouping attribute {attr} is not determined by {}",
                q.group_by.join(",")
            )));
        }
    }
    let mut grouping = Vec::new();
    let mut treatment = Vec::new();
    for attr in d.schema() {
        if *attr == q.avg_attr {
            continue;
        }
        if q.group_by.contains(attr) || declared.contains(attr) {
            grouping.push(attr.clone());
        } else {
            treatment.push(attr.clone());
        }
    }
    Ok(AttributePartition {
        group_by: q.group_by.clone(),
        grouping,
        treatment,
    })
}
