//! In-memory typed tables with column tagging, predicate filtering and
//! hierarchical grouping.
//!
//! Datasets are immutable once built. Filtering produces [`DatasetView`]s
//! that share the backing table through an [`Arc`].

mod group;
mod predicate;
pub mod timestamp;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::diag::{Code, Diagnostic};

pub use group::{group_rows, Group};
pub use predicate::{CmpOp, Literal, Operand, Predicate, PredicateExpr};

/// Glyph used for null cells in group keys and rendered cards.
pub const NULL_GLYPH: &str = "∅";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DType {
    Number,
    String,
    Timestamp,
    Boolean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnTag {
    SpatialAsset,
    RealWorldObject,
    Dimension,
    Measure,
}

impl ColumnTag {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "spatial_asset" => Self::SpatialAsset,
            "real_world_object" => Self::RealWorldObject,
            "dimension" => Self::Dimension,
            "measure" => Self::Measure,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub dtype: DType,
    #[serde(default)]
    pub tags: BTreeSet<ColumnTag>,
}

impl Column {
    pub fn is_measure(&self) -> bool {
        self.tags.contains(&ColumnTag::Measure)
    }
}

/// A typed cell. Timestamps keep their source text next to the parsed
/// epoch milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Value {
    Null,
    Number(f64),
    String(String),
    Boolean(bool),
    Timestamp { millis: i64, text: String },
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    /// Total order used for sorting group keys: nulls sort last.
    pub fn sort_cmp(&self, other: &Value) -> Ordering {
        use Value::*;
        match (self, other) {
            (Null, Null) => Ordering::Equal,
            (Null, _) => Ordering::Greater,
            (_, Null) => Ordering::Less,
            (Number(a), Number(b)) => a.total_cmp(b),
            (String(a), String(b)) => a.cmp(b),
            (Boolean(a), Boolean(b)) => a.cmp(b),
            (Timestamp { millis: a, .. }, Timestamp { millis: b, .. }) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Number(_) => 0,
            Value::String(_) => 1,
            Value::Boolean(_) => 2,
            Value::Timestamp { .. } => 3,
            Value::Null => 4,
        }
    }

    /// Plain text rendering used in cards and listings.
    pub fn display(&self) -> String {
        match self {
            Value::Null => NULL_GLYPH.to_string(),
            Value::Number(n) => format_number(*n),
            Value::String(s) => s.clone(),
            Value::Boolean(b) => b.to_string(),
            Value::Timestamp { text, .. } => text.clone(),
        }
    }

    /// JSON form used by service responses.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Null => serde_json::Value::Null,
            Value::Number(n) => serde_json::Number::from_f64(*n).map_or(serde_json::Value::Null, Into::into),
            Value::String(s) => s.clone().into(),
            Value::Boolean(b) => (*b).into(),
            Value::Timestamp { text, .. } => text.clone().into(),
        }
    }
}

/// Integral values print without a fraction; others use the shortest
/// round-tripping decimal.
pub fn format_number(n: f64) -> String {
    if n == libm::trunc(n) && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dataset_id: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
}

fn infer_dtype<'a>(cells: impl Iterator<Item = &'a str> + Clone) -> DType {
    let non_null = cells.filter(|c| !c.is_empty());
    if non_null.clone().next().is_none() {
        return DType::String;
    }
    if non_null.clone().all(|c| parse_bool(c).is_some()) {
        DType::Boolean
    } else if non_null.clone().all(|c| parse_number(c).is_some()) {
        DType::Number
    } else if non_null.clone().all(|c| timestamp::parse_iso8601(c).is_some()) {
        DType::Timestamp
    } else {
        DType::String
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    if s.eq_ignore_ascii_case("true") {
        Some(true)
    } else if s.eq_ignore_ascii_case("false") {
        Some(false)
    } else {
        None
    }
}

fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|n| n.is_finite())
}

fn parse_cell(raw: &str, dtype: DType) -> Value {
    if raw.is_empty() {
        return Value::Null;
    }
    match dtype {
        DType::Boolean => parse_bool(raw).map_or(Value::Null, Value::Boolean),
        DType::Number => parse_number(raw).map_or(Value::Null, Value::Number),
        DType::Timestamp => timestamp::parse_iso8601(raw)
            .map_or(Value::Null, |millis| Value::Timestamp { millis, text: raw.to_string() }),
        DType::String => Value::String(raw.to_string()),
    }
}

impl Dataset {
    /// Builds a typed table from a header and raw string records. Empty
    /// cells become nulls. Record `i` is reported as line `i + 2` (the
    /// header is line 1).
    pub fn from_records(
        dataset_id: impl Into<String>,
        header: Vec<String>,
        records: Vec<Vec<String>>,
    ) -> Result<Dataset, Diagnostic> {
        let mut seen = BTreeSet::new();
        for (i, name) in header.iter().enumerate() {
            if !seen.insert(name.as_str()) {
                return Err(Diagnostic::new(Code::E203, format!("duplicate header `{name}`"))
                    .with_path(format!("header[{i}]")));
            }
        }
        for (i, rec) in records.iter().enumerate() {
            if rec.len() != header.len() {
                return Err(Diagnostic::new(
                    Code::E202,
                    format!("row {} has {} cells, expected {}", i + 2, rec.len(), header.len()),
                )
                .with_path(format!("row {}", i + 2)));
            }
        }
        let columns: Vec<Column> = header
            .into_iter()
            .enumerate()
            .map(|(ci, name)| Column {
                name,
                dtype: infer_dtype(records.iter().map(|r| r[ci].as_str())),
                tags: BTreeSet::new(),
            })
            .collect();
        let rows = records
            .iter()
            .map(|r| r.iter().zip(&columns).map(|(raw, col)| parse_cell(raw, col.dtype)).collect())
            .collect();
        Ok(Dataset { dataset_id: dataset_id.into(), columns, rows })
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn row(&self, index: usize) -> Option<RowRef<'_>> {
        self.rows.get(index).map(|cells| RowRef { columns: &self.columns, cells, index })
    }

    /// Applies tag assignments on top of existing tags.
    pub fn tag_columns(&self, assignments: &BTreeMap<String, BTreeSet<ColumnTag>>) -> Result<Dataset, Diagnostic> {
        let mut out = self.clone();
        for (name, tags) in assignments {
            let col = out
                .columns
                .iter_mut()
                .find(|c| &c.name == name)
                .ok_or_else(|| Diagnostic::new(Code::E204, format!("unknown column `{name}`")).with_path(name.clone()))?;
            col.tags.extend(tags.iter().copied());
            if col.tags.contains(&ColumnTag::SpatialAsset) && col.tags.contains(&ColumnTag::Measure) {
                return Err(Diagnostic::new(
                    Code::E205,
                    format!("column `{name}` cannot be both spatial_asset and measure"),
                )
                .with_path(name.clone()));
            }
        }
        Ok(out)
    }

    /// Columns offered for grouping and discovery: everything not tagged
    /// as a measure.
    pub fn discoverable_columns(&self) -> Vec<&str> {
        self.columns.iter().filter(|c| !c.is_measure()).map(|c| c.name.as_str()).collect()
    }

    pub fn into_view(self) -> DatasetView {
        DatasetView::full(Arc::new(self))
    }
}

/// One row of a dataset, with column metadata for name lookups.
#[derive(Debug, Clone, Copy)]
pub struct RowRef<'a> {
    pub columns: &'a [Column],
    pub cells: &'a [Value],
    pub index: usize,
}

impl<'a> RowRef<'a> {
    pub fn get(&self, column: &str) -> Option<&'a Value> {
        self.columns.iter().position(|c| c.name == column).map(|i| &self.cells[i])
    }
}

/// An immutable row subset of a shared dataset, in original row order.
#[derive(Debug, Clone)]
pub struct DatasetView {
    dataset: Arc<Dataset>,
    rows: Vec<usize>,
}

impl DatasetView {
    pub fn full(dataset: Arc<Dataset>) -> Self {
        let rows = (0..dataset.row_count()).collect();
        Self { dataset, rows }
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = RowRef<'_>> + '_ {
        self.rows.iter().map(move |&i| self.dataset.row(i).expect("view row in range"))
    }

    /// Keeps the rows satisfying `predicate`.
    pub fn filter(&self, predicate: &Predicate) -> DatasetView {
        let rows = self
            .rows
            .iter()
            .copied()
            .filter(|&i| predicate.eval(&self.dataset.rows[i]))
            .collect();
        DatasetView { dataset: self.dataset.clone(), rows }
    }

    /// Parses, type-checks and applies a predicate expression.
    pub fn filter_str(&self, src: &str) -> Result<DatasetView, Diagnostic> {
        let p = Predicate::compile(src, &self.dataset.columns)?;
        Ok(self.filter(&p))
    }
}

/// Filters the full dataset by a predicate expression.
pub fn filter_rows(ds: &Arc<Dataset>, src: &str) -> Result<DatasetView, Diagnostic> {
    DatasetView::full(ds.clone()).filter_str(src)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn minimal_table() {
        let ds = Dataset::from_records("m", strs(&["city", "troops"]), vec![strs(&["Moscow", "100000"])]).unwrap();
        assert_eq!(ds.columns[0].dtype, DType::String);
        assert_eq!(ds.columns[1].dtype, DType::Number);
        assert_eq!(ds.row_count(), 1);
        assert_eq!(ds.rows[0][1], Value::Number(100000.0));
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = Dataset::from_records("m", strs(&["a", "b"]), vec![strs(&["1", "2"]), strs(&["1", "2", "3"])])
            .unwrap_err();
        assert_eq!(err.code, Code::E202);
        assert!(err.message.contains("row 3"), "{}", err.message);
    }

    #[test]
    fn duplicate_header() {
        let err = Dataset::from_records("m", strs(&["a", "a"]), vec![]).unwrap_err();
        assert_eq!(err.code, Code::E203);
    }

    #[test]
    fn inference_precedence_and_nulls() {
        let ds = Dataset::from_records(
            "t",
            strs(&["flag", "n", "when", "mixed", "empty"]),
            vec![
                strs(&["true", "1", "1812-06-24", "1", ""]),
                strs(&["FALSE", "", "1812-10-18T08:00", "x", ""]),
                strs(&["", "2.5", "", "2", ""]),
            ],
        )
        .unwrap();
        let types: Vec<DType> = ds.columns.iter().map(|c| c.dtype).collect();
        assert_eq!(types, vec![DType::Boolean, DType::Number, DType::Timestamp, DType::String, DType::String]);
        assert!(ds.rows[1][1].is_null());
        assert!(ds.rows[2][0].is_null());
        // "1" and "0" are numbers, not booleans
        let ds = Dataset::from_records("t", strs(&["b"]), vec![strs(&["1"]), strs(&["0"])]).unwrap();
        assert_eq!(ds.columns[0].dtype, DType::Number);
    }

    #[test]
    fn tagging_rules() {
        let ds = Dataset::from_records("m", strs(&["city", "troops"]), vec![strs(&["Moscow", "100000"])]).unwrap();
        let mut a = BTreeMap::new();
        a.insert("city".to_string(), [ColumnTag::SpatialAsset, ColumnTag::Dimension].into_iter().collect());
        let tagged = ds.tag_columns(&a).unwrap();
        assert_eq!(
            tagged.column("city").unwrap().tags,
            [ColumnTag::SpatialAsset, ColumnTag::Dimension].into_iter().collect()
        );
        let mut bad = BTreeMap::new();
        bad.insert("troops".to_string(), [ColumnTag::SpatialAsset, ColumnTag::Measure].into_iter().collect());
        assert_eq!(ds.tag_columns(&bad).unwrap_err().code, Code::E205);
        let mut unknown = BTreeMap::new();
        unknown.insert("nope".to_string(), BTreeSet::new());
        assert_eq!(ds.tag_columns(&unknown).unwrap_err().code, Code::E204);
    }

    #[test]
    fn number_display() {
        assert_eq!(format_number(100000.0), "100000");
        assert_eq!(format_number(-21.0), "-21");
        assert_eq!(format_number(523.46), "523.46");
    }
}
