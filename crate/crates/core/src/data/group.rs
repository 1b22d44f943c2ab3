use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{DatasetView, Value};
use crate::diag::{Code, Diagnostic};

/// A node of the grouping hierarchy. The root has no column and a null key.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub column: Option<String>,
    pub key: Value,
    /// Dataset row indices in this group, in original order.
    pub rows: Vec<usize>,
    pub children: Vec<Group>,
}

impl Group {
    pub fn leaves(&self) -> Vec<&Group> {
        if self.children.is_empty() {
            return alloc::vec![self];
        }
        self.children.iter().flat_map(Group::leaves).collect()
    }
}

/// Groups the view's rows by `by`, nesting in column order. Sibling groups
/// are sorted by key with the null group last.
pub fn group_rows(view: &DatasetView, by: &[&str]) -> Result<Group, Diagnostic> {
    let ds = view.dataset();
    let mut indices = Vec::with_capacity(by.len());
    for name in by {
        let i = ds
            .column_index(name)
            .ok_or_else(|| Diagnostic::new(Code::E204, format!("unknown column `{name}`")))?;
        if ds.columns[i].is_measure() {
            return Err(Diagnostic::new(Code::E208, format!("cannot group by measure column `{name}`")));
        }
        indices.push(i);
    }
    let mut root = Group { column: None, key: Value::Null, rows: view.row_indices().to_vec(), children: Vec::new() };
    split(view, &mut root, &indices);
    Ok(root)
}

fn split(view: &DatasetView, group: &mut Group, by: &[usize]) {
    let Some((&col, rest)) = by.split_first() else { return };
    let ds = view.dataset();
    let mut keyed: Vec<(&Value, usize)> = group.rows.iter().map(|&r| (&ds.rows[r][col], r)).collect();
    // stable sort keeps original row order within each key
    keyed.sort_by(|a, b| a.0.sort_cmp(b.0));
    let mut children: Vec<Group> = Vec::new();
    for (key, row) in keyed {
        match children.last_mut() {
            Some(g) if g.key.sort_cmp(key).is_eq() => g.rows.push(row),
            _ => children.push(Group {
                column: Some(ds.columns[col].name.clone()),
                key: key.clone(),
                rows: alloc::vec![row],
                children: Vec::new(),
            }),
        }
    }
    for child in &mut children {
        split(view, child, rest);
    }
    group.children = children;
}
