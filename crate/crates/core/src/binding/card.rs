use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{RowRef, Value};
use crate::diag::{Code, Diagnostic};

/// Rendered text for a null cell.
pub const NULL_TEXT: &str = "\u{2014}";

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Text(String),
    Field { column: String, decimals: Option<usize> },
}

/// Parsed `{column}` / `{column:.k}` template text.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    segments: Vec<Segment>,
}

impl Template {
    pub fn parse(src: &str) -> Result<Template, Diagnostic> {
        let mut segments = Vec::new();
        let mut rest = src;
        while let Some(open) = rest.find('{') {
            if open > 0 {
                segments.push(Segment::Text(rest[..open].into()));
            }
            let after = &rest[open + 1..];
            let close = after
                .find('}')
                .ok_or_else(|| Diagnostic::new(Code::E007, format!("unterminated placeholder in `{src}`")))?;
            let inner = &after[..close];
            let (column, decimals) = match inner.split_once(':') {
                None => (inner, None),
                Some((col, spec)) => {
                    let k = spec
                        .strip_prefix('.')
                        .and_then(|k| k.parse::<usize>().ok())
                        .filter(|k| *k <= 17)
                        .ok_or_else(|| Diagnostic::new(Code::E007, format!("bad format spec `{inner}`")))?;
                    (col, Some(k))
                }
            };
            let valid = !column.is_empty() && column.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_');
            if !valid {
                return Err(Diagnostic::new(Code::E007, format!("bad placeholder `{{{inner}}}`")));
            }
            segments.push(Segment::Field { column: column.into(), decimals });
            rest = &after[close + 1..];
        }
        if !rest.is_empty() {
            segments.push(Segment::Text(rest.into()));
        }
        Ok(Template { segments })
    }

    pub fn columns(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Field { column, .. } => Some(column.as_str()),
            Segment::Text(_) => None,
        })
    }

    pub fn render(&self, row: &RowRef<'_>) -> Result<String, Diagnostic> {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Field { column, decimals } => {
                    let v = row
                        .get(column)
                        .ok_or_else(|| Diagnostic::new(Code::E408, format!("row has no column `{column}`")))?;
                    match (v, decimals) {
                        (Value::Null, _) => out.push_str(NULL_TEXT),
                        (Value::Number(n), Some(k)) => out.push_str(&format!("{n:.k$}")),
                        (v, _) => out.push_str(&v.display()),
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CardTemplate {
    pub template_id: String,
    pub dataset_id: String,
    pub title: Template,
    pub body: Template,
    pub title_src: String,
    pub body_src: String,
}

/// A fully rendered contextual overlay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataCard {
    pub card_id: String,
    pub anchor_object_id: String,
    pub title: String,
    pub body: String,
    pub dataset_id: String,
    pub row_index: usize,
}

impl CardTemplate {
    pub fn new(template_id: &str, dataset_id: &str, title: &str, body: &str) -> Result<Self, Diagnostic> {
        Ok(CardTemplate {
            template_id: template_id.into(),
            dataset_id: dataset_id.into(),
            title: Template::parse(title)?,
            body: Template::parse(body)?,
            title_src: title.into(),
            body_src: body.into(),
        })
    }

    pub fn columns(&self) -> impl Iterator<Item = &str> {
        self.title.columns().chain(self.body.columns())
    }
}

pub fn render_data_card(template: &CardTemplate, row: &RowRef<'_>, anchor: &str) -> Result<DataCard, Diagnostic> {
    Ok(DataCard {
        card_id: format!("{}:{}:{}", template.template_id, anchor, row.index),
        anchor_object_id: anchor.into(),
        title: template.title.render(row)?,
        body: template.body.render(row)?,
        dataset_id: template.dataset_id.clone(),
        row_index: row.index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use alloc::string::ToString;
    use alloc::vec;

    fn ds() -> Dataset {
        let s = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        Dataset::from_records(
            "m",
            s(&["city", "troops", "temp_c", "emissions_mt"]),
            vec![s(&["Moscow", "100000", "-21", "523.46"]), s(&["Wilna", "", "", "0.125"])],
        )
        .unwrap()
    }

    #[test]
    fn substitutes_fields() {
        let d = ds();
        let t = CardTemplate::new("c", "m", "{city}", "Troops: {troops}, Temp: {temp_c}°C").unwrap();
        let card = render_data_card(&t, &d.row(0).unwrap(), "m1").unwrap();
        assert_eq!(card.body, "Troops: 100000, Temp: -21°C");
        assert_eq!(card.title, "Moscow");
        assert_eq!(card.card_id, "c:m1:0");
    }

    #[test]
    fn fixed_decimals_round_half_even() {
        let d = ds();
        let t = Template::parse("{emissions_mt:.1}").unwrap();
        assert_eq!(t.render(&d.row(0).unwrap()).unwrap(), "523.5");
        let t = Template::parse("{emissions_mt:.2}").unwrap();
        assert_eq!(t.render(&d.row(1).unwrap()).unwrap(), "0.12");
    }

    #[test]
    fn nulls_and_verbatim() {
        let d = ds();
        let t = Template::parse("T={temp_c:.1} N={troops}").unwrap();
        assert_eq!(t.render(&d.row(1).unwrap()).unwrap(), "T=\u{2014} N=\u{2014}");
        let plain = Template::parse("no placeholders here").unwrap();
        assert_eq!(plain.render(&d.row(0).unwrap()).unwrap(), "no placeholders here");
    }

    #[test]
    fn malformed_and_missing() {
        assert_eq!(Template::parse("{city").unwrap_err().code, Code::E007);
        assert_eq!(Template::parse("{}").unwrap_err().code, Code::E007);
        assert_eq!(Template::parse("{x:3}").unwrap_err().code, Code::E007);
        let d = ds();
        let t = Template::parse("{nope}").unwrap();
        assert_eq!(t.render(&d.row(0).unwrap()).unwrap_err().code, Code::E408);
    }
}
