use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::simulation::{ScenarioReport, Surface, TableReport, TableResults};
use crate::warning::Warning;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarningEntry {
    pub message: String,
    #[serde(flatten)]
    pub detail: Warning,
}

impl From<Warning> for WarningEntry {
    fn from(w: Warning) -> Self {
        Self {
            message: w.to_string(),
            detail: w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
}

/// Top-level output of every CLI command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub command: String,
    pub config: Value,
    pub results: Value,
    pub warnings: Vec<WarningEntry>,
    pub timings: Option<Timings>,
}

/// Header plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvGrid {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest representation that parses back to the same `f64` (the same text
/// the JSON writer produces); non-finite values become `NaN`/`inf`/`-inf`.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        serde_json::to_string(&v).expect("finite floats serialize")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn format_scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => n.to_string(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<Vec<String>>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, child, out);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), child, out);
            }
        }
        scalar => out.push(vec![prefix.to_owned(), format_scalar(scalar)]),
    }
}

impl CsvGrid {
    /// `path,value` rows for every scalar leaf of a JSON value.
    pub fn flattened(v: &Value) -> Self {
        let mut rows = Vec::new();
        flatten("", v, &mut rows);
        Self {
            header: vec!["path".into(), "value".into()],
            rows,
        }
    }

    pub fn render(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| std::io::Error::other(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn scenario_rows(prefix: &[String], report: &ScenarioReport, rows: &mut Vec<Vec<String>>) {
    for t in &report.tests {
        let mut row = prefix.to_vec();
        row.extend([
            t.test.label().to_owned(),
            format_number(t.rate),
            t.rejections.to_string(),
            t.completed.to_string(),
            format_number(t.statistic.mean),
            format_number(t.statistic.variance),
        ]);
        rows.push(row);
    }
}

const SCENARIO_COLUMNS: [&str; 6] = [
    "test",
    "rate",
    "rejections",
    "completed",
    "statistic_mean",
    "statistic_variance",
];

impl CsvGrid {
    /// One row per test.
    pub fn scenario(report: &ScenarioReport) -> Self {
        let mut rows = Vec::new();
        scenario_rows(&[], report, &mut rows);
        Self {
            header: SCENARIO_COLUMNS.iter().map(|s| s.to_string()).collect(),
            rows,
        }
    }

    /// One row per (cell, test) for power tables, one row per cell for the
    /// kurtosis tables.
    pub fn table(report: &TableReport) -> Self {
        match &report.cells {
            TableResults::Power(cells) => {
                let mut header: Vec<String> =
                    ["n1", "n2", "p", "a"].iter().map(|s| s.to_string()).collect();
                header.extend(SCENARIO_COLUMNS.iter().map(|s| s.to_string()));
                let mut rows = Vec::new();
                for c in cells {
                    let prefix = [
                        c.n1.to_string(),
                        c.n2.to_string(),
                        c.p.to_string(),
                        format_number(c.a),
                    ];
                    scenario_rows(&prefix, &c.report, &mut rows);
                }
                Self { header, rows }
            }
            TableResults::Delta(cells) => Self {
                header: ["n1", "n2", "p", "replicates", "mean", "variance"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                rows: cells
                    .iter()
                    .map(|c| {
                        vec![
                            c.n1.to_string(),
                            c.n2.to_string(),
                            c.p.to_string(),
                            c.estimate.count.to_string(),
                            format_number(c.estimate.mean),
                            format_number(c.estimate.variance),
                        ]
                    })
                    .collect(),
            },
        }
    }

    /// Long format `y1,y2,value`; missing cells are empty.
    pub fn surface(s: &Surface) -> Self {
        let mut rows = Vec::new();
        for (i, &y1) in s.y1.iter().enumerate() {
            for (j, &y2) in s.y2.iter().enumerate() {
                rows.push(vec![
                    format_number(y1),
                    format_number(y2),
                    s.values[i][j].map(format_number).unwrap_or_default(),
                ]);
            }
        }
        Self {
            header: vec!["y1".into(), "y2".into(), "value".into()],
            rows,
        }
    }
}

impl ReportDocument {
    pub fn new<C: Serialize, R: Serialize>(command: &str, config: &C, results: &R) -> Result<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_owned(),
            config: serde_json::to_value(config)?,
            results: serde_json::to_value(results)?,
            warnings: Vec::new(),
            timings: None,
        })
    }

    pub fn with_warnings(mut self, warnings: impl IntoIterator<Item = Warning>) -> Self {
        self.warnings.extend(warnings.into_iter().map(WarningEntry::from));
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Fallback CSV rendering: every scalar of `results` as a `path,value` row.
    pub fn to_flat_csv(&self) -> Result<String> {
        CsvGrid::flattened(&self.results).render()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        x: f64,
        nested: Vec<(f64, Option<f64>)>,
    }

    #[test]
    fn numbers_round_trip_through_both_renderings() {
        let values = [0.1, 1.0 / 3.0, -2.5e-300, 123_456_789.123_456_78, std::f64::consts::PI];
        for v in values {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        let sample = Sample {
            x: 1.0 / 7.0,
            nested: vec![(2.0f64.sqrt(), None)],
        };
        let doc = ReportDocument::new("test", &serde_json::json!({"k": 1}), &sample).unwrap();
        let json: Value = serde_json::from_str(&doc.to_json().unwrap()).unwrap();
        assert_eq!(json["results"]["x"].as_f64().unwrap(), 1.0 / 7.0);
        let csv = doc.to_flat_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "path,value");
        assert!(lines.contains(&format!("x,{}", format_number(1.0 / 7.0)).as_str()));
        assert!(lines.contains(&format!("nested[0][0],{}", format_number(2.0f64.sqrt())).as_str()));
        assert!(lines.contains(&"nested[0][1],"));
    }

    #[test]
    fn warnings_carry_message_and_kind() {
        let doc = ReportDocument::new("test", &(), &())
            .unwrap()
            .with_warnings([Warning::RowsDropped { count: 2 }]);
        let v = serde_json::to_value(&doc).unwrap();
        assert_eq!(v["warnings"][0]["kind"], "rows-dropped");
        assert_eq!(v["warnings"][0]["count"], 2);
        assert!(v["timings"].is_null());
    }
}
