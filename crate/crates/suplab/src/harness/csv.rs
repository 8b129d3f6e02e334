//! Result tables as CSV. Columns are
//! `experiment,<axis...>,metric,mean,ci_low,ci_high,n,seed`; every row in a
//! table must carry the same axis names in the same order. Values never
//! contain commas (axes are numeric or kebab-case tags), so no quoting
//! dialect exists to negotiate.

use crate::error::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    /// (axis name, axis value) pairs, e.g. ("d2", "64").
    pub axes: Vec<(String, String)>,
    pub metric: String,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    pub seed: u64,
}

impl ResultRow {
    pub fn axis(&self, name: &str) -> Option<&str> {
        self.axes.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

fn axis_names(rows: &[ResultRow]) -> Result<Vec<String>> {
    let names: Vec<String> = rows[0].axes.iter().map(|(k, _)| k.clone()).collect();
    for (i, row) in rows.iter().enumerate() {
        let got: Vec<&String> = row.axes.iter().map(|(k, _)| k).collect();
        if got.len() != names.len() || got.iter().zip(&names).any(|(a, b)| *a != b) {
            return Err(Error::Data(format!(
                "row {i} has axes {got:?}, table schema is {names:?}"
            )));
        }
    }
    Ok(names)
}

pub fn render_csv(rows: &[ResultRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Data("no rows to write".into()));
    }
    let names = axis_names(rows)?;
    let mut out = String::from("experiment");
    for name in &names {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",metric,mean,ci_low,ci_high,n,seed\n");
    for row in rows {
        out.push_str(&row.experiment);
        for (_, v) in &row.axes {
            out.push(',');
            out.push_str(v);
        }
        out.push_str(&format!(
            ",{},{},{},{},{},{}\n",
            row.metric, row.mean, row.ci_low, row.ci_high, row.n, row.seed
        ));
    }
    Ok(out)
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    std::fs::write(path, render_csv(rows)?)?;
    Ok(())
}

pub fn read_result_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path)?;
    parse_result_csv(&text)
}

pub fn parse_result_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut offset = 0u64;
    let mut lines = Vec::new();
    for raw in text.split_inclusive('\n') {
        lines.push((offset, raw.trim_end_matches(['\n', '\r'])));
        offset += raw.len() as u64;
    }
    lines.retain(|(_, l)| !l.trim().is_empty());
    let Some(&(_, header)) = lines.first() else {
        return Err(Error::Data("empty result table".into()));
    };
    let cols: Vec<&str> = header.split(',').collect();
    let fixed_tail = ["metric", "mean", "ci_low", "ci_high", "n", "seed"];
    if cols.len() < 1 + fixed_tail.len()
        || cols[0] != "experiment"
        || cols[cols.len() - fixed_tail.len()..] != fixed_tail
    {
        return Err(Error::Format {
            offset: 0,
            msg: format!("header {header:?} is not a result table"),
        });
    }
    let axis_cols = &cols[1..cols.len() - fixed_tail.len()];

    let mut rows = Vec::with_capacity(lines.len() - 1);
    for &(line_start, line) in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Format {
                offset: line_start,
                msg: format!("{} fields, header has {}", fields.len(), cols.len()),
            });
        }
        let tail = fields.len() - 6;
        let num = |idx: usize| -> Result<f64> {
            fields[idx].parse().map_err(|_| Error::Format {
                offset: line_start,
                msg: format!("{:?} in column {} is not a number", fields[idx], cols[idx]),
            })
        };
        let int = |idx: usize| -> Result<u64> {
            fields[idx].parse().map_err(|_| Error::Format {
                offset: line_start,
                msg: format!("{:?} in column {} is not an integer", fields[idx], cols[idx]),
            })
        };
        rows.push(ResultRow {
            experiment: fields[0].to_string(),
            axes: axis_cols
                .iter()
                .zip(&fields[1..tail])
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            metric: fields[tail].to_string(),
            mean: num(tail + 1)?,
            ci_low: num(tail + 2)?,
            ci_high: num(tail + 3)?,
            n: int(tail + 4)? as usize,
            seed: int(tail + 5)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<ResultRow> {
        vec![
            ResultRow {
                experiment: "interference".into(),
                axes: vec![("d2".into(), "16".into()), ("estimator".into(), "global".into())],
                metric: "population-error".into(),
                mean: 0.875,
                ci_low: 0.87,
                ci_high: 0.88,
                n: 200,
                seed: 7,
            },
            ResultRow {
                experiment: "interference".into(),
                axes: vec![("d2".into(), "32".into()), ("estimator".into(), "local".into())],
                metric: "population-error".into(),
                mean: 1e-17,
                ci_low: 0.0,
                ci_high: 2e-17,
                n: 200,
                seed: 7,
            },
        ]
    }

    #[test]
    fn rows_survive_a_render_parse_round_trip() {
        let rows = sample_rows();
        let text = render_csv(&rows).unwrap();
        assert!(text.starts_with(
            "experiment,d2,estimator,metric,mean,ci_low,ci_high,n,seed\n"
        ));
        let back = parse_result_csv(&text).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn mismatched_axis_schemas_are_rejected() {
        let mut rows = sample_rows();
        rows[1].axes = vec![("k".into(), "32".into()), ("estimator".into(), "local".into())];
        assert!(matches!(render_csv(&rows), Err(Error::Data(_))));
    }

    #[test]
    fn malformed_cells_report_the_line_offset() {
        let text = "experiment,d2,metric,mean,ci_low,ci_high,n,seed\n\
                    a,16,m,0.5,0.4,0.6,100,1\n\
                    a,16,m,oops,0.4,0.6,100,1\n";
        match parse_result_csv(text) {
            Err(Error::Format { offset, msg }) => {
                assert_eq!(offset, 48 + 25);
                assert!(msg.contains("mean"), "{msg}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn foreign_header_is_rejected_at_offset_zero() {
        match parse_result_csv("time,temp\n1,2\n") {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn identical_inputs_render_identical_bytes() {
        let a = render_csv(&sample_rows()).unwrap();
        let b = render_csv(&sample_rows()).unwrap();
        assert_eq!(a, b);
    }
}
