//! Embedding ingestion. One entry point accepts either the binary container
//! (SPLE magic) or numeric CSV, so callers never branch on file type. CSV may
//! start with a header row; a trailing `label` column carries class ids.

use super::checkpoint::{parse_embeddings, Embeddings, MAGIC_EMBED};
use crate::error::{Error, Result};
use crate::numeric::matrix::Matrix;
use std::io::Read;
use std::path::Path;

pub fn load_embeddings(path: &Path) -> Result<Embeddings> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(MAGIC_EMBED) {
        return parse_embeddings(&bytes);
    }
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Format {
        offset: e.valid_up_to() as u64,
        msg: "neither the binary container nor UTF-8 text".into(),
    })?;
    parse_embeddings_csv(text)
}

/// Lines with their starting byte offset, final newline optional.
fn lines_with_offsets(text: &str) -> impl Iterator<Item = (u64, &str)> {
    let mut offset = 0u64;
    text.split_inclusive('\n').map(move |raw| {
        let start = offset;
        offset += raw.len() as u64;
        (start, raw.trim_end_matches(['\n', '\r']))
    })
}

fn looks_like_header(line: &str) -> bool {
    line.split(',').any(|f| f.trim().parse::<f64>().is_err())
}

pub fn parse_embeddings_csv(text: &str) -> Result<Embeddings> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut has_label_col = false;
    let mut width = None;
    let mut saw_header = false;

    for (line_start, line) in lines_with_offsets(text) {
        if line.trim().is_empty() {
            continue;
        }
        if rows.is_empty() && !saw_header && looks_like_header(line) {
            saw_header = true;
            has_label_col = line
                .rsplit(',')
                .next()
                .is_some_and(|f| f.trim().eq_ignore_ascii_case("label"));
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = *width.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(Error::Format {
                offset: line_start,
                msg: format!("row has {} fields, first row had {expected}", fields.len()),
            });
        }
        let feat_count = fields.len() - has_label_col as usize;
        let mut col_start = line_start;
        let mut row = Vec::with_capacity(feat_count);
        for (i, field) in fields.iter().enumerate() {
            let parse_err = |what: &str| Error::Format {
                offset: col_start,
                msg: format!("{:?} is not {what}", field.trim()),
            };
            if i < feat_count {
                row.push(field.trim().parse::<f64>().map_err(|_| parse_err("a number"))?);
            } else {
                labels.push(field.trim().parse::<usize>().map_err(|_| parse_err("a label"))?);
            }
            col_start += field.len() as u64 + 1;
        }
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::Data("no embedding rows".into()));
    }
    let dim = rows[0].len();
    let points = Matrix::from_vec(rows.len(), dim, rows.concat())?;
    Ok(Embeddings { points, labels: has_label_col.then_some(labels) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::checkpoint::save_embeddings;
    use crate::numeric::rng::SeededRng;

    #[test]
    fn csv_and_binary_encodings_of_the_same_cloud_agree() {
        let mut rng = SeededRng::new(3);
        let data: Vec<f64> = (0..12).map(|_| rng.normal()).collect();
        let emb = Embeddings {
            points: Matrix::from_vec(4, 3, data).unwrap(),
            labels: Some(vec![1, 0, 2, 1]),
        };
        let dir = tempfile::tempdir().unwrap();
        let bin_path = dir.path().join("e.sple");
        save_embeddings(&bin_path, &emb).unwrap();

        let mut csv = String::from("x0,x1,x2,label\n");
        for r in 0..4 {
            let feats: Vec<String> =
                emb.points.row(r).iter().map(|v| format!("{v:.17}")).collect();
            csv.push_str(&format!("{},{}\n", feats.join(","), emb.labels.as_ref().unwrap()[r]));
        }
        let csv_path = dir.path().join("e.csv");
        std::fs::write(&csv_path, csv).unwrap();

        let from_bin = load_embeddings(&bin_path).unwrap();
        let from_csv = load_embeddings(&csv_path).unwrap();
        assert_eq!(from_bin.labels, from_csv.labels);
        for (a, b) in from_bin.points.data().iter().zip(from_csv.points.data()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn headerless_csv_treats_every_column_as_a_feature() {
        let emb = parse_embeddings_csv("1.0,2.0\n3.0,4.0\n").unwrap();
        assert_eq!(emb.points.rows(), 2);
        assert_eq!(emb.points.cols(), 2);
        assert!(emb.labels.is_none());
    }

    #[test]
    fn ragged_row_reports_its_byte_offset() {
        let text = "1.0,2.0\n3.0,4.0,5.0\n";
        match parse_embeddings_csv(text) {
            Err(Error::Format { offset, msg }) => {
                assert_eq!(offset, 8);
                assert!(msg.contains("3 fields"), "{msg}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn unparsable_field_points_at_its_column() {
        let text = "a,b\n1.0,2.0\n3.0,oops\n";
        match parse_embeddings_csv(text) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 16),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_a_data_error() {
        assert!(matches!(parse_embeddings_csv(""), Err(Error::Data(_))));
        assert!(matches!(parse_embeddings_csv("x,y,label\n"), Err(Error::Data(_))));
    }
}
