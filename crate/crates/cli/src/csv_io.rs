//! Dataset CSV: header `f0,f1,…,f{d-1},label`, one row per sample, floats
//! in shortest round-trip form, UNIX newlines.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ahfe_core::data::LabeledDataset;

use crate::error::{CliError, Result};

/// Parses a dataset. Row numbers in errors count the header as row 1.
/// The class count is the largest label plus one; classes with no rows
/// are reported in the returned warnings.
pub fn read_dataset<R: Read>(reader: R, path: &Path) -> Result<(LabeledDataset, Vec<String>)> {
    let parse_err = |row: usize, message: String| CliError::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(parse_err(1, "empty file".into()));
    }
    let dim = header.len() - 1;
    if dim == 0 || &header[dim] != "label" {
        return Err(parse_err(
            1,
            "header must be feature columns followed by `label`".into(),
        ));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| parse_err(row, e.to_string()))?;
        if record.len() != dim + 1 {
            return Err(parse_err(
                row,
                format!("expected {} columns, found {}", dim + 1, record.len()),
            ));
        }
        for (col, field) in record.iter().take(dim).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(row, format!("column `{}`: `{field}` is not a number", &header[col])))?;
            if !v.is_finite() {
                return Err(parse_err(
                    row,
                    format!("column `{}`: value is not finite", &header[col]),
                ));
            }
            features.push(v);
        }
        let label_field = record[dim].trim();
        let label: usize = label_field.parse().map_err(|_| {
            parse_err(
                row,
                format!("column `label`: `{label_field}` is not a non-negative integer"),
            )
        })?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(parse_err(2, "no data rows".into()));
    }
    let num_classes = (labels.iter().copied().max().unwrap_or(0) + 1).max(2);
    let dataset = LabeledDataset::new(features, dim, labels, num_classes)?;
    let warnings = ahfe_core::data::dataset_warnings(&dataset);
    Ok((dataset, warnings))
}

pub fn load_csv(path: &Path) -> Result<(LabeledDataset, Vec<String>)> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_dataset(file, path)
}

pub fn write_dataset<W: Write>(mut out: W, dataset: &LabeledDataset) -> std::io::Result<()> {
    let header: Vec<String> = (0..dataset.dim()).map(|j| format!("f{j}")).collect();
    writeln!(out, "{},label", header.join(","))?;
    for (row, label) in dataset.rows().zip(dataset.labels()) {
        for v in row {
            write!(out, "{v},")?;
        }
        writeln!(out, "{label}")?;
    }
    out.flush()
}

pub fn save_csv(path: &Path, dataset: &LabeledDataset) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_dataset(BufWriter::new(file), dataset).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<(LabeledDataset, Vec<String>)> {
        read_dataset(text.as_bytes(), Path::new("test.csv"))
    }

    #[test]
    fn three_rows() {
        let (d, w) = parse("f0,f1,label\n0.5,1,0\n-2,3.25,2\n1e-3,0,1\n").unwrap();
        assert_eq!(d.num_classes(), 3);
        assert_eq!(d.class_counts(), &[1, 1, 1]);
        assert_eq!(d.labels(), &[0, 2, 1]);
        assert_eq!(d.row(1), &[-2.0, 3.25]);
        assert!(w.is_empty());
    }

    #[test]
    fn missing_class_inferred_with_warning() {
        let (d, w) = parse("f0,label\n1,0\n2,4\n3,1\n4,2\n").unwrap();
        assert_eq!(d.num_classes(), 5);
        assert_eq!(d.class_counts()[3], 0);
        assert_eq!(w, vec!["class 3 has no samples".to_string()]);
    }

    #[test]
    fn malformed_rows_name_row_and_column() {
        let err = parse("f0,f1,label\n1,2,0\n1,abc,1\n").unwrap_err().to_string();
        assert!(err.contains(":3:") && err.contains("`f1`"), "{err}");
        let err = parse("f0,label\n1,0.5\n").unwrap_err().to_string();
        assert!(err.contains(":2:") && err.contains("label"), "{err}");
        let err = parse("f0,label\n1,-1\n").unwrap_err().to_string();
        assert!(err.contains("label"), "{err}");
        let err = parse("f0,f1,label\n1,0\n").unwrap_err().to_string();
        assert!(err.contains("columns"), "{err}");
        assert!(parse("").is_err());
        assert!(parse("f0,label\n").is_err());
        assert!(parse("a,b\n1,2\n").is_err());
    }

    #[test]
    fn write_then_read_is_identity() {
        let d = LabeledDataset::new(vec![0.1, -1e-300, 3.0, 1.0 / 3.0, 7e22, -0.0], 2, vec![1, 0, 1], 2).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("f0,f1,label\n"));
        assert!(!text.contains('\r'));
        let (back, _) = read_dataset(buf.as_slice(), Path::new("x")).unwrap();
        assert_eq!(back, d);
    }
}
