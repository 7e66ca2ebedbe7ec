//! `f1,...,fd,label` rows with an optional header line.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn load_csv<F: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<F>> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text)
}

/// Parses CSV text. The first nonempty line is a header if its first field is
/// not numeric. The class count is `max(label) + 1`.
pub fn parse_csv<F: Scalar>(text: &str) -> Result<Dataset<F>> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut dim: Option<usize> = None;
    let mut first = true;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if first {
            first = false;
            if fields[0].parse::<f64>().is_err() {
                continue;
            }
        }
        if fields.len() < 2 {
            return Err(Error::parse(line_no, "need at least one feature and a label"));
        }
        let d = fields.len() - 1;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::parse(
                    line_no,
                    format!("expected {expected} features, found {d}"),
                ))
            }
            _ => {}
        }
        for f in &fields[..d] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(line_no, format!("non-numeric feature `{f}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(line_no, format!("non-finite feature `{f}`")));
            }
            features.push(F::lit(v));
        }
        let label_field = fields[d];
        let label: usize = label_field
            .parse()
            .map_err(|_| Error::parse(line_no, format!("label `{label_field}` is not a nonnegative integer")))?;
        labels.push(label);
    }

    let dim = dim.ok_or(Error::Empty("csv file has no data rows"))?;
    let num_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    Dataset::new(features, dim, labels, num_classes)
}

pub fn write_csv<F: Scalar>(data: &Dataset<F>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = (0..data.dim()).map(|j| format!("f{j}")).collect();
    out.push_str(&header.join(","));
    out.push_str(",label\n");
    for i in 0..data.len() {
        for v in data.row(i) {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{}\n", data.labels()[i]));
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows() {
        let d: Dataset<f64> = parse_csv("1.0,2.0,0\n3,4,1\n5,6,0\n").unwrap();
        assert_eq!(d.class_counts(), &[2, 1]);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.row(2), &[5.0, 6.0]);
    }

    #[test]
    fn header_is_skipped() {
        let plain: Dataset<f64> = parse_csv("1.0,2.0,0\n3,4,1\n5,6,0\n").unwrap();
        let with_header: Dataset<f64> = parse_csv("a,b,label\n1.0,2.0,0\n3,4,1\n5,6,0\n").unwrap();
        assert_eq!(plain, with_header);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(parse_csv::<f64>(""), Err(Error::Empty(_))));
        assert!(matches!(parse_csv::<f64>("x,y,label\n"), Err(Error::Empty(_))));
        assert!(matches!(
            parse_csv::<f64>("1,2,0\n1,zz,1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_csv::<f64>("1,2,0\n1,2,3,1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_csv::<f64>("1,2,0\n1,2,0.5\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let d: Dataset<f64> = parse_csv("0.25,-1.5,1\n3,4,0\n").unwrap();
        write_csv(&d, &p).unwrap();
        assert_eq!(load_csv::<f64>(&p).unwrap(), d);
    }
}
