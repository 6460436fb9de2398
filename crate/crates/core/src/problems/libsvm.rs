//! Reader for the LIBSVM / svmlight text format:
//! `<label> <index>:<value> <index>:<value> ...` with 1-based, strictly
//! increasing indices. Anything after `#` is a comment.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

pub fn read_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_libsvm(BufReader::new(File::open(path)?))
}

/// Parses LIBSVM text. Binary labels are mapped to `{+1, -1}`: with two
/// distinct raw labels the larger becomes `+1` (so `0/1` and `1/2` files
/// work); with a single raw label its sign decides.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dim = 0;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: lineno, msg };
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("invalid label `{label_tok}`")))?;
        if !label.is_finite() {
            return Err(err(format!("invalid label `{label_tok}`")));
        }

        let mut row = Vec::new();
        let mut last: Option<usize> = None;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected `index:value`, found `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(format!("invalid feature index `{idx}`")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(format!("invalid feature value `{val}`")))?;
            if let Some(prev) = last {
                if idx <= prev {
                    return Err(err(format!(
                        "feature indices must be strictly increasing ({idx} after {prev})"
                    )));
                }
            }
            last = Some(idx);
            dim = dim.max(idx);
            row.push((idx - 1, val));
        }
        rows.push(row);
        raw_labels.push((label, lineno));
    }

    let labels = map_labels(&raw_labels)?;
    Ok(Dataset { rows, labels, dim })
}

fn map_labels(raw: &[(f64, usize)]) -> Result<Vec<f64>> {
    let mut distinct: Vec<f64> = Vec::new();
    for &(l, lineno) in raw {
        if !distinct.contains(&l) {
            if distinct.len() == 2 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("more than two distinct labels (third is {l})"),
                });
            }
            distinct.push(l);
        }
    }
    let positive = match distinct.as_slice() {
        [a, b] => a.max(*b),
        // a lone class keeps its sign; 0 counts as negative
        _ => 0.5,
    };
    Ok(raw
        .iter()
        .map(|&(l, _)| if l >= positive { 1.0 } else { -1.0 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset> {
        parse_libsvm(s.as_bytes())
    }

    #[test]
    fn reads_sparse_line() {
        let d = parse("+1 1:0.5 3:-2\n").unwrap();
        assert_eq!(d.labels, vec![1.0]);
        assert_eq!(d.rows[0], vec![(0, 0.5), (2, -2.0)]);
        assert_eq!(d.dims(), (1, 3));
    }

    #[test]
    fn empty_input() {
        let d = parse("").unwrap();
        assert_eq!(d.dims(), (0, 0));
        assert!(d.is_empty());
    }

    #[test]
    fn malformed_token_reports_line() {
        match parse("a 1:x") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse("1 1:0.5\n-1 2:x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_monotone_indices_rejected() {
        assert!(matches!(parse("1 3:1 2:1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("1 2:1 2:1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("1 0:1"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn zero_one_labels_remapped() {
        let d = parse("0 1:1\n1 2:1\n0 1:3 # trailing comment\n\n").unwrap();
        assert_eq!(d.labels, vec![-1.0, 1.0, -1.0]);
        let d = parse("2 1:1\n1 1:1\n").unwrap();
        assert_eq!(d.labels, vec![1.0, -1.0]);
    }

    #[test]
    fn more_than_two_classes_rejected() {
        assert!(matches!(parse("1 1:1\n2 1:1\n3 1:1\n"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn dense_rows_fill_zeros() {
        let d = parse("-1 2:4\n1 1:1 3:2\n").unwrap();
        assert_eq!(d.dense_row(0).as_slice(), &[0.0, 4.0, 0.0]);
        assert_eq!(d.dense_row(1).as_slice(), &[1.0, 0.0, 2.0]);
    }
}
