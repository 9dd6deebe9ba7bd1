use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::core::Vector;
use crate::error::{Error, Result};

/// Parse a LIBSVM-format text file into dense rows.
///
/// Each line is `label idx:val idx:val ...` with 1-based, strictly ascending
/// indices. The inferred dimension is the maximum index seen anywhere;
/// absent indices are zeros. Labels are used directly as regression targets.
/// Blank lines are skipped; anything else malformed is reported with its
/// 1-based line number.
pub fn parse_libsvm(path: impl AsRef<Path>) -> Result<(Vec<(Vector, f64)>, usize)> {
    parse_libsvm_reader(BufReader::new(File::open(path)?))
}

/// [`parse_libsvm`] over any buffered reader.
pub fn parse_libsvm_reader<R: BufRead>(reader: R) -> Result<(Vec<(Vector, f64)>, usize)> {
    let mut sparse_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let mut dim = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let mut tokens = line.split_whitespace();
        let Some(label_token) = tokens.next() else {
            continue; // blank line
        };
        let label: f64 = label_token.parse().map_err(|_| Error::Parse {
            line: lineno,
            reason: format!("label `{label_token}` is not a number"),
        })?;
        let mut features: Vec<(usize, f64)> = Vec::new();
        let mut last_index = 0usize;
        for token in tokens {
            let Some((index_str, value_str)) = token.split_once(':') else {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("expected `index:value`, found `{token}`"),
                });
            };
            let index: usize = index_str.parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("feature index `{index_str}` is not an integer"),
            })?;
            if index == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    reason: "feature indices are 1-based; found index 0".to_string(),
                });
            }
            if index == last_index {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("duplicate feature index {index}"),
                });
            }
            if index < last_index {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("feature indices must ascend; {index} follows {last_index}"),
                });
            }
            let value: f64 = value_str.parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("feature value `{value_str}` is not a number"),
            })?;
            last_index = index;
            features.push((index, value));
        }
        dim = dim.max(last_index);
        sparse_rows.push((features, label));
    }
    let rows = sparse_rows
        .into_iter()
        .map(|(features, label)| {
            let mut a = Vector::zeros(dim);
            for (index, value) in features {
                a[index - 1] = value;
            }
            (a, label)
        })
        .collect();
    Ok((rows, dim))
}

/// Serialize rows in LIBSVM format (zeros are omitted). `f64` values print in
/// shortest round-trip form, so parse(write(rows)) reproduces them exactly.
pub fn write_libsvm<W: Write>(mut writer: W, rows: &[(Vector, f64)]) -> Result<()> {
    for (a, b) in rows {
        write!(writer, "{b}")?;
        for (k, &v) in a.iter().enumerate() {
            if v != 0.0 {
                write!(writer, " {}:{v}", k + 1)?;
            }
        }
        writeln!(writer)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::RngHandle;
    use std::io::Cursor;

    fn parse_str(s: &str) -> Result<(Vec<(Vector, f64)>, usize)> {
        parse_libsvm_reader(Cursor::new(s))
    }

    #[test]
    fn basic_line_parses_densely() {
        let (rows, dim) = parse_str("1 1:0.5 3:2.0\n").unwrap();
        assert_eq!(dim, 3);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].1, 1.0);
        assert_eq!(rows[0].0, Vector::from_column_slice(&[0.5, 0.0, 2.0]));
    }

    #[test]
    fn label_only_line_gives_a_zero_row() {
        let (rows, dim) = parse_str("1 2:1.5\n-1\n").unwrap();
        assert_eq!(dim, 2);
        assert_eq!(rows[1].1, -1.0);
        assert_eq!(rows[1].0, Vector::zeros(2));
    }

    #[test]
    fn blank_lines_are_skipped() {
        let (rows, dim) = parse_str("1 1:1\n\n2 2:2\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(dim, 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("1 1:0.5\nbad 1:1\n", 2, "not a number"),
            ("1 x:0.5\n", 1, "not an integer"),
            ("1 1:abc\n", 1, "not a number"),
            ("1 0:0.5\n", 1, "1-based"),
            ("1 2:0.5 2:0.7\n", 1, "duplicate"),
            ("1 1:1\n1 3:1 2:1\n", 2, "ascend"),
            ("1 1=0.5\n", 1, "index:value"),
        ];
        for (input, want_line, want_reason) in cases {
            match parse_str(input) {
                Err(Error::Parse { line, reason }) => {
                    assert_eq!(line, want_line, "wrong line for {input:?}");
                    assert!(
                        reason.contains(want_reason),
                        "reason {reason:?} should mention {want_reason:?}"
                    );
                }
                other => panic!("expected parse error for {input:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn signed_labels_parse() {
        let (rows, _) = parse_str("+1 1:1\n-3.5 1:2\n").unwrap();
        assert_eq!(rows[0].1, 1.0);
        assert_eq!(rows[1].1, -3.5);
    }

    #[test]
    fn write_then_parse_round_trips_exactly() {
        let mut rng = RngHandle::from_seed(31);
        let d = 6;
        let mut rows: Vec<(Vector, f64)> = (0..100)
            .map(|_| {
                let a = Vector::from_fn(d, |_, _| {
                    // Mix zeros in so sparsity handling is exercised.
                    if rng.uniform() < 0.3 { 0.0 } else { rng.normal() }
                });
                (a, rng.normal())
            })
            .collect();
        // Pin the dimension: the parser infers it from the largest index, so
        // at least one row must occupy the last coordinate.
        rows[0].0[d - 1] = 1.25;
        let mut buf = Vec::new();
        write_libsvm(&mut buf, &rows).unwrap();
        let (parsed, dim) = parse_libsvm_reader(Cursor::new(&buf)).unwrap();
        assert_eq!(dim, d);
        assert_eq!(parsed.len(), rows.len());
        for ((a, b), (pa, pb)) in rows.iter().zip(&parsed) {
            assert_eq!(a, pa);
            assert_eq!(b, pb);
        }
    }

    #[test]
    fn file_based_parse_works() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.libsvm");
        std::fs::write(&path, "2 1:0.25 2:-4\n").unwrap();
        let (rows, dim) = parse_libsvm(&path).unwrap();
        assert_eq!(dim, 2);
        assert_eq!(rows[0].1, 2.0);
        assert_eq!(rows[0].0, Vector::from_column_slice(&[0.25, -4.0]));
    }
}
