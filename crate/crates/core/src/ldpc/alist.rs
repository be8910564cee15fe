//! MacKay alist interchange format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::ParityCheckMatrix;
use crate::error::{ReconError, Result};

fn malformed(msg: impl Into<String>) -> ReconError {
    ReconError::Alist(msg.into())
}

fn numbers(line: &str, what: &str) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| malformed(format!("{what}: not a number: {t:?}")))
        })
        .collect()
}

/// Parses alist text. Zero entries in the adjacency lists are padding.
pub fn parse_alist(text: &str) -> Result<ParityCheckMatrix> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let mut next = |what: &str| -> Result<Vec<usize>> {
        let line = lines
            .next()
            .ok_or_else(|| malformed(format!("truncated before {what}")))?;
        numbers(line, what)
    };
    let dims = next("dimensions")?;
    let [n, m] = dims[..] else {
        return Err(malformed("header must be `N M`"));
    };
    let maxes = next("maximum degrees")?;
    let [max_col, max_row] = maxes[..] else {
        return Err(malformed("second line must hold two maximum degrees"));
    };
    let col_deg = next("column degrees")?;
    let row_deg = next("row degrees")?;
    if col_deg.len() != n || row_deg.len() != m {
        return Err(malformed(format!(
            "expected {n} column and {m} row degrees, got {} and {}",
            col_deg.len(),
            row_deg.len()
        )));
    }
    if col_deg.iter().max() != Some(&max_col) || row_deg.iter().max() != Some(&max_row) {
        return Err(malformed("maximum degrees disagree with degree lists"));
    }
    if let Some(i) = col_deg.iter().position(|&d| d == 0) {
        return Err(malformed(format!("column {} has degree 0", i + 1)));
    }

    let mut cols: Vec<Vec<u32>> = Vec::with_capacity(n);
    for (i, &d) in col_deg.iter().enumerate() {
        let entries: Vec<usize> = next("column list")?.into_iter().filter(|&x| x != 0).collect();
        if entries.len() != d {
            return Err(malformed(format!(
                "column {} lists {} rows, degree says {d}",
                i + 1,
                entries.len()
            )));
        }
        let mut col = Vec::with_capacity(d);
        for j in entries {
            if j > m {
                return Err(malformed(format!("row index {j} out of range in column {}", i + 1)));
            }
            col.push((j - 1) as u32);
        }
        let mut sorted = col.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(malformed(format!("duplicate edge in column {}", i + 1)));
        }
        cols.push(col);
    }
    let h = ParityCheckMatrix::from_columns(m, &cols).map_err(|e| malformed(e.to_string()))?;

    // Row lists are redundant; when present they must agree.
    for (j, &d) in row_deg.iter().enumerate() {
        let Some(line) = lines.next() else {
            if j == 0 {
                break;
            }
            return Err(malformed("truncated row lists"));
        };
        let mut entries: Vec<u32> = numbers(line, "row list")?
            .into_iter()
            .filter(|&x| x != 0)
            .map(|x| x as u32 - 1)
            .collect();
        entries.sort_unstable();
        if entries.len() != d || entries != h.row(j) {
            return Err(malformed(format!("row {} disagrees with column lists", j + 1)));
        }
    }
    Ok(h)
}

/// Canonical alist text: ascending indices, zero-padded to the maximum
/// degree.
pub fn format_alist(h: &ParityCheckMatrix) -> String {
    let col_deg: Vec<usize> = (0..h.n()).map(|i| h.col_degree(i)).collect();
    let row_deg: Vec<usize> = (0..h.m()).map(|j| h.row_degree(j)).collect();
    let max_col = col_deg.iter().copied().max().unwrap_or(0);
    let max_row = row_deg.iter().copied().max().unwrap_or(0);
    let mut out = String::new();
    let join = |xs: &mut dyn Iterator<Item = usize>| {
        xs.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
    };
    let _ = writeln!(out, "{} {}", h.n(), h.m());
    let _ = writeln!(out, "{max_col} {max_row}");
    let _ = writeln!(out, "{}", join(&mut col_deg.iter().copied()));
    let _ = writeln!(out, "{}", join(&mut row_deg.iter().copied()));
    for i in 0..h.n() {
        let mut rows: Vec<usize> = h.col(i).iter().map(|&j| j as usize + 1).collect();
        rows.sort_unstable();
        rows.resize(max_col, 0);
        let _ = writeln!(out, "{}", join(&mut rows.into_iter()));
    }
    for j in 0..h.m() {
        let mut cols: Vec<usize> = h.row(j).iter().map(|&c| c as usize + 1).collect();
        cols.resize(max_row, 0);
        let _ = writeln!(out, "{}", join(&mut cols.into_iter()));
    }
    out
}

pub fn load_alist(path: impl AsRef<Path>) -> Result<ParityCheckMatrix> {
    parse_alist(&fs::read_to_string(path)?)
}

pub fn save_alist(h: &ParityCheckMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_alist(h))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::{peg_construct, DegreeDistribution};

    const TOY: &str = "6 3\n2 3\n2 2 1 1 2 1\n3 3 3\n1 3\n1 2\n2 0\n1 0\n2 3\n3 0\n1 2 4\n2 3 5\n1 5 6\n";

    #[test]
    fn toy_round_trip_is_canonical() {
        let h = parse_alist(TOY).unwrap();
        assert_eq!((h.n(), h.m()), (6, 3));
        assert_eq!(h.row(2), &[0, 4, 5]);
        assert_eq!(format_alist(&h), TOY);
    }

    #[test]
    fn row_lists_are_optional() {
        let cols_only: String = TOY.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert_eq!(parse_alist(&cols_only).unwrap(), parse_alist(TOY).unwrap());
    }

    #[test]
    fn rejects_broken_files() {
        let zero_degree = "3 1\n1 2\n1 1 0\n2\n1\n1\n\n1 2\n";
        assert!(matches!(parse_alist(zero_degree), Err(ReconError::Alist(_))));
        let out_of_range = TOY.replacen("1 3\n", "1 4\n", 1);
        assert!(matches!(parse_alist(&out_of_range), Err(ReconError::Alist(_))));
        let duplicate = TOY.replacen("1 3\n", "1 1\n", 1);
        assert!(matches!(parse_alist(&duplicate), Err(ReconError::Alist(_))));
        assert!(parse_alist("6\n").is_err());
        assert!(parse_alist("").is_err());
        let inconsistent = TOY.replace("1 5 6\n", "1 4 6\n");
        assert!(parse_alist(&inconsistent).is_err());
    }

    #[test]
    fn rate_five_sixths_header() {
        let h = peg_construct(1944, &DegreeDistribution::regular(3), 324, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r56.alist");
        save_alist(&h, &path).unwrap();
        let g = load_alist(&path).unwrap();
        assert_eq!((g.n(), g.m()), (1944, 324));
        assert!((g.rate() - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(g, h);
    }
}
