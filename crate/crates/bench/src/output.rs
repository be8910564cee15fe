//! CSV tables with a TOML sidecar recording what produced them.

use std::fs;
use std::path::{Path, PathBuf};

use recon_core::ldpc::{format_alist, CodeSet};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentSpec;
use crate::error::BenchResult;

/// SHA-256 of each code's alist text, in code order.
pub fn code_set_hashes(set: &CodeSet) -> Vec<String> {
    set.codes()
        .iter()
        .map(|c| format!("{:x}", Sha256::digest(format_alist(&c.matrix).as_bytes())))
        .collect()
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    command: &'a str,
    table: &'a str,
    rows: usize,
    seed: u64,
    code_sets: Vec<Vec<String>>,
    spec: &'a ExperimentSpec,
}

/// Writes `<dir>/<name>.csv` and `<dir>/<name>.meta.toml`; returns the CSV
/// path. The output depends on the inputs only.
pub fn write_table<R: Serialize>(
    dir: &Path,
    name: &str,
    command: &str,
    rows: &[R],
    spec: &ExperimentSpec,
    sets: &[CodeSet],
) -> BenchResult<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{name}.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let meta = Meta {
        command,
        table: name,
        rows: rows.len(),
        seed: spec.seed,
        code_sets: sets.iter().map(code_set_hashes).collect(),
        spec,
    };
    let text = toml::to_string(&meta)
        .map_err(|e| crate::error::BenchError::Output(e.to_string()))?;
    fs::write(dir.join(format!("{name}.meta.toml")), text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: f64,
    }

    #[test]
    fn table_and_sidecar_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec::default();
        let rows = [Row { a: 1, b: 0.5 }, Row { a: 2, b: 0.25 }];
        let p = write_table(dir.path(), "t", "simulate", &rows, &spec, &[]).unwrap();
        let first = (
            fs::read_to_string(&p).unwrap(),
            fs::read_to_string(dir.path().join("t.meta.toml")).unwrap(),
        );
        write_table(dir.path(), "t", "simulate", &rows, &spec, &[]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), first.0);
        assert_eq!(first.0, "a,b\n1,0.5\n2,0.25\n");
        let meta: toml::Value = toml::from_str(&first.1).unwrap();
        assert_eq!(meta["rows"].as_integer(), Some(2));
        assert_eq!(meta["seed"].as_integer(), Some(1));
    }
}
