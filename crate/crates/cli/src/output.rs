//! Atomic file emission.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use tempfile::NamedTempFile;

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = NamedTempFile::new_in(dir).with_context(|| format!("temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn hash_line(hash: &str) -> String {
    format!("# config-sha256: {hash}\n")
}

/// Text file whose first line carries the config hash.
pub fn write_text(path: &Path, hash: &str, body: &str) -> Result<()> {
    let mut s = hash_line(hash);
    s.push_str(body);
    write_atomic(path, s.as_bytes())
}

/// Row-major values as a CSV grid, preceded by the hash comment.
pub fn grid_csv(values: &[f64], n_cols: usize) -> String {
    let mut s = String::new();
    for row in values.chunks(n_cols) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

pub fn write_grid(path: &Path, hash: &str, values: &[f64], n_cols: usize) -> Result<()> {
    write_text(path, hash, &grid_csv(values, n_cols))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        let leftovers = std::fs::read_dir(p.parent().unwrap()).unwrap().count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn grid_rows_follow_columns() {
        assert_eq!(grid_csv(&[1.0, 2.5, -3.0, 4.0], 2), "1,2.5\n-3,4\n");
    }
}
