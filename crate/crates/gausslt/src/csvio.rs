//! CSV persistence: atomic writes (temp file + rename) and a fixed
//! 17-significant-digit numeric format so reruns are byte-identical.

use std::io::Write;
use std::path::Path;

use crate::Result;

/// Render a float with 17 significant digits, round-trip safe for f64.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write `header` and `rows` to `path` atomically: the file appears fully
/// written or not at all.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.to_path_buf();
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".tmp");
    tmp.set_file_name(name);
    {
        let mut f = std::fs::File::create(&tmp)?;
        writeln!(f, "{header}")?;
        for row in rows {
            writeln!(f, "{}", row.join(","))?;
        }
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
