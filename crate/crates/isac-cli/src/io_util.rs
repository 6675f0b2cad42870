use std::path::Path;

use anyhow::{bail, Context, Result};
use isac_core::{C64, CMat};

/// Writes through a temp file in the same directory, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
    }
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .context("output path has no file name")?;
    let tmp = match dir {
        Some(d) => d.join(format!(".{name}.tmp")),
        None => Path::new(&format!(".{name}.tmp")).to_path_buf(),
    };
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Complex matrix as CSV with interleaved re,im pairs per entry.
pub fn complex_csv(m: &CMat) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let e = m[(i, j)];
            out.push_str(&format!("{:.17e},{:.17e}", e.re, e.im));
        }
        out.push('\n');
    }
    out
}

pub fn parse_complex_csv(text: &str, nrows: usize, ncols: usize) -> Result<CMat> {
    let mut m = CMat::zeros(nrows, ncols);
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if rows.len() != nrows {
        bail!("expected {nrows} rows, found {}", rows.len());
    }
    for (i, row) in rows.iter().enumerate() {
        let vals: Vec<f64> = row
            .split(',')
            .map(|v| v.trim().parse::<f64>().context("bad float in matrix CSV"))
            .collect::<Result<_>>()?;
        if vals.len() != 2 * ncols {
            bail!("expected {} values per row, found {}", 2 * ncols, vals.len());
        }
        for j in 0..ncols {
            m[(i, j)] = C64::new(vals[2 * j], vals[2 * j + 1]);
        }
    }
    Ok(m)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
