//! Deterministic result emission: CSV with a metadata comment line and
//! 12-significant-digit floats, JSON for validation reports.

use std::io::Write;
use std::path::Path;

use crate::CliError;

/// FNV-1a over raw bytes; stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    hash
}

/// 12 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.11e}")
}

pub struct CsvFile {
    pub meta: String,
    pub header: String,
    pub rows: Vec<String>,
}

impl CsvFile {
    pub fn new(command: &str, seed: u64, config_hash: u64, header: &str) -> Self {
        CsvFile {
            meta: format!(
                "# qem {} cmd={command} seed={seed} config-hash={config_hash:016x}",
                env!("CARGO_PKG_VERSION")
            ),
            header: header.to_string(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: String) {
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(CliError::Io)?;
        }
        let mut file = std::fs::File::create(path).map_err(CliError::Io)?;
        writeln!(file, "{}", self.meta).map_err(CliError::Io)?;
        writeln!(file, "{}", self.header).map_err(CliError::Io)?;
        for row in &self.rows {
            writeln!(file, "{row}").map_err(CliError::Io)?;
        }
        Ok(())
    }
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(CliError::Io)?;
    }
    let text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Config(format!("json: {e}")))?;
    std::fs::write(path, text + "\n").map_err(CliError::Io)
}

/// Reads a CSV produced by this tool: comment lines are skipped, the header
/// is returned separately.
pub fn read_csv(path: &Path) -> Result<(String, Vec<Vec<String>>), CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::Io)?;
    let mut header = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(line.to_string());
            continue;
        }
        rows.push(line.split(',').map(|s| s.to_string()).collect());
    }
    let header = header
        .ok_or_else(|| CliError::Config(format!("{}: missing header row", path.display())))?;
    Ok((header, rows))
}

pub fn parse_field_f64(row: &[String], idx: usize, path: &Path) -> Result<f64, CliError> {
    row.get(idx)
        .and_then(|s| s.parse::<f64>().ok())
        .ok_or_else(|| {
            CliError::Config(format!(
                "{}: malformed numeric field {idx} in row {row:?}",
                path.display()
            ))
        })
}
