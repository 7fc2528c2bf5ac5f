use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::{OutputFormat, RunConfig};
use crate::error::CliError;

pub const OUTPUT_DIR_ENV: &str = "LZFE_OUTPUT_DIR";

#[derive(Debug, Serialize)]
pub struct ResultEnvelope<T: Serialize> {
    pub command: String,
    pub tool: &'static str,
    pub version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub passed: bool,
    pub config_echo: RunConfig,
    pub records: T,
}

impl<T: Serialize> ResultEnvelope<T> {
    pub fn new(command: &str, config: RunConfig, records: T, passed: bool, stamp: bool) -> Self {
        let timestamp = stamp.then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Self {
            command: command.to_string(),
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            timestamp,
            passed,
            config_echo: config,
            records,
        }
    }
}

/// Twelve significant digits; plain decimals in [1e-4, 1e12), exponent form otherwise.
pub fn fmt12(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..12).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding can carry into a new leading digit
        if s.trim_start_matches('-')
            .replace('.', "")
            .trim_start_matches('0')
            .len()
            > 12
        {
            format!("{x:.prec$}", prec = decimals.saturating_sub(1))
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

/// Builds CSV text with LF line endings.
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Where a command writes: explicit path, else `$LZFE_OUTPUT_DIR/<stem>.<ext>`, else stdout.
pub fn destination(config: &RunConfig, stem: &str, ext: &str) -> Option<PathBuf> {
    if let Some(p) = &config.output_path {
        return Some(p.clone());
    }
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|d| !d.is_empty())
        .map(|d| PathBuf::from(d).join(format!("{stem}.{ext}")))
}

/// Writes to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| CliError::Io {
            path: tmp.path().to_path_buf(),
            source: e,
        })?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn emit(config: &RunConfig, stem: &str, contents: &str) -> Result<(), CliError> {
    let ext = config.format().extension();
    match destination(config, stem, ext) {
        Some(path) => {
            write_atomic(&path, contents)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{contents}"),
    }
    Ok(())
}

pub fn render<T: Serialize>(
    envelope: &ResultEnvelope<T>,
    csv: impl FnOnce() -> Result<String, CliError>,
) -> Result<String, CliError> {
    match envelope.config_echo.format() {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(envelope)? + "\n"),
        OutputFormat::Csv => csv(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt12(0.0432139182637722), "0.0432139182638");
        assert_eq!(fmt12(1.0), "1.00000000000");
        assert_eq!(fmt12(-std::f64::consts::PI), "-3.14159265359");
        assert_eq!(fmt12(2.5e-7), "2.50000000000e-7");
        assert_eq!(fmt12(0.0), "0");
        assert_eq!(fmt12(9.9999999999999), "10.0000000000");
        assert_eq!(fmt12(f64::NAN), "NaN");
    }

    #[test]
    fn csv_uses_lf() {
        let text = csv_text(&["a", "b"], &[vec!["1".into(), "2".into()]]).unwrap();
        assert_eq!(text, "a,b\n1,2\n");
    }

    #[test]
    fn atomic_write_replaces_existing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, "first").unwrap();
        write_atomic(&path, "second").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
