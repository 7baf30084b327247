//! CSV rendering and overwrite-protected file output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ConvergenceTable, ExperimentReport, TraceData};
use crate::error::{Error, Result};

/// Anything that renders to CSV text.
pub trait CsvOutput {
    fn to_csv(&self) -> String;
}

impl CsvOutput for ConvergenceTable {
    fn to_csv(&self) -> String {
        let mut s = String::from("param,error_Dh,eoc\n");
        for row in &self.rows {
            let _ = write!(s, "{:.5e},{:e},", row.param, row.error);
            if let Some(eoc) = row.eoc {
                let _ = write!(s, "{eoc:.6}");
            }
            s.push('\n');
        }
        s
    }
}

impl CsvOutput for ExperimentReport {
    fn to_csv(&self) -> String {
        match &self.data {
            TraceData::Solution { x, times, states } => {
                let mut s = String::from("t,x,u\n");
                for (t, u) in times.iter().zip(states) {
                    for (xi, ui) in x.iter().zip(u) {
                        let _ = writeln!(s, "{t:e},{xi:e},{ui:e}");
                    }
                }
                s
            }
            TraceData::Scalar { times, values } => {
                let mut s = String::from("t,value\n");
                for (t, v) in times.iter().zip(values) {
                    let _ = writeln!(s, "{t:e},{v:e}");
                }
                s
            }
        }
    }
}

/// Writes `content` to `path`, refusing to replace an existing file unless
/// `force` is set.
pub fn write_text(path: &Path, content: &str, force: bool) -> Result<()> {
    if !force && path.exists() {
        return Err(Error::WouldOverwrite { path: path.to_path_buf() });
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

pub fn write_csv(output: &impl CsvOutput, path: &Path, force: bool) -> Result<()> {
    write_text(path, &output.to_csv(), force)
}
