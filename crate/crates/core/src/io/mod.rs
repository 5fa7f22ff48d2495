//! File formats: traces, design matrices, reports and SVG rendering.
//!
//! Every writer goes through [`write_atomic`], which writes a temporary file
//! in the destination directory and renames it into place.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub mod design;
pub mod report;
pub mod svg;
pub mod trace;

pub use design::{read_design, write_design};
pub use report::{read_report, write_report, Report, SCHEMA};
pub use svg::{render_svg, write_svg, SvgStyle};
pub use trace::{read_trace, write_trace, TraceFormat};

/// Writes `bytes` to `path` via a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
