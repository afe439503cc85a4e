pub mod analyze;
pub mod calibrate;
pub mod evaluate;
pub mod measure;
pub mod simulate;

use std::io::{self, BufWriter, Write};
use std::path::Path;

use fluidlevel::vision::ThresholdMode;

use crate::error::{CliError, Result};

/// A file, or stdout for `-` or no path.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write + Send>> {
    match path {
        None => Ok(Box::new(io::stdout())),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(io::stdout())),
        Some(p) => {
            let f = std::fs::File::create(p)
                .map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

pub fn parse_threshold(s: &str) -> std::result::Result<ThresholdMode, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(ThresholdMode::Automatic);
    }
    s.parse::<u8>()
        .map(ThresholdMode::Fixed)
        .map_err(|_| format!("expected `auto` or 0-255, got {s:?}"))
}
