//! Frame sources: PGM/PNG/JPEG files, sorted directories and MJPEG streams.

mod decode;
mod mjpeg;
mod pgm;

use std::ffi::OsStr;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::vision::Frame;

pub use decode::{decode_image, luma_bt601};
pub use mjpeg::{parse_content_type, MjpegSource, MultipartReader, Part};
pub use pgm::{read_pgm, write_pgm};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("not a binary PGM (expected P5 magic)")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PGM maxval {0} (only 255)")]
    UnsupportedMaxval(u32),
    #[error("PGM raster truncated: expected {expected} bytes, got {got}")]
    TruncatedRaster { expected: usize, got: usize },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image: {0}")]
    CorruptImage(String),
    #[error("no files matching {pattern:?} in {dir}")]
    NoMatches { dir: PathBuf, pattern: String },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<IngestError>,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("could not connect: {0}")]
    ConnectError(String),
    #[error("response is not multipart/x-mixed-replace: {0:?}")]
    NotMultipart(String),
    #[error("stream protocol error: {0}")]
    ProtocolError(String),
    #[error("stream ended mid-frame: {0}")]
    TruncatedFrame(String),
    #[error("stream read failed: {0}")]
    Stream(#[source] io::Error),
    #[error("invalid source spec {0:?}")]
    BadSpec(String),
}

impl IngestError {
    /// Whether the source can keep producing frames after this error.
    pub fn is_fatal(&self) -> bool {
        !matches!(
            self,
            IngestError::CorruptImage(_)
                | IngestError::UnsupportedFormat(_)
                | IngestError::File { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageKind {
    Pgm,
    Png,
    Jpeg,
}

impl ImageKind {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" | "pnm" => Some(ImageKind::Pgm),
            "png" => Some(ImageKind::Png),
            "jpg" | "jpeg" => Some(ImageKind::Jpeg),
            _ => None,
        }
    }
}

pub fn read_frame_file(path: &Path) -> Result<Frame, IngestError> {
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes, ImageKind::from_path(path)).map_err(|e| IngestError::File {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectoryOptions {
    /// Seconds between synthesized timestamps.
    pub frame_interval: f64,
    /// Stop at the first unreadable file instead of skipping it.
    pub strict: bool,
}

impl Default for DirectoryOptions {
    fn default() -> Self {
        Self {
            frame_interval: 0.1,
            strict: false,
        }
    }
}

/// Files of a directory whose names match a glob, in byte order of name.
#[derive(Debug)]
pub struct DirectorySource {
    files: Vec<PathBuf>,
    next: usize,
    options: DirectoryOptions,
    skipped: Vec<(PathBuf, String)>,
    stopped: bool,
}

fn name_bytes(p: &Path) -> &[u8] {
    p.file_name()
        .map(OsStr::as_encoded_bytes)
        .unwrap_or_default()
}

impl DirectorySource {
    pub fn open(dir: &Path, pattern: &str, options: DirectoryOptions) -> Result<Self, IngestError> {
        let glob = glob::Pattern::new(pattern)
            .map_err(|e| IngestError::BadSpec(format!("{pattern}: {e}")))?;
        let entries = std::fs::read_dir(dir).map_err(|source| IngestError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut files = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|source| IngestError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
            let path = entry.path();
            if !path.is_file() {
                continue;
            }
            let matches = path
                .file_name()
                .and_then(OsStr::to_str)
                .is_some_and(|n| glob.matches(n));
            if matches {
                files.push(path);
            }
        }
        if files.is_empty() {
            return Err(IngestError::NoMatches {
                dir: dir.to_path_buf(),
                pattern: pattern.to_string(),
            });
        }
        files.sort_by(|a, b| name_bytes(a).cmp(name_bytes(b)));
        Ok(Self {
            files,
            next: 0,
            options,
            skipped: Vec::new(),
            stopped: false,
        })
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    /// Files skipped so far in non-strict mode, with the reason.
    pub fn skipped(&self) -> &[(PathBuf, String)] {
        &self.skipped
    }
}

impl Iterator for DirectorySource {
    type Item = Result<Frame, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.stopped && self.next < self.files.len() {
            let i = self.next;
            self.next += 1;
            let path = &self.files[i];
            match read_frame_file(path) {
                Ok(f) => return Some(Ok(f.with_timestamp(i as f64 * self.options.frame_interval))),
                Err(e) if self.options.strict => {
                    self.stopped = true;
                    return Some(Err(e));
                }
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    self.skipped.push((path.clone(), e.to_string()));
                }
            }
        }
        None
    }
}

/// Where frames come from, parsed from `dir:<path>`, `file:<path>` or an
/// `http(s)://` URL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceSpec {
    Directory { dir: PathBuf, pattern: String },
    File(PathBuf),
    Mjpeg(String),
}

pub const DEFAULT_DIR_PATTERN: &str = "*.{pgm,png,jpg,jpeg}";

impl SourceSpec {
    /// `dir:<path>` takes an optional glob on its last component, e.g.
    /// `dir:frames/*.pgm`. Without one, PGM, PNG and JPEG files are matched.
    pub fn parse(spec: &str) -> Result<Self, IngestError> {
        if spec.starts_with("http://") || spec.starts_with("https://") {
            return Ok(SourceSpec::Mjpeg(spec.to_string()));
        }
        if let Some(p) = spec.strip_prefix("file:") {
            if p.is_empty() {
                return Err(IngestError::BadSpec(spec.into()));
            }
            return Ok(SourceSpec::File(PathBuf::from(p)));
        }
        if let Some(p) = spec.strip_prefix("dir:") {
            if p.is_empty() {
                return Err(IngestError::BadSpec(spec.into()));
            }
            let path = Path::new(p);
            let last = path.file_name().and_then(OsStr::to_str).unwrap_or("");
            if last.contains(['*', '?', '[']) {
                let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
                let dir = if dir.as_os_str().is_empty() {
                    PathBuf::from(".")
                } else {
                    dir
                };
                return Ok(SourceSpec::Directory {
                    dir,
                    pattern: last.to_string(),
                });
            }
            return Ok(SourceSpec::Directory {
                dir: path.to_path_buf(),
                pattern: DEFAULT_DIR_PATTERN.to_string(),
            });
        }
        Err(IngestError::BadSpec(spec.into()))
    }

    pub fn open(&self, options: DirectoryOptions) -> Result<FrameSource, IngestError> {
        Ok(match self {
            SourceSpec::Directory { dir, pattern } => {
                if pattern == DEFAULT_DIR_PATTERN {
                    FrameSource::Directory(open_default_dir(dir, options)?)
                } else {
                    FrameSource::Directory(DirectorySource::open(dir, pattern, options)?)
                }
            }
            SourceSpec::File(p) => FrameSource::File(Some(read_frame_file(p)?.with_timestamp(0.0))),
            SourceSpec::Mjpeg(url) => FrameSource::Mjpeg(Box::new(MjpegSource::connect(url)?)),
        })
    }
}

/// `glob::Pattern` has no brace alternation; match the image extensions by hand.
fn open_default_dir(dir: &Path, options: DirectoryOptions) -> Result<DirectorySource, IngestError> {
    let mut src = DirectorySource::open(dir, "*", options).map_err(|e| match e {
        IngestError::NoMatches { dir, .. } => IngestError::NoMatches {
            dir,
            pattern: DEFAULT_DIR_PATTERN.into(),
        },
        other => other,
    })?;
    src.files.retain(|p| ImageKind::from_path(p).is_some());
    if src.files.is_empty() {
        return Err(IngestError::NoMatches {
            dir: dir.to_path_buf(),
            pattern: DEFAULT_DIR_PATTERN.into(),
        });
    }
    Ok(src)
}

/// A single-consumer sequence of frames.
pub enum FrameSource {
    Directory(DirectorySource),
    File(Option<Frame>),
    Mjpeg(Box<MjpegSource<reqwest::blocking::Response>>),
}

impl Iterator for FrameSource {
    type Item = Result<Frame, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            FrameSource::Directory(d) => d.next(),
            FrameSource::File(f) => f.take().map(Ok),
            FrameSource::Mjpeg(m) => m.next(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        assert_eq!(
            SourceSpec::parse("dir:frames/*.pgm").unwrap(),
            SourceSpec::Directory {
                dir: "frames".into(),
                pattern: "*.pgm".into()
            }
        );
        assert_eq!(
            SourceSpec::parse("dir:frames").unwrap(),
            SourceSpec::Directory {
                dir: "frames".into(),
                pattern: DEFAULT_DIR_PATTERN.into()
            }
        );
        assert_eq!(
            SourceSpec::parse("file:a.pgm").unwrap(),
            SourceSpec::File("a.pgm".into())
        );
        assert_eq!(
            SourceSpec::parse("http://cam/stream").unwrap(),
            SourceSpec::Mjpeg("http://cam/stream".into())
        );
        assert!(SourceSpec::parse("ftp://x").is_err());
        assert!(SourceSpec::parse("dir:").is_err());
    }

    #[test]
    fn image_kind_from_extension() {
        assert_eq!(
            ImageKind::from_path(Path::new("a/B.JPG")),
            Some(ImageKind::Jpeg)
        );
        assert_eq!(
            ImageKind::from_path(Path::new("x.pgm")),
            Some(ImageKind::Pgm)
        );
        assert_eq!(ImageKind::from_path(Path::new("x.txt")), None);
    }
}
