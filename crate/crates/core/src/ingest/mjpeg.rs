//! `multipart/x-mixed-replace` parsing and an MJPEG-over-HTTP frame source.

use std::io::{self, Read};
use std::time::{Duration, Instant};

use super::{decode_image, ImageKind, IngestError};
use crate::vision::Frame;

/// One body part: its headers and raw payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Part {
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl Part {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// Extracts the boundary from a `multipart/x-mixed-replace` content type.
pub fn parse_content_type(content_type: &str) -> Result<String, IngestError> {
    let mut pieces = content_type.split(';');
    let mime = pieces.next().unwrap_or("").trim();
    if !mime.eq_ignore_ascii_case("multipart/x-mixed-replace") {
        return Err(IngestError::NotMultipart(content_type.to_string()));
    }
    for param in pieces {
        if let Some((k, v)) = param.split_once('=') {
            if k.trim().eq_ignore_ascii_case("boundary") {
                let v = v.trim().trim_matches('"');
                let v = v.strip_prefix("--").unwrap_or(v);
                if v.is_empty() {
                    break;
                }
                return Ok(v.to_string());
            }
        }
    }
    Err(IngestError::ProtocolError(format!(
        "no boundary parameter in {content_type:?}"
    )))
}

const CHUNK: usize = 16 * 1024;
const MAX_HEADER_LINE: usize = 8 * 1024;

/// Incremental multipart reader. Delimiter lines may be spelled
/// `--boundary` or bare `boundary`; bodies are read by `Content-Length`
/// when given, otherwise up to the line break before the next delimiter.
pub struct MultipartReader<R> {
    reader: R,
    boundary: Vec<u8>,
    buf: Vec<u8>,
    pos: usize,
    eof: bool,
    done: bool,
}

enum Fill {
    More,
    Eof,
}

impl<R: Read> MultipartReader<R> {
    pub fn new(reader: R, boundary: &str) -> Self {
        let b = boundary.strip_prefix("--").unwrap_or(boundary);
        Self {
            reader,
            boundary: b.as_bytes().to_vec(),
            buf: Vec::new(),
            pos: 0,
            eof: false,
            done: false,
        }
    }

    fn fill(&mut self) -> io::Result<Fill> {
        if self.eof {
            return Ok(Fill::Eof);
        }
        if self.pos > CHUNK && self.pos * 2 > self.buf.len() {
            self.buf.drain(..self.pos);
            self.pos = 0;
        }
        let old = self.buf.len();
        self.buf.resize(old + CHUNK, 0);
        let n = loop {
            match self.reader.read(&mut self.buf[old..]) {
                Ok(n) => break n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => {
                    self.buf.truncate(old);
                    return Err(e);
                }
            }
        };
        self.buf.truncate(old + n);
        if n == 0 {
            self.eof = true;
            return Ok(Fill::Eof);
        }
        Ok(Fill::More)
    }

    /// Next line without its terminator, or `None` at clean EOF.
    fn read_line(&mut self) -> io::Result<Option<Vec<u8>>> {
        loop {
            if let Some(i) = self.buf[self.pos..].iter().position(|&c| c == b'\n') {
                let mut line = self.buf[self.pos..self.pos + i].to_vec();
                self.pos += i + 1;
                if line.last() == Some(&b'\r') {
                    line.pop();
                }
                return Ok(Some(line));
            }
            if self.buf.len() - self.pos > MAX_HEADER_LINE {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    "header line too long",
                ));
            }
            if let Fill::Eof = self.fill()? {
                if self.pos == self.buf.len() {
                    return Ok(None);
                }
                let line = self.buf[self.pos..].to_vec();
                self.pos = self.buf.len();
                return Ok(Some(line));
            }
        }
    }

    /// `Some(true)` for a closing delimiter, `Some(false)` for an opening one.
    fn delimiter_kind(&self, line: &[u8]) -> Option<bool> {
        let line = trim_end(line);
        let rest = line
            .strip_prefix(b"--")
            .and_then(|l| l.strip_prefix(self.boundary.as_slice()))
            .or_else(|| line.strip_prefix(self.boundary.as_slice()))?;
        match rest {
            b"" => Some(false),
            b"--" => Some(true),
            _ => None,
        }
    }

    /// Finds the start of the line break preceding the next delimiter at or
    /// after `from`, returning `(body_end, delimiter_line_start)`.
    fn find_delimiter(&self, from: usize) -> Option<(usize, usize)> {
        let hay = &self.buf[from..];
        let mut i = 0;
        while let Some(off) = hay[i..].iter().position(|&c| c == b'\n') {
            let nl = i + off;
            let line_start = nl + 1;
            let tail = &hay[line_start..];
            let matched = [b"--".as_slice(), b""].iter().any(|prefix| {
                let need = prefix.len() + self.boundary.len();
                tail.len() > need
                    && tail.starts_with(prefix)
                    && tail[prefix.len()..].starts_with(&self.boundary)
                    && matches!(tail[need], b'\r' | b'\n' | b'-' | b' ' | b'\t')
            });
            if matched {
                let body_end = if nl > 0 && hay[nl - 1] == b'\r' {
                    nl - 1
                } else {
                    nl
                };
                return Some((from + body_end, from + line_start));
            }
            i = nl + 1;
        }
        None
    }

    fn truncated(e: io::Error) -> IngestError {
        IngestError::TruncatedFrame(e.to_string())
    }

    /// Reads the next part. `Ok(None)` after the closing delimiter or at EOF
    /// between parts; `TruncatedFrame` if the stream ends inside a part.
    pub fn next_part(&mut self) -> Result<Option<Part>, IngestError> {
        if self.done {
            return Ok(None);
        }
        // Preamble, blank lines and the line break after the previous body.
        loop {
            match self.read_line().map_err(IngestError::Stream)? {
                None => {
                    self.done = true;
                    return Ok(None);
                }
                Some(line) => match self.delimiter_kind(&line) {
                    Some(true) => {
                        self.done = true;
                        return Ok(None);
                    }
                    Some(false) => break,
                    None => continue,
                },
            }
        }

        let mut headers = Vec::new();
        loop {
            let line = match self.read_line().map_err(Self::truncated)? {
                None => {
                    self.done = true;
                    return Err(IngestError::TruncatedFrame(
                        "stream ended in part headers".into(),
                    ));
                }
                Some(l) => l,
            };
            if line.is_empty() {
                break;
            }
            let text = String::from_utf8_lossy(&line);
            let (k, v) = text.split_once(':').ok_or_else(|| {
                self.done = true;
                IngestError::ProtocolError(format!("malformed part header {text:?}"))
            })?;
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }

        let length = headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
            .map(|(_, v)| {
                v.parse::<usize>()
                    .map_err(|_| IngestError::ProtocolError(format!("bad Content-Length {v:?}")))
            })
            .transpose()
            .inspect_err(|_| self.done = true)?;

        let body = match length {
            Some(n) => {
                while self.buf.len() - self.pos < n {
                    if let Fill::Eof = self.fill().map_err(Self::truncated)? {
                        self.done = true;
                        return Err(IngestError::TruncatedFrame(format!(
                            "expected {n} body bytes, got {}",
                            self.buf.len() - self.pos
                        )));
                    }
                }
                let body = self.buf[self.pos..self.pos + n].to_vec();
                self.pos += n;
                body
            }
            None => {
                let mut search_from = self.pos;
                loop {
                    // A body may be empty, so the break before the delimiter
                    // can sit right at the start; look one byte back.
                    let from = search_from
                        .saturating_sub(2)
                        .max(self.pos.saturating_sub(1));
                    if let Some((end, _)) = self.find_delimiter(from) {
                        let end = end.max(self.pos);
                        let body = self.buf[self.pos..end].to_vec();
                        self.pos = end;
                        break body;
                    }
                    search_from = self.buf.len().saturating_sub(self.boundary.len() + 4);
                    if let Fill::Eof = self.fill().map_err(Self::truncated)? {
                        self.done = true;
                        return Err(IngestError::TruncatedFrame(
                            "stream ended before the next boundary".into(),
                        ));
                    }
                }
            }
        };
        Ok(Some(Part { headers, body }))
    }

    /// Next JPEG payload, checking the part's content type.
    pub fn next_jpeg(&mut self) -> Result<Option<Vec<u8>>, IngestError> {
        let Some(part) = self.next_part()? else {
            return Ok(None);
        };
        match part.header("content-type") {
            Some(ct)
                if ct
                    .split(';')
                    .next()
                    .is_some_and(|m| m.trim().eq_ignore_ascii_case("image/jpeg")) =>
            {
                Ok(Some(part.body))
            }
            other => Err(IngestError::ProtocolError(format!(
                "part content type {other:?}, expected image/jpeg"
            ))),
        }
    }
}

fn trim_end(line: &[u8]) -> &[u8] {
    let end = line
        .iter()
        .rposition(|c| !c.is_ascii_whitespace())
        .map_or(0, |i| i + 1);
    &line[..end]
}

/// Frames decoded from an MJPEG stream, stamped with receipt time.
pub struct MjpegSource<R> {
    parts: MultipartReader<R>,
    started: Instant,
    finished: bool,
}

impl<R: Read> MjpegSource<R> {
    pub fn from_reader(reader: R, boundary: &str) -> Self {
        Self {
            parts: MultipartReader::new(reader, boundary),
            started: Instant::now(),
            finished: false,
        }
    }

    pub fn next_payload(&mut self) -> Result<Option<Vec<u8>>, IngestError> {
        self.parts.next_jpeg()
    }
}

impl MjpegSource<reqwest::blocking::Response> {
    /// Issues the GET and validates the response type.
    pub fn connect(url: &str) -> Result<Self, IngestError> {
        let client = reqwest::blocking::Client::builder()
            .connect_timeout(Duration::from_secs(10))
            .timeout(None)
            .build()
            .map_err(|e| IngestError::ConnectError(e.to_string()))?;
        let resp = client
            .get(url)
            .send()
            .map_err(|e| IngestError::ConnectError(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(IngestError::ConnectError(format!(
                "HTTP status {}",
                resp.status()
            )));
        }
        let ct = resp
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
            .to_string();
        let boundary = parse_content_type(&ct)?;
        Ok(Self::from_reader(resp, &boundary))
    }
}

impl<R: Read> Iterator for MjpegSource<R> {
    type Item = Result<Frame, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        match self.parts.next_jpeg() {
            Ok(Some(bytes)) => {
                let ts = self.started.elapsed().as_secs_f64();
                Some(decode_image(&bytes, Some(ImageKind::Jpeg)).map(|f| f.with_timestamp(ts)))
            }
            Ok(None) => {
                self.finished = true;
                None
            }
            Err(e) => {
                if e.is_fatal() {
                    self.finished = true;
                }
                Some(Err(e))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream(parts: &[&[u8]], boundary: &str, with_length: bool) -> Vec<u8> {
        let mut out = Vec::new();
        for p in parts {
            out.extend_from_slice(
                format!("--{boundary}\r\nContent-Type: image/jpeg\r\n").as_bytes(),
            );
            if with_length {
                out.extend_from_slice(format!("Content-Length: {}\r\n", p.len()).as_bytes());
            }
            out.extend_from_slice(b"\r\n");
            out.extend_from_slice(p);
            out.extend_from_slice(b"\r\n");
        }
        out.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
        out
    }

    fn collect(bytes: &[u8], boundary: &str) -> (Vec<Vec<u8>>, Option<IngestError>) {
        let mut r = MultipartReader::new(bytes, boundary);
        let mut got = Vec::new();
        loop {
            match r.next_jpeg() {
                Ok(Some(b)) => got.push(b),
                Ok(None) => return (got, None),
                Err(e) => return (got, Some(e)),
            }
        }
    }

    #[test]
    fn content_type_parsing() {
        assert_eq!(
            parse_content_type("multipart/x-mixed-replace; boundary=frame").unwrap(),
            "frame"
        );
        assert_eq!(
            parse_content_type("Multipart/X-Mixed-Replace;boundary=\"--myb\"").unwrap(),
            "myb"
        );
        assert!(matches!(
            parse_content_type("text/html"),
            Err(IngestError::NotMultipart(_))
        ));
        assert!(matches!(
            parse_content_type("multipart/x-mixed-replace"),
            Err(IngestError::ProtocolError(_))
        ));
    }

    #[test]
    fn both_length_modes() {
        let parts: [&[u8]; 3] = [b"\xff\xd8abc\xff\xd9", b"x", b"\r\n--notit\r\nzz"];
        for with_length in [true, false] {
            let bytes = stream(&parts, "frame", with_length);
            let (got, err) = collect(&bytes, "frame");
            assert!(err.is_none(), "{err:?}");
            assert_eq!(got, parts.iter().map(|p| p.to_vec()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn closing_delimiter_and_preamble() {
        let mut bytes = b"preamble text\r\n\r\n".to_vec();
        bytes.extend(stream(&[b"one", b"two"], "b", true));
        bytes.extend_from_slice(b"trailing junk");
        let (got, err) = collect(&bytes, "--b");
        assert!(err.is_none());
        assert_eq!(got, vec![b"one".to_vec(), b"two".to_vec()]);
    }

    #[test]
    fn bare_boundary_spelling() {
        let bytes = b"\r\nframe\r\nContent-Type: image/jpeg\r\n\r\nAAA\r\nframe\r\nContent-Type: image/jpeg\r\n\r\nBB\r\nframe--\r\n";
        let (got, err) = collect(bytes, "frame");
        assert!(err.is_none());
        assert_eq!(got, vec![b"AAA".to_vec(), b"BB".to_vec()]);
    }

    #[test]
    fn truncation_surfaces_after_complete_parts() {
        for with_length in [true, false] {
            let full = stream(&[b"first", b"second", b"third-part"], "f", with_length);
            let mid = full.windows(5).position(|w| w == b"third").unwrap() + 3;
            let cut = &full[..mid];
            let (got, err) = collect(cut, "f");
            assert_eq!(got, vec![b"first".to_vec(), b"second".to_vec()]);
            assert!(
                matches!(err, Some(IngestError::TruncatedFrame(_))),
                "{err:?}"
            );
        }
    }

    #[test]
    fn malformed_headers() {
        let bytes = b"--f\r\nthis is not a header\r\n\r\nbody\r\n--f--\r\n";
        assert!(matches!(
            collect(bytes, "f").1,
            Some(IngestError::ProtocolError(_))
        ));
        let bytes = b"--f\r\nContent-Type: text/plain\r\n\r\nbody\r\n--f--\r\n";
        assert!(matches!(
            collect(bytes, "f").1,
            Some(IngestError::ProtocolError(_))
        ));
    }

    /// Reader that hands out at most `n` bytes per call.
    struct Trickle<'a>(&'a [u8], usize);

    impl Read for Trickle<'_> {
        fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
            let n = self.1.min(out.len()).min(self.0.len());
            out[..n].copy_from_slice(&self.0[..n]);
            self.0 = &self.0[n..];
            Ok(n)
        }
    }

    proptest! {
        #[test]
        fn payloads_byte_exact(
            bodies in prop::collection::vec(prop::collection::vec(any::<u8>(), 1..300), 1..6),
            with_length in any::<bool>(),
            chunk in 1usize..64,
        ) {
            // Scan mode cannot carry a body that itself contains a delimiter line.
            let boundary = "Zq9xBoundary";
            let refs: Vec<&[u8]> = bodies.iter().map(|b| b.as_slice()).collect();
            let bytes = stream(&refs, boundary, with_length);
            let mut r = MultipartReader::new(Trickle(&bytes, chunk), boundary);
            let mut got = Vec::new();
            while let Some(b) = r.next_jpeg().unwrap() {
                got.push(b);
            }
            prop_assert_eq!(got, bodies);
        }
    }
}
