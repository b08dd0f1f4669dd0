//! Frequency traces and the line-oriented `.ftrace` file format.
//!
//! ```text
//! #ftrace v1
//! #interval_ms=10
//! #device=comet_lake
//! #label=facebook.com
//! 0,800000
//! 1,1600000
//! ```
//!
//! Body indices start at the trace's `start_index` and are contiguous.
//! Header values are percent-encoded so they never contain `,`, `=`, `%`
//! or line breaks.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &str = "#ftrace v1";
pub const EXTENSION: &str = "ftrace";

const HEADER_SET: &AsciiSet = &CONTROLS.add(b'%').add(b',').add(b'=').add(b'#').add(b' ');

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line 1: missing `{MAGIC}` magic line")]
    MissingMagic,
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: malformed sample `{text}`")]
    BadSample { line: usize, text: String },
    #[error("line {line}: expected sample index {expected}, found {found}")]
    IndexGap { line: usize, expected: u64, found: u64 },
    #[error("trace has no samples")]
    Empty,
    #[error("invalid trace: {0}")]
    Invalid(String),
}

/// Fixed-interval sequence of frequency readings in kHz.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTrace {
    pub samples: Vec<u32>,
    pub interval_ms: u32,
    pub label: Option<String>,
    pub device: String,
    pub start_index: u64,
}

impl FrequencyTrace {
    pub fn new(samples: Vec<u32>, interval_ms: u32, device: impl Into<String>) -> Result<Self, TraceError> {
        let t = FrequencyTrace { samples, interval_ms, label: None, device: device.into(), start_index: 0 };
        t.validate()?;
        Ok(t)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        if self.samples.is_empty() {
            return Err(TraceError::Empty);
        }
        if self.interval_ms == 0 {
            return Err(TraceError::Invalid("interval_ms must be >= 1".into()));
        }
        if self.device.is_empty() {
            return Err(TraceError::Invalid("device must be non-empty".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_ms(&self) -> u64 {
        self.samples.len() as u64 * self.interval_ms as u64
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(16 * self.samples.len() + 64);
        out.push_str(MAGIC);
        out.push('\n');
        out.push_str(&format!("#interval_ms={}\n", self.interval_ms));
        out.push_str(&format!("#device={}\n", encode(&self.device)));
        if let Some(label) = &self.label {
            out.push_str(&format!("#label={}\n", encode(label)));
        }
        for (i, s) in self.samples.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.start_index + i as u64, s));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            _ => return Err(TraceError::MissingMagic),
        }
        let mut interval_ms = None;
        let mut device = None;
        let mut label = None;
        let mut samples = Vec::new();
        let mut start_index = 0u64;
        for (line, raw) in lines {
            if raw.is_empty() {
                continue;
            }
            if let Some(header) = raw.strip_prefix('#') {
                if !samples.is_empty() {
                    return Err(malformed(line, "header after body"));
                }
                let (key, value) = header.split_once('=').ok_or_else(|| malformed(line, "expected key=value"))?;
                match key {
                    "interval_ms" => {
                        let v: u32 = value.parse().map_err(|_| malformed(line, "interval_ms is not an integer"))?;
                        if v == 0 {
                            return Err(malformed(line, "interval_ms must be >= 1"));
                        }
                        interval_ms = Some(v);
                    }
                    "device" => device = Some(decode(value, line)?),
                    "label" => label = Some(decode(value, line)?),
                    other => return Err(malformed(line, &format!("unknown key `{other}`"))),
                }
                continue;
            }
            let bad = || TraceError::BadSample { line, text: raw.to_string() };
            let (idx, freq) = raw.split_once(',').ok_or_else(bad)?;
            let idx: u64 = idx.parse().map_err(|_| bad())?;
            let freq: u32 = freq.parse().map_err(|_| bad())?;
            if samples.is_empty() {
                start_index = idx;
            } else {
                let expected = start_index + samples.len() as u64;
                if idx != expected {
                    return Err(TraceError::IndexGap { line, expected, found: idx });
                }
            }
            samples.push(freq);
        }
        let interval_ms = interval_ms.ok_or_else(|| malformed(1, "missing interval_ms"))?;
        let device = device.ok_or_else(|| malformed(1, "missing device"))?;
        if samples.is_empty() {
            return Err(TraceError::Empty);
        }
        Ok(FrequencyTrace { samples, interval_ms, label, device, start_index })
    }
}

fn malformed(line: usize, reason: &str) -> TraceError {
    TraceError::MalformedHeader { line, reason: reason.to_string() }
}

pub fn encode(s: &str) -> String {
    utf8_percent_encode(s, HEADER_SET).to_string()
}

fn decode(s: &str, line: usize) -> Result<String, TraceError> {
    percent_decode_str(s)
        .decode_utf8()
        .map(|c| c.into_owned())
        .map_err(|_| malformed(line, "value is not valid UTF-8 after decoding"))
}

pub fn load_trace(path: &Path) -> Result<FrequencyTrace, TraceError> {
    let text = fs::read_to_string(path).map_err(|source| TraceError::Io { path: path.to_path_buf(), source })?;
    FrequencyTrace::parse(&text)
}

/// Writes the trace through a temporary file in the same directory and
/// renames it over `path`, so readers never observe a partial file.
pub fn save_trace(trace: &FrequencyTrace, path: &Path) -> Result<(), TraceError> {
    trace.validate()?;
    let io = |source| TraceError::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(trace.to_text().as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_file() {
        let t = FrequencyTrace::parse("#ftrace v1\n#interval_ms=10\n#device=x\n0,800000\n1,1600000\n").unwrap();
        assert_eq!(t.samples, vec![800_000, 1_600_000]);
        assert_eq!(t.interval_ms, 10);
        assert_eq!(t.label, None);
    }

    #[test]
    fn first_data_line() {
        let t = FrequencyTrace::new(vec![800_000], 10, "comet_lake").unwrap();
        let text = t.to_text();
        let first = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(first, "0,800000");
    }

    #[test]
    fn non_numeric_sample_names_line() {
        let err = FrequencyTrace::parse("#ftrace v1\n#interval_ms=10\n#device=x\n0,800000\nabc\n").unwrap_err();
        assert!(matches!(err, TraceError::BadSample { line: 5, .. }), "{err}");
        let err = FrequencyTrace::parse("#ftrace v1\n#interval_ms=10\n#device=x\n0,abc\n").unwrap_err();
        assert!(matches!(err, TraceError::BadSample { line: 4, .. }));
    }

    #[test]
    fn header_errors() {
        assert!(matches!(FrequencyTrace::parse("0,1\n"), Err(TraceError::MissingMagic)));
        let err = FrequencyTrace::parse("#ftrace v1\n#interval_ms\n").unwrap_err();
        assert!(matches!(err, TraceError::MalformedHeader { line: 2, .. }));
        let err = FrequencyTrace::parse("#ftrace v1\n#interval_ms=0\n#device=x\n0,1\n").unwrap_err();
        assert!(matches!(err, TraceError::MalformedHeader { line: 2, .. }));
        let err = FrequencyTrace::parse("#ftrace v1\n#interval_ms=10\n#device=x\n").unwrap_err();
        assert!(matches!(err, TraceError::Empty));
        let err = FrequencyTrace::parse("#ftrace v1\n#interval_ms=10\n#device=x\n0,1\n2,1\n").unwrap_err();
        assert!(matches!(err, TraceError::IndexGap { line: 5, expected: 1, found: 2 }));
    }

    #[test]
    fn comma_label_is_encoded() {
        let t = FrequencyTrace::new(vec![1, 2], 10, "dev").unwrap().with_label("a,b=c%d\né");
        let text = t.to_text();
        assert!(text.contains("#label=a%2Cb%3Dc%25d%0A%C3%A9\n"), "{text}");
        assert_eq!(FrequencyTrace::parse(&text).unwrap(), t);
    }

    #[test]
    fn save_replaces_existing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ftrace");
        fs::write(&path, "garbage").unwrap();
        let t = FrequencyTrace::new(vec![800_000, 900_000], 20, "cortex_a73").unwrap();
        save_trace(&t, &path).unwrap();
        assert_eq!(load_trace(&path).unwrap(), t);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn unwritable_path() {
        let t = FrequencyTrace::new(vec![1], 1, "d").unwrap();
        let err = save_trace(&t, Path::new("/nonexistent-dir/x/t.ftrace")).unwrap_err();
        assert!(matches!(err, TraceError::Io { .. }));
    }

    fn arb_trace() -> impl Strategy<Value = FrequencyTrace> {
        (
            prop::collection::vec(any::<u32>(), 1..64),
            1u32..1000,
            proptest::option::of(any::<String>()),
            "[a-z0-9_]{1,12}",
            0u64..1_000_000,
        )
            .prop_map(|(samples, interval_ms, label, device, start_index)| FrequencyTrace {
                samples,
                interval_ms,
                label,
                device,
                start_index,
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn save_load_round_trip(t in arb_trace()) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("t.ftrace");
            save_trace(&t, &path).unwrap();
            prop_assert_eq!(load_trace(&path).unwrap(), t);
        }
    }
}
