use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const REPORT_FORMAT: &str = "bipolar-report/1";
pub const TOOL: &str = "bipolar";
const CHECKSUM_PREFIX: &str = "sha256:";

/// Writes every float with 17 significant digits in exponent form, which
/// reads back to the same bits.
struct Digits17<F>(F);

impl<F: Formatter> Formatter for Digits17<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write!(w, "{:.16e}", v as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn write_with<S: Serialize, F: Formatter>(x: &S, f: F) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(f));
    x.serialize(&mut ser).map_err(|e| CliError::Report(e.to_string()))?;
    String::from_utf8(buf).map_err(|e| CliError::Report(e.to_string()))
}

/// Single-line JSON with 17-digit floats.
pub fn to_compact_json<S: Serialize>(x: &S) -> Result<String, CliError> {
    write_with(x, CompactFormatter)
}

/// Indented JSON with 17-digit floats.
pub fn to_pretty_json<S: Serialize>(x: &S) -> Result<String, CliError> {
    write_with(x, PrettyFormatter::with_indent(b"  "))
}

/// `sha256:<hex>` of the compact serialization of `payload`.
pub fn checksum(payload: &Value) -> Result<String, CliError> {
    let digest = Sha256::digest(to_compact_json(payload)?.as_bytes());
    Ok(format!("{CHECKSUM_PREFIX}{}", hex::encode(digest)))
}

/// Self-describing report: everything needed to rerun it sits in `config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportEnvelope {
    pub format: String,
    pub tool: String,
    pub version: String,
    pub timestamp: String,
    pub config: RunConfig,
    /// `check`, `scan`, `mtw-scan`, `rigidity` or `filling`.
    pub payload_kind: String,
    /// Whether the payload carries violation evidence.
    pub evidence: bool,
    pub payload: Value,
    pub checksum: String,
}

impl ReportEnvelope {
    pub fn new<P: Serialize>(config: RunConfig, payload: &P, evidence: bool) -> Result<Self, CliError> {
        let payload = serde_json::to_value(payload).map_err(|e| CliError::Report(e.to_string()))?;
        Ok(ReportEnvelope {
            format: REPORT_FORMAT.into(),
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            payload_kind: config.command.name().into(),
            config,
            evidence,
            checksum: checksum(&payload)?,
            payload,
        })
    }

    /// Pretty JSON text, newline terminated.
    pub fn to_text(&self) -> Result<String, CliError> {
        let mut s = to_pretty_json(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses a report and validates its format tag and checksum.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let env: ReportEnvelope = serde_json::from_str(text).map_err(|e| CliError::Report(e.to_string()))?;
        if env.format != REPORT_FORMAT {
            return Err(CliError::Report(format!("unknown report format `{}`", env.format)));
        }
        let expected = checksum(&env.payload)?;
        if env.checksum != expected {
            return Err(CliError::Report(format!("checksum mismatch: file has {}, payload hashes to {expected}", env.checksum)));
        }
        Ok(env)
    }
}
