//! Verification records and their CSV / JSON-lines serialization.
//!
//! Floats are written with 17 significant digits so that a JSONL record
//! parses back to bit-identical values. Non-finite values are written as the
//! strings `"inf"`, `"-inf"` and `"nan"`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::McEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Not enough information to decide (e.g. too few tail samples).
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    #[serde(with = "float_map")]
    pub inputs: BTreeMap<String, f64>,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
    #[serde(with = "opt_float")]
    pub analytic: Option<f64>,
    #[serde(with = "opt_float")]
    pub oracle: Option<f64>,
    pub mc: Option<McEstimate>,
    pub tolerance_spec: String,
    pub passed: bool,
    pub status: Status,
    #[serde(with = "opt_float_map")]
    pub witness: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>, tolerance_spec: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            inputs: BTreeMap::new(),
            labels: BTreeMap::new(),
            analytic: None,
            oracle: None,
            mc: None,
            tolerance_spec: tolerance_spec.into(),
            passed: false,
            status: Status::Fail,
            witness: None,
            notes: Vec::new(),
        }
    }

    pub fn input(mut self, key: &str, value: f64) -> Self {
        self.inputs.insert(key.to_string(), value);
        self
    }

    pub fn label(mut self, key: &str, value: impl Into<String>) -> Self {
        self.labels.insert(key.to_string(), value.into());
        self
    }

    pub fn set_status(&mut self, status: Status) {
        self.status = status;
        self.passed = status == Status::Pass;
    }

    pub fn set_passed(&mut self, passed: bool) {
        self.set_status(if passed { Status::Pass } else { Status::Fail });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// One-line human summary used by the CLI and the acceptance runner.
    pub fn summary_line(&self) -> String {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        };
        let mut s = format!("{tag} {}", self.name);
        if let Some(a) = self.analytic {
            s.push_str(&format!(" analytic={a:.6e}"));
        }
        if let Some(o) = self.oracle {
            s.push_str(&format!(" oracle={o:.6e}"));
        }
        if let Some(mc) = &self.mc {
            s.push_str(&format!(" mc={:.6e}±{:.2e}", mc.mean, mc.std_error));
        }
        s.push_str(&format!(" [{}]", self.tolerance_spec));
        s
    }

    pub fn to_json_line(&self) -> Result<String> {
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits);
        self.serialize(&mut ser)
            .map_err(|e| Error::Invalid(format!("serialize report: {e}")))?;
        String::from_utf8(buf).map_err(|e| Error::Invalid(e.to_string()))
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::Invalid(format!("parse report: {e}")))
    }
}

/// Output format of [`write_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

pub const CSV_COLUMNS: [&str; 11] = [
    "name", "delta", "x", "T", "n", "dt", "analytic", "oracle", "mc_mean", "mc_se", "passed",
];

/// 17 significant digits; empty for absent, `inf`/`-inf`/`nan` for non-finite.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_row(r: &VerificationReport) -> String {
    let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
    let input = |k: &str| opt(r.inputs.get(k).copied());
    [
        csv_field(&r.name),
        input("delta"),
        input("x"),
        input("T"),
        r.inputs
            .get("n")
            .map(|n| format!("{}", *n as u64))
            .unwrap_or_default(),
        input("dt"),
        opt(r.analytic),
        opt(r.oracle),
        opt(r.mc.as_ref().map(|m| m.mean)),
        opt(r.mc.as_ref().map(|m| m.std_error)),
        r.passed.to_string(),
    ]
    .join(",")
}

pub fn render(reports: &[VerificationReport], format: Format) -> Result<String> {
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str(&CSV_COLUMNS.join(","));
            out.push('\n');
            for r in reports {
                out.push_str(&csv_row(r));
                out.push('\n');
            }
        }
        Format::Jsonl => {
            for r in reports {
                out.push_str(&r.to_json_line()?);
                out.push('\n');
            }
        }
    }
    Ok(out)
}

/// Write `reports` to `out_path` in the given format.
pub fn write_report(reports: &[VerificationReport], format: Format, out_path: &Path) -> Result<()> {
    let text = render(reports, format)?;
    let mut f = std::fs::File::create(out_path)
        .map_err(|e| Error::Io(format!("{}: {e}", out_path.display())))?;
    f.write_all(text.as_bytes())
        .map_err(|e| Error::Io(format!("{}: {e}", out_path.display())))?;
    Ok(())
}

struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        write!(writer, "{value:.8e}")
    }
}

/// Float that may be non-finite: a JSON number, or one of the strings `inf`, `-inf`, `nan`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Wire {
    Num(f64),
    Text(String),
}

impl Wire {
    fn from_f64(v: f64) -> Self {
        if v.is_finite() {
            Wire::Num(v)
        } else {
            Wire::Text(fmt_float(v))
        }
    }

    fn into_f64<E: serde::de::Error>(self) -> std::result::Result<f64, E> {
        match self {
            Wire::Num(v) => Ok(v),
            Wire::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("not a float: {other}"))),
            },
        }
    }
}

pub(crate) mod float {
    use super::Wire;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        Wire::from_f64(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Wire::deserialize(d)?.into_f64()
    }
}

mod opt_float {
    use super::Wire;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(Wire::from_f64).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<Wire>::deserialize(d)?.map(Wire::into_f64).transpose()
    }
}

mod float_map {
    use super::Wire;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        m.iter()
            .map(|(k, v)| (k, Wire::from_f64(*v)))
            .collect::<BTreeMap<_, _>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        BTreeMap::<String, Wire>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| v.into_f64().map(|f| (k, f)))
            .collect()
    }
}

mod opt_float_map {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    #[serde(transparent)]
    struct M(#[serde(with = "super::float_map")] BTreeMap<String, f64>);

    pub fn serialize<S: Serializer>(
        m: &Option<BTreeMap<String, f64>>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        m.clone().map(M).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<BTreeMap<String, f64>>, D::Error> {
        Ok(Option::<M>::deserialize(d)?.map(|m| m.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VerificationReport {
        let mut r = VerificationReport::new("bel delta=2", "max(3 SE, 2%)")
            .input("delta", 2.0)
            .input("x", 1.0)
            .input("T", 0.5)
            .input("n", 100_000.0)
            .input("dt", 1e-3)
            .input("p", f64::INFINITY)
            .label("F", "exp_neg_y2");
        r.analytic = Some(-0.303_265_329_856_316_7);
        r.oracle = Some(0.1 + 0.2);
        r.mc = Some(McEstimate {
            mean: -0.301_234_567_890_123_4,
            std_error: 1.234_567_890_123_456_7e-3,
            n: 100_000,
            seed: u64::MAX,
        });
        r.witness = Some([("y".to_string(), f64::NEG_INFINITY)].into_iter().collect());
        r.note("note with \"quotes\", commas");
        r.set_passed(true);
        r
    }

    #[test]
    fn jsonl_round_trip_is_bit_exact() {
        let r = sample();
        let line = r.to_json_line().unwrap();
        assert!(!line.contains('\n'));
        let back = VerificationReport::from_json_line(&line).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.oracle.unwrap().to_bits(), (0.1f64 + 0.2).to_bits());
        assert!(line.contains("3.0000000000000004e-1"));
    }

    #[test]
    fn empty_csv_is_header_only() {
        let text = render(&[], Format::Csv).unwrap();
        assert_eq!(text, "name,delta,x,T,n,dt,analytic,oracle,mc_mean,mc_se,passed\n");
    }

    #[test]
    fn csv_passed_column_and_floats() {
        let text = render(&[sample()], Format::Csv).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert!(row.ends_with(",true"));
        assert!(row.starts_with("bel delta=2,2.0000000000000000e0,1.0000000000000000e0,5.0000000000000000e-1,100000,"));
        assert_eq!(row.split(',').count(), 11);
    }
}
