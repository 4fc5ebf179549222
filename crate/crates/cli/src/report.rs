//! Run reports and their JSON, text and CSV renderings.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

/// How a number was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Outward-rounded interval enclosure; the value is a certified bound.
    Enclosure,
    /// Sampled on a finite grid.
    Grid,
    MonteCarlo,
    /// Closed form or exact arithmetic on the inputs.
    Exact,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Enclosure => "enclosure",
            Method::Grid => "grid",
            Method::MonteCarlo => "monte-carlo",
            Method::Exact => "exact",
        }
    }
}

/// One numeric statement of a report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Claim {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub method: Method,
}

pub fn claim(name: &str, value: f64, tolerance: f64, method: Method) -> Claim {
    Claim {
        name: name.to_owned(),
        value,
        tolerance,
        method,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub tool_version: String,
    pub input: InputDigest,
    pub parameters: Value,
    pub verdict: String,
    pub exit_code: i32,
    pub evidence: Vec<Claim>,
    pub detail: Value,
    /// Seconds; only filled with `--timing` so reports stay reproducible.
    pub wall_time: Option<f64>,
}

/// Pretty JSON with every float printed to 17 significant digits.
struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{:.16e}", value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report serializes");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

impl RunReport {
    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {}\ninput: {} (sha256 {})\nverdict: {}\n",
            self.command, self.tool_version, self.input.path, self.input.sha256, self.verdict
        );
        for c in &self.evidence {
            s += &format!(
                "  {:<28} {:<24} tol {:.3e} ({})\n",
                c.name,
                format!("{:.17e}", c.value),
                c.tolerance,
                c.method.as_str()
            );
        }
        if let Some(t) = self.wall_time {
            s += &format!("wall time: {t:.3} s\n");
        }
        s
    }

    /// Evidence as `name,value,tolerance,method`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "value", "tolerance", "method"])
            .expect("in-memory write");
        for c in &self.evidence {
            w.write_record([
                c.name.clone(),
                format!("{:.16e}", c.value),
                format!("{:.16e}", c.tolerance),
                c.method.as_str().to_owned(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("CSV is UTF-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        RunReport {
            command: "validate".into(),
            tool_version: "0.1.0".into(),
            input: InputDigest {
                path: "a.json".into(),
                sha256: "00".into(),
            },
            parameters: serde_json::json!({"depth": 3, "delta": 0.1}),
            verdict: "PASS".into(),
            exit_code: 0,
            evidence: vec![claim("third", 1.0 / 3.0, 0.0, Method::Exact)],
            detail: Value::Null,
            wall_time: None,
        }
    }

    #[test]
    fn floats_have_17_digits() {
        let j = sample().to_json();
        assert!(j.contains("3.3333333333333331e-1"), "{j}");
        assert!(j.contains("\"delta\": 1.0000000000000001e-1"), "{j}");
        assert!(j.contains("\"depth\": 3"));
        assert!(j.contains("\"wall_time\": null"));
        let v: Value = serde_json::from_str(&j).unwrap();
        assert_eq!(v["evidence"][0]["value"].as_f64(), Some(1.0 / 3.0));
        assert_eq!(j, sample().to_json());
    }

    #[test]
    fn csv_columns() {
        let c = sample().to_csv();
        let mut lines = c.lines();
        assert_eq!(lines.next(), Some("name,value,tolerance,method"));
        assert!(lines
            .next()
            .unwrap()
            .starts_with("third,3.3333333333333331e-1,"));
    }
}
