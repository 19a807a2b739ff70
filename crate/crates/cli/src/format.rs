use std::fmt::Write as _;
use std::io::{self, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

/// `x` with `digits` significant digits, trailing zeros removed; `inf`/`-inf` for infinities.
pub fn sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim(mantissa.to_string()), exp)
    }
}

fn trim(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// CSV cell: shortest round-trip decimal, `inf` for infinities, empty for missing.
pub fn cell(x: Option<f64>) -> String {
    match x {
        None => String::new(),
        Some(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.into(),
        Some(v) => format!("{v:?}"),
    }
}

pub struct Header {
    lines: Vec<Value>,
    started: SystemTime,
}

impl Header {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: Option<u64>, truncation: Option<Value>) -> Self {
        let config = serde_json::to_value(config).expect("config serializes");
        Header {
            lines: vec![
                json!({"mzsim_version": env!("CARGO_PKG_VERSION"), "command": command}),
                json!({"config": config}),
                json!({"seed": seed}),
                json!({"truncation": truncation}),
            ],
            started: SystemTime::now(),
        }
    }

    pub fn push(&mut self, line: Value) {
        self.lines.push(line);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            writeln!(out, "# {line}").unwrap();
        }
        let started = self
            .started
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        let elapsed = self.started.elapsed().map(|d| d.as_secs_f64()).unwrap_or(0.0);
        writeln!(
            out,
            "# {}",
            json!({"started_unix": started, "elapsed_seconds": elapsed})
        )
        .unwrap();
        out
    }
}

pub struct Csv {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(columns: &'static [&'static str]) -> Self {
        Csv {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, header: &Header, mut out: W) -> io::Result<()> {
        out.write_all(header.render().as_bytes())?;
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()
    }
}
