//! CSV, JSON and SVG artifacts.

use serde::Serialize;
use serde_json::Value;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{HomogError, Result};

/// Nine significant digits.
pub fn fmt9(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else {
        format!("{x}")
    }
}

fn round9(x: f64) -> f64 {
    if x.is_finite() {
        fmt9(x).parse().unwrap_or(x)
    } else {
        x
    }
}

/// Tabular output with a fixed header; cells are preformatted strings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| HomogError::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| HomogError::Parameter(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r.records().map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect())).collect::<std::result::Result<_, _>>()?;
        Ok(Table { header, rows })
    }
}

/// Join a vector into one CSV cell.
pub fn join9(v: &[f64]) -> String {
    v.iter().map(|x| fmt9(*x)).collect::<Vec<_>>().join(";")
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .map(round9)
            .and_then(serde_json::Number::from_f64)
            .map(Value::Number)
            .unwrap_or(Value::Null),
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with struct field order preserved and floats rounded to nine
/// significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let v = round_value(serde_json::to_value(value)?);
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

/// Log-log scatter with an optional fitted line `log y = slope log x + intercept`.
pub fn loglog_svg(title: &str, points: &[(f64, f64)], fit: Option<(f64, f64)>) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const PAD: f64 = 48.0;
    let logs: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.log10(), y.log10())).collect();
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(svg, r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#, W - 2.0 * PAD, H - 2.0 * PAD);
    if !logs.is_empty() {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in &logs {
            x0 = x0.min(*x);
            x1 = x1.max(*x);
            y0 = y0.min(*y);
            y1 = y1.max(*y);
        }
        let (x0, x1) = if x1 - x0 < 1e-12 { (x0 - 0.5, x1 + 0.5) } else { (x0, x1) };
        let (y0, y1) = if y1 - y0 < 1e-12 { (y0 - 0.5, y1 + 0.5) } else { (y0, y1) };
        let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
        for (x, y) in &logs {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, px(*x), py(*y));
        }
        if let Some((slope, intercept)) = fit {
            let e = std::f64::consts::LN_10;
            let line = |x: f64| (slope * x * e + intercept) / e;
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick"/>"#,
                px(x0),
                py(line(x0)),
                px(x1),
                py(line(x1))
            );
            let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="12">slope {}</text>"#, PAD + 6.0, PAD + 16.0, fmt9(slope));
        }
        let _ = writeln!(svg, r#"<text x="{PAD}" y="{}" font-size="11">1e{:.2}</text>"#, H - PAD + 16.0, x0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">1e{:.2}</text>"#, W - PAD, H - PAD + 16.0, x1);
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(&["eps", "error"]);
        assert_eq!(t.to_csv().unwrap(), "eps,error\n");
    }

    #[test]
    fn csv_round_trip_keeps_text() {
        let mut t = Table::new(&["k", "value"]);
        t.push(vec![join9(&[0.1, -0.25]), fmt9(1.0 / 3.0)]);
        t.push(vec!["a,\"b\"".into(), fmt9(2.0)]);
        let back = Table::from_csv(&t.to_csv().unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn two_points_give_two_markers_and_one_segment() {
        let svg = loglog_svg("rate", &[(0.1, 0.01), (0.01, 0.001)], Some((1.0, -0.0)));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("<line").count(), 1);
    }

    #[test]
    fn json_rounds_to_nine_digits() {
        let s = to_json(&serde_json::json!({"b": 1.0 / 3.0, "a": [2.0]})).unwrap();
        assert!(s.contains("0.333333333"));
        assert!(!s.contains("0.3333333333"));
    }
}
