//! CSV and SVG serialisation.
//!
//! Reals are written with 17 significant digits so that every binary64 value
//! round-trips; lines end in LF.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format_real(*v),
            Cell::Empty => String::new(),
        }
    }
}

/// 17 significant digits in scientific notation.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, CliError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// One row of a curve: `x` and one value per series.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub x: f64,
    pub values: Vec<f64>,
}

/// Series sampled on a common, strictly increasing `x` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    labels: Vec<String>,
    rows: Vec<CurveRow>,
    title: String,
}

impl Curve {
    pub fn new(title: impl Into<String>, xs: &[f64]) -> Self {
        Self {
            labels: Vec::new(),
            rows: xs.iter().map(|&x| CurveRow { x, values: Vec::new() }).collect(),
            title: title.into(),
        }
    }

    pub fn add_series(&mut self, label: impl Into<String>, values: &[f64]) -> Result<(), CliError> {
        let label = label.into();
        if self.labels.contains(&label) {
            return Err(CliError::Config(format!("duplicate series label {label:?}")));
        }
        if values.len() != self.rows.len() {
            return Err(CliError::Config(format!("series {label:?} has the wrong length")));
        }
        for (row, &v) in self.rows.iter_mut().zip(values) {
            row.values.push(v);
        }
        self.labels.push(label);
        Ok(())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[CurveRow] {
        &self.rows
    }

    pub fn series(&self, label: &str) -> Option<Vec<f64>> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(self.rows.iter().map(|r| r.values[i]).collect())
    }

    pub fn to_table(&self) -> Table {
        let mut header = vec!["x".to_string()];
        header.extend(self.labels.iter().cloned());
        let mut t = Table::new(header);
        for r in &self.rows {
            let mut row = vec![Cell::Real(r.x)];
            row.extend(r.values.iter().map(|&v| Cell::Real(v)));
            t.push(row);
        }
        t
    }

    /// Static SVG: one polyline per series, axes labelled with the data range.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const PAD: f64 = 50.0;
        const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

        let xs: Vec<f64> = self.rows.iter().map(|r| r.x).collect();
        let finite = self.rows.iter().flat_map(|r| r.values.iter().copied()).filter(|v| v.is_finite());
        let (mut y0, mut y1) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !(y0 < y1) {
            let c = if y0.is_finite() { y0 } else { 0.0 };
            y0 = c - 1.0;
            y1 = c + 1.0;
        }
        let (x0, x1) = match (xs.first(), xs.last()) {
            (Some(&a), Some(&b)) if a < b => (a, b),
            (Some(&a), _) => (a - 1.0, a + 1.0),
            _ => (0.0, 1.0),
        };
        let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&self.title));
        let _ = writeln!(
            s,
            r#"<g stroke="black" stroke-width="1"><line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}"/></g>"#,
            b = H - PAD,
            r = W - PAD
        );
        let label = |s: &mut String, x: f64, y: f64, anchor: &str, text: String| {
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="11">{text}</text>"#);
        };
        label(&mut s, PAD, H - PAD + 16.0, "middle", fmt_tick(x0));
        label(&mut s, W - PAD, H - PAD + 16.0, "middle", fmt_tick(x1));
        label(&mut s, W / 2.0, H - 10.0, "middle", "x".to_string());
        label(&mut s, PAD - 4.0, H - PAD, "end", fmt_tick(y0));
        label(&mut s, PAD - 4.0, PAD + 4.0, "end", fmt_tick(y1));

        for (i, name) in self.labels.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = self
                .rows
                .iter()
                .filter(|r| r.values[i].is_finite())
                .map(|r| format!("{:.2},{:.2}", px(r.x), py(r.values[i])))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
                pts.join(" "),
                escape(name)
            );
            let ly = PAD + 14.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{ly:.2}" fill="{color}" font-size="11">{}</text>"#,
                W - PAD - 110.0,
                escape(name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn fmt_tick(v: f64) -> String {
    format!("{v:.4}")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut c = Curve::new("t", &[0.0, 0.5]);
        c.add_series("g", &[1.0, 0.1]).unwrap();
        c.add_series("m=10", &[1.0, 1.0 / 3.0]).unwrap();
        let text = c.to_table().to_csv_string().unwrap();
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(lines[0], "x,g,m=10");
        assert_eq!(lines[1], "0.0000000000000000e0,1.0000000000000000e0,1.0000000000000000e0");
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
        let third: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(third, 1.0 / 3.0);
    }

    #[test]
    fn duplicate_labels_rejected() {
        let mut c = Curve::new("t", &[0.0]);
        c.add_series("g", &[1.0]).unwrap();
        assert!(c.add_series("g", &[1.0]).is_err());
        assert!(c.add_series("h", &[1.0, 2.0]).is_err());
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let mut c = Curve::new("demo <1>", &[0.0, 1.0, 2.0]);
        c.add_series("a", &[0.0, 1.0, 4.0]).unwrap();
        c.add_series("b", &[1.0, f64::NAN, 3.0]).unwrap();
        let svg = c.to_svg();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("demo &lt;1&gt;"));
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn round_trip_precision() {
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, f64::MIN_POSITIVE] {
            assert_eq!(format_real(v).parse::<f64>().unwrap(), v);
        }
    }
}
