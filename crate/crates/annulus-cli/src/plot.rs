//! Plot data: CSV tables of `(x, y, stderr)` and a minimal standalone SVG.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotFormat {
    Csv,
    Svg,
}

impl PlotFormat {
    /// Format from the file extension (`.csv` or `.svg`).
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(Self::Csv),
            Some("svg") => Ok(Self::Svg),
            _ => bail!("plot path {} must end in .csv or .svg", path.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<PlotPoint>,
}

impl Series {
    fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            bail!("empty series");
        }
        if self.points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite() && p.stderr.is_finite())) {
            bail!("series contains non-finite values");
        }
        Ok(())
    }
}

pub fn to_csv(series: &Series) -> Result<String> {
    series.validate()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([series.x_label.as_str(), series.y_label.as_str(), "stderr"])?;
    for p in &series.points {
        w.write_record([num(p.x), num(p.y), num(p.stderr)])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Plain decimal for moderate magnitudes, exponent notation otherwise.
pub fn num(v: f64) -> String {
    if v == 0.0 || (1e-4..1e6).contains(&v.abs()) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

pub fn from_csv(text: &str) -> Result<Vec<PlotPoint>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> { Ok(rec.get(i).context("short row")?.parse()?) };
        out.push(PlotPoint { x: f(0)?, y: f(1)?, stderr: f(2)? });
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line plot with ±stderr bars on linear axes.
pub fn to_svg(series: &Series) -> Result<String> {
    series.validate()?;
    let (w, h, m) = (640.0, 400.0, 50.0);
    let span = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = span(&mut series.points.iter().map(|p| p.x));
    let (y0, y1) = span(&mut series.points.iter().flat_map(|p| [p.y - p.stderr, p.y + p.stderr]));
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#)?;
    writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#)?;
    writeln!(s, r#"<path d="M{m} {} L{} {} M{m} {} L{m} {m}" stroke="black" fill="none"/>"#, h - m, w - m, h - m, h - m)?;
    let mut d = String::new();
    for (i, p) in series.points.iter().enumerate() {
        write!(d, "{}{:.3} {:.3} ", if i == 0 { "M" } else { "L" }, sx(p.x), sy(p.y))?;
    }
    writeln!(s, r#"<path d="{}" stroke="steelblue" stroke-width="1.5" fill="none"/>"#, d.trim_end())?;
    for p in &series.points {
        if p.stderr > 0.0 {
            writeln!(s, r#"<path d="M{:.3} {:.3} L{:.3} {:.3}" stroke="gray"/>"#, sx(p.x), sy(p.y - p.stderr), sx(p.x), sy(p.y + p.stderr))?;
        }
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, w / 2.0, h - 15.0, escape(&series.x_label))?;
    writeln!(s, r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})">{}</text>"#, h / 2.0, h / 2.0, escape(&series.y_label))?;
    writeln!(s, r#"<text x="{m}" y="{}" font-size="10">{x0:.4e}</text>"#, h - m + 15.0)?;
    writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{x1:.4e}</text>"#, w - m, h - m + 15.0)?;
    writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{y0:.4e}</text>"#, m - 4.0, h - m)?;
    writeln!(s, r#"<text x="{}" y="{m}" font-size="10" text-anchor="end">{y1:.4e}</text>"#, m - 4.0)?;
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot_data(series: &Series, path: &Path, format: PlotFormat) -> Result<()> {
    let text = match format {
        PlotFormat::Csv => to_csv(series)?,
        PlotFormat::Svg => to_svg(series)?,
    };
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: usize) -> Series {
        Series {
            x_label: "tau".into(),
            y_label: "f<1>".into(),
            points: (0..n).map(|i| PlotPoint { x: 1.0 + i as f64, y: (i as f64).sin(), stderr: 0.1 }).collect(),
        }
    }

    #[test]
    fn csv_round_trip() {
        let s = series(12);
        let back = from_csv(&to_csv(&s).unwrap()).unwrap();
        assert_eq!(back, s.points);
    }

    #[test]
    fn empty_and_nonfinite_series_are_rejected() {
        assert!(to_csv(&series(0)).is_err());
        assert!(to_svg(&series(0)).is_err());
        let mut s = series(3);
        s.points[1].y = f64::NAN;
        assert!(to_svg(&s).is_err());
    }

    #[test]
    fn svg_is_well_formed() {
        for n in [1, 2, 30] {
            let text = to_svg(&series(n)).unwrap();
            let mut reader = quick_xml::Reader::from_str(&text);
            let mut depth = 0i32;
            let mut paths = 0;
            loop {
                match reader.read_event().unwrap() {
                    quick_xml::events::Event::Start(_) => depth += 1,
                    quick_xml::events::Event::End(_) => depth -= 1,
                    quick_xml::events::Event::Empty(e) if e.name().as_ref() == b"path" => paths += 1,
                    quick_xml::events::Event::Eof => break,
                    _ => {}
                }
            }
            assert_eq!(depth, 0);
            assert!(paths >= 2);
        }
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(PlotFormat::from_path(Path::new("a.svg")).unwrap(), PlotFormat::Svg);
        assert_eq!(PlotFormat::from_path(Path::new("a.csv")).unwrap(), PlotFormat::Csv);
        assert!(PlotFormat::from_path(Path::new("a.png")).is_err());
    }
}
