use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Shortest round-trip text, with an exponent for very small or large values.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == 0.0 || (1e-4..1e9).contains(&x.abs()) {
        format!("{}", x + 0.0)
    } else {
        format!("{x:e}")
    }
}

/// CSV text that starts with the provenance line.
pub struct Csv {
    hash: String,
    notes: Vec<String>,
    header: String,
    rows: String,
}

impl Csv {
    pub fn new(hash: &str, header: &str) -> Self {
        Self { hash: hash.into(), notes: Vec::new(), header: header.into(), rows: String::new() }
    }

    /// Extra `# key: value` line below the provenance line.
    pub fn note(&mut self, key: &str, value: &str) {
        self.notes.push(format!("# {key}: {value}\n"));
    }

    pub fn row(&mut self, fields: &[String]) {
        self.rows.push_str(&fields.join(","));
        self.rows.push('\n');
    }

    pub fn render(&self) -> String {
        format!("# config-hash: {}\n{}{}\n{}", self.hash, self.notes.concat(), self.header, self.rows)
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf, CliError> {
        write_file(dir, name, &self.render())
    }
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(path)
}

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    pub style: &'a str,
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-12 * step {
        out.push(t + 0.0);
        t += step;
    }
    out
}

/// Line plot with axes, ticks and a legend. Non-finite points break the line.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (w, h) = (720.0, 460.0);
    let (left, right, top, bottom) = (80.0, 20.0, 40.0, 60.0);
    let finite: Vec<(f64, f64)> =
        series.iter().flat_map(|s| s.points.iter().copied()).filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = finite.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), p| (a.min(p.0), b.max(p.0), c.min(p.1), d.max(p.1)),
    );
    if finite.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.08).max(1e-6);
    y0 -= pad;
    y1 += pad;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let sy = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{title}</text>"#, w / 2.0);
    let (ax, ay) = (sx(x0), sy(y0));
    let _ = writeln!(s, r#"<path d="M{ax:.2} {:.2} V{ay:.2} H{:.2}" stroke="black" fill="none"/>"#, top, w - right);
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(s, r#"<path d="M{x:.2} {ay:.2} v5" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, ay + 18.0, num(t));
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(s, r#"<path d="M{ax:.2} {y:.2} h-5" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, ax - 8.0, y + 4.0, num(t));
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#, (left + w - right) / 2.0, h - 15.0);
    let _ = writeln!(s, r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{ylabel}</text>"#, (top + h - bottom) / 2.0, (top + h - bottom) / 2.0);
    for (i, ser) in series.iter().enumerate() {
        let mut d = String::new();
        let mut pen_down = false;
        for &(x, y) in &ser.points {
            if !(x.is_finite() && y.is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{:.2} {:.2} ", if pen_down { 'L' } else { 'M' }, sx(x), sy(y));
            pen_down = true;
        }
        let _ = writeln!(s, r#"<path d="{}" fill="none" {}/>"#, d.trim_end(), ser.style);
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = w - right - 170.0;
        let _ = writeln!(s, r#"<path d="M{lx:.2} {ly:.2} h30" {}/><text x="{:.2}" y="{:.2}">{}</text>"#, ser.style, lx + 36.0, ly + 4.0, ser.label);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(1e-7), "1e-7");
        assert_eq!(num(f64::NAN), "nan");
        assert_eq!(num(250.0), "250");
    }

    #[test]
    fn notes_go_above_the_header() {
        let mut c = Csv::new("abc", "a,b");
        c.note("mu1", "-0.1");
        c.row(&["1".into(), "2".into()]);
        assert_eq!(c.render(), "# config-hash: abc\n# mu1: -0.1\na,b\n1,2\n");
    }

    #[test]
    fn plot_breaks_on_nan() {
        let svg = line_plot(
            "t",
            "x",
            "y",
            &[Series { label: "a", points: vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 2.0)], style: r#"stroke="black""# }],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.matches(" M").count() + svg.matches("\"M").count() >= 2);
        assert!(svg.contains("d=\"M80.00"));
        assert!(ticks(-0.5, 0.5).contains(&0.0));
    }
}
