//! File emission. CSV numbers carry 17 significant digits; JSON documents carry a
//! schema tag; SVG is for looking at and has no numeric contract.

use std::fmt::Write as _;
use std::path::Path;

use p2atlas::num::C64;
use serde::Serialize;

pub const SCHEMA_PREFIX: &str = "p2atlas";
pub const SCHEMA_VERSION: u32 = 1;

/// 17 significant digits, enough to round-trip any f64.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        // no "-0" in tables
        return "0.0000000000000000e0".into();
    }
    format!("{x:.16e}")
}

pub struct Csv {
    buf: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { buf: header.join(",") + "\n", width: header.len() }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.width, "csv row width");
        self.buf += &cells.join(",");
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    schema: String,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with a `schema` field naming the document kind and version.
pub fn json<T: Serialize>(kind: &str, body: &T) -> String {
    let doc = Tagged { schema: format!("{SCHEMA_PREFIX}.{kind}/{SCHEMA_VERSION}"), body };
    serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
}

pub fn write(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)
}

/// An SVG canvas showing the rectangle [lo, hi] of the complex plane, y up.
pub struct Svg {
    lo: C64,
    hi: C64,
    px: f64,
    body: String,
}

impl Svg {
    pub fn new(lo: C64, hi: C64, width_px: f64) -> Self {
        Svg { lo, hi, px: width_px, body: String::new() }
    }

    fn scale(&self) -> f64 {
        self.px / (self.hi.re - self.lo.re)
    }

    fn height(&self) -> f64 {
        (self.hi.im - self.lo.im) * self.scale()
    }

    fn map(&self, z: C64) -> (f64, f64) {
        let s = self.scale();
        ((z.re - self.lo.re) * s, (self.hi.im - z.im) * s)
    }

    /// Axis-aligned rectangle given by two corners in the plane.
    pub fn rect(&mut self, a: C64, b: C64, fill: &str) {
        let (x0, y0) = self.map(C64::new(a.re.min(b.re), a.im.max(b.im)));
        let (x1, y1) = self.map(C64::new(a.re.max(b.re), a.im.min(b.im)));
        let _ = writeln!(
            self.body,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            x1 - x0,
            y1 - y0
        );
    }

    pub fn dot(&mut self, z: C64, r: f64, fill: &str) {
        let (x, y) = self.map(z);
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{fill}"/>"#);
    }

    pub fn cross(&mut self, z: C64, r: f64, stroke: &str) {
        let (x, y) = self.map(z);
        let _ = writeln!(
            self.body,
            r#"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="{stroke}" stroke-width="1.5"/>"#,
            x - r,
            y - r,
            x + r,
            y + r,
            x - r,
            y + r,
            x + r,
            y - r
        );
    }

    /// Polyline, split wherever it leaves a generous margin around the view so
    /// far-away vertices do not blow up the coordinates.
    pub fn polyline(&mut self, pts: &[C64], stroke: &str, width: f64, dash: Option<&str>) {
        let span = (self.hi - self.lo).norm();
        let mid = 0.5 * (self.lo + self.hi);
        let inside = |z: &C64| (z - mid).norm() <= 2.0 * span;
        let dash = dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        for run in pts.split(|z| !inside(z)).filter(|r| r.len() > 1) {
            let d: Vec<String> = run
                .iter()
                .map(|z| {
                    let (x, y) = self.map(*z);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                self.body,
                r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"{dash}/>"#,
                d.join(" ")
            );
        }
    }

    pub fn text(&mut self, z: C64, s: &str) {
        let (x, y) = self.map(z);
        let _ = writeln!(self.body, r#"<text x="{x:.2}" y="{y:.2}" font-size="11" font-family="sans-serif">{s}</text>"#);
    }

    pub fn axes(&mut self) {
        let (lo, hi) = (self.lo, self.hi);
        if lo.im < 0.0 && hi.im > 0.0 {
            self.polyline(&[C64::new(lo.re, 0.0), C64::new(hi.re, 0.0)], "#999", 0.5, None);
        }
        if lo.re < 0.0 && hi.re > 0.0 {
            self.polyline(&[C64::new(0.0, lo.im), C64::new(0.0, hi.im)], "#999", 0.5, None);
        }
    }

    pub fn finish(self) -> String {
        let (w, h) = (self.px, self.height());
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<!-- p2atlas {} -->\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.2} {h:.2}\">\n\
             <defs><clipPath id=\"view\"><rect width=\"{w:.2}\" height=\"{h:.2}\"/></clipPath></defs>\n\
             <rect width=\"{w:.2}\" height=\"{h:.2}\" fill=\"white\"/>\n<g clip-path=\"url(#view)\">\n{}</g>\n</svg>\n",
            env!("CARGO_PKG_VERSION"),
            self.body
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI, -0.0] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), if x == 0.0 { 0.0 } else { x });
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert_eq!(digits, 17);
        }
    }

    #[test]
    fn svg_clips_far_points() {
        let mut s = Svg::new(C64::new(-1.0, -1.0), C64::new(1.0, 1.0), 100.0);
        s.polyline(&[C64::new(0.0, 0.0), C64::new(0.5, 0.5), C64::new(1e6, 0.0), C64::new(0.1, 0.0)], "k", 1.0, None);
        let out = s.finish();
        assert_eq!(out.matches("<polyline").count(), 1);
        assert!(!out.contains("1000000"));
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&[num(1.0), "x".into()]);
        assert_eq!(c.finish(), "a,b\n1.0000000000000000e0,x\n");
    }
}
