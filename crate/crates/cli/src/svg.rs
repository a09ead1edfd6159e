//! Minimal SVG figures: dated line plots with ribbons and coloured markers,
//! and horizontal bar charts.

use std::fmt::Write;

use chrono::{Duration, NaiveDate};

const W: f64 = 900.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

pub const BLUE: &str = "#1f77b4";
pub const ORANGE: &str = "#ff7f0e";
pub const GREEN: &str = "#2ca02c";
pub const RED: &str = "#d62728";
pub const GREY: &str = "#7f7f7f";

pub struct Line {
    pub label: String,
    pub color: &'static str,
    /// `(day offset, value)`; `None` breaks the line.
    pub points: Vec<(f64, Option<f64>)>,
    pub dashed: bool,
}

pub struct Ribbon {
    pub color: &'static str,
    pub points: Vec<(f64, f64, f64)>,
}

pub struct Marker {
    pub x: f64,
    pub y: f64,
    pub color: &'static str,
}

pub struct TimePlot {
    pub title: String,
    pub y_label: String,
    pub start: NaiveDate,
    pub lines: Vec<Line>,
    pub ribbons: Vec<Ribbon>,
    pub markers: Vec<Marker>,
}

impl TimePlot {
    pub fn new(title: impl Into<String>, y_label: impl Into<String>, start: NaiveDate) -> Self {
        TimePlot {
            title: title.into(),
            y_label: y_label.into(),
            start,
            lines: Vec::new(),
            ribbons: Vec::new(),
            markers: Vec::new(),
        }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for l in &self.lines {
            for &(x, y) in &l.points {
                xs.push(x);
                ys.extend(y);
            }
        }
        for r in &self.ribbons {
            for &(x, lo, hi) in &r.points {
                xs.push(x);
                ys.push(lo);
                ys.push(hi);
            }
        }
        for m in &self.markers {
            xs.push(m.x);
            ys.push(m.y);
        }
        let fin = |v: &Vec<f64>| -> (f64, f64) {
            let it = v.iter().copied().filter(|x| x.is_finite());
            let lo = it.clone().fold(f64::INFINITY, f64::min);
            let hi = it.fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() {
                (lo, hi)
            } else {
                (0.0, 1.0)
            }
        };
        let (x0, mut x1) = fin(&xs);
        let (mut y0, mut y1) = fin(&ys);
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad = 0.05 * (y1 - y0);
        (x0, x1, y0 - pad, y1 + pad)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
        let sy = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);
        let mut s = header(&self.title);
        axes(&mut s);
        for i in 0..=5 {
            let y = y0 + (y1 - y0) * i as f64 / 5.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                sy(y) + 4.0,
                tick(y)
            );
        }
        for i in 0..=5 {
            let x = x0 + (x1 - x0) * i as f64 / 5.0;
            let d = self.start + Duration::days(x.round() as i64);
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{d}</text>"#,
                sx(x),
                H - BOTTOM + 18.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" font-size="12" transform="rotate(-90 16 {:.1})" text-anchor="middle">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(&self.y_label)
        );
        for r in &self.ribbons {
            if r.points.is_empty() {
                continue;
            }
            let mut path = String::new();
            for (i, &(x, _, hi)) in r.points.iter().enumerate() {
                let _ = write!(path, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(x), sy(hi));
            }
            for &(x, lo, _) in r.points.iter().rev() {
                let _ = write!(path, "L{:.2},{:.2} ", sx(x), sy(lo));
            }
            let _ = writeln!(
                s,
                r#"<path d="{}Z" fill="{}" fill-opacity="0.25" stroke="none"/>"#,
                path, r.color
            );
        }
        for l in &self.lines {
            let mut path = String::new();
            let mut pen_down = false;
            for &(x, y) in &l.points {
                match y {
                    Some(y) if y.is_finite() => {
                        let _ = write!(path, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, sx(x), sy(y));
                        pen_down = true;
                    }
                    _ => pen_down = false,
                }
            }
            let dash = if l.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                path.trim_end(),
                l.color
            );
        }
        for m in &self.markers {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
                sx(m.x),
                sy(m.y),
                m.color
            );
        }
        for (i, l) in self.lines.iter().enumerate() {
            let y = TOP + 14.0 * i as f64 + 6.0;
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
                W - RIGHT - 170.0,
                W - RIGHT - 150.0,
                l.color,
                W - RIGHT - 145.0,
                y + 4.0,
                escape(&l.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Horizontal bars, one per label, in the given order.
pub fn bar_chart(title: &str, x_label: &str, bars: &[(String, f64)]) -> String {
    let h = TOP + BOTTOM + 22.0 * bars.len().max(1) as f64;
    let max = bars.iter().map(|b| b.1).filter(|v| v.is_finite()).fold(0.0, f64::max);
    let max = if max > 0.0 { max } else { 1.0 };
    let left = 140.0;
    let width = W - left - RIGHT - 80.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{h}" viewBox="0 0 {W} {h}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    for (i, (label, v)) in bars.iter().enumerate() {
        let y = TOP + 22.0 * i as f64;
        let len = if v.is_finite() { (v / max).max(0.0) * width } else { 0.0 };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text><rect x="{left}" y="{y:.1}" width="{len:.2}" height="16" fill="{BLUE}"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            left - 6.0,
            y + 12.0,
            escape(label),
            left + len + 4.0,
            y + 12.0,
            if v.is_finite() { tick(*v) } else { "n/a".into() }
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        left + width / 2.0,
        h - 16.0,
        escape(x_label)
    );
    s.push_str("</svg>\n");
    s
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    s
}

fn axes(s: &mut String) {
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT},{TOP} L{LEFT},{:.1} L{:.1},{:.1}" fill="none" stroke="black"/>"#,
        H - BOTTOM,
        W - RIGHT,
        H - BOTTOM
    );
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e6).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_documents() {
        let start = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
        let mut p = TimePlot::new("a < b", "rate", start);
        p.lines.push(Line {
            label: "curve".into(),
            color: BLUE,
            points: vec![(0.0, Some(1.0)), (1.0, None), (2.0, Some(3.0))],
            dashed: false,
        });
        p.ribbons.push(Ribbon {
            color: GREY,
            points: vec![(0.0, 0.5, 1.5), (2.0, 2.0, 4.0)],
        });
        p.markers.push(Marker {
            x: 2.0,
            y: 3.0,
            color: RED,
        });
        let svg = p.render();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<circle").count(), 1);
        // the missing value splits the line into two moves
        assert_eq!(svg.matches(r#"<path d="M"#).count(), 3);
        let bars = bar_chart("t", "x", &[("S1".into(), 1.0), ("S2".into(), f64::NAN)]);
        assert!(bars.contains("n/a"));
    }
}
