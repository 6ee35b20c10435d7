//! Scatter-plot rendering of a 2-D map.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::Split;
use crate::error::{Error, Result};
use crate::io::write_text;

pub const CANVAS: f64 = 800.0;
const MARGIN: f64 = 60.0;
const RADIUS: f64 = 6.0;
const RING: &str = "#d62728";
const PALETTE: [&str; 8] = [
    "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#17becf",
];

#[derive(Clone, Debug, PartialEq)]
pub struct MapPoint {
    pub word: String,
    pub category: String,
    pub split: Split,
    pub x: f64,
    pub y: f64,
}

/// SVG text for `points`. Categories get palette colors in order of first
/// appearance; validation points carry a red ring. `timestamp` goes into a
/// comment on the second line and is the only non-deterministic content.
pub fn svg_document(points: &[MapPoint], title: &str, timestamp: &str) -> Result<String> {
    if points.is_empty() {
        return Err(Error::invalid("cannot render an empty projection"));
    }
    if let Some(p) = points.iter().find(|p| p.category.trim().is_empty()) {
        return Err(Error::invalid(format!("point `{}` has an empty category", p.word)));
    }
    if let Some(p) = points.iter().find(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::invalid(format!("point `{}` has non-finite coordinates", p.word)));
    }
    let mut categories: Vec<&str> = Vec::new();
    for p in points {
        if !categories.contains(&p.category.as_str()) {
            categories.push(&p.category);
        }
    }
    let color = |cat: &str| {
        let i = categories.iter().position(|c| *c == cat).unwrap_or(0);
        PALETTE[i % PALETTE.len()]
    };

    // equal scale on both axes, centered
    let (min_x, max_x) = extent(points.iter().map(|p| p.x));
    let (min_y, max_y) = extent(points.iter().map(|p| p.y));
    let span = (max_x - min_x).max(max_y - min_y);
    let scale = if span > 0.0 { (CANVAS - 2.0 * MARGIN) / span } else { 1.0 };
    let cx = 0.5 * (min_x + max_x);
    let cy = 0.5 * (min_y + max_y);
    let to_px = |x: f64, y: f64| (CANVAS / 2.0 + (x - cx) * scale, CANVAS / 2.0 - (y - cy) * scale);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{c}" height="{c}" viewBox="0 0 {c} {c}">"#,
        c = CANVAS
    );
    let _ = writeln!(s, "<!-- generated {timestamp} -->");
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" font-family="sans-serif" font-size="18" text-anchor="middle">{}</text>"#,
        CANVAS / 2.0,
        escape(title)
    );
    let _ = writeln!(s, r#"<g id="points">"#);
    for p in points {
        let (px, py) = to_px(p.x, p.y);
        let stroke = match p.split {
            Split::Train => String::from(r#"stroke="none""#),
            Split::Validation => format!(r#"stroke="{RING}" stroke-width="2.5""#),
        };
        let _ = writeln!(
            s,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="{RADIUS}" fill="{}" fill-opacity="0.85" {stroke}><title>{}</title></circle>"#,
            color(&p.category),
            escape(&p.word)
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="legend" font-family="sans-serif" font-size="14">"#);
    let mut y = MARGIN;
    for cat in &categories {
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            CANVAS - 170.0,
            y - 10.0,
            color(cat),
            CANVAS - 150.0,
            y + 1.0,
            escape(cat)
        );
        y += 22.0;
    }
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="12" height="12" fill="none" stroke="{RING}" stroke-width="2.5"/><text x="{}" y="{}">validation</text>"#,
        CANVAS - 170.0,
        y - 10.0,
        CANVAS - 150.0,
        y + 1.0
    );
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_svg(points: &[MapPoint], title: &str, out: impl AsRef<Path>) -> Result<()> {
    let stamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    write_text(out.as_ref(), &svg_document(points, title, &stamp)?)
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(n: usize) -> Vec<MapPoint> {
        (0..n)
            .map(|i| MapPoint {
                word: format!("w{i}"),
                category: ["animal", "vehicle", "furniture"][i % 3].into(),
                split: if i < 60 { Split::Train } else { Split::Validation },
                x: (i as f64).sin() * 3.0,
                y: (i as f64 * 0.7).cos(),
            })
            .collect()
    }

    #[test]
    fn one_circle_per_point() {
        let doc = svg_document(&points(90), "map", "2024-01-01T00:00:00Z").unwrap();
        assert_eq!(doc.matches("<circle").count(), 90);
        assert_eq!(doc.matches(RING).count(), 30 + 1);
        assert!(doc.contains(r#"width="800" height="800""#));
    }

    #[test]
    fn deterministic_except_timestamp() {
        let a = svg_document(&points(12), "map", "2024-01-01T00:00:00Z").unwrap();
        let b = svg_document(&points(12), "map", "2025-06-01T12:00:00Z").unwrap();
        let strip = |s: &str| s.lines().filter(|l| !l.starts_with("<!-- generated")).collect::<Vec<_>>().join("\n");
        assert_ne!(a, b);
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn rejects_empty_inputs() {
        assert!(svg_document(&[], "map", "t").is_err());
        let mut p = points(3);
        p[1].category = String::new();
        let err = svg_document(&p, "map", "t").unwrap_err();
        assert!(err.to_string().contains("empty category"));
    }

    #[test]
    fn escapes_markup() {
        let mut p = points(3);
        p[0].word = "<b&>".into();
        let doc = svg_document(&p, "a<b", "t").unwrap();
        assert!(doc.contains("&lt;b&amp;&gt;"));
        assert!(!doc.contains("<b&>"));
    }
}
