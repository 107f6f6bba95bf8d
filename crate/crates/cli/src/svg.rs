//! Minimal SVG line plot of a frontier.

use std::fmt::Write;

use fairfront::ParetoPoint;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Certified tolerances `[d_min, ∞)` to shade.
#[derive(Debug, Clone)]
pub struct Band {
    pub d_min: f64,
    pub label: String,
}

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "inf".into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Loss against tolerance `d`, with the certified band shaded.
pub fn frontier_svg(points: &[ParetoPoint], band: Option<&Band>) -> String {
    let x_max = points.iter().map(|p| p.d).fold(0.0, f64::max);
    let y_max = points.iter().map(|p| p.l2_loss).fold(0.0, f64::max);
    let x_span = if x_max > 0.0 { x_max } else { 1.0 };
    let y_span = if y_max > 0.0 { y_max } else { 1.0 };
    let px = |d: f64| LEFT + (W - LEFT - RIGHT) * d / x_span;
    let py = |l: f64| H - BOTTOM - (H - TOP - BOTTOM) * l / y_span;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">Pareto frontier</text>"#,
        W / 2.0
    );

    if let Some(b) = band {
        let _ = write!(s, r#"<g id="certified" data-d-min="{}">"#, fmt_num(b.d_min));
        if b.d_min.is_finite() && b.d_min <= x_span {
            let x0 = px(b.d_min);
            let _ = write!(
                s,
                r##"<rect x="{x0:.3}" y="{TOP}" width="{:.3}" height="{}" fill="#4caf50" fill-opacity="0.2"/>"##,
                px(x_span) - x0,
                H - TOP - BOTTOM
            );
            let _ = write!(
                s,
                r##"<text x="{:.3}" y="{}" font-family="sans-serif" font-size="11" fill="#2e7d32">{}</text>"##,
                x0 + 4.0,
                TOP + 14.0,
                escape(&b.label)
            );
        }
        let _ = writeln!(s, "</g>");
    }

    let (x0, y0) = (px(0.0), py(0.0));
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{TOP}" stroke="black"/>"#,
        W - RIGHT
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (tx, ty) = (px(f * x_span), py(f * y_span));
        let _ = writeln!(
            s,
            r#"<text x="{tx:.3}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{:.3}</text><text x="{}" y="{:.3}" font-family="sans-serif" font-size="10" text-anchor="end">{:.3}</text>"#,
            y0 + 16.0,
            f * x_span,
            x0 - 6.0,
            ty + 3.0,
            f * y_span
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">disparity tolerance d</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 18.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 18 {})">L2 loss</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0
    );

    let pts: Vec<String> = points
        .iter()
        .map(|p| format!("{:.3},{:.3}", px(p.d), py(p.l2_loss)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline id="frontier" fill="none" stroke="#1565c0" stroke-width="2" points="{}"/>"##,
        pts.join(" ")
    );
    for p in points {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.3}" cy="{:.3}" r="2.5" fill="#1565c0"/>"##,
            px(p.d),
            py(p.l2_loss)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Reads back the `data-d-min` attribute of the certified band.
pub fn band_d_min(svg: &str) -> Option<f64> {
    let start = svg.find("data-d-min=\"")? + "data-d-min=\"".len();
    let end = start + svg[start..].find('"')?;
    match &svg[start..end] {
        "inf" => Some(f64::INFINITY),
        v => v.parse().ok(),
    }
}
