//! Static line charts rendered from CSV text.
//!
//! The renderer reads nothing but the CSV it is given, so re-rendering a
//! written CSV reproduces the SVG byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write;

#[derive(Debug, Clone)]
pub struct ChartSpec<'a> {
    pub title: &'a str,
    pub x_col: &'a str,
    pub y_col: &'a str,
    pub series_col: &'a str,
    pub series_label: &'a str,
    pub log_x: bool,
    pub log_y: bool,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, String> {
    headers.iter().position(|h| h == name).ok_or_else(|| format!("CSV has no `{name}` column"))
}

/// Render the chart. Points with non-finite coordinates (or non-positive
/// ones on a log axis) are skipped.
pub fn line_chart(csv_text: &str, spec: &ChartSpec) -> Result<String, String> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let (xi, yi, si) = (column(&headers, spec.x_col)?, column(&headers, spec.y_col)?, column(&headers, spec.series_col)?);
    // series keyed by their label text, ordered by numeric value
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut order: Vec<(f64, String)> = vec![];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let parse = |i: usize| rec.get(i).and_then(|s| s.trim().parse::<f64>().ok()).unwrap_or(f64::NAN);
        let label = rec.get(si).unwrap_or("").to_string();
        if !series.contains_key(&label) {
            order.push((parse(si), label.clone()));
        }
        let (x, y) = (parse(xi), parse(yi));
        let ok = |v: f64, log: bool| v.is_finite() && (!log || v > 0.0);
        let entry = series.entry(label).or_default();
        if ok(x, spec.log_x) && ok(y, spec.log_y) {
            entry.push((if spec.log_x { x.log10() } else { x }, if spec.log_y { y.log10() } else { y }));
        }
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let pts: Vec<(f64, f64)> = series.values().flatten().copied().collect();
    let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if pts.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;
    let tick = |v: f64, log: bool| if log { format!("{:.3}", 10f64.powf(v)) } else { format!("{v:.3}") };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, spec.title);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(fx),
            TOP + ph + 16.0,
            tick(fx, spec.log_x)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            sy(fy) + 4.0,
            tick(fy, spec.log_y)
        );
    }
    let axis = |name: &str, log: bool| if log { format!("{name} (log scale)") } else { name.to_string() };
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 12.0,
        axis(spec.x_col, spec.log_x)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        axis(spec.y_col, spec.log_y)
    );
    for (i, (_, label)) in order.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut line = series[label].clone();
        line.sort_by(|a, b| a.0.total_cmp(&b.0));
        if !line.is_empty() {
            let path: Vec<String> = line.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
            for &(x, y) in &line {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{color}"/>"#, sx(x), sy(y));
            }
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let shown = label.parse::<f64>().map(|v| format!("{v}")).unwrap_or_else(|_| label.clone());
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{} = {}</text>"#,
            lx + 24.0,
            ly + 4.0,
            spec.series_label,
            shown
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ChartSpec<'static> {
        ChartSpec { title: "t", x_col: "h", y_col: "mise", series_col: "tau", series_label: "tau", log_x: false, log_y: false }
    }

    #[test]
    fn deterministic_and_complete() {
        let csv = "h,tau,mise,se\n0.1,0,1.0,0.1\n0.2,0,0.5,0.1\n0.1,0.02,2.0,0.1\n0.2,0.02,inf,NaN\n";
        let a = line_chart(csv, &spec()).unwrap();
        assert_eq!(a, line_chart(csv, &spec()).unwrap());
        assert_eq!(a.matches("<polyline").count(), 2);
        assert_eq!(a.matches("<circle").count(), 3);
        assert!(a.contains("tau = 0.02"));
    }

    #[test]
    fn missing_column() {
        assert!(line_chart("a,b\n1,2\n", &spec()).is_err());
    }
}
