//! Dependency-free SVG line plots with deterministic output.

use std::fmt::Write;

use super::artifacts::CsvTable;
use crate::error::{Error, Result};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: String,
    pub y: Vec<String>,
    pub loglog: bool,
    /// Exponents of dashed power-law guides anchored at the first point of
    /// the first series.
    pub reference_slopes: Vec<f64>,
    pub title: Option<String>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if log {
            lo = lo.floor();
            hi = hi.ceil();
            if hi <= lo {
                hi = lo + 1.0;
            }
        } else {
            if hi <= lo {
                lo -= 1.0;
                hi += 1.0;
            }
            let pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0);
            let mut out = Vec::new();
            let mut k = self.lo;
            while k <= self.hi + 1e-9 {
                out.push((k, format!("1e{}", k as i64)));
                k += step;
            }
            out
        } else {
            (0..=5)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 5.0;
                    (v, format!("{v:.3e}"))
                })
                .collect()
        }
    }
}

fn transform(v: f64, log: bool) -> Option<f64> {
    if !v.is_finite() {
        None
    } else if log {
        (v > 0.0).then(|| v.log10())
    } else {
        Some(v)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the requested columns of `table`. Points that cannot be shown
/// (non-finite, or nonpositive on log axes) are skipped.
pub fn render_svg(table: &CsvTable, spec: &PlotSpec) -> Result<String> {
    if spec.y.is_empty() {
        return Err(Error::InvalidArgument("at least one y column is required".into()));
    }
    let xs = table.column(&spec.x)?;
    let mut series = Vec::new();
    for name in &spec.y {
        let ys = table.column(name)?;
        let pts: Vec<(f64, f64)> =
            xs.iter().zip(&ys).filter_map(|(&x, &y)| Some((transform(x, spec.loglog)?, transform(y, spec.loglog)?))).collect();
        series.push((name.as_str(), pts));
    }
    if series.iter().all(|(_, p)| p.len() < 2) {
        return Err(Error::EmptyData(format!("fewer than two plottable points in {}", spec.y.join(", "))));
    }
    let xa = Axis::fit(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)), spec.loglog);
    let ya = Axis::fit(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)), spec.loglog);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |v: f64| LEFT + pw * xa.frac(v);
    let py = |v: f64| TOP + ph * (1.0 - ya.frac(v));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath></defs>"#);
    if let Some(title) = &spec.title {
        let _ = writeln!(s, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(title));
    }
    for (v, label) in xa.ticks() {
        let x = px(v);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##, TOP + ph);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, TOP + ph + 18.0);
    }
    for (v, label) in ya.ticks() {
        let y = py(v);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, LEFT - 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 16.0, escape(&spec.x));

    let legend_x = LEFT + pw + 14.0;
    let mut legend_y = TOP + 10.0;
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if pts.len() >= 2 {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline clip-path="url(#plot)" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
        }
        let _ = writeln!(
            s,
            r#"<line x1="{legend_x:.2}" y1="{legend_y:.2}" x2="{:.2}" y2="{legend_y:.2}" stroke="{color}" stroke-width="2"/>"#,
            legend_x + 20.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, legend_x + 26.0, legend_y + 4.0, escape(name));
        legend_y += 18.0;
    }

    if let Some(&(x0, y0)) = series.iter().find(|(_, p)| !p.is_empty()).and_then(|(_, p)| p.first()) {
        for slope in &spec.reference_slopes {
            let guide: Vec<String> = (0..=64)
                .map(|k| {
                    let x = x0 + (xa.hi - x0) * k as f64 / 64.0;
                    let y = if spec.loglog { y0 + slope * (x - x0) } else { y0 * (x / x0).powf(*slope) };
                    format!("{:.2},{:.2}", px(x), py(y))
                })
                .collect();
            let _ = writeln!(
                s,
                r##"<polyline clip-path="url(#plot)" fill="none" stroke="#555555" stroke-dasharray="6,4" points="{}"/>"##,
                guide.join(" ")
            );
            let _ = writeln!(
                s,
                r##"<line x1="{legend_x:.2}" y1="{legend_y:.2}" x2="{:.2}" y2="{legend_y:.2}" stroke="#555555" stroke-dasharray="6,4"/>"##,
                legend_x + 20.0
            );
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">slope {slope:.4}</text>"#, legend_x + 26.0, legend_y + 4.0);
            legend_y += 18.0;
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> CsvTable {
        let mut text = String::from("t,a,b\n");
        for k in 0..=40 {
            let t = 10f64.powf(k as f64 / 10.0);
            text.push_str(&format!("{t},{},{}\n", t.powf(-0.5), if k % 2 == 0 { 0.0 } else { 1.0 / t }));
        }
        CsvTable::parse(&text).unwrap()
    }

    fn spec() -> PlotSpec {
        PlotSpec { x: "t".into(), y: vec!["a".into(), "b".into()], loglog: true, reference_slopes: vec![-0.5], title: Some("demo".into()) }
    }

    #[test]
    fn renders_series_and_guides() {
        let svg = render_svg(&table(), &spec()).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("slope -0.5000"));
    }

    #[test]
    fn deterministic() {
        assert_eq!(render_svg(&table(), &spec()).unwrap(), render_svg(&table(), &spec()).unwrap());
    }

    #[test]
    fn errors() {
        let one = CsvTable::parse("t,a\n1,2\n").unwrap();
        let s = PlotSpec { y: vec!["a".into()], ..spec() };
        assert!(matches!(render_svg(&one, &s), Err(Error::EmptyData(_))));
        let missing = PlotSpec { y: vec!["zz".into()], ..spec() };
        assert!(matches!(render_svg(&table(), &missing), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn linear_axes() {
        let s = PlotSpec { loglog: false, ..spec() };
        assert!(render_svg(&table(), &s).unwrap().contains("e0"));
    }
}
