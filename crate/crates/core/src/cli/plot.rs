//! Minimal SVG line plots built from emitted CSV files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

/// Which CSV columns become which series.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub x: String,
    pub ys: Vec<String>,
    /// Split each y column into one series per distinct value of this column.
    pub group: Option<String>,
    pub y_label: String,
}

/// A parsed CSV: header plus string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvData {
    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let header = reader.headers()?.iter().map(str::to_owned).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_owned).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Io(format!("CSV has no column '{name}'")))
    }

    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.column(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[k].parse::<f64>()
                    .map_err(|_| Error::Io(format!("non-numeric cell '{}' in column '{name}'", r[k])))
            })
            .collect()
    }
}

pub fn plot_from_csv(data: &CsvData, spec: &PlotSpec) -> Result<Plot> {
    let xk = data.column(&spec.x)?;
    let gk = spec.group.as_deref().map(|g| data.column(g)).transpose()?;
    let mut groups: Vec<String> = Vec::new();
    if let Some(g) = gk {
        for r in &data.rows {
            if !groups.contains(&r[g]) {
                groups.push(r[g].clone());
            }
        }
    } else {
        groups.push(String::new());
    }
    let mut series = Vec::new();
    for y in &spec.ys {
        let yk = data.column(y)?;
        for gv in &groups {
            let mut points = Vec::new();
            for r in &data.rows {
                if gk.is_some_and(|g| &r[g] != gv) {
                    continue;
                }
                let (Ok(x), Ok(v)) = (r[xk].parse::<f64>(), r[yk].parse::<f64>()) else {
                    continue;
                };
                points.push((x, v));
            }
            let name = match (&spec.group, spec.ys.len()) {
                (Some(g), 1) => format!("{g}={}", short(gv)),
                (Some(g), _) => format!("{y} {g}={}", short(gv)),
                (None, _) => y.clone(),
            };
            series.push(Series { name, points });
        }
    }
    Ok(Plot {
        title: spec.title.clone(),
        x_label: spec.x.clone(),
        y_label: spec.y_label.clone(),
        series,
    })
}

/// Shortest decimal that parses back to the same value.
fn short(cell: &str) -> String {
    cell.parse::<f64>().map_or_else(|_| cell.to_owned(), |v| format!("{v}"))
}

fn tick_label(v: f64, span: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if span < 1e-2 || v.abs() >= 1e4 {
        format!("{v:.2e}")
    } else if span < 1.0 {
        format!("{v:.3}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// Renders axes with five ticks each, one polyline per series, and a legend.
pub fn render_svg(plot: &Plot) -> String {
    let pts = || plot.series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = range(pts().map(|p| p.0));
    let (y0, y1) = range(pts().map(|p| p.1));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&plot.title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0,
            tick_label(xv, x1 - x0)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            tick_label(yv, y1 - y0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&plot.y_label)
    );
    for (i, s) in plot.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}
