//! Minimal line-plot SVG renderer driven by a [`Table`].

use std::fmt::Write;

use crate::table::{date_from_days, Cell, Table};

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf",
];

#[derive(Clone, Debug)]
pub enum Style {
    Line,
    Points,
}

/// One plotted column, optionally restricted to rows whose `filter.0`
/// column equals `filter.1`.
#[derive(Clone, Debug)]
pub struct Series {
    pub y: String,
    pub label: String,
    pub style: Style,
    pub filter: Option<(String, String)>,
}

impl Series {
    pub fn line(y: &str, label: &str) -> Self {
        Series {
            y: y.into(),
            label: label.into(),
            style: Style::Line,
            filter: None,
        }
    }

    pub fn points(y: &str, label: &str) -> Self {
        Series {
            style: Style::Points,
            ..Series::line(y, label)
        }
    }

    pub fn filtered(mut self, column: &str, value: &str) -> Self {
        self.filter = Some((column.into(), value.into()));
        self
    }
}

#[derive(Clone, Debug)]
pub struct Band {
    pub lo: String,
    pub hi: String,
    pub label: String,
}

#[derive(Clone, Debug, Default)]
pub struct Plot {
    pub title: String,
    pub x: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub bands: Vec<Band>,
}

impl Plot {
    pub fn new(title: &str, x: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            title: title.into(),
            x: x.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }

    pub fn series(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn band(mut self, lo: &str, hi: &str, label: &str) -> Self {
        self.bands.push(Band {
            lo: lo.into(),
            hi: hi.into(),
            label: label.into(),
        });
        self
    }
}

/// Tick positions at 1, 2 or 5 times a power of ten.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::EPSILON);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= target as f64)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64, dates: bool) -> String {
    if dates {
        return date_from_days(v.round() as i64).to_string();
    }
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn selected<'a>(table: &'a Table, filter: &Option<(String, String)>) -> Vec<&'a Vec<Cell>> {
    match filter {
        None => table.rows.iter().collect(),
        Some((col, value)) => {
            let c = table.column(col);
            table
                .rows
                .iter()
                .filter(|r| matches!(&r[c], Cell::Text(t) if t == value))
                .collect()
        }
    }
}

/// Runs of consecutive rows where both coordinates are present.
fn segments(rows: &[&Vec<Cell>], xc: usize, yc: usize) -> Vec<Vec<(f64, f64)>> {
    let mut out = vec![Vec::new()];
    for r in rows {
        match (r[xc].as_f64(), r[yc].as_f64()) {
            (Some(x), Some(y)) => out.last_mut().expect("non-empty").push((x, y)),
            _ => {
                if !out.last().expect("non-empty").is_empty() {
                    out.push(Vec::new());
                }
            }
        }
    }
    out.retain(|s| !s.is_empty());
    out
}

fn path(points: &[(f64, f64)], frame: &Frame) -> String {
    let mut d = String::new();
    for (k, (x, y)) in points.iter().enumerate() {
        let _ = write!(
            d,
            "{}{:.2},{:.2}",
            if k == 0 { "M" } else { " L" },
            frame.px(*x),
            frame.py(*y)
        );
    }
    d
}

/// Render `plot` from the numbers in `table`; vertical red lines mark the
/// table's marker dates.
pub fn render(table: &Table, plot: &Plot) -> String {
    let xc = table.column(&plot.x);
    let dates = table.rows.iter().any(|r| matches!(r[xc], Cell::Date(_)));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in &plot.series {
        let yc = table.column(&s.y);
        for seg in segments(&selected(table, &s.filter), xc, yc) {
            for (x, y) in seg {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    let all: Vec<&Vec<Cell>> = table.rows.iter().collect();
    for b in &plot.bands {
        for col in [&b.lo, &b.hi] {
            for seg in segments(&all, xc, table.column(col)) {
                for (x, y) in seg {
                    xs.push(x);
                    ys.push(y);
                }
            }
        }
    }
    let range = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let pad = 0.05 * (y1 - y0);
    let frame = Frame {
        x0,
        x1,
        y0: y0 - pad,
        y1: y1 + pad,
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(&plot.title)
    );
    // axes and ticks
    let (bx0, bx1, by0, by1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r#"<rect x="{bx0}" y="{by0}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        bx1 - bx0,
        by1 - by0
    );
    let x_ticks = if dates { 6 } else { 8 };
    for t in ticks(frame.x0, frame.x1, x_ticks) {
        let px = frame.px(t);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{by1}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            by1 + 5.0,
            by1 + 19.0,
            tick_label(t, dates)
        );
    }
    for t in ticks(frame.y0, frame.y1, 6) {
        let py = frame.py(t);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{bx0}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            bx0 - 5.0,
            bx0 - 8.0,
            py + 4.0,
            tick_label(t, false)
        );
    }
    if frame.y0 < 0.0 && frame.y1 > 0.0 {
        let py = frame.py(0.0);
        let _ = writeln!(
            s,
            r##"<line x1="{bx0}" y1="{py:.2}" x2="{bx1}" y2="{py:.2}" stroke="#999" stroke-dasharray="4 3"/>"##
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (bx0 + bx1) / 2.0,
        HEIGHT - 12.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (by0 + by1) / 2.0,
        escape(&plot.y_label)
    );

    let mut legend = Vec::new();
    for (k, b) in plot.bands.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let (lo, hi) = (table.column(&b.lo), table.column(&b.hi));
        for seg in segments(&all, xc, lo) {
            let upper: Vec<(f64, f64)> = table
                .rows
                .iter()
                .filter_map(|r| Some((r[xc].as_f64()?, r[hi].as_f64()?)))
                .filter(|(x, _)| *x >= seg[0].0 && *x <= seg[seg.len() - 1].0)
                .collect();
            let mut outline = seg.clone();
            outline.extend(upper.iter().rev());
            let _ = writeln!(
                s,
                r#"<path d="{} Z" fill="{colour}" fill-opacity="0.25" stroke="none"/>"#,
                path(&outline, &frame)
            );
        }
        legend.push((colour, b.label.clone(), true));
    }
    for (k, series) in plot.series.iter().enumerate() {
        let colour = PALETTE[(k + plot.bands.len()) % PALETTE.len()];
        let yc = table.column(&series.y);
        for seg in segments(&selected(table, &series.filter), xc, yc) {
            match series.style {
                Style::Line => {
                    let _ = writeln!(
                        s,
                        r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
                        path(&seg, &frame)
                    );
                }
                Style::Points => {
                    for (x, y) in seg {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="{colour}"/>"#,
                            frame.px(x),
                            frame.py(y)
                        );
                    }
                }
            }
        }
        legend.push((colour, series.label.clone(), false));
    }
    for d in &table.markers {
        let x = Cell::Date(*d).as_f64().expect("date");
        if dates && x >= frame.x0 && x <= frame.x1 {
            let px = frame.px(x);
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{by0}" x2="{px:.2}" y2="{by1}" stroke="red" stroke-width="1.2"/>"#
            );
        }
    }
    for (k, (colour, label, filled)) in legend.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * k as f64;
        let x = WIDTH - RIGHT + 12.0;
        if *filled {
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{:.2}" width="18" height="10" fill="{colour}" fill-opacity="0.25"/>"#,
                y - 5.0
            );
        } else {
            let _ = writeln!(
                s,
                r#"<line x1="{x}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{colour}" stroke-width="2"/>"#,
                x + 18.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 24.0,
            y + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}
