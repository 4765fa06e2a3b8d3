//! Self-contained dual-axis SVG line charts rendered straight from CSV
//! text. Rendering is a pure function of the CSV content and the chart
//! spec, so re-emitting from the same CSV reproduces the SVG byte for byte.

use crate::error::{Error, Result};
use crate::harness::csv::parse_csv;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 70.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Left,
    Right,
}

#[derive(Debug, Clone)]
pub struct SeriesSpec {
    pub y_col: String,
    pub label: String,
    pub axis: Axis,
    /// Keep only rows where `column == value`.
    pub filter: Option<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct ChartSpec {
    pub title: String,
    pub x_col: String,
    pub x_log: bool,
    pub left_label: String,
    pub right_label: String,
    pub series: Vec<SeriesSpec>,
}

struct Range {
    min: f64,
    max: f64,
}

impl Range {
    fn grow(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    fn pad(mut self) -> Self {
        if !self.min.is_finite() || !self.max.is_finite() {
            return Range { min: 0.0, max: 1.0 };
        }
        if self.min == self.max {
            self.min -= 0.5;
            self.max += 0.5;
        } else {
            let pad = 0.05 * (self.max - self.min);
            self.min -= pad;
            self.max += pad;
        }
        self
    }

    fn scale(&self, v: f64, lo: f64, hi: f64) -> f64 {
        lo + (v - self.min) / (self.max - self.min) * (hi - lo)
    }
}

fn fmt_coord(v: f64) -> String {
    format!("{:.2}", v)
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        format!("{v:.4}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}

/// Render a chart from CSV text. Rows whose relevant cells do not parse as
/// finite numbers (summary rows, `nan` entries) are skipped.
pub fn render_chart(csv_text: &str, spec: &ChartSpec) -> Result<String> {
    let (header, rows) = parse_csv(csv_text);
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("csv has no column {name}")))
    };
    let x_idx = col(&spec.x_col)?;

    struct SeriesData {
        label: String,
        axis: Axis,
        points: Vec<(f64, f64)>,
    }

    let mut series_data = Vec::new();
    for s in &spec.series {
        let y_idx = col(&s.y_col)?;
        let filter = match &s.filter {
            Some((c, v)) => Some((col(c)?, v.clone())),
            None => None,
        };
        let mut points = Vec::new();
        for row in &rows {
            if let Some((fc, fv)) = &filter {
                if row.get(*fc).map(|c| c != fv).unwrap_or(true) {
                    continue;
                }
            }
            let x: f64 = match row.get(x_idx).and_then(|c| c.parse().ok()) {
                Some(v) => v,
                None => continue,
            };
            let y: f64 = match row.get(y_idx).and_then(|c| c.parse().ok()) {
                Some(v) => v,
                None => continue,
            };
            if !x.is_finite() || !y.is_finite() {
                continue;
            }
            let x = if spec.x_log { (x.max(f64::MIN_POSITIVE)).log10() } else { x };
            points.push((x, y));
        }
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite x"));
        series_data.push(SeriesData { label: s.label.clone(), axis: s.axis, points });
    }

    let mut x_range = Range { min: f64::INFINITY, max: f64::NEG_INFINITY };
    let mut left = Range { min: f64::INFINITY, max: f64::NEG_INFINITY };
    let mut right = Range { min: f64::INFINITY, max: f64::NEG_INFINITY };
    for s in &series_data {
        for &(x, y) in &s.points {
            x_range.grow(x);
            match s.axis {
                Axis::Left => left.grow(y),
                Axis::Right => right.grow(y),
            }
        }
    }
    let x_range = x_range.pad();
    let left = left.pad();
    let right = right.pad();

    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        xml_escape(&spec.title)
    ));

    // axes
    out.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n"
    ));
    out.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));
    out.push_str(&format!(
        "<line x1=\"{x1}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));

    // ticks
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let xv = x_range.min + t * (x_range.max - x_range.min);
        let xp = x_range.scale(xv, x0, x1);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y0}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            fmt_coord(xp),
            fmt_coord(xp),
            y0 + 5.0
        ));
        let label = if spec.x_log { format!("1e{}", fmt_tick(xv)) } else { fmt_tick(xv) };
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fmt_coord(xp),
            y0 + 20.0,
            label
        ));
        let lv = left.min + t * (left.max - left.min);
        let lp = left.scale(lv, y0, y1);
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            x0 - 8.0,
            fmt_coord(lp + 4.0),
            fmt_tick(lv)
        ));
        let rv = right.min + t * (right.max - right.min);
        let rp = right.scale(rv, y0, y1);
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"start\">{}</text>\n",
            x1 + 8.0,
            fmt_coord(rp + 4.0),
            fmt_tick(rv)
        ));
    }
    out.push_str(&format!(
        "<text x=\"18\" y=\"{}\" transform=\"rotate(-90 18 {})\" text-anchor=\"middle\">{}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        xml_escape(&spec.left_label)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" transform=\"rotate(90 {} {})\" text-anchor=\"middle\">{}</text>\n",
        WIDTH - 14.0,
        HEIGHT / 2.0,
        WIDTH - 14.0,
        HEIGHT / 2.0,
        xml_escape(&spec.right_label)
    ));

    // series polylines + legend
    for (i, s) in series_data.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let range = match s.axis {
            Axis::Left => &left,
            Axis::Right => &right,
        };
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| {
                format!(
                    "{},{}",
                    fmt_coord(x_range.scale(x, x0, x1)),
                    fmt_coord(range.scale(y, y0, y1))
                )
            })
            .collect();
        if !pts.is_empty() {
            let dash = if s.axis == Axis::Right { " stroke-dasharray=\"6 3\"" } else { "" };
            out.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>\n",
                pts.join(" ")
            ));
        }
        let ly = MARGIN_TOP + 16.0 * i as f64;
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            x0 + 10.0,
            ly,
            x0 + 34.0,
            ly
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            x0 + 40.0,
            ly + 4.0,
            xml_escape(&s.label)
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_csv() -> String {
        let mut t = crate::harness::csv::CsvTable::new(1, 2, &["alpha", "loss", "acc", "kind"]);
        for i in 0..5 {
            t.push_row(vec![
                format!("{}", i as f64 * 0.5),
                format!("{}", 1.0 / (1.0 + i as f64)),
                format!("{}", 0.5 + 0.1 * i as f64),
                "linear".into(),
            ]);
        }
        t.to_text()
    }

    fn spec() -> ChartSpec {
        ChartSpec {
            title: "test".into(),
            x_col: "alpha".into(),
            x_log: false,
            left_label: "loss".into(),
            right_label: "accuracy".into(),
            series: vec![
                SeriesSpec {
                    y_col: "loss".into(),
                    label: "loss".into(),
                    axis: Axis::Left,
                    filter: Some(("kind".into(), "linear".into())),
                },
                SeriesSpec {
                    y_col: "acc".into(),
                    label: "acc".into(),
                    axis: Axis::Right,
                    filter: None,
                },
            ],
        }
    }

    #[test]
    fn render_is_pure_in_the_csv_content() {
        let csv = sample_csv();
        let a = render_chart(&csv, &spec()).unwrap();
        let b = render_chart(&csv, &spec()).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("polyline"));
    }

    #[test]
    fn missing_column_is_a_config_error() {
        let csv = sample_csv();
        let mut bad = spec();
        bad.x_col = "missing".into();
        assert!(matches!(render_chart(&csv, &bad), Err(Error::Config(_))));
    }
}
