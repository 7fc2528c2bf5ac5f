use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// Measured p(γ) with the e^(−πγ) curve.
    Sweep,
    /// |p(2γ) − p(γ)²| of a sweep, or curvature residuals, on a log scale.
    Residual,
    /// Distance of each ladder rung from the extrapolated limit.
    Convergence,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
/// Exact zeros are drawn here on log axes.
const LOG_FLOOR: f64 = 1e-18;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

struct Figure {
    title: String,
    x_label: String,
    y_label: String,
    x_log: bool,
    y_log: bool,
    series: Vec<Series>,
    reference: Option<(String, Vec<(f64, f64)>)>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn num(v: &Value, key: &str) -> Option<f64> {
    v.get(key).and_then(Value::as_f64)
}

fn records(envelope: &Value) -> Result<&Value, CliError> {
    let records = envelope
        .get("records")
        .ok_or_else(|| usage("input is not a result envelope (no `records`)"))?;
    let empty = match records {
        Value::Null => true,
        Value::Array(a) => a.is_empty(),
        Value::Object(o) => o.is_empty(),
        _ => false,
    };
    if empty {
        return Err(usage("envelope has no records to plot"));
    }
    Ok(records)
}

fn sweep_rows(records: &Value) -> Option<&Vec<Value>> {
    records.as_array().filter(|rows| {
        rows.iter()
            .all(|r| r.get("gamma").is_some() && r.get("functional_residual").is_some())
    })
}

fn sweep_figure(records: &Value) -> Result<Figure, CliError> {
    let rows = sweep_rows(records)
        .ok_or_else(|| usage("sweep plots need a verify-functional envelope"))?;
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| Some((num(r, "gamma")?, num(r, "p")?)))
        .collect();
    let hi = points.iter().map(|p| p.0).fold(0.0, f64::max).max(1e-3) * 1.05;
    let curve = (0..=200)
        .map(|k| {
            let g = hi * k as f64 / 200.0;
            (g, (-std::f64::consts::PI * g).exp())
        })
        .collect();
    Ok(Figure {
        title: "Survival probability".into(),
        x_label: "γ".into(),
        y_label: "p".into(),
        x_log: false,
        y_log: false,
        series: vec![Series {
            label: "measured".into(),
            points,
        }],
        reference: Some(("exp(−πγ)".into(), curve)),
    })
}

fn residual_figure(records: &Value) -> Result<Figure, CliError> {
    if let Some(rows) = sweep_rows(records) {
        let points = rows
            .iter()
            .filter_map(|r| Some((num(r, "gamma")?, num(r, "functional_residual")?.abs())))
            .collect();
        return Ok(Figure {
            title: "Functional equation residual".into(),
            x_label: "γ".into(),
            y_label: "|p(2γ) − p(γ)²|".into(),
            x_log: false,
            y_log: true,
            series: vec![Series {
                label: "residual".into(),
                points,
            }],
            reference: None,
        });
    }
    let column = |key: &str| -> Option<Vec<(f64, f64)>> {
        let values = records.get(key)?.as_array()?;
        values
            .iter()
            .enumerate()
            .map(|(i, v)| Some((i as f64, v.as_f64()?)))
            .collect()
    };
    match (
        column("commutator_residuals"),
        column("compatibility_residuals"),
    ) {
        (Some(commutator), Some(compatibility)) => Ok(Figure {
            title: "Curvature residuals".into(),
            x_label: "grid point".into(),
            y_label: "Frobenius norm".into(),
            x_log: false,
            y_log: true,
            series: vec![
                Series {
                    label: "[H, H′]".into(),
                    points: commutator,
                },
                Series {
                    label: "∂τH − ∂tH′".into(),
                    points: compatibility,
                },
            ],
            reference: None,
        }),
        _ => Err(usage(
            "residual plots need a verify-functional or verify-integrability envelope",
        )),
    }
}

fn convergence_figure(records: &Value) -> Result<Figure, CliError> {
    let (Some(ladder), Some(p)) = (
        records.get("ladder").and_then(Value::as_array),
        num(records, "p"),
    ) else {
        return Err(usage(
            "convergence plots need a simulate envelope with a limit ladder",
        ));
    };
    let rung = |key: &str| -> Vec<(f64, f64)> {
        ladder
            .iter()
            .filter_map(|r| Some((num(r, "half_width")?, (num(r, key)? - p).abs())))
            .collect()
    };
    Ok(Figure {
        title: "Approach to the infinite-time limit".into(),
        x_label: "T".into(),
        y_label: "|p(T) − p|".into(),
        x_log: true,
        y_log: true,
        series: vec![
            Series {
                label: "window endpoint".into(),
                points: rung("endpoint"),
            },
            Series {
                label: "period average".into(),
                points: rung("averaged"),
            },
        ],
        reference: None,
    })
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = values
            .map(|v| if log { v.max(LOG_FLOOR).log10() } else { v })
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil().max(lo + 1.0);
        } else {
            if hi - lo < 1e-12 {
                lo -= 0.5;
                hi += 0.5;
            }
            let pad = 0.05 * (hi - lo);
            lo = if lo >= 0.0 && lo - pad < 0.0 {
                0.0
            } else {
                lo - pad
            };
            hi += pad;
        }
        Self { lo, hi, log }
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log {
            v.max(LOG_FLOOR).log10()
        } else {
            v
        };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0);
            let mut out = Vec::new();
            let mut e = self.lo;
            while e <= self.hi + 1e-9 {
                out.push((10f64.powf(e), format!("1e{}", e as i64)));
                e += step;
            }
            out
        } else {
            (0..=5)
                .map(|k| {
                    let v = self.lo + (self.hi - self.lo) * k as f64 / 5.0;
                    (v, format!("{v:.3}"))
                })
                .collect()
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn render(fig: &Figure) -> String {
    let all = || {
        fig.series
            .iter()
            .flat_map(|s| s.points.iter())
            .chain(fig.reference.iter().flat_map(|r| r.1.iter()))
    };
    let xa = Axis::fit(all().map(|p| p.0), fig.x_log);
    let ya = Axis::fit(all().map(|p| p.1), fig.y_log);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + pw * xa.unit(x);
    let sy = |y: f64| TOP + ph * (1.0 - ya.unit(y));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(&fig.title)
    );
    let _ = writeln!(
        s,
        r#"<rect class="frame" x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (v, label) in xa.ticks() {
        let x = sx(v);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{label}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0
        );
    }
    for (v, label) in ya.ticks() {
        let y = sy(v);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&fig.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(&fig.y_label)
    );

    let mut legend = Vec::new();
    if let Some((label, curve)) = &fig.reference {
        let pts: Vec<String> = curve
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline class="reference" points="{}" fill="none" stroke="#555" stroke-dasharray="6 3"/>"##,
            pts.join(" ")
        );
        legend.push((label.clone(), "#555"));
    }
    for (k, series) in fig.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        for &(x, y) in &series.points {
            let _ = writeln!(
                s,
                r#"<circle class="point" data-series="{k}" cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        legend.push((series.label.clone(), color));
    }
    for (k, (label, color)) in legend.iter().enumerate() {
        let y = TOP + 16.0 + 16.0 * k as f64;
        let x = LEFT + pw - 150.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{y}">{}</text>"#,
            y - 9.0,
            x + 15.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn plot(input: &Path, kind: PlotKind) -> Result<String, CliError> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::Io {
        path: input.to_path_buf(),
        source: e,
    })?;
    let envelope: Value = serde_json::from_str(&text).map_err(|e| {
        usage(format!(
            "{} is not a JSON result envelope: {e}",
            input.display()
        ))
    })?;
    let records = records(&envelope)?;
    let figure = match kind {
        PlotKind::Sweep => sweep_figure(records)?,
        PlotKind::Residual => residual_figure(records)?,
        PlotKind::Convergence => convergence_figure(records)?,
    };
    Ok(render(&figure))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_axis_covers_whole_decades() {
        let a = Axis::fit([3e-7, 2e-3].into_iter(), true);
        assert_eq!((a.lo, a.hi), (-7.0, -2.0));
        assert_eq!(a.unit(1e-7), 0.0);
        assert!(a.ticks().len() >= 5);
    }

    #[test]
    fn zeros_sit_on_the_log_floor() {
        let a = Axis::fit([0.0, 1e-14].into_iter(), true);
        assert_eq!(a.lo, LOG_FLOOR.log10());
    }

    #[test]
    fn labels_are_escaped() {
        assert_eq!(escape("a<b & c"), "a&lt;b &amp; c");
    }
}
