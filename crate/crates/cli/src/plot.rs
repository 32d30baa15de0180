//! Log-log convergence plots as plain SVG, drawn only from `trace.csv`
//! rows so that re-plotting a saved trace gives the same bytes.

use std::fmt::Write as _;

use qpush_core::report::TraceCsvRow;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// `(t, value)`; points with a non-positive or non-finite value break
    /// the line.
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub dashed: bool,
}

/// Objective error, constraint violation and, when the trace carries bound
/// residuals, the two bound curves.
pub fn trace_series(
    rows: &[TraceCsvRow],
    f_star: Option<f64>,
    name: &str,
    colors: [&'static str; 2],
) -> Vec<Series> {
    let mut out = Vec::new();
    let t = |r: &TraceCsvRow| r.t as f64;
    if let Some(fs) = f_star {
        out.push(Series {
            label: format!("{name}: |f(x̄) − f*|"),
            points: rows.iter().map(|r| (t(r), (r.f_xbar - fs).abs())).collect(),
            color: colors[0],
            dashed: false,
        });
        if rows.iter().any(|r| r.obj_bound_residual.is_some()) {
            out.push(Series {
                label: format!("{name}: objective bound"),
                points: rows
                    .iter()
                    .filter_map(|r| r.obj_bound_residual.map(|res| (t(r), r.f_xbar - res - fs)))
                    .collect(),
                color: colors[0],
                dashed: true,
            });
        }
    }
    out.push(Series {
        label: format!("{name}: max_k g_k(x̄)"),
        points: rows.iter().map(|r| (t(r), r.max_violation)).collect(),
        color: colors[1],
        dashed: false,
    });
    if rows.iter().any(|r| r.cons_bound_residual.is_some()) {
        out.push(Series {
            label: format!("{name}: constraint bound"),
            points: rows
                .iter()
                .filter_map(|r| {
                    r.cons_bound_residual
                        .map(|res| (t(r), r.max_violation - res))
                })
                .collect(),
            color: colors[1],
            dashed: true,
        });
    }
    out
}

/// The standard figure: one trace, an optional overlay, and `1/t`.
pub fn convergence_svg(
    primary: &[TraceCsvRow],
    overlay: Option<&[TraceCsvRow]>,
    f_star: Option<f64>,
) -> String {
    let mut series = trace_series(primary, f_star, "run", ["#1f77b4", "#2ca02c"]);
    if let Some(rows) = overlay {
        series.extend(trace_series(
            rows,
            f_star,
            "overlay",
            ["#d62728", "#ff7f0e"],
        ));
    }
    let t_max = primary
        .iter()
        .chain(overlay.unwrap_or(&[]))
        .map(|r| r.t)
        .max()
        .unwrap_or(1);
    let mut ts: Vec<f64> = (0..=60)
        .map(|i| (t_max as f64).powf(i as f64 / 60.0))
        .collect();
    ts.dedup();
    series.push(Series {
        label: "1/t".into(),
        points: ts.into_iter().map(|t| (t, 1.0 / t)).collect(),
        color: "#7f7f7f",
        dashed: true,
    });
    log_log_svg("convergence", &series)
}

fn valid(p: &(f64, f64)) -> bool {
    p.0 > 0.0 && p.1 > 0.0 && p.0.is_finite() && p.1.is_finite()
}

pub fn log_log_svg(title: &str, series: &[Series]) -> String {
    let pts = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|p| valid(p));
    let (mut x_hi, mut y_lo, mut y_hi) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x_hi = x_hi.max(x.log10());
        y_lo = y_lo.min(y.log10());
        y_hi = y_hi.max(y.log10());
    }
    let x_hi = x_hi.ceil().max(1.0);
    let (y_lo, y_hi) = if y_lo.is_finite() {
        (y_lo.floor(), y_hi.ceil().max(y_lo.floor() + 1.0))
    } else {
        (-1.0, 0.0)
    };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + x.log10() / x_hi * pw;
    let sy = |y: f64| TOP + (y_hi - y.log10()) / (y_hi - y_lo) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );

    for k in 0..=x_hi as i64 {
        let x = LEFT + k as f64 / x_hi * pw;
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##,
            TOP + ph
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">10<tspan dy="-5" font-size="9">{k}</tspan></text>"#,
            TOP + ph + 18.0
        );
    }
    for k in y_lo as i64..=y_hi as i64 {
        let y = TOP + (y_hi - k as f64) / (y_hi - y_lo) * ph;
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##,
            LEFT + pw
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">10<tspan dy="-5" font-size="9">{k}</tspan></text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );

    for (i, s) in series.iter().enumerate() {
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, svg: &mut String| {
            if run.len() > 1 {
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                    s.color,
                    run.join(" ")
                );
            }
            run.clear();
        };
        for p in &s.points {
            if valid(p) {
                run.push(format!("{:.2},{:.2}", sx(p.0), sy(p.1)));
            } else {
                flush(&mut run, &mut svg);
            }
        }
        flush(&mut run, &mut svg);

        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"{dash}/>"#,
            lx + 22.0,
            s.color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
