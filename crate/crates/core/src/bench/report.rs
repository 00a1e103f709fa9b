use std::io::Write;

use super::ExperimentReport;
use crate::error::Result;

/// Per-trial rows followed by `mean` and `std` summary rows.
pub fn write_report_csv<W: Write>(out: &mut W, report: &ExperimentReport) -> Result<()> {
    writeln!(out, "trial,mse_cstr,mse_test")?;
    for (t, r) in report.trials.iter().enumerate() {
        writeln!(out, "{t},{:e},{:e}", r.mse_cstr, r.mse_test)?;
    }
    let (cm, cs) = report.cstr_stats();
    let (tm, ts) = report.test_stats();
    writeln!(out, "mean,{cm:e},{tm:e}")?;
    writeln!(out, "std,{cs:e},{ts:e}")?;
    Ok(())
}

/// A model curve against the known solution along one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub xs: Vec<f64>,
    pub truth: Vec<f64>,
    pub predicted: Vec<f64>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot of the trace: truth dashed, prediction solid.
pub fn write_trace_svg<W: Write>(out: &mut W, trace: &Trace) -> Result<()> {
    let (x0, x1) = bounds(&trace.xs);
    let (y0, y1) = bounds(
        trace
            .truth
            .iter()
            .chain(&trace.predicted)
            .cloned()
            .collect::<Vec<_>>()
            .as_slice(),
    );
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let path = |ys: &[f64]| {
        trace
            .xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    )?;
    writeln!(
        out,
        r#"<text x="{}" y="30" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&trace.title)
    )?;
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(&trace.x_label)
    )?;
    writeln!(
        out,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(&trace.y_label)
    )?;
    for (v, x, y, anchor) in [
        (x0, MARGIN, HEIGHT - MARGIN + 18.0, "middle"),
        (x1, WIDTH - MARGIN, HEIGHT - MARGIN + 18.0, "middle"),
        (y0, MARGIN - 6.0, HEIGHT - MARGIN, "end"),
        (y1, MARGIN - 6.0, MARGIN + 4.0, "end"),
    ] {
        writeln!(
            out,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{v:.3}</text>"#
        )?;
    }
    writeln!(
        out,
        r#"<polyline fill="none" stroke="gray" stroke-width="2" stroke-dasharray="6 4" points="{}"/>"#,
        path(&trace.truth)
    )?;
    writeln!(
        out,
        r#"<polyline fill="none" stroke="crimson" stroke-width="1.5" points="{}"/>"#,
        path(&trace.predicted)
    )?;
    let lx = WIDTH - MARGIN - 120.0;
    writeln!(
        out,
        r#"<line x1="{lx}" y1="{y}" x2="{}" y2="{y}" stroke="gray" stroke-width="2" stroke-dasharray="6 4"/><text x="{}" y="{}">truth</text>"#,
        lx + 24.0,
        lx + 30.0,
        MARGIN + 24.0,
        y = MARGIN + 20.0
    )?;
    writeln!(
        out,
        r#"<line x1="{lx}" y1="{y}" x2="{}" y2="{y}" stroke="crimson" stroke-width="1.5"/><text x="{}" y="{}">model</text>"#,
        lx + 24.0,
        lx + 30.0,
        MARGIN + 42.0,
        y = MARGIN + 38.0
    )?;
    writeln!(out, "</svg>")?;
    Ok(())
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}
