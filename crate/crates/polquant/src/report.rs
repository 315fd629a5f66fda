//! CSV and SVG emission for sweep reports.
//!
//! The CSV format is fixed: header
//! `k,N,m_class,remainder_abs,l1_norm,seminorm_N1,bound_ratio`, one row per
//! (k, class), then a comment line
//! `# fitted_slope=<value> max_bound_ratio=<value>` (slope `na` when no fit
//! is possible). Numeric fields use a fixed `{:.15e}` format so identical
//! inputs produce byte-identical files.

use std::fmt::Write as FmtWrite;
use std::path::Path;

use crate::error::Result;
use crate::toeplitz::SweepReport;

pub const CSV_HEADER: &str = "k,N,m_class,remainder_abs,l1_norm,seminorm_N1,bound_ratio";

fn format_class(class: &[i64]) -> String {
    class.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(":")
}

/// Render a sweep report in the fixed CSV format.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{:.15e},{:.15e},{:.15e},{:.15e}",
            row.k,
            row.n_order,
            format_class(&row.m_class),
            row.remainder_abs,
            row.l1_norm,
            row.seminorm,
            row.bound_ratio
        )
        .expect("writing to a String cannot fail");
    }
    match report.fitted_slope {
        Some(slope) => writeln!(
            out,
            "# fitted_slope={:.15e} max_bound_ratio={:.15e}",
            slope, report.max_bound_ratio
        ),
        None => writeln!(out, "# fitted_slope=na max_bound_ratio={:.15e}", report.max_bound_ratio),
    }
    .expect("writing to a String cannot fail");
    out
}

pub fn write_sweep_csv(report: &SweepReport, path: &Path) -> Result<()> {
    std::fs::write(path, sweep_csv(report))?;
    Ok(())
}

/// Hand-emitted SVG of log₁₀ remainder against log₁₀ k with the fitted line.
/// Static diagnostic output; no plotting dependency.
pub fn decay_svg(report: &SweepReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const ML: f64 = 70.0;
    const MB: f64 = 50.0;
    const MT: f64 = 20.0;
    const MR: f64 = 20.0;

    let points: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.remainder_abs > 0.0)
        .map(|r| ((r.k as f64).log10(), r.remainder_abs.log10()))
        .collect();

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));

    if points.is_empty() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">no nonzero remainders</text>\n",
            W / 2.0,
            H / 2.0
        ));
        svg.push_str("</svg>\n");
        return svg;
    }

    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if (x1 - x0).abs() < 1e-12 {
        x1 = x0 + 1.0;
    }
    if (y1 - y0).abs() < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MB - MT);

    // axes
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        ML,
        H - MB,
        W - MR,
        H - MB
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        ML,
        MT,
        ML,
        H - MB
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">log10 k</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">log10 remainder</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    ));
    for (v, label_y) in [(x0, false), (x1, false), (y0, true), (y1, true)] {
        if label_y {
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{v:.2}</text>\n",
                ML - 6.0,
                sy(v) + 4.0
            ));
        } else {
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{v:.2}</text>\n",
                sx(v),
                H - MB + 16.0
            ));
        }
    }

    // fitted line through the centroid with the reported slope
    if let Some(slope) = report.fitted_slope {
        let cx = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
        let cy = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
        // the fit is in natural logs; slopes in log10 coincide
        let ya = cy + slope * (x0 - cx);
        let yb = cy + slope * (x1 - cx);
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"#888\" stroke-dasharray=\"5,4\" points=\"{:.2},{:.2} {:.2},{:.2}\"/>\n",
            sx(x0),
            sy(ya),
            sx(x1),
            sy(yb)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">slope {slope:.4}</text>\n",
            ML + 10.0,
            MT + 14.0
        ));
    }

    // data points and connecting polyline
    let mut poly = String::new();
    for &(x, y) in &points {
        poly.push_str(&format!("{:.2},{:.2} ", sx(x), sy(y)));
    }
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1f77b4\" points=\"{}\"/>\n",
        poly.trim_end()
    ));
    for &(x, y) in &points {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f77b4\"/>\n",
            sx(x),
            sy(y)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_decay_svg(report: &SweepReport, path: &Path) -> Result<()> {
    std::fs::write(path, decay_svg(report))?;
    Ok(())
}
