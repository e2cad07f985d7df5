//! Deterministic SVG plots of CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_bytes, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    /// First column against second on log axes, with the fitted slope.
    Loglog,
    /// First column against second on linear axes.
    Profile,
    /// Columns `x, y, value` on a tensor grid.
    FieldHeatmap,
}

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 56.0;

fn numeric_columns(table: &Table, count: usize) -> Result<Vec<Vec<f64>>> {
    if table.header.len() < count {
        return Err(Error::Plot(format!(
            "need {count} columns, found {}",
            table.header.len()
        )));
    }
    (0..count)
        .map(|k| {
            table
                .column(&table.header[k])
                .ok_or_else(|| Error::Plot(format!("column `{}` is not numeric", table.header[k])))
        })
        .collect()
}

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
}

fn frame(out: &mut String, xlabel: &str, ylabel: &str, xr: (f64, f64), yr: (f64, f64), log: bool) {
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN / 2.0, HEIGHT - MARGIN, MARGIN / 2.0);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    let fmt = |v: f64| {
        if log {
            format!("{:.3e}", 10f64.powf(v))
        } else {
            format!("{v:.4}")
        }
    };
    let _ = writeln!(
        out,
        r#"<text x="{x0}" y="{}" text-anchor="start">{}</text>"#,
        y0 + 16.0,
        fmt(xr.0)
    );
    let _ = writeln!(
        out,
        r#"<text x="{x1}" y="{}" text-anchor="end">{}</text>"#,
        y0 + 16.0,
        fmt(xr.1)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        x0 - 4.0,
        y0,
        fmt(yr.0)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        x0 - 4.0,
        y1 + 10.0,
        fmt(yr.1)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        0.5 * (x0 + x1),
        HEIGHT - 8.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        0.5 * (y0 + y1),
        0.5 * (y0 + y1),
        escape(ylabel)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn to_screen(v: f64, r: (f64, f64), a: f64, b: f64) -> f64 {
    a + (v - r.0) / (r.1 - r.0) * (b - a)
}

fn line_plot(table: &Table, log: bool) -> Result<String> {
    let cols = numeric_columns(table, 2)?;
    let (mut xs, mut ys) = (cols[0].clone(), cols[1].clone());
    if xs.len() < 2 {
        return Err(Error::Plot("need at least two rows".into()));
    }
    let mut note = None;
    if log {
        if xs.iter().chain(&ys).any(|v| !(*v > 0.0)) {
            return Err(Error::Plot("log axes need positive data".into()));
        }
        xs.iter_mut().for_each(|v| *v = v.log10());
        ys.iter_mut().for_each(|v| *v = v.log10());
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        note = Some(format!("slope {:.2}", sxy / sxx));
    }
    let (xr, yr) = (range(&xs), range(&ys));
    let mut out = String::new();
    header(&mut out);
    frame(&mut out, &table.header[0], &table.header[1], xr, yr, log);
    let pts: Vec<String> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            format!(
                "{:.2},{:.2}",
                to_screen(*x, xr, MARGIN, WIDTH - MARGIN / 2.0),
                to_screen(*y, yr, HEIGHT - MARGIN, MARGIN / 2.0)
            )
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
        pts.join(" ")
    );
    if log {
        for p in &pts {
            let (x, y) = p.split_once(',').unwrap();
            let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="steelblue"/>"#);
        }
    }
    if let Some(note) = note {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">{note}</text>"#,
            MARGIN + 8.0,
            MARGIN / 2.0 + 16.0
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Blue to yellow through green.
fn ramp(s: f64) -> (u8, u8, u8) {
    const STOPS: [(f64, f64, f64); 4] = [
        (68.0, 1.0, 84.0),
        (49.0, 104.0, 142.0),
        (53.0, 183.0, 121.0),
        (253.0, 231.0, 37.0),
    ];
    let s = s.clamp(0.0, 1.0) * 3.0;
    let k = (s.floor() as usize).min(2);
    let f = s - k as f64;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let mix = |p: f64, q: f64| (p + f * (q - p)).round() as u8;
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn heatmap(table: &Table) -> Result<String> {
    let get = |name: &str| {
        table
            .column(name)
            .ok_or_else(|| Error::Plot(format!("heatmap needs a numeric `{name}` column")))
    };
    let (x, y, v) = (get("x")?, get("y")?, get("value")?);
    let uniq = |c: &[f64]| {
        let mut u = c.to_vec();
        u.sort_by(|a, b| a.total_cmp(b));
        u.dedup();
        u
    };
    let (ux, uy) = (uniq(&x), uniq(&y));
    if ux.len() < 2 || uy.len() < 2 || ux.len() * uy.len() != v.len() {
        return Err(Error::Plot("heatmap rows do not form a tensor grid".into()));
    }
    let (xr, yr, vr) = (range(&ux), range(&uy), range(&v));
    let mut out = String::new();
    header(&mut out);
    let (cw, ch) = (
        (WIDTH - 1.5 * MARGIN) / (ux.len() - 1) as f64,
        (HEIGHT - 1.5 * MARGIN) / (uy.len() - 1) as f64,
    );
    for ((xi, yi), vi) in x.iter().zip(&y).zip(&v) {
        let (r, g, b) = ramp((vi - vr.0) / (vr.1 - vr.0));
        let sx = to_screen(*xi, xr, MARGIN, WIDTH - MARGIN / 2.0) - 0.5 * cw;
        let sy = to_screen(*yi, yr, HEIGHT - MARGIN, MARGIN / 2.0) - 0.5 * ch;
        let _ = writeln!(
            out,
            r##"<rect x="{sx:.2}" y="{sy:.2}" width="{:.2}" height="{:.2}" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
            cw + 0.05,
            ch + 0.05
        );
    }
    frame(&mut out, "x", "y", xr, yr, false);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">value in [{:.4e}, {:.4e}]</text>"#,
        WIDTH - MARGIN / 2.0,
        MARGIN / 2.0 - 6.0,
        vr.0,
        vr.1
    );
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render(table: &Table, kind: PlotKind) -> Result<String> {
    match kind {
        PlotKind::Loglog => line_plot(table, true),
        PlotKind::Profile => line_plot(table, false),
        PlotKind::FieldHeatmap => heatmap(table),
    }
}

pub fn plot(csv: &Path, kind: PlotKind, svg: &Path) -> Result<()> {
    let table = Table::read(csv)?;
    write_bytes(svg, render(&table, kind)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_reports_slope() {
        let mut t = Table::new(&["h", "err"]);
        for h in [0.1, 0.05, 0.025] {
            t.push_numbers(&[h, h * h]);
        }
        let svg = render(&t, PlotKind::Loglog).unwrap();
        assert!(svg.contains("slope 2.00"));
        assert_eq!(svg, render(&t, PlotKind::Loglog).unwrap());
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let mut t = Table::new(&["h"]);
        t.push_numbers(&[0.1]);
        assert!(matches!(render(&t, PlotKind::Loglog), Err(Error::Plot(_))));
        let mut t = Table::new(&["x", "y", "value"]);
        t.push_numbers(&[0.0, 0.0, 1.0]);
        t.push_numbers(&[1.0, 0.0, 1.0]);
        t.push_numbers(&[0.0, 1.0, 1.0]);
        assert!(matches!(
            render(&t, PlotKind::FieldHeatmap),
            Err(Error::Plot(_))
        ));
        let mut t = Table::new(&["h", "err"]);
        t.push_numbers(&[0.1, 0.0]);
        t.push_numbers(&[0.2, 1.0]);
        assert!(render(&t, PlotKind::Loglog).is_err());
    }

    #[test]
    fn heatmap_covers_every_cell() {
        let mut t = Table::new(&["x", "y", "value"]);
        for j in 0..3 {
            for i in 0..4 {
                t.push_numbers(&[i as f64, j as f64, (i * j) as f64]);
            }
        }
        let svg = render(&t, PlotKind::FieldHeatmap).unwrap();
        assert_eq!(svg.matches("<rect x=").count(), 12 + 1);
    }
}
