//! CSV and SVG output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::config::Df;
use crate::error::HarnessError;
use crate::grid::ResultRow;

pub const CSV_HEADER: [&str; 13] = [
    "model",
    "nu",
    "r",
    "df",
    "threshold",
    "threshold_se",
    "repetitions",
    "n_positive",
    "n_multiple",
    "clustering_proportion",
    "fwer",
    "dispersion_index",
    "mean_cluster_size",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes rows in [`CSV_HEADER`] order; undefined values are empty fields.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record([
            row.model.clone(),
            row.nu.to_string(),
            row.r.to_string(),
            row.df.to_string(),
            row.threshold.to_string(),
            row.threshold_se.to_string(),
            row.repetitions.to_string(),
            row.n_positive.to_string(),
            row.n_multiple.to_string(),
            opt(row.clustering_proportion),
            row.fwer.to_string(),
            opt(row.dispersion_index),
            opt(row.mean_cluster_size),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(rows: &[ResultRow], path: &Path) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_csv(rows, std::io::BufWriter::new(file)).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::Runtime(format!("{}: {other:?}", path.display())),
    })
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart of clustering proportion against df (log axis), one line per ν.
/// Infinite df is drawn one axis step to the right of the largest finite value.
pub fn clustering_svg(rows: &[ResultRow], title: &str) -> String {
    let (width, height) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 130.0, 40.0, 60.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let finite: Vec<f64> = rows
        .iter()
        .filter_map(|r| match r.df {
            Df::Finite(v) => Some(v.log10()),
            Df::Infinite => None,
        })
        .collect();
    let (mut lo, mut hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    let has_inf = rows.iter().any(|r| r.df == Df::Infinite);
    let step = ((hi - lo) / 5.0).max(0.15);
    let inf_pos = hi + step;
    let x_max = if has_inf { inf_pos } else { hi.max(lo + step) };
    let x_min = lo - 0.05 * (x_max - lo);
    let x_of = |df: Df| {
        let v = match df {
            Df::Finite(d) => d.log10(),
            Df::Infinite => inf_pos,
        };
        left + (v - x_min) / (x_max - x_min) * plot_w
    };
    let y_top = rows
        .iter()
        .filter_map(|r| r.clustering_proportion)
        .fold(0.05f64, f64::max)
        * 1.1;
    let y_of = |p: f64| top + plot_h * (1.0 - p / y_top);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        left + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    // y ticks
    for i in 0..=5 {
        let p = y_top * i as f64 / 5.0;
        let y = y_of(p);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{p:.3}</text>"##,
            left - 5.0,
            left - 8.0,
            y + 4.0
        );
    }
    // x ticks at the grid's df values
    let mut ticks: Vec<Df> = rows.iter().map(|r| r.df).collect();
    ticks.sort_by(|a, b| a.value().total_cmp(&b.value()));
    ticks.dedup();
    let base = top + plot_h;
    for df in &ticks {
        let x = x_of(*df);
        let label = match df {
            Df::Finite(v) => format!("{v}"),
            Df::Infinite => "∞".to_string(),
        };
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{base}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{label}</text>"#,
            base + 5.0,
            base + 20.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">degrees of freedom (log scale)</text>"#,
        left + plot_w / 2.0,
        height - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">clustering proportion</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    let mut nus: Vec<usize> = rows.iter().map(|r| r.nu).collect();
    nus.sort_unstable();
    nus.dedup();
    for (i, nu) in nus.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.nu == *nu)
            .filter_map(|r| r.clustering_proportion.map(|p| (x_of(r.df), y_of(p))))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        for (x, y) in &pts {
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
        }
        let ly = top + 15.0 + 18.0 * i as f64;
        let lx = width - right + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">ν = {nu}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
