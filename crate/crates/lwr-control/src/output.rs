//! File exports: the time-series CSV, per-time density snapshot CSVs, and
//! standalone SVG plots.
//!
//! The time-series columns are, in order:
//! `t,V,B,C,D,omega_a,omega_b,active,feasible,violation`. Numbers are
//! written with 17 significant digits so a round-trip through the file is
//! exact; an absent boundary input is an empty field, never 0. All files are
//! written atomically (temp file, then rename).

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::scenario::TimeSeriesLog;

/// 17-significant-digit decimal form; round-trips f64 exactly.
pub fn format_full(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_full).unwrap_or_default()
}

/// Compact label for snapshot file names: `5` for 5.0, `0.5` for 0.5.
fn time_label(t: f64) -> String {
    if t == t.trunc() && t.abs() < 1e15 {
        format!("{}", t as i64)
    } else {
        format!("{t}")
    }
}

fn atomic_write(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// Writes the time-series CSV at `csv_path` and one `snapshot_<t>.csv` per
/// captured snapshot next to it.
pub fn export_csv(log: &TimeSeriesLog, csv_path: &Path) -> io::Result<()> {
    let mut out = String::with_capacity(log.rows.len() * 128 + 64);
    out.push_str("t,V,B,C,D,omega_a,omega_b,active,feasible,violation\n");
    for row in &log.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            format_full(row.t),
            format_full(row.v),
            format_full(row.b),
            format_full(row.c),
            format_full(row.d),
            format_opt(row.omega_a),
            format_opt(row.omega_b),
            row.active.map(|a| a.as_str()).unwrap_or(""),
            row.feasible.map(|f| if f { "true" } else { "false" }).unwrap_or(""),
            format_opt(row.violation),
        );
    }
    atomic_write(csv_path, &out)?;

    let dir = csv_path.parent().map(Path::to_path_buf).unwrap_or_default();
    for snap in &log.snapshots {
        let mut body = String::with_capacity(snap.x.len() * 48 + 8);
        body.push_str("x,u\n");
        for (x, u) in snap.x.iter().zip(snap.u.iter()) {
            let _ = writeln!(body, "{},{}", format_full(*x), format_full(*u));
        }
        let name = format!("snapshot_{}.csv", time_label(snap.requested_t));
        atomic_write(&dir.join(name), &body)?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum CsvParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unexpected header `{0}`")]
    Header(String),
}

/// A parsed time-series row; optional fields come back as `None` for empty
/// cells, mirroring the writer.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub t: f64,
    pub v: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub omega_a: Option<f64>,
    pub omega_b: Option<f64>,
    pub active: String,
    pub feasible: Option<bool>,
    pub violation: Option<f64>,
}

/// Parses text produced by [`export_csv`].
pub fn parse_timeseries_csv(text: &str) -> Result<Vec<CsvRow>, CsvParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "t,V,B,C,D,omega_a,omega_b,active,feasible,violation")) => {}
        Some((_, header)) => return Err(CsvParseError::Header(header.to_string())),
        None => return Err(CsvParseError::Header(String::new())),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(CsvParseError::Malformed {
                line: idx + 1,
                message: format!("expected 10 fields, got {}", fields.len()),
            });
        }
        let req = |i: usize| -> Result<f64, CsvParseError> {
            fields[i].parse::<f64>().map_err(|e| CsvParseError::Malformed {
                line: idx + 1,
                message: format!("field {i}: {e}"),
            })
        };
        let opt = |i: usize| -> Result<Option<f64>, CsvParseError> {
            if fields[i].is_empty() {
                Ok(None)
            } else {
                req(i).map(Some)
            }
        };
        rows.push(CsvRow {
            t: req(0)?,
            v: req(1)?,
            b: req(2)?,
            c: req(3)?,
            d: req(4)?,
            omega_a: opt(5)?,
            omega_b: opt(6)?,
            active: fields[7].to_string(),
            feasible: match fields[8] {
                "" => None,
                "true" => Some(true),
                "false" => Some(false),
                other => {
                    return Err(CsvParseError::Malformed {
                        line: idx + 1,
                        message: format!("bad feasible flag `{other}`"),
                    })
                }
            },
            violation: opt(9)?,
        });
    }
    Ok(rows)
}

// ───────────────────────── SVG rendering ─────────────────────────

struct Series {
    label: String,
    color: &'static str,
    points: Vec<(f64, f64)>,
}

const PLOT_W: f64 = 800.0;
const PLOT_H: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

fn nice_num(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.3e}")
    }
}

fn render_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    zero_line: bool,
) -> String {
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in &s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if zero_line {
        y_min = y_min.min(0.0);
        y_max = y_max.max(0.0);
    }
    if (x_max - x_min).abs() < 1e-300 {
        x_max = x_min + 1.0;
    }
    if (y_max - y_min).abs() < 1e-300 {
        y_max = y_min + 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let w = PLOT_W - MARGIN_L - MARGIN_R;
    let h = PLOT_H - MARGIN_T - MARGIN_B;
    let sx = move |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * w;
    let sy = move |y: f64| MARGIN_T + (y_max - y) / (y_max - y_min) * h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" viewBox=\"0 0 {PLOT_W} {PLOT_H}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{PLOT_W}\" height=\"{PLOT_H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{title}</text>",
        PLOT_W / 2.0
    );

    // Axes box and ticks.
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{w:.1}\" height=\"{h:.1}\" fill=\"none\" stroke=\"black\"/>"
    );
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let px = sx(fx);
        let _ = writeln!(
            svg,
            "<line x1=\"{px:.1}\" y1=\"{:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
            MARGIN_T + h,
            MARGIN_T + h + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{px:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            MARGIN_T + h + 18.0,
            nice_num(fx)
        );
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        let py = sy(fy);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{MARGIN_L}\" y2=\"{py:.1}\" stroke=\"black\"/>",
            MARGIN_L - 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>",
            MARGIN_L - 8.0,
            py + 4.0,
            nice_num(fy)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{x_label}</text>",
        MARGIN_L + w / 2.0,
        PLOT_H - 10.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{y_label}</text>",
        MARGIN_T + h / 2.0,
        MARGIN_T + h / 2.0
    );

    if zero_line && y_min <= 0.0 && 0.0 <= y_max {
        let py = sy(0.0);
        let _ = writeln!(
            svg,
            "<line class=\"zero-line\" x1=\"{MARGIN_L}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>",
            MARGIN_L + w
        );
    }

    for (idx, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let mut pts = String::new();
        for &(x, y) in &s.points {
            let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(y));
        }
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            s.color,
            pts.trim_end()
        );
        let ly = MARGIN_T + 16.0 + 16.0 * idx as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{}\" stroke-width=\"2\"/>",
            MARGIN_L + w - 130.0,
            MARGIN_L + w - 105.0,
            s.color
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            MARGIN_L + w - 100.0,
            ly + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Writes `v.svg`, `b.svg` (with a dashed zero line), `inputs.svg`, and,
/// when snapshots were captured, `snapshots.svg` into `dir`.
pub fn export_plots(log: &TimeSeriesLog, dir: &Path) -> io::Result<()> {
    let v_series = Series {
        label: "V(t)".to_string(),
        color: PALETTE[0],
        points: log.rows.iter().map(|r| (r.t, r.v)).collect(),
    };
    atomic_write(
        &dir.join("v.svg"),
        &render_plot("Lyapunov functional", "t [s]", "V", &[v_series], false),
    )?;

    let b_series = Series {
        label: "B(t)".to_string(),
        color: PALETTE[1],
        points: log.rows.iter().map(|r| (r.t, r.b)).collect(),
    };
    atomic_write(
        &dir.join("b.svg"),
        &render_plot("Barrier functional", "t [s]", "B", &[b_series], true),
    )?;

    let mut input_series = Vec::new();
    let omega_a: Vec<(f64, f64)> = log
        .rows
        .iter()
        .filter_map(|r| r.omega_a.map(|v| (r.t, v)))
        .collect();
    if !omega_a.is_empty() {
        input_series.push(Series {
            label: "omega_a".to_string(),
            color: PALETTE[0],
            points: omega_a,
        });
    }
    let omega_b: Vec<(f64, f64)> = log
        .rows
        .iter()
        .filter_map(|r| r.omega_b.map(|v| (r.t, v)))
        .collect();
    if !omega_b.is_empty() {
        input_series.push(Series {
            label: "omega_b".to_string(),
            color: PALETTE[1],
            points: omega_b,
        });
    }
    atomic_write(
        &dir.join("inputs.svg"),
        &render_plot(
            &format!("Boundary inputs ({})", log.mode.as_str()),
            "t [s]",
            "density",
            &input_series,
            false,
        ),
    )?;

    if !log.snapshots.is_empty() {
        let series: Vec<Series> = log
            .snapshots
            .iter()
            .enumerate()
            .map(|(i, snap)| Series {
                label: format!("t = {}", time_label(snap.requested_t)),
                color: PALETTE[i % PALETTE.len()],
                points: snap.x.iter().copied().zip(snap.u.iter().copied()).collect(),
            })
            .collect();
        atomic_write(
            &dir.join("snapshots.svg"),
            &render_plot("Density snapshots", "x", "u", &series, false),
        )?;
    }
    Ok(())
}

/// Short human-readable digest of a finished run.
pub fn run_summary(log: &TimeSeriesLog) -> String {
    let first = log.first();
    let last = log.last();
    format!(
        "mode = {}\nrows = {}\nV(0) = {}\nV(end) = {}\nmin B = {}\ninfeasible steps = {}\n",
        log.mode.as_str(),
        log.rows.len(),
        format_full(first.v),
        format_full(last.v),
        format_full(log.min_barrier()),
        log.infeasible_steps(),
    )
}
