//! Artifact formats: CSV logs, parameter checkpoints, and small built-in
//! SVG plots. CSV is the canonical output; plots are conveniences.
//!
//! Floats are written with `{}` (shortest representation that parses back
//! to the same bits), so every writer/reader pair round-trips losslessly.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

#[derive(Debug)]
pub enum ReportError {
    Io(std::io::Error),
    Format { path: String, detail: String },
}

impl fmt::Display for ReportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportError::Io(e) => write!(f, "i/o failure: {e}"),
            ReportError::Format { path, detail } => write!(f, "malformed file {path}: {detail}"),
        }
    }
}

impl std::error::Error for ReportError {}

impl From<std::io::Error> for ReportError {
    fn from(e: std::io::Error) -> Self {
        ReportError::Io(e)
    }
}

fn bad(path: &Path, detail: impl Into<String>) -> ReportError {
    ReportError::Format { path: path.display().to_string(), detail: detail.into() }
}

/// One training-loop epoch in the loss log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: u64,
    pub total: f64,
    pub phi_r: f64,
    pub phi_0: f64,
    pub phi_b: f64,
    pub lr: f64,
    /// Cumulative wall-clock of the training loop; excluded from the
    /// determinism contract.
    pub wall_ms: f64,
}

/// One optimizer's line in the four-way comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub optimizer: String,
    pub final_loss: f64,
    pub rel_l2: f64,
    pub seconds: f64,
    pub epochs: u64,
}

/// Snapshot CSV row: the model against the reference at one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotRow {
    pub x: f64,
    pub u_pred: f64,
    pub u_ref: f64,
    pub abs_err: f64,
}

pub const LOSS_HEADER: &str = "epoch,total,phi_r,phi_0,phi_b,lr,wall_ms";
pub const SNAPSHOT_HEADER: &str = "x,u_pred,u_ref,abs_err";
pub const SURFACE_HEADER: &str = "t,x,u_pred";
pub const COMPARE_HEADER: &str = "optimizer,final_loss,rel_l2,seconds,epochs";
pub const ERROR_REPORT_HEADER: &str = "metric,value";

fn write_lines(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<(), ReportError> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Returns the data rows of a CSV file after checking its header line.
fn read_rows(path: &Path, header: &str) -> Result<Vec<Vec<String>>, ReportError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == header => {}
        Some(h) => return Err(bad(path, format!("expected header {header:?}, found {h:?}"))),
        None => return Err(bad(path, "empty file")),
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        if fields.len() != width {
            return Err(bad(path, format!("row {} has {} fields, expected {width}", i + 2, fields.len())));
        }
        rows.push(fields);
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(path: &Path, row: &[String], idx: usize) -> Result<T, ReportError> {
    row[idx].parse().map_err(|_| bad(path, format!("unparseable field {:?}", row[idx])))
}

pub fn write_loss_csv(path: &Path, records: &[EpochRecord]) -> Result<(), ReportError> {
    write_lines(
        path,
        LOSS_HEADER,
        records.iter().map(|r| {
            format!("{},{},{},{},{},{},{}", r.epoch, r.total, r.phi_r, r.phi_0, r.phi_b, r.lr, r.wall_ms)
        }),
    )
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<EpochRecord>, ReportError> {
    read_rows(path, LOSS_HEADER)?
        .iter()
        .map(|row| {
            Ok(EpochRecord {
                epoch: field(path, row, 0)?,
                total: field(path, row, 1)?,
                phi_r: field(path, row, 2)?,
                phi_0: field(path, row, 3)?,
                phi_b: field(path, row, 4)?,
                lr: field(path, row, 5)?,
                wall_ms: field(path, row, 6)?,
            })
        })
        .collect()
}

pub fn write_snapshot_csv(path: &Path, rows: &[SnapshotRow]) -> Result<(), ReportError> {
    write_lines(
        path,
        SNAPSHOT_HEADER,
        rows.iter().map(|r| format!("{},{},{},{}", r.x, r.u_pred, r.u_ref, r.abs_err)),
    )
}

pub fn read_snapshot_csv(path: &Path) -> Result<Vec<SnapshotRow>, ReportError> {
    read_rows(path, SNAPSHOT_HEADER)?
        .iter()
        .map(|row| {
            Ok(SnapshotRow {
                x: field(path, row, 0)?,
                u_pred: field(path, row, 1)?,
                u_ref: field(path, row, 2)?,
                abs_err: field(path, row, 3)?,
            })
        })
        .collect()
}

pub fn write_surface_csv(path: &Path, rows: &[(f64, f64, f64)]) -> Result<(), ReportError> {
    write_lines(path, SURFACE_HEADER, rows.iter().map(|(t, x, u)| format!("{t},{x},{u}")))
}

pub fn read_surface_csv(path: &Path) -> Result<Vec<(f64, f64, f64)>, ReportError> {
    read_rows(path, SURFACE_HEADER)?
        .iter()
        .map(|row| Ok((field(path, row, 0)?, field(path, row, 1)?, field(path, row, 2)?)))
        .collect()
}

pub fn write_compare_csv(path: &Path, rows: &[CompareRow]) -> Result<(), ReportError> {
    write_lines(
        path,
        COMPARE_HEADER,
        rows.iter().map(|r| format!("{},{},{},{},{}", r.optimizer, r.final_loss, r.rel_l2, r.seconds, r.epochs)),
    )
}

pub fn read_compare_csv(path: &Path) -> Result<Vec<CompareRow>, ReportError> {
    read_rows(path, COMPARE_HEADER)?
        .iter()
        .map(|row| {
            Ok(CompareRow {
                optimizer: row[0].clone(),
                final_loss: field(path, row, 1)?,
                rel_l2: field(path, row, 2)?,
                seconds: field(path, row, 3)?,
                epochs: field(path, row, 4)?,
            })
        })
        .collect()
}

pub fn write_error_report(path: &Path, metrics: &[(String, f64)]) -> Result<(), ReportError> {
    write_lines(path, ERROR_REPORT_HEADER, metrics.iter().map(|(k, v)| format!("{k},{v}")))
}

pub fn read_error_report(path: &Path) -> Result<Vec<(String, f64)>, ReportError> {
    read_rows(path, ERROR_REPORT_HEADER)?
        .iter()
        .map(|row| Ok((row[0].clone(), field(path, row, 1)?)))
        .collect()
}

/// First line of a checkpoint file: a JSON object describing the weights
/// that follow (one decimal per line, shortest round-trip form).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub layer_widths: Vec<usize>,
    pub seed: u64,
    pub epoch: u64,
    pub format: u32,
}

pub const CHECKPOINT_FORMAT: u32 = 1;

pub fn write_checkpoint(path: &Path, header: &CheckpointHeader, values: &[f64]) -> Result<(), ReportError> {
    let mut file = fs::File::create(path)?;
    let head = serde_json::to_string(header)
        .map_err(|e| bad(path, format!("header serialization failed: {e}")))?;
    writeln!(file, "{head}")?;
    let mut body = String::new();
    for v in values {
        body.push_str(&format!("{v}\n"));
    }
    file.write_all(body.as_bytes())?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(CheckpointHeader, Vec<f64>), ReportError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| bad(path, "empty file"))?;
    let header: CheckpointHeader =
        serde_json::from_str(head).map_err(|e| bad(path, format!("bad header: {e}")))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(bad(path, format!("unsupported format {}", header.format)));
    }
    let values: Result<Vec<f64>, ReportError> = lines
        .map(|l| l.parse().map_err(|_| bad(path, format!("unparseable weight {l:?}"))))
        .collect();
    Ok((header, values?))
}

// ---------------------------------------------------------------------------
// Minimal SVG emitters. Deterministic output, no dependencies.
// ---------------------------------------------------------------------------

pub struct LineSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e"];
const W: f64 = 800.0;
const H: f64 = 520.0;
const ML: f64 = 70.0; // left margin
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 50.0;

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

/// Multi-series line plot with linear axes, ticks, and a legend.
pub fn svg_line_plot(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[LineSeries],
) -> Result<(), ReportError> {
    let (x_lo, x_hi) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y_lo, y_hi) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| ML + (x - x_lo) / (x_hi - x_lo) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y_lo) / (y_hi - y_lo) * (H - MT - MB);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"monospace\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!("<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        W / 2.0,
        xml_escape(title)
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR
    ));
    svg.push_str(&format!("<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n", H - MB));
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x_lo + f * (x_hi - x_lo);
        let yv = y_lo + f * (y_hi - y_lo);
        let px = sx(xv);
        let py = sy(yv);
        svg.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{0}\" x2=\"{px}\" y2=\"{1}\" stroke=\"black\"/>\n",
            H - MB,
            H - MB + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            H - MB + 20.0,
            fmt_tick(xv)
        ));
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{py}\" x2=\"{ML}\" y2=\"{py}\" stroke=\"black\"/>\n",
            ML - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            ML - 9.0,
            py + 4.0,
            fmt_tick(yv)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (ML + W - MR) / 2.0,
        H - 10.0,
        xml_escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
        (MT + H - MB) / 2.0,
        xml_escape(y_label)
    ));
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> =
            s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        let ly = MT + 16.0 * i as f64 + 8.0;
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"4\" fill=\"{color}\"/>\n",
            W - MR - 150.0,
            ly - 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{ly}\">{}</text>\n",
            W - MR - 132.0,
            xml_escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg)?;
    Ok(())
}

/// Space-time heatmap, decimated to at most 200 cells per axis. Blue for
/// negative, white for zero, red for positive, scaled to the data's range.
pub fn svg_heatmap(
    path: &Path,
    title: &str,
    t_values: &[f64],
    x_values: &[f64],
    values: &[f64],
) -> Result<(), ReportError> {
    assert_eq!(values.len(), t_values.len() * x_values.len(), "heatmap shape mismatch");
    let t_step = t_values.len().div_ceil(200);
    let x_step = x_values.len().div_ceil(200);
    let ti: Vec<usize> = (0..t_values.len()).step_by(t_step).collect();
    let xi: Vec<usize> = (0..x_values.len()).step_by(x_step).collect();
    let amp = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);

    let cw = (W - ML - MR) / ti.len() as f64;
    let ch = (H - MT - MB) / xi.len() as f64;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"monospace\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!("<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        W / 2.0,
        xml_escape(title)
    ));
    for (col, &it) in ti.iter().enumerate() {
        for (row, &ix) in xi.iter().enumerate() {
            let v = values[it * x_values.len() + ix] / amp;
            let (r, g, b) = if v >= 0.0 {
                let f = v.min(1.0);
                lerp_rgb((255, 255, 255), (180, 4, 38), f)
            } else {
                let f = (-v).min(1.0);
                lerp_rgb((255, 255, 255), (59, 76, 192), f)
            };
            // x grows downward here so early positions sit at the top
            svg.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb({r},{g},{b})\"/>\n",
                ML + col as f64 * cw,
                MT + row as f64 * ch,
                cw + 0.5,
                ch + 0.5
            ));
        }
    }
    svg.push_str(&format!(
        "<text x=\"{ML}\" y=\"{}\">t={}</text>\n",
        H - MB + 20.0,
        fmt_tick(t_values[0])
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">t={}</text>\n",
        W - MR,
        H - MB + 20.0,
        fmt_tick(*t_values.last().unwrap())
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{MT}\" text-anchor=\"end\">x={}</text>\n",
        ML - 9.0,
        fmt_tick(x_values[0])
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">x={}</text>\n",
        ML - 9.0,
        H - MB,
        fmt_tick(*x_values.last().unwrap())
    ));
    svg.push_str("</svg>\n");
    fs::write(path, svg)?;
    Ok(())
}

fn lerp_rgb(a: (u8, u8, u8), b: (u8, u8, u8), f: f64) -> (u8, u8, u8) {
    let ch = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * f).round() as u8;
    (ch(a.0, b.0), ch(a.1, b.1), ch(a.2, b.2))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
