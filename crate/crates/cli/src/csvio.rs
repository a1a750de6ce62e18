//! CSV files read and written by the commands. All use a header row, `,`
//! separators and LF line endings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};
use dwmgipt_core::metrics::TargetAnnotation;
use dwmgipt_core::solver::IterationRecord;
use dwmgipt_core::Detection;

use crate::detect::FrameResult;
use crate::io::write_atomic;

pub const DETECTION_HEADER: [&str; 9] =
    ["frame_id", "cx", "cy", "x0", "y0", "w", "h", "peak", "area"];
pub const ANNOTATION_HEADER: [&str; 5] = ["frame", "cx", "cy", "a", "b"];

/// Builds the whole file in memory, then writes it atomically.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("{e}"))?;
    write_atomic(path, |f| Ok(std::io::Write::write_all(f, &bytes)?))
}

pub fn write_detections<'a>(
    path: &Path,
    frames: impl IntoIterator<Item = (&'a str, &'a [Detection])>,
) -> Result<()> {
    let rows = frames.into_iter().flat_map(|(id, dets)| {
        dets.iter().map(move |d| {
            vec![
                id.to_string(),
                d.cx.to_string(),
                d.cy.to_string(),
                d.x0.to_string(),
                d.y0.to_string(),
                d.w.to_string(),
                d.h.to_string(),
                d.peak.to_string(),
                d.area.to_string(),
            ]
        })
    });
    write_csv(path, &DETECTION_HEADER, rows)
}

/// Columns `k, residual, target_change, alpha_1.., target_l1`.
pub fn write_trace(path: &Path, trace: &[IterationRecord]) -> Result<()> {
    let modes = trace.first().map_or(0, |r| r.alpha.len());
    let mut header = vec!["k".to_string(), "residual".into(), "target_change".into()];
    header.extend((1..=modes).map(|i| format!("alpha_{i}")));
    header.push("target_l1".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = trace.iter().map(|r| {
        let mut row = vec![
            r.iteration.to_string(),
            r.residual.to_string(),
            r.target_change.to_string(),
        ];
        row.extend(r.alpha.iter().map(f64::to_string));
        row.push(r.target_l1.to_string());
        row
    });
    write_csv(path, &header, rows)
}

const FRAME_HEADER: [&str; 8] = [
    "frame_id",
    "source",
    "width",
    "height",
    "iterations",
    "converged",
    "threshold",
    "detections",
];

pub fn write_frames(path: &Path, frames: &[FrameResult]) -> Result<()> {
    let rows = frames.iter().map(|f| {
        vec![
            f.id.clone(),
            f.source.display().to_string(),
            f.width.to_string(),
            f.height.to_string(),
            f.iterations.to_string(),
            f.converged.to_string(),
            f.threshold.to_string(),
            f.detections.len().to_string(),
        ]
    });
    write_csv(path, &FRAME_HEADER, rows)
}

pub fn write_annotations<'a>(
    path: &Path,
    frames: impl IntoIterator<Item = (&'a str, &'a [TargetAnnotation])>,
) -> Result<()> {
    let rows = frames.into_iter().flat_map(|(id, anns)| {
        anns.iter().map(move |t| {
            vec![
                id.to_string(),
                t.cx.to_string(),
                t.cy.to_string(),
                t.a.to_string(),
                t.b.to_string(),
            ]
        })
    });
    write_csv(path, &ANNOTATION_HEADER, rows)
}

/// Rows of a CSV file addressed by column name.
struct Table {
    path: PathBuf,
    columns: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path, required: &[&str]) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let columns: Vec<String> = r
            .headers()
            .with_context(|| format!("cannot read {}", path.display()))?
            .iter()
            .map(str::to_string)
            .collect();
        for c in required {
            if !columns.iter().any(|h| h == c) {
                anyhow::bail!("{} has no column {c}", path.display());
            }
        }
        let rows = r
            .records()
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("malformed CSV {}", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            rows,
        })
    }

    fn get<T: FromStr>(&self, row: usize, column: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let idx = self
            .columns
            .iter()
            .position(|c| c == column)
            .expect("column checked on read");
        let raw = self.rows[row].get(idx).unwrap_or("");
        raw.parse().map_err(|e| {
            anyhow!(
                "{} row {}: invalid {column} {raw:?}: {e}",
                self.path.display(),
                row + 2
            )
        })
    }
}

pub fn read_detections(path: &Path) -> Result<BTreeMap<String, Vec<Detection>>> {
    let t = Table::read(path, &DETECTION_HEADER)?;
    let mut out: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for i in 0..t.rows.len() {
        let d = Detection {
            cx: t.get(i, "cx")?,
            cy: t.get(i, "cy")?,
            x0: t.get(i, "x0")?,
            y0: t.get(i, "y0")?,
            w: t.get(i, "w")?,
            h: t.get(i, "h")?,
            peak: t.get(i, "peak")?,
            area: t.get(i, "area")?,
        };
        out.entry(t.get(i, "frame_id")?).or_default().push(d);
    }
    Ok(out)
}

pub fn read_annotations(path: &Path) -> Result<BTreeMap<String, Vec<TargetAnnotation>>> {
    let t = Table::read(path, &ANNOTATION_HEADER)?;
    let mut out: BTreeMap<String, Vec<TargetAnnotation>> = BTreeMap::new();
    for i in 0..t.rows.len() {
        let a = TargetAnnotation {
            cx: t.get(i, "cx")?,
            cy: t.get(i, "cy")?,
            a: t.get(i, "a")?,
            b: t.get(i, "b")?,
        };
        out.entry(t.get(i, "frame")?).or_default().push(a);
    }
    Ok(out)
}

/// A row of the per-run frame list written by `detect`.
#[derive(Debug, Clone)]
pub struct FrameRecord {
    pub id: String,
    pub source: PathBuf,
    pub width: usize,
    pub height: usize,
}

pub fn read_frames(path: &Path) -> Result<Vec<FrameRecord>> {
    let t = Table::read(path, &["frame_id", "source", "width", "height"])?;
    (0..t.rows.len())
        .map(|i| {
            Ok(FrameRecord {
                id: t.get(i, "frame_id")?,
                source: PathBuf::from(t.get::<String>(i, "source")?),
                width: t.get(i, "width")?,
                height: t.get(i, "height")?,
            })
        })
        .collect()
}
