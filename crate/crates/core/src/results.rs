//! `results.csv`: one row per frame with the tracked box and diagnostics.

use std::fmt::Write as _;
use std::path::Path;

use crate::bbox::BoundingBox;
use crate::error::{Error, Result};
use crate::sequence::parse_groundtruth;
use crate::tracker::FrameResult;

pub const HEADER: &str = "frame,x,y,w,h,response,redetected,scale";

/// Formats results with a 1-based frame column.
pub fn to_csv(results: &[FrameResult]) -> String {
    let mut out = format!("{HEADER}\n");
    for r in results {
        let b = r.bbox;
        let response = if r.response.is_nan() { "nan".to_string() } else { format!("{:.6}", r.response) };
        let _ = writeln!(
            out,
            "{},{:.3},{:.3},{:.3},{:.3},{},{},{:.6}",
            r.frame + 1,
            b.x,
            b.y,
            b.w,
            b.h,
            response,
            u8::from(r.redetection_activated),
            r.scale
        );
    }
    out
}

pub fn write_csv(path: impl AsRef<Path>, results: &[FrameResult]) -> Result<()> {
    std::fs::write(path, to_csv(results))?;
    Ok(())
}

/// Boxes from either a `results.csv` (detected by its header) or a plain
/// `x,y,w,h` ground-truth style file.
pub fn parse_boxes(text: &str) -> Result<Vec<BoundingBox>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
    let Some(first) = lines.peek() else { return Ok(Vec::new()) };
    if !first.trim_start().starts_with("frame") {
        return parse_groundtruth(text);
    }
    lines
        .skip(1)
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() < 5 {
                return Err(Error::Input(format!("results row {}: expected at least 5 columns", i + 1)));
            }
            let v = f[1..5]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| Error::Input(format!("results row {}: invalid number {s:?}", i + 1))))
                .collect::<Result<Vec<_>>>()?;
            Ok(BoundingBox::new(v[0], v[1], v[2], v[3]))
        })
        .collect()
}

pub fn read_boxes(path: impl AsRef<Path>) -> Result<Vec<BoundingBox>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Resource {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_boxes(&text)
}
