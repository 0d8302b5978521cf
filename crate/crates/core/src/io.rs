//! Text and image codecs: binary PGM (8- and 16-bit), numeric CSV grids and
//! the evaluation aggregate table.
//!
//! Writers produce bytes or strings and readers accept them, so callers own
//! all file handling. Grids are written row by row in storage order.

use std::fmt::Write as _;

use thiserror::Error;

use crate::grid::Grid;
use crate::harness::{AggregateRow, Perception};
use crate::localmap::FootstepLog;
use crate::sensor::DepthImage;
use crate::terrain::{HeightField, TerrainKind};

/// Largest image or grid dimension accepted by the readers.
pub const MAX_DIM: usize = 1 << 15;
/// Largest cell count accepted by the readers.
pub const MAX_CELLS: usize = 1 << 26;
/// Height resolution of heightfield PGM exports.
pub const HEIGHT_PGM_SCALE_M: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("not a binary PGM (expected `P5`)")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error("image data truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("dimensions {rows}x{cols} outside the accepted range")]
    BadDimensions { rows: usize, cols: usize },
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error("no data")]
    Empty,
}

/// A decoded PGM image with its optional linear calibration.
#[derive(Clone, Debug, PartialEq)]
pub struct Pgm {
    pub pixels: Grid<u16>,
    pub maxval: u16,
    /// `(scale, offset)` such that `value = offset + scale * pixel`.
    pub calibration: Option<(f64, f64)>,
}

impl Pgm {
    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        let (s, o) = self.calibration?;
        Some(o + s * f64::from(self.pixels[(row, col)]))
    }
}

pub fn write_pgm(pixels: &Grid<u16>, maxval: u16, calibration: Option<(f64, f64)>) -> Vec<u8> {
    let mut header = String::from("P5\n");
    if let Some((s, o)) = calibration {
        let _ = writeln!(header, "# scale {s:?} offset {o:?}");
    }
    let _ = write!(header, "{} {}\n{}\n", pixels.cols(), pixels.rows(), maxval.max(1));
    let mut out = header.into_bytes();
    let wide = maxval > 255;
    out.reserve(pixels.len() * if wide { 2 } else { 1 });
    for &p in pixels.iter() {
        let p = p.min(maxval);
        if wide {
            out.extend_from_slice(&p.to_be_bytes());
        } else {
            out.push(p as u8);
        }
    }
    out
}

struct HeaderReader<'a> {
    data: &'a [u8],
    pos: usize,
    calibration: Option<(f64, f64)>,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) -> Result<(), FormatError> {
        loop {
            match self.data.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    let start = self.pos + 1;
                    let end = self.data[start..]
                        .iter()
                        .position(|&b| b == b'\n')
                        .map_or(self.data.len(), |n| start + n);
                    let text = std::str::from_utf8(&self.data[start..end])
                        .map_err(|_| FormatError::BadHeader("comment is not UTF-8".into()))?;
                    if let Some(c) = parse_calibration(text) {
                        self.calibration = Some(c);
                    }
                    self.pos = end;
                }
                Some(_) => return Ok(()),
                None => return Err(FormatError::BadHeader("header ends early".into())),
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, FormatError> {
        self.skip_space_and_comments()?;
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos || self.pos - start > 9 {
            return Err(FormatError::BadHeader(format!("bad {what}")));
        }
        let s = std::str::from_utf8(&self.data[start..self.pos]).expect("ASCII digits");
        s.parse()
            .map_err(|_| FormatError::BadHeader(format!("bad {what}")))
    }
}

fn parse_calibration(comment: &str) -> Option<(f64, f64)> {
    let mut it = comment.split_whitespace();
    if it.next()? != "scale" {
        return None;
    }
    let s: f64 = it.next()?.parse().ok()?;
    if it.next()? != "offset" {
        return None;
    }
    let o: f64 = it.next()?.parse().ok()?;
    (s.is_finite() && o.is_finite()).then_some((s, o))
}

pub fn read_pgm(data: &[u8]) -> Result<Pgm, FormatError> {
    if !data.starts_with(b"P5") {
        return Err(FormatError::BadMagic);
    }
    let mut h = HeaderReader {
        data,
        pos: 2,
        calibration: None,
    };
    let cols = h.number("width")?;
    let rows = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(FormatError::BadHeader(format!("maxval {maxval} outside 1..=65535")));
    }
    if rows == 0 || cols == 0 || rows > MAX_DIM || cols > MAX_DIM || rows * cols > MAX_CELLS {
        return Err(FormatError::BadDimensions { rows, cols });
    }
    match data.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(FormatError::BadHeader("missing separator before data".into())),
    }
    let bpp = if maxval > 255 { 2 } else { 1 };
    let expected = rows * cols * bpp;
    let body = &data[h.pos..];
    if body.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            found: body.len(),
        });
    }
    let pixels: Vec<u16> = if bpp == 2 {
        body[..expected]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        body[..expected].iter().map(|&b| u16::from(b)).collect()
    };
    Ok(Pgm {
        pixels: Grid::from_vec(rows, cols, pixels),
        maxval: maxval as u16,
        calibration: h.calibration,
    })
}

/// Heights as a 16-bit PGM at [`HEIGHT_PGM_SCALE_M`] resolution above the minimum.
pub fn heightfield_pgm(hf: &HeightField) -> Vec<u8> {
    let lo = hf.min_height();
    let pixels = hf
        .heights
        .map(|&h| ((h - lo) / HEIGHT_PGM_SCALE_M).round().clamp(0.0, 65535.0) as u16);
    write_pgm(&pixels, 65535, Some((HEIGHT_PGM_SCALE_M, lo)))
}

/// Safety mask as an 8-bit PGM, 255 for safe cells.
pub fn mask_pgm(mask: &Grid<bool>) -> Vec<u8> {
    write_pgm(&mask.map(|&s| if s { 255 } else { 0 }), 255, None)
}

/// Ranges as a 16-bit PGM in millimeters.
pub fn depth_pgm(img: &DepthImage) -> Vec<u8> {
    let pixels = img
        .ranges
        .map(|&r| (r * 1000.0).round().clamp(0.0, 65535.0) as u16);
    write_pgm(&pixels, 65535, Some((1e-3, 0.0)))
}

fn fmt_cell(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.6}")
    }
}

/// Comma-separated grid, six decimals, `inf`/`nan` for non-finite values.
pub fn grid_to_csv(grid: &Grid<f64>) -> String {
    let mut out = String::with_capacity(grid.len() * 10);
    for r in 0..grid.rows() {
        let row: Vec<String> = grid.row(r).iter().map(|&v| fmt_cell(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn bool_grid_to_csv(grid: &Grid<bool>) -> String {
    let mut out = String::with_capacity(grid.len() * 2);
    for r in 0..grid.rows() {
        let row: Vec<&str> = grid.row(r).iter().map(|&v| if v { "1" } else { "0" }).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn u32_grid_to_csv(grid: &Grid<u32>) -> String {
    let mut out = String::new();
    for r in 0..grid.rows() {
        let row: Vec<String> = grid.row(r).iter().map(u32::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses a rectangular numeric CSV grid. Blank lines are skipped.
pub fn grid_from_csv(text: &str) -> Result<Grid<f64>, FormatError> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for cell in line.split(',') {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| FormatError::BadLine {
                line: idx + 1,
                reason: format!("`{cell}` is not a number"),
            })?;
            data.push(v);
            if data.len() > MAX_CELLS {
                return Err(FormatError::BadDimensions { rows: rows + 1, cols: data.len() - before });
            }
        }
        let n = data.len() - before;
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(FormatError::BadLine {
                    line: idx + 1,
                    reason: format!("expected {c} fields, found {n}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    match cols {
        Some(c) => Ok(Grid::from_vec(rows, c, data)),
        None => Err(FormatError::Empty),
    }
}

pub fn footsteps_csv(log: &FootstepLog, hf: &HeightField) -> String {
    let mut out = String::from("tick,foot,x,y,z,d_edge\n");
    for (tick, f) in log.events() {
        let d = crate::localmap::foot_edge_distance(hf, f.position);
        let _ = writeln!(
            out,
            "{tick},{},{:.6},{:.6},{:.6},{}",
            f.foot_id,
            f.position.x,
            f.position.y,
            f.position.z,
            fmt_cell(d)
        );
    }
    out
}

pub fn aggregate_to_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AggregateRow::HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

pub fn aggregate_from_csv(text: &str) -> Result<Vec<AggregateRow>, FormatError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == AggregateRow::HEADER => {}
        Some((i, _)) => {
            return Err(FormatError::BadLine {
                line: i + 1,
                reason: format!("expected header `{}`", AggregateRow::HEADER),
            })
        }
        None => return Err(FormatError::Empty),
    }
    lines
        .map(|(i, line)| {
            let bad = |reason: String| FormatError::BadLine { line: i + 1, reason };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 8 {
                return Err(bad(format!("expected 8 fields, found {}", f.len())));
            }
            let num = |k: usize| -> Result<f64, FormatError> {
                f[k].parse::<f64>()
                    .map_err(|_| bad(format!("`{}` is not a number", f[k])))
            };
            let kind: TerrainKind = f[0].parse().map_err(|e: String| bad(e))?;
            let perception: Perception = f[2].parse().map_err(|e: String| bad(e))?;
            Ok(AggregateRow {
                kind,
                difficulty: num(1)?,
                perception,
                success_rate: num(3)?,
                trav_mean: num(4)?,
                trav_sd: num(5)?,
                mev: num(6)?,
                mae_cm: num(7)?,
            })
        })
        .collect()
}
