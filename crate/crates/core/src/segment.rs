//! Projection-profile line and character segmentation, glyph normalization
//! and the tab-separated box manifest.

use crate::error::{OcrError, Result};
use crate::image::{BinaryImage, GrayImage, RgbImage};
use brahmi_net::Exec;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// One value per row.
    Horizontal,
    /// One value per column.
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    pub axis: Axis,
    pub values: Vec<usize>,
}

/// Half-open index range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        assert!(start < end, "empty interval {start}..{end}");
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn shift(self, by: usize) -> Self {
        Self::new(self.start + by, self.end + by)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationParams {
    /// Profile values at or below this count as blank.
    pub noise_floor: usize,
    /// Bands thinner than this are discarded.
    pub min_band: usize,
    /// Blank runs shorter than this do not separate bands.
    pub min_gap: usize,
    /// Character boxes with fewer ink pixels are dropped.
    pub min_ink: usize,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            noise_floor: 0,
            min_band: 3,
            min_gap: 2,
            min_ink: 5,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("min_band", self.min_band), ("min_gap", self.min_gap), ("min_ink", self.min_ink)] {
            if v == 0 {
                return Err(OcrError::invalid(field, "must be at least 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineBand {
    pub index: usize,
    pub rows: Interval,
    pub image: BinaryImage,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharBox {
    pub line_index: usize,
    pub cols: Interval,
    /// Tight ink rows, relative to the top of the line band.
    pub rows: Interval,
    pub ink: usize,
    pub glyph: BinaryImage,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentedLine {
    pub band: LineBand,
    pub chars: Vec<CharBox>,
}

/// Page-coordinate geometry of one character box; one manifest row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub line_index: usize,
    pub cols: Interval,
    pub rows: Interval,
    pub ink: usize,
}

impl CharBox {
    pub fn record(&self, line: &LineBand) -> BoxRecord {
        BoxRecord {
            line_index: self.line_index,
            cols: self.cols,
            rows: self.rows.shift(line.rows.start),
            ink: self.ink,
        }
    }
}

pub fn projection_profile(img: &BinaryImage, axis: Axis) -> Profile {
    let values = match axis {
        Axis::Horizontal => (0..img.height())
            .map(|y| img.row(y).iter().filter(|&&p| p).count())
            .collect(),
        Axis::Vertical => {
            let mut v = vec![0; img.width()];
            for y in 0..img.height() {
                for (c, &p) in v.iter_mut().zip(img.row(y)) {
                    *c += p as usize;
                }
            }
            v
        }
    };
    Profile { axis, values }
}

pub fn find_bands(profile: &Profile, params: &SegmentationParams) -> Vec<Interval> {
    let mut runs: Vec<Interval> = Vec::new();
    let mut start = None;
    for (i, &v) in profile.values.iter().chain(std::iter::once(&0)).enumerate() {
        let inked = v > params.noise_floor && i < profile.values.len();
        match (inked, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                match runs.last_mut() {
                    Some(prev) if s - prev.end < params.min_gap => prev.end = i,
                    _ => runs.push(Interval::new(s, i)),
                }
                start = None;
            }
            _ => {}
        }
    }
    runs.retain(|r| r.len() >= params.min_band);
    runs
}

pub fn segment_lines(img: &BinaryImage, params: &SegmentationParams) -> Vec<LineBand> {
    find_bands(&projection_profile(img, Axis::Horizontal), params)
        .into_iter()
        .enumerate()
        .map(|(index, rows)| LineBand {
            index,
            rows,
            image: img.crop(0, rows.start, img.width(), rows.end),
        })
        .collect()
}

pub fn segment_characters(line: &LineBand, params: &SegmentationParams) -> Vec<CharBox> {
    let img = &line.image;
    find_bands(&projection_profile(img, Axis::Vertical), params)
        .into_iter()
        .filter_map(|cols| {
            let strip = img.crop(cols.start, 0, cols.end, img.height());
            let ink = strip.foreground_count();
            if ink < params.min_ink {
                return None;
            }
            let (_, y0, _, y1) = strip.ink_bounds()?;
            Some(CharBox {
                line_index: line.index,
                cols,
                rows: Interval::new(y0, y1),
                ink,
                glyph: strip.crop(0, y0, strip.width(), y1),
            })
        })
        .collect()
}

pub fn segment_page(img: &BinaryImage, params: &SegmentationParams, exec: Exec) -> Vec<SegmentedLine> {
    let bands = segment_lines(img, params);
    let chars = exec.map(&bands, |b| segment_characters(b, params));
    bands
        .into_iter()
        .zip(chars)
        .map(|(band, chars)| SegmentedLine { band, chars })
        .collect()
}

/// Fits the glyph's ink bounding box into `side·(1−2·margin)` pixels keeping
/// its aspect ratio, centered on a white `side`×`side` canvas.
pub fn normalize_glyph(glyph: &BinaryImage, side: usize, margin: f64) -> Result<GrayImage> {
    if side < 8 {
        return Err(OcrError::invalid("side", format!("must be at least 8, got {side}")));
    }
    if !(0.0..0.5).contains(&margin) {
        return Err(OcrError::invalid("margin", format!("must be in [0, 0.5), got {margin}")));
    }
    let (x0, y0, x1, y1) = glyph.ink_bounds().ok_or(OcrError::DegenerateBox)?;
    let (bw, bh) = (x1 - x0, y1 - y0);
    let avail = side as f64 * (1.0 - 2.0 * margin);
    let longest = bw.max(bh);
    let fit = |d: usize| {
        let v = if d == longest { avail } else { avail * d as f64 / longest as f64 };
        ((v + 1e-9).floor() as usize).clamp(1, side)
    };
    let (nw, nh) = (fit(bw), fit(bh));
    let (ox, oy) = ((side - nw) / 2, (side - nh) / 2);
    let mut out = GrayImage::filled(side, side, 255);
    for j in 0..nh {
        let sy = y0 + ((j * bh) * 2 + bh) / (2 * nh);
        for i in 0..nw {
            let sx = x0 + ((i * bw) * 2 + bw) / (2 * nw);
            if glyph.get(sx.min(x1 - 1), sy.min(y1 - 1)) {
                out.set(ox + i, oy + j, 0);
            }
        }
    }
    Ok(out)
}

pub fn box_records(lines: &[SegmentedLine]) -> Vec<BoxRecord> {
    lines
        .iter()
        .flat_map(|l| l.chars.iter().map(|c| c.record(&l.band)))
        .collect()
}

/// One box per line, tab-separated:
/// `line  col_start  col_end  row_start  row_end  ink`, page coordinates.
pub fn write_manifest(records: &[BoxRecord]) -> String {
    let mut out = String::new();
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.line_index, r.cols.start, r.cols.end, r.rows.start, r.rows.end, r.ink
        )
        .expect("writing to a String");
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<Vec<BoxRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let bad = || OcrError::invalid("manifest", format!("line {}: expected 6 tab-separated integers", n + 1));
            let f: Vec<usize> = line
                .split('\t')
                .map(|s| s.trim().parse().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            if f.len() != 6 || f[1] >= f[2] || f[3] >= f[4] {
                return Err(bad());
            }
            Ok(BoxRecord {
                line_index: f[0],
                cols: Interval::new(f[1], f[2]),
                rows: Interval::new(f[3], f[4]),
                ink: f[5],
            })
        })
        .collect()
}

const LINE_COLOR: [u8; 3] = [40, 110, 220];
const BOX_COLOR: [u8; 3] = [220, 40, 40];

/// The binarized page with line bands and character boxes outlined.
pub fn render_overlay(page: &BinaryImage, lines: &[SegmentedLine]) -> RgbImage {
    let mut out = RgbImage::from(&GrayImage::from(page));
    let mut outline = |cols: Interval, rows: Interval, color: [u8; 3]| {
        for x in cols.start..cols.end {
            out.set(x, rows.start, color);
            out.set(x, rows.end - 1, color);
        }
        for y in rows.start..rows.end {
            out.set(cols.start, y, color);
            out.set(cols.end - 1, y, color);
        }
    };
    for l in lines {
        outline(Interval::new(0, page.width()), l.band.rows, LINE_COLOR);
    }
    for r in box_records(lines) {
        outline(r.cols, r.rows, BOX_COLOR);
    }
    out
}
