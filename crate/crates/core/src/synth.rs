//! Procedural glyph corpora and typeset pages for tests and desk-scale runs.
//!
//! Each class gets a prototype drawn from strokes on a 3×3 lattice: straight
//! bars between neighbouring lattice points, half-circle arcs and dots.
//! Prototypes are accepted only if their row and column projections are
//! single runs (so segmentation never splits them), they cover a sane share
//! of their bounding box, and they differ from every earlier prototype in at
//! least a tenth of the normalized pixels. Samples are prototypes pushed
//! through the augmentation transforms and then re-conditioned exactly like
//! loaded glyphs.

use crate::augment::{augment, class_seed, sample_params, AugmentConfig};
use crate::dataset::{condition_glyph, Dataset, LabelMap, Sample, GLYPH_MARGIN};
use crate::error::Result;
use crate::image::{BinaryImage, GrayImage};
use crate::preprocess::{preprocess, PreprocessConfig};
use crate::segment::{normalize_glyph, Axis, Interval, projection_profile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Prototype streams are seeded from this, never from the corpus seed.
const PROTOTYPE_SEED: u64 = 0x6272_6168_6d69;
const LATTICE: [f64; 3] = [0.25, 0.5, 0.75];
const MIN_DISTANCE: f64 = 0.10;
const COVERAGE: (f64, f64) = (0.08, 0.50);
const MIN_ASPECT: f64 = 0.4;
const MAX_ATTEMPTS: usize = 20_000;

/// Jitter applied to every sample after the first of each class.
pub fn jitter_config() -> AugmentConfig {
    AugmentConfig {
        shift_frac: 0.05,
        ..AugmentConfig::default()
    }
}

#[derive(Debug, Clone, Copy)]
enum Stroke {
    Bar { from: (f64, f64), to: (f64, f64) },
    /// Half circle; `facing` is the direction of its bulge in radians.
    Arc { center: (f64, f64), radius: f64, facing: f64 },
    Dot { center: (f64, f64), radius: f64 },
}

fn lattice_point(i: usize) -> (f64, f64) {
    (LATTICE[i % 3], LATTICE[i / 3])
}

fn random_stroke<R: Rng>(rng: &mut R) -> Stroke {
    match rng.random_range(0..10) {
        0..=5 => loop {
            let a = rng.random_range(0..9);
            let b = rng.random_range(0..9);
            let (pa, pb) = (lattice_point(a), lattice_point(b));
            let (dx, dy) = ((a % 3).abs_diff(b % 3), (a / 3).abs_diff(b / 3));
            // anything but knight moves, which cross no lattice line cleanly
            if a != b && dx + dy != 3 {
                break Stroke::Bar { from: pa, to: pb };
            }
        },
        6..=8 => Stroke::Arc {
            center: lattice_point(rng.random_range(0..9)),
            radius: 0.125 * rng.random_range(1..=2) as f64,
            facing: rng.random_range(0..4) as f64 * PI / 2.0,
        },
        _ => Stroke::Dot {
            center: lattice_point(rng.random_range(0..9)),
            radius: 0.06,
        },
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / (vx * vx + vy * vy)).clamp(0.0, 1.0);
    ((p.0 - a.0 - t * vx).powi(2) + (p.1 - a.1 - t * vy).powi(2)).sqrt()
}

fn stroke_distance(s: &Stroke, p: (f64, f64)) -> f64 {
    match *s {
        Stroke::Bar { from, to } => segment_distance(p, from, to),
        Stroke::Dot { center, radius } => ((p.0 - center.0).hypot(p.1 - center.1) - radius).max(0.0),
        Stroke::Arc { center, radius, facing } => {
            let (dx, dy) = (p.0 - center.0, p.1 - center.1);
            let angle = dy.atan2(dx) - facing;
            let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
            if wrapped.abs() <= PI / 2.0 {
                (dx.hypot(dy) - radius).abs()
            } else {
                let end = |a: f64| (center.0 + radius * a.cos(), center.1 + radius * a.sin());
                let (e1, e2) = (end(facing + PI / 2.0), end(facing - PI / 2.0));
                (p.0 - e1.0).hypot(p.1 - e1.1).min((p.0 - e2.0).hypot(p.1 - e2.1))
            }
        }
    }
}

/// Rasterizes strokes of relative `width` onto a white `size`×`size` canvas.
fn draw(strokes: &[Stroke], size: usize, width: f64) -> GrayImage {
    GrayImage::from_fn(size, size, |x, y| {
        let p = ((x as f64 + 0.5) / size as f64, (y as f64 + 0.5) / size as f64);
        if strokes.iter().any(|s| stroke_distance(s, p) <= width / 2.0) {
            0
        } else {
            255
        }
    })
}

fn single_run(values: &[usize]) -> bool {
    let first = values.iter().position(|&v| v > 0);
    let last = values.iter().rposition(|&v| v > 0);
    match (first, last) {
        (Some(a), Some(b)) => values[a..=b].iter().all(|&v| v > 0),
        _ => false,
    }
}

fn acceptable(ink: &BinaryImage) -> bool {
    let Some((x0, y0, x1, y1)) = ink.ink_bounds() else {
        return false;
    };
    let (w, h) = ((x1 - x0) as f64, (y1 - y0) as f64);
    let coverage = ink.foreground_count() as f64 / (w * h);
    w.min(h) / w.max(h) >= MIN_ASPECT
        && (COVERAGE.0..=COVERAGE.1).contains(&coverage)
        && single_run(&projection_profile(ink, Axis::Horizontal).values)
        && single_run(&projection_profile(ink, Axis::Vertical).values)
}

fn hamming(a: &GrayImage, b: &GrayImage) -> f64 {
    let diff = a.pixels().iter().zip(b.pixels()).filter(|(x, y)| x != y).count();
    diff as f64 / a.pixels().len() as f64
}

/// Drawn prototypes (white background, black strokes, `2·side` pixels
/// square) for classes `0..classes`. Class `c` is the same for every call
/// with the same `side`.
pub fn prototypes(classes: usize, side: usize) -> Vec<GrayImage> {
    let size = 2 * side;
    let mut rng = ChaCha8Rng::seed_from_u64(PROTOTYPE_SEED);
    let mut drawn: Vec<GrayImage> = Vec::with_capacity(classes);
    let mut normalized: Vec<GrayImage> = Vec::with_capacity(classes);
    while drawn.len() < classes {
        let mut found = None;
        for _ in 0..MAX_ATTEMPTS {
            let n = rng.random_range(2..=4);
            let strokes: Vec<Stroke> = (0..n).map(|_| random_stroke(&mut rng)).collect();
            let img = draw(&strokes, size, 0.07);
            let ink = BinaryImage::from_fn(size, size, |x, y| img.get(x, y) == 0);
            if !acceptable(&ink) {
                continue;
            }
            let norm = normalize_glyph(&ink, side, GLYPH_MARGIN).expect("accepted glyphs have ink");
            if normalized.iter().all(|o| hamming(o, &norm) >= MIN_DISTANCE) {
                found = Some((img, norm));
                break;
            }
        }
        let (img, norm) = found.unwrap_or_else(|| panic!("no distinct prototype for class {}", drawn.len()));
        drawn.push(img);
        normalized.push(norm);
    }
    drawn
}

/// Class names `g000`, `g001`, … (zero-padded so lexicographic order is
/// index order).
pub fn synthetic_labels(classes: usize) -> LabelMap {
    let digits = classes.saturating_sub(1).to_string().len().max(3);
    LabelMap::new((0..classes).map(|c| format!("g{c:0digits$}")).collect()).expect("names are distinct")
}

/// `per_class` conditioned `side`×`side` samples per class. The first sample
/// of each class is the unjittered prototype; the rest are augmented with
/// [`jitter_config`] from a stream seeded by `(seed, class)`.
pub fn render_synthetic_corpus(classes: usize, per_class: usize, side: usize, seed: u64) -> Result<Dataset> {
    assert!(classes >= 2, "a corpus needs at least two classes");
    let protos = prototypes(classes, side);
    let cfg = jitter_config();
    let mut samples = Vec::with_capacity(classes * per_class);
    for (class, proto) in protos.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(class_seed(seed, class));
        for k in 0..per_class {
            let source = if k == 0 {
                proto.clone()
            } else {
                augment(proto, &sample_params(&cfg, &mut rng))
            };
            samples.push(Sample {
                image: condition_glyph(&source, side)?,
                label: class,
            });
        }
    }
    Dataset::new(samples, synthetic_labels(classes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageLayout {
    pub margin: usize,
    /// Blank columns between neighbouring glyphs.
    pub glyph_gap: usize,
    /// Blank rows between neighbouring lines.
    pub line_gap: usize,
}

impl Default for PageLayout {
    fn default() -> Self {
        Self {
            margin: 12,
            glyph_gap: 6,
            line_gap: 10,
        }
    }
}

/// Ink geometry of one typeset line, in page coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypesetLine {
    pub rows: Interval,
    /// `(cols, rows)` of each glyph's ink box.
    pub glyphs: Vec<(Interval, Interval)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypesetPage {
    pub image: GrayImage,
    pub lines: Vec<TypesetLine>,
}

/// Pastes the ink of each glyph (anything darker than mid-gray) left to right,
/// vertically centred in its line, on a white page. Glyphs without ink are
/// skipped.
pub fn typeset_page(lines: &[Vec<GrayImage>], layout: &PageLayout) -> TypesetPage {
    let crops: Vec<Vec<BinaryImage>> = lines
        .iter()
        .map(|line| {
            line.iter()
                .filter_map(|g| {
                    let ink = BinaryImage::from_fn(g.width(), g.height(), |x, y| g.get(x, y) < 128);
                    let (x0, y0, x1, y1) = ink.ink_bounds()?;
                    Some(ink.crop(x0, y0, x1, y1))
                })
                .collect()
        })
        .filter(|l: &Vec<BinaryImage>| !l.is_empty())
        .collect();
    let line_h: Vec<usize> = crops.iter().map(|l| l.iter().map(|g| g.height()).max().unwrap()).collect();
    let line_w: Vec<usize> = crops
        .iter()
        .map(|l| l.iter().map(|g| g.width()).sum::<usize>() + layout.glyph_gap * (l.len() - 1))
        .collect();
    let width = 2 * layout.margin + line_w.iter().copied().max().unwrap_or(0);
    let height = 2 * layout.margin + line_h.iter().sum::<usize>() + layout.line_gap * crops.len().saturating_sub(1);
    let mut image = GrayImage::filled(width.max(1), height.max(1), 255);
    let mut out = Vec::new();
    let mut top = layout.margin;
    for (line, &h) in crops.iter().zip(&line_h) {
        let mut left = layout.margin;
        let mut glyphs = Vec::new();
        for g in line {
            let y0 = top + (h - g.height()) / 2;
            for y in 0..g.height() {
                for x in 0..g.width() {
                    if g.get(x, y) {
                        image.set(left + x, y0 + y, 0);
                    }
                }
            }
            glyphs.push((Interval::new(left, left + g.width()), Interval::new(y0, y0 + g.height())));
            left += g.width() + layout.glyph_gap;
        }
        let rows = Interval::new(
            glyphs.iter().map(|g| g.1.start).min().unwrap(),
            glyphs.iter().map(|g| g.1.end).max().unwrap(),
        );
        out.push(TypesetLine { rows, glyphs });
        top += h + layout.line_gap;
    }
    TypesetPage { image, lines: out }
}

/// A page of `lines` × `per_line` glyphs of random classes, each a freshly
/// jittered prototype whose projections stay single runs after the default
/// preprocessing, plus the label of every glyph in reading order.
pub fn synthetic_page(
    classes: usize,
    lines: usize,
    per_line: usize,
    side: usize,
    seed: u64,
    layout: &PageLayout,
) -> (TypesetPage, Vec<Vec<String>>) {
    assert!(classes >= 2, "a page needs at least two classes");
    let protos = prototypes(classes, side);
    let names = synthetic_labels(classes);
    let cfg = jitter_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut glyphs = Vec::with_capacity(lines);
    let mut truth = Vec::with_capacity(lines);
    for _ in 0..lines {
        let mut line = Vec::with_capacity(per_line);
        let mut names_line = Vec::with_capacity(per_line);
        for _ in 0..per_line {
            let class = rng.random_range(0..classes);
            // Jitter plus median filtering can open a blank column between
            // strokes that only touched; such a glyph would segment as two.
            let glyph = (0..MAX_ATTEMPTS)
                .map(|_| augment(&protos[class], &sample_params(&cfg, &mut rng)))
                .find(|g| {
                    // as pasted: hard-thresholded, on white all round
                    let pasted = GrayImage::from_fn(g.width() + 4, g.height() + 4, |x, y| {
                        let inside = (2..g.width() + 2).contains(&x) && (2..g.height() + 2).contains(&y);
                        if inside && g.get(x - 2, y - 2) < 128 { 0 } else { 255 }
                    });
                    preprocess(&pasted, &PreprocessConfig::default()).is_ok_and(|(ink, _)| {
                        single_run(&projection_profile(&ink, Axis::Vertical).values)
                            && single_run(&projection_profile(&ink, Axis::Horizontal).values)
                    })
                })
                .unwrap_or_else(|| protos[class].clone());
            line.push(glyph);
            names_line.push(names.name(class).to_string());
        }
        glyphs.push(line);
        truth.push(names_line);
    }
    (typeset_page(&glyphs, layout), truth)
}
