//! Page recognition: preprocess, segment, normalize each glyph, classify.

use crate::dataset::{glyph_input, LabelMap, GLYPH_MARGIN};
use crate::error::{OcrError, Result};
use crate::image::GrayImage;
use crate::preprocess::{preprocess_with, OtsuResult, PreprocessConfig};
use crate::segment::{normalize_glyph, segment_page, BoxRecord, Interval, SegmentationParams};
use brahmi_net::{Checkpoint, Exec, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A loaded checkpoint ready for inference.
#[derive(Debug, Clone)]
pub struct Recognizer {
    checkpoint: Checkpoint,
    labels: LabelMap,
    model_id: String,
    side: usize,
}

impl Recognizer {
    /// `model_id` is the SHA-256 of the checkpoint bytes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let checkpoint = Checkpoint::from_bytes(bytes)?;
        let [c, h, w] = checkpoint.model.input_shape();
        if c != 1 || h != w {
            return Err(OcrError::invalid(
                "model",
                format!("expected a square single-channel input, got {c}x{h}x{w}"),
            ));
        }
        let digest = Sha256::digest(bytes);
        let model_id = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self {
            labels: LabelMap::new(checkpoint.labels.clone())?,
            checkpoint,
            model_id,
            side: h,
        })
    }

    pub fn from_checkpoint(checkpoint: &Checkpoint) -> Result<Self> {
        Self::from_bytes(&checkpoint.to_bytes())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| OcrError::from(e).at(path))?;
        Self::from_bytes(&bytes).map_err(|e| e.at(path))
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.checkpoint
    }

    pub fn labels(&self) -> &LabelMap {
        &self.labels
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    /// Glyph canvas side the model was trained on.
    pub fn side(&self) -> usize {
        self.side
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecognitionParams {
    pub preprocess: PreprocessConfig,
    pub segmentation: SegmentationParams,
    pub top_k: usize,
}

impl Default for RecognitionParams {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            segmentation: SegmentationParams::default(),
            top_k: 3,
        }
    }
}

impl RecognitionParams {
    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.segmentation.validate()?;
        if self.top_k == 0 {
            return Err(OcrError::invalid("top_k", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub label: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharPrediction {
    #[serde(rename = "box")]
    pub bbox: BoxRecord,
    /// Most probable first; equal probabilities keep class order.
    pub top_k: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineResult {
    pub index: usize,
    pub rows: Interval,
    pub chars: Vec<CharPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionResult {
    pub width: usize,
    pub height: usize,
    pub model_id: String,
    pub params: RecognitionParams,
    pub otsu: OtsuResult,
    pub lines: Vec<LineResult>,
}

impl RecognitionResult {
    pub fn char_count(&self) -> usize {
        self.lines.iter().map(|l| l.chars.len()).sum()
    }

    /// Top-1 label of every character, line by line.
    pub fn top1(&self) -> Vec<Vec<&str>> {
        self.lines
            .iter()
            .map(|l| l.chars.iter().map(|c| c.top_k[0].label.as_str()).collect())
            .collect()
    }
}

/// Class indices ordered by descending probability; ties go to the lower index.
pub fn rank_classes(probs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    idx
}

pub fn recognize_page(
    img: &GrayImage,
    rec: &Recognizer,
    params: &RecognitionParams,
    exec: Exec,
) -> Result<RecognitionResult> {
    params.validate()?;
    let (bin, otsu) = preprocess_with(img, &params.preprocess, exec)?;
    let lines = segment_page(&bin, &params.segmentation, exec);
    let side = rec.side;
    let boxes: Vec<_> = lines.iter().flat_map(|l| l.chars.iter().map(move |c| (l, c))).collect();
    let glyphs = exec.map(&boxes, |(_, c)| normalize_glyph(&c.glyph, side, GLYPH_MARGIN));
    let mut inputs = Vec::with_capacity(boxes.len() * side * side);
    for g in glyphs {
        inputs.extend(glyph_input(&g?));
    }
    let k = rec.labels.len();
    let probs = if boxes.is_empty() {
        Vec::new()
    } else {
        let x = Tensor::new(vec![boxes.len(), 1, side, side], inputs)?;
        rec.checkpoint.model.predict(&x, exec)?.into_data()
    };
    let mut rows = probs.chunks(k);
    let mut out = Vec::with_capacity(lines.len());
    for line in &lines {
        let chars = line
            .chars
            .iter()
            .map(|c| {
                let p = rows.next().expect("one probability row per box");
                let top_k = rank_classes(p)
                    .into_iter()
                    .take(params.top_k)
                    .map(|i| Candidate {
                        label: rec.labels.name(i).to_string(),
                        probability: p[i],
                    })
                    .collect();
                CharPrediction {
                    bbox: c.record(&line.band),
                    top_k,
                }
            })
            .collect();
        out.push(LineResult {
            index: line.band.index,
            rows: line.band.rows,
            chars,
        });
    }
    Ok(RecognitionResult {
        width: img.width(),
        height: img.height(),
        model_id: rec.model_id.clone(),
        params: *params,
        otsu,
        lines: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

/// Text: one line of space-separated top-1 labels per detected line.
/// JSON: the result itself.
pub fn to_report(result: &RecognitionResult, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Text => {
            let mut s = String::new();
            for line in result.top1() {
                s.push_str(&line.join(" "));
                s.push('\n');
            }
            s.into_bytes()
        }
        ReportFormat::Json => serde_json::to_vec_pretty(result).expect("results serialize"),
    }
}
