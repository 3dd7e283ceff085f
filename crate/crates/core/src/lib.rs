//! OCR for Ashokan Brahmi inscription images.
//!
//! A page goes through [`preprocess`] (median blur, Otsu binarization),
//! [`segment`] (projection-profile lines then characters), glyph
//! normalization, and a classifier from `brahmi-net`; [`pipeline`] strings
//! these together. [`augment`], [`dataset`] and [`synth`] cover training data.

pub mod augment;
pub mod dataset;
pub mod error;
pub mod image;
pub mod pipeline;
pub mod preprocess;
pub mod segment;
pub mod synth;

pub use error::{OcrError, Result};
pub use image::{BinaryImage, GrayImage, RgbImage};
pub use pipeline::{recognize_page, to_report, RecognitionParams, RecognitionResult, Recognizer, ReportFormat};
pub use brahmi_net::Exec;
