use brahmi_net::NetError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OcrError {
    #[error("malformed image: {0}")]
    MalformedImage(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("median kernel must be odd and at least 1, got {0}")]
    EvenKernel(usize),
    #[error("image is empty")]
    EmptyImage,
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("glyph box contains no ink")]
    DegenerateBox,
    #[error("class {0:?} has no samples")]
    EmptyClass(String),
    #[error("class {class:?} has {size} samples, more than the target {target}")]
    TargetBelowClassSize { class: String, size: usize, target: usize },
    #[error("no class directories with images under {0}")]
    EmptyTree(PathBuf),
    #[error("class {class:?} has {size} sample(s); a stratified split needs at least 2")]
    ClassTooSmall { class: String, size: usize },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<OcrError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Net(#[from] NetError),
}

impl OcrError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        OcrError::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn at(self, path: impl Into<PathBuf>) -> Self {
        OcrError::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = OcrError> = std::result::Result<T, E>;
