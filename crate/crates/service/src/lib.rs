//! HTTP facade over the recognition pipeline.
//!
//! | method | path             | body                                   |
//! |--------|------------------|----------------------------------------|
//! | POST   | `/api/recognize` | multipart: `image` or `token`, `params` |
//! | POST   | `/api/preview`   | multipart: `image` or `token`, `stage`, `params` |
//! | GET    | `/api/labels`    |                                        |
//! | GET    | `/api/health`    |                                        |
//!
//! `params` is a JSON [`RecognitionParams`] document; omitted fields take
//! their defaults. Every image upload is remembered under a content-hash
//! token (returned as `token` in previews and the `x-upload-token` header)
//! so follow-up requests can skip re-uploading.

mod error;
mod uploads;

pub use error::{ApiError, ErrorBody};
pub use uploads::UploadStore;

use axum::extract::multipart::{Multipart, MultipartRejection};
use axum::extract::{DefaultBodyLimit, State};
use axum::http::HeaderValue;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use brahmi_core::image::{decode_image, encode_image, encode_rgb_png, ImageFormat};
use brahmi_core::preprocess::{preprocess_with, OtsuResult};
use brahmi_core::segment::{box_records, render_overlay, segment_page, write_manifest, BoxRecord, Interval};
use brahmi_core::{recognize_page, Exec, GrayImage, RecognitionParams, Recognizer};
use serde::{Deserialize, Serialize};
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

pub const DEFAULT_BODY_LIMIT: usize = 10 * 1024 * 1024;
pub const DEFAULT_TOKEN_TTL: Duration = Duration::from_secs(600);
pub const TOKEN_HEADER: &str = "x-upload-token";

#[derive(Debug, Clone, Copy)]
pub struct ServiceConfig {
    pub body_limit: usize,
    pub token_ttl: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            body_limit: DEFAULT_BODY_LIMIT,
            token_ttl: DEFAULT_TOKEN_TTL,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    recognizer: Option<Arc<Recognizer>>,
    uploads: UploadStore,
    exec: Exec,
}

impl AppState {
    pub fn new(recognizer: Option<Recognizer>, cfg: &ServiceConfig) -> Self {
        Self {
            recognizer: recognizer.map(Arc::new),
            uploads: UploadStore::new(cfg.token_ttl),
            exec: Exec::default(),
        }
    }

    pub fn uploads(&self) -> &UploadStore {
        &self.uploads
    }
}

pub fn router(state: AppState, cfg: &ServiceConfig) -> Router {
    Router::new()
        .route("/api/recognize", post(recognize))
        .route("/api/preview", post(preview))
        .route("/api/labels", get(labels))
        .route("/api/health", get(health))
        .layer(DefaultBodyLimit::max(cfg.body_limit))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, recognizer: Option<Recognizer>, cfg: ServiceConfig) -> std::io::Result<()> {
    let app = router(AppState::new(recognizer, &cfg), &cfg);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app).await
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Preprocess,
    Segment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessPreview {
    pub token: String,
    pub width: usize,
    pub height: usize,
    pub params: RecognitionParams,
    pub otsu: OtsuResult,
    pub foreground_pixels: usize,
    /// Binarized page, ink black, as a base64 PNG.
    pub image_png: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRecord {
    pub index: usize,
    pub rows: Interval,
    pub chars: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPreview {
    pub token: String,
    pub width: usize,
    pub height: usize,
    pub params: RecognitionParams,
    pub otsu: OtsuResult,
    pub lines: Vec<LineRecord>,
    pub boxes: Vec<BoxRecord>,
    /// The tab-separated box manifest.
    pub manifest: String,
    /// Binarized page with bands and boxes outlined, as a base64 PNG.
    pub overlay_png: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum PreviewResponse {
    Preprocess(PreprocessPreview),
    Segment(SegmentPreview),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelsResponse {
    pub model_id: String,
    pub labels: Vec<String>,
}

struct Form {
    image: Arc<GrayImage>,
    token: String,
    params: RecognitionParams,
    stage: Option<String>,
}

async fn read_form(state: &AppState, form: Result<Multipart, MultipartRejection>) -> Result<Form, ApiError> {
    let mut form = form.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let mut image = None;
    let mut token = None;
    let mut params = None;
    let mut stage = None;
    while let Some(field) = form.next_field().await.map_err(|e| ApiError::BadRequest(e.body_text()))? {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(|e| ApiError::BadRequest(e.body_text()))?;
        let text = || String::from_utf8(bytes.to_vec()).map_err(|_| ApiError::invalid(&name, "must be UTF-8 text"));
        match name.as_str() {
            "image" => image = Some(bytes),
            "token" => token = Some(text()?.trim().to_string()),
            "stage" => stage = Some(text()?.trim().to_string()),
            "params" => {
                let raw = text()?;
                let p: RecognitionParams = if raw.trim().is_empty() {
                    RecognitionParams::default()
                } else {
                    serde_json::from_str(&raw).map_err(|e| ApiError::invalid("params", e.to_string()))?
                };
                params = Some(p);
            }
            other => return Err(ApiError::invalid(other, "unknown form field")),
        }
    }
    let params = params.unwrap_or_default();
    params.validate()?;
    let (image, token) = match (image, token) {
        (Some(bytes), _) => {
            if bytes.is_empty() {
                return Err(ApiError::BadRequest("image is empty".into()));
            }
            let token = UploadStore::token_for(&bytes);
            let decoded = tokio::task::spawn_blocking(move || decode_image(&bytes))
                .await
                .map_err(|e| ApiError::Internal(e.to_string()))??;
            let img = Arc::new(decoded.into_gray());
            state.uploads.insert(token.clone(), Arc::clone(&img));
            (img, token)
        }
        (None, Some(token)) => {
            let img = state
                .uploads
                .get(&token)
                .ok_or_else(|| ApiError::BadRequest("unknown or expired upload token".into()))?;
            (img, token)
        }
        (None, None) => return Err(ApiError::BadRequest("request has no image or token".into())),
    };
    Ok(Form {
        image,
        token,
        params,
        stage,
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn recognize(State(state): State<AppState>, form: Result<Multipart, MultipartRejection>) -> Result<Response, ApiError> {
    let rec = state.recognizer.clone().ok_or(ApiError::NoModel)?;
    let form = read_form(&state, form).await?;
    let exec = state.exec;
    let image = form.image;
    let params = form.params;
    let result = blocking(move || Ok(recognize_page(&image, &rec, &params, exec)?)).await?;
    let mut resp = Json(result).into_response();
    if let Ok(v) = HeaderValue::from_str(&form.token) {
        resp.headers_mut().insert(TOKEN_HEADER, v);
    }
    Ok(resp)
}

async fn preview(
    State(state): State<AppState>,
    form: Result<Multipart, MultipartRejection>,
) -> Result<Json<PreviewResponse>, ApiError> {
    let form = read_form(&state, form).await?;
    let stage = match form.stage.as_deref() {
        None | Some("") => return Err(ApiError::invalid("stage", "missing; expected preprocess or segment")),
        Some("preprocess") => Stage::Preprocess,
        Some("segment") => Stage::Segment,
        Some(other) => {
            return Err(ApiError::invalid(
                "stage",
                format!("unknown stage {other:?}; expected preprocess or segment"),
            ))
        }
    };
    let exec = state.exec;
    let Form {
        image, token, params, ..
    } = form;
    let resp = blocking(move || {
        let (bin, otsu) = preprocess_with(&image, &params.preprocess, exec)?;
        let (width, height) = (image.width(), image.height());
        Ok(match stage {
            Stage::Preprocess => PreviewResponse::Preprocess(PreprocessPreview {
                token,
                width,
                height,
                params,
                otsu,
                foreground_pixels: bin.foreground_count(),
                image_png: BASE64.encode(encode_image(&bin, ImageFormat::Png)),
            }),
            Stage::Segment => {
                let lines = segment_page(&bin, &params.segmentation, exec);
                let boxes = box_records(&lines);
                PreviewResponse::Segment(SegmentPreview {
                    token,
                    width,
                    height,
                    params,
                    otsu,
                    lines: lines
                        .iter()
                        .map(|l| LineRecord {
                            index: l.band.index,
                            rows: l.band.rows,
                            chars: l.chars.len(),
                        })
                        .collect(),
                    manifest: write_manifest(&boxes),
                    boxes,
                    overlay_png: BASE64.encode(encode_rgb_png(&render_overlay(&bin, &lines))),
                })
            }
        })
    })
    .await?;
    Ok(Json(resp))
}

async fn labels(State(state): State<AppState>) -> Result<Json<LabelsResponse>, ApiError> {
    let rec = state.recognizer.as_ref().ok_or(ApiError::NoModel)?;
    Ok(Json(LabelsResponse {
        model_id: rec.model_id().to_string(),
        labels: rec.labels().names().to_vec(),
    }))
}

async fn health() -> &'static str {
    "ok"
}
