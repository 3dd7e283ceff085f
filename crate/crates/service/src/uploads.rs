use brahmi_core::GrayImage;
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

/// Decoded uploads keyed by a hash of their bytes, each alive for `ttl`
/// after its latest upload.
#[derive(Debug, Clone)]
pub struct UploadStore {
    ttl: Duration,
    entries: Arc<Mutex<HashMap<String, (Arc<GrayImage>, Instant)>>>,
}

impl UploadStore {
    pub fn new(ttl: Duration) -> Self {
        Self {
            ttl,
            entries: Arc::default(),
        }
    }

    pub fn token_for(bytes: &[u8]) -> String {
        Sha256::digest(bytes)[..16].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn insert(&self, token: String, img: Arc<GrayImage>) {
        let now = Instant::now();
        let mut map = self.entries.lock().expect("upload store poisoned");
        map.retain(|_, (_, expires)| *expires > now);
        map.insert(token, (img, now + self.ttl));
    }

    pub fn get(&self, token: &str) -> Option<Arc<GrayImage>> {
        let now = Instant::now();
        let mut map = self.entries.lock().expect("upload store poisoned");
        map.retain(|_, (_, expires)| *expires > now);
        map.get(token).map(|(img, _)| Arc::clone(img))
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("upload store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_follow_content() {
        assert_eq!(UploadStore::token_for(b"abc"), UploadStore::token_for(b"abc"));
        assert_ne!(UploadStore::token_for(b"abc"), UploadStore::token_for(b"abd"));
        assert_eq!(UploadStore::token_for(b"").len(), 32);
    }

    #[test]
    fn entries_expire() {
        let img = Arc::new(GrayImage::filled(1, 1, 0));
        let live = UploadStore::new(Duration::from_secs(600));
        live.insert("t".into(), img.clone());
        assert!(live.get("t").is_some());
        assert!(live.get("u").is_none());
        let dead = UploadStore::new(Duration::ZERO);
        dead.insert("t".into(), img);
        assert!(dead.get("t").is_none());
        assert!(dead.is_empty());
    }
}
