//! Download and cache of SuiteSparse collection matrices in Matrix
//! Market form.
//!
//! Matrices are addressed as `Group/Name` (or a full URL to a .tar.gz
//! archive). Archives are extracted and the .mtx member cached under a
//! content-addressed directory; repeated fetches are served from the
//! cache without network traffic.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "SBMF_CACHE_DIR";

const BASE_URL: &str = "https://sparse.tamu.edu/MM";

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("cannot resolve matrix id `{0}` (expected Group/Name or a URL)")]
    BadId(String),
    #[error("matrix `{0}` not in cache and offline mode is on")]
    CacheMiss(String),
    #[error("download of {url} failed: {reason}")]
    Http { url: String, reason: String },
    #[error("archive for `{id}` contains no .mtx member")]
    NoMatrixMember { id: String },
    #[error("failed to extract archive for `{id}`: {reason}")]
    Extract { id: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct Fetcher {
    cache_dir: PathBuf,
    offline: bool,
}

fn default_cache_dir() -> PathBuf {
    if let Ok(dir) = std::env::var(CACHE_DIR_ENV) {
        return PathBuf::from(dir);
    }
    let home = std::env::var("HOME").unwrap_or_else(|_| ".".to_string());
    Path::new(&home).join(".cache").join("sbmf")
}

impl Fetcher {
    pub fn new(cache_dir: Option<PathBuf>, offline: bool) -> Fetcher {
        Fetcher {
            cache_dir: cache_dir.unwrap_or_else(default_cache_dir),
            offline,
        }
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }

    fn resolve_url(&self, id: &str) -> Result<String, FetchError> {
        if id.starts_with("http://") || id.starts_with("https://") {
            return Ok(id.to_string());
        }
        let mut parts = id.split('/');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(group), Some(name), None) if !group.is_empty() && !name.is_empty() => {
                Ok(format!("{BASE_URL}/{group}/{name}.tar.gz"))
            }
            _ => Err(FetchError::BadId(id.to_string())),
        }
    }

    fn cache_path(&self, url: &str) -> PathBuf {
        let digest = Sha256::digest(url.as_bytes());
        let short = hex_prefix(&digest, 16);
        self.cache_dir.join(short).join("matrix.mtx")
    }

    /// Returns the cached .mtx path for `id`, downloading and
    /// extracting the archive on a cache miss.
    pub fn fetch(&self, id: &str) -> Result<PathBuf, FetchError> {
        let url = self.resolve_url(id)?;
        let path = self.cache_path(&url);
        if path.exists() {
            return Ok(path);
        }
        if self.offline {
            return Err(FetchError::CacheMiss(id.to_string()));
        }
        let archive = download(&url)?;
        let mtx = extract_mtx(&archive, id)?;
        // write to a temp name first so a failed extract never leaves a
        // half-written cache entry
        let dir = path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join("matrix.mtx.part");
        fs::write(&tmp, &mtx)?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

fn hex_prefix(bytes: &[u8], n: usize) -> String {
    bytes.iter().take(n).map(|b| format!("{b:02x}")).collect()
}

fn download(url: &str) -> Result<Vec<u8>, FetchError> {
    let response = ureq::get(url).call().map_err(|e| FetchError::Http {
        url: url.to_string(),
        reason: e.to_string(),
    })?;
    let mut body = Vec::new();
    response
        .into_reader()
        .read_to_end(&mut body)
        .map_err(|e| FetchError::Http {
            url: url.to_string(),
            reason: e.to_string(),
        })?;
    Ok(body)
}

/// Pulls the first .mtx member out of a gzipped tar archive. SuiteSparse
/// archives hold `Name/Name.mtx` plus optional auxiliary files.
fn extract_mtx(archive: &[u8], id: &str) -> Result<Vec<u8>, FetchError> {
    let gz = flate2::read::GzDecoder::new(archive);
    let mut tar = tar::Archive::new(gz);
    let entries = tar.entries().map_err(|e| FetchError::Extract {
        id: id.to_string(),
        reason: e.to_string(),
    })?;
    for entry in entries {
        let mut entry = entry.map_err(|e| FetchError::Extract {
            id: id.to_string(),
            reason: e.to_string(),
        })?;
        let path = entry
            .path()
            .map_err(|e| FetchError::Extract {
                id: id.to_string(),
                reason: e.to_string(),
            })?
            .into_owned();
        if path.extension().is_some_and(|e| e == "mtx") {
            let mut data = Vec::new();
            entry.read_to_end(&mut data).map_err(|e| FetchError::Extract {
                id: id.to_string(),
                reason: e.to_string(),
            })?;
            return Ok(data);
        }
    }
    Err(FetchError::NoMatrixMember { id: id.to_string() })
}
