//! Download client for Matrix Market collection entries with a local cache.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Duration;

use flate2::read::GzDecoder;
use log::{debug, info};

use kpl_core::read_matrix_market;

use crate::error::{file_err, HarnessError, Result};

pub const DEFAULT_BASE_URL: &str = "https://math.nist.gov/pub/MatrixMarket2";
pub const CACHE_DIR_ENV: &str = "KPL_CACHE_DIR";
pub const BASE_URL_ENV: &str = "KPL_BASE_URL";

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Something that can GET a URL. Injected so tests can observe or forbid
/// network traffic.
pub trait Transport {
    fn get(&self, url: &str) -> Result<Vec<u8>>;
}

/// Blocking HTTPS transport.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(timeout)
            .timeout(timeout * 6)
            .build();
        Self { agent }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(10))
    }
}

impl Transport for UreqTransport {
    fn get(&self, url: &str) -> Result<Vec<u8>> {
        let err = |msg: String| HarnessError::Fetch {
            url: url.to_string(),
            msg,
        };
        let resp = self.agent.get(url).call().map_err(|e| {
            let msg = e.to_string();
            err(msg
                .strip_prefix(&format!("{url}: "))
                .unwrap_or(&msg)
                .to_string())
        })?;
        let mut body = Vec::new();
        resp.into_reader()
            .read_to_end(&mut body)
            .map_err(|e| err(e.to_string()))?;
        Ok(body)
    }
}

/// Collection path of the matrices the benchmark table uses. Other names are
/// looked up directly under the base URL.
pub fn collection_path(name: &str) -> String {
    let group = match name {
        "bcsstk15" => Some("Harwell-Boeing/bcsstruc2"),
        "nos1" => Some("Harwell-Boeing/lanpro"),
        "s1rmt3m1" => Some("misc/cylshell"),
        _ => None,
    };
    match group {
        Some(g) => format!("{g}/{name}"),
        None => name.to_string(),
    }
}

pub fn matrix_url(base_url: &str, name: &str) -> String {
    format!(
        "{}/{}.mtx.gz",
        base_url.trim_end_matches('/'),
        collection_path(name)
    )
}

/// `$KPL_CACHE_DIR`, else the user cache directory, else `./.kpl-cache`.
pub fn default_cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_DIR_ENV).filter(|d| !d.is_empty()) {
        return dir.into();
    }
    if let Some(dir) = std::env::var_os("XDG_CACHE_HOME").filter(|d| !d.is_empty()) {
        return PathBuf::from(dir).join("kpl");
    }
    if let Some(home) = std::env::var_os("HOME").filter(|d| !d.is_empty()) {
        return PathBuf::from(home).join(".cache").join("kpl");
    }
    PathBuf::from(".kpl-cache")
}

/// `$KPL_BASE_URL` or the default mirror.
pub fn default_base_url() -> String {
    std::env::var(BASE_URL_ENV)
        .ok()
        .filter(|u| !u.is_empty())
        .unwrap_or_else(|| DEFAULT_BASE_URL.to_string())
}

pub fn cached_path(cache_dir: &Path, name: &str) -> PathBuf {
    cache_dir.join(format!("{name}.mtx"))
}

/// Returns the cached `.mtx` for `name`, downloading it over HTTPS first
/// when it is not cached yet.
pub fn fetch_matrix(name: &str, cache_dir: &Path, base_url: &str) -> Result<PathBuf> {
    fetch_matrix_with(&UreqTransport::default(), name, cache_dir, base_url)
}

pub fn fetch_matrix_with(
    transport: &dyn Transport,
    name: &str,
    cache_dir: &Path,
    base_url: &str,
) -> Result<PathBuf> {
    if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
        return Err(HarnessError::Config(format!(
            "invalid matrix name {name:?}"
        )));
    }
    let path = cached_path(cache_dir, name);
    if path.is_file() {
        debug!("cache hit for {name}: {}", path.display());
        return Ok(path);
    }
    let url = matrix_url(base_url, name);
    info!("downloading {url}");
    let body = transport.get(&url)?;
    let plain = if body.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        GzDecoder::new(body.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| HarnessError::Corrupt {
                name: name.to_string(),
                source: e.into(),
            })?;
        out
    } else {
        body
    };

    std::fs::create_dir_all(cache_dir).map_err(file_err(cache_dir))?;
    let partial = cache_dir.join(format!("{name}.mtx.part"));
    std::fs::write(&partial, &plain).map_err(file_err(&partial))?;
    if let Err(source) = read_matrix_market(plain.as_slice()) {
        let _ = std::fs::remove_file(&partial);
        return Err(HarnessError::Corrupt {
            name: name.to_string(),
            source,
        });
    }
    std::fs::rename(&partial, &path).map_err(file_err(&path))?;
    Ok(path)
}
