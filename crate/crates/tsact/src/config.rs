//! Layered configuration (flags > `UCR_DATA_ROOT` > config file > defaults)
//! and per-invocation manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::canonical_hash;
use crate::error::{Error, Result};
use crate::export::write_json;

pub const DEFAULT_OUT: &str = "tsact-out";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Optional TOML file; every key may be omitted.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data_root: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub alpha: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Toml {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

/// The data root after applying precedence; `None` if nothing supplies one.
pub fn resolve_data_root(flag: Option<&Path>, env: Option<&str>, file: &FileConfig) -> Option<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| file.data_root.clone())
}

pub fn resolve_out(flag: Option<&Path>, file: &FileConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

#[derive(Debug, Serialize)]
struct Manifest<'a, T: Serialize> {
    subcommand: &'a str,
    version: &'a str,
    config_hash: &'a str,
    output_dir: &'a Path,
    config: &'a T,
}

/// Per-invocation output directory `<out>/<subcommand>-<hash>`.
///
/// `identity` is what makes two invocations the same (for `bench` this
/// leaves out the worker count); the manifest records the full `config`.
pub struct Invocation {
    pub dir: PathBuf,
    pub hash: String,
}

impl Invocation {
    pub fn create<I: Serialize, T: Serialize>(out: &Path, subcommand: &str, identity: &I, config: &T) -> Result<Self> {
        let hash = canonical_hash(&(subcommand, identity));
        let dir = out.join(format!("{subcommand}-{}", &hash[..16]));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_json(
            &dir.join(MANIFEST_FILE),
            &Manifest {
                subcommand,
                version: env!("CARGO_PKG_VERSION"),
                config_hash: &hash,
                output_dir: &dir,
                config,
            },
        )?;
        Ok(Self { dir, hash })
    }
}
