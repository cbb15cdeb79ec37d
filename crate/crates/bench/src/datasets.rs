//! Dataset registry, download cache and `--dataset` resolution.
//!
//! A dataset argument is one of
//! - a registry name (`cora`, `citeseer`, `pubmed`), fetched into the data root;
//! - a path to an `.npz` file in the layout read by [`load_graph`];
//! - `synthetic[:n=..,d=..,c=..,p=..,seed=..]`, a random graph;
//! - `separable[:n=..,c=..,seed=..]`, the linearly separable fixture.
//!
//! Every cached archive has a `<file>.sha256` sidecar. When the manifest pins
//! no checksum, the first successful download records one and later loads are
//! verified against it.
//!
//! [`load_graph`]: gallery_core::graph::load_graph

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use gallery_core::graph::{read_graph_file, separable_graph, synthetic_graph, Graph};
use gallery_core::{Error, Result};
use sha2::{Digest, Sha256};

pub const DATA_ROOT_ENV: &str = "GALLERY_DATA_ROOT";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: &'static str,
    pub file: &'static str,
    pub url: Option<&'static str>,
    pub sha256: Option<&'static str>,
}

/// No public mirror of the archives with the fixed splits could be
/// verified, so neither a location nor a digest is pinned; pass
/// `--url-override` (or `url.<name>` in a config file) to download.
pub const MANIFEST: &[ManifestEntry] = &[
    ManifestEntry { name: "citeseer", file: "citeseer.npz", url: None, sha256: None },
    ManifestEntry { name: "cora", file: "cora.npz", url: None, sha256: None },
    ManifestEntry { name: "pubmed", file: "pubmed.npz", url: None, sha256: None },
];

pub fn manifest_entry(name: &str) -> Result<&'static ManifestEntry> {
    let key = name.to_ascii_lowercase();
    MANIFEST.iter().find(|e| e.name == key).ok_or_else(|| Error::NotFound {
        kind: "dataset",
        name: name.to_string(),
        available: MANIFEST.iter().map(|e| e.name).collect::<Vec<_>>().join(", "),
    })
}

/// `flag` if given, else `$GALLERY_DATA_ROOT`, else `./data`.
pub fn data_root(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".sha256");
    PathBuf::from(s)
}

/// Moves a file that failed verification to `<path>.bad`.
fn quarantine(from: &Path, path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".bad");
    let bad = PathBuf::from(s);
    let _ = fs::rename(from, &bad);
    bad
}

fn expected_digest(entry: &ManifestEntry, path: &Path) -> Result<Option<String>> {
    if let Some(d) = entry.sha256 {
        return Ok(Some(d.to_string()));
    }
    match fs::read_to_string(sidecar(path)) {
        Ok(s) => Ok(Some(s.split_whitespace().next().unwrap_or("").to_ascii_lowercase())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Checks `bytes` (the content of `from`) against `expected`; a mismatch
/// quarantines `from` as `<path>.bad`.
fn verify(from: &Path, path: &Path, bytes: &[u8], expected: Option<&str>) -> Result<String> {
    let actual = sha256_hex(bytes);
    if let Some(want) = expected {
        if want != actual {
            let bad = quarantine(from, path);
            return Err(Error::Integrity(format!(
                "{} has sha256 {actual}, expected {want}; moved to {}",
                path.display(),
                bad.display()
            )));
        }
    }
    Ok(actual)
}

fn download(url: &str) -> Result<Vec<u8>> {
    let resp = ureq::get(url)
        .call()
        .map_err(|e| Error::Fetch(format!("GET {url}: {e}")))?;
    let mut buf = Vec::new();
    resp.into_body()
        .into_reader()
        .read_to_end(&mut buf)
        .map_err(|e| Error::Fetch(format!("reading {url}: {e}")))?;
    Ok(buf)
}

/// Returns the local path of a registry dataset, downloading it if needed.
/// A cached file is verified and reused without touching the network.
pub fn fetch_dataset(name: &str, root: &Path, url_override: Option<&str>) -> Result<PathBuf> {
    let entry = manifest_entry(name)?;
    let path = root.join(entry.file);
    let expected = expected_digest(entry, &path)?;

    if path.exists() {
        let digest = verify(&path, &path, &fs::read(&path)?, expected.as_deref())?;
        if expected.is_none() {
            fs::write(sidecar(&path), format!("{digest}  {}\n", entry.file))?;
        }
        return Ok(path);
    }

    let url = url_override.or(entry.url).ok_or_else(|| {
        Error::Fetch(format!(
            "no download location is known for '{}'; pass --url-override URL or place {} in {}",
            entry.name,
            entry.file,
            root.display()
        ))
    })?;
    let bytes = download(url)?;
    fs::create_dir_all(root)?;
    let part = root.join(format!("{}.part", entry.file));
    {
        let mut f = fs::File::create(&part)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    let digest = verify(&part, &path, &bytes, expected.as_deref())?;
    fs::rename(&part, &path)?;
    fs::write(sidecar(&path), format!("{digest}  {}\n", entry.file))?;
    Ok(path)
}

/// Parses `key=value` pairs after the `:` of a generated dataset spec.
fn params(spec: &str) -> Result<Vec<(&str, &str)>> {
    let Some((_, rest)) = spec.split_once(':') else {
        return Ok(Vec::new());
    };
    rest.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("expected key=value in dataset spec, got '{p}'")))
        })
        .collect()
}

fn num<T: std::str::FromStr>(v: &str, key: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("invalid {key} '{v}' in dataset spec")))
}

/// Loads the graph named by a `--dataset` argument.
pub fn resolve_dataset(spec: &str, root: &Path, url_override: Option<&str>) -> Result<Graph> {
    let head = spec.split(':').next().unwrap_or(spec).to_ascii_lowercase();
    match head.as_str() {
        "synthetic" => {
            let (mut n, mut d, mut c, mut p, mut seed) = (200usize, 32usize, 7usize, 0.02f64, 0u64);
            for (k, v) in params(spec)? {
                match k {
                    "n" => n = num(v, k)?,
                    "d" => d = num(v, k)?,
                    "c" => c = num(v, k)?,
                    "p" => p = num(v, k)?,
                    "seed" => seed = num(v, k)?,
                    _ => return Err(Error::Config(format!("unknown synthetic parameter '{k}' (n, d, c, p, seed)"))),
                }
            }
            synthetic_graph(n, d, c, p, seed)
        }
        "separable" => {
            let (mut n, mut c, mut seed) = (60usize, 3usize, 0u64);
            for (k, v) in params(spec)? {
                match k {
                    "n" => n = num(v, k)?,
                    "c" => c = num(v, k)?,
                    "seed" => seed = num(v, k)?,
                    _ => return Err(Error::Config(format!("unknown separable parameter '{k}' (n, c, seed)"))),
                }
            }
            separable_graph(n, c, seed)
        }
        _ if spec.ends_with(".npz") || Path::new(spec).is_file() => read_graph_file(spec),
        _ => {
            let entry = manifest_entry(spec).map_err(|_| Error::NotFound {
                kind: "dataset",
                name: spec.to_string(),
                available: "citeseer, cora, pubmed, synthetic[:n=,d=,c=,p=,seed=], separable[:n=,c=,seed=], <file>.npz"
                    .into(),
            })?;
            let path = fetch_dataset(entry.name, root, url_override)?;
            Ok(read_graph_file(path)?.with_name(entry.name))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_registry_name_lists_the_registry() {
        match manifest_entry("ogbn-products") {
            Err(Error::NotFound { available, .. }) => assert_eq!(available, "citeseer, cora, pubmed"),
            other => panic!("{other:?}"),
        }
        assert!(manifest_entry("CoRa").is_ok());
    }

    #[test]
    fn generated_specs() {
        let root = Path::new("unused");
        let g = resolve_dataset("synthetic:n=30,d=4,c=3,seed=2", root, None).unwrap();
        assert_eq!((g.n_nodes(), g.n_features(), g.n_classes()), (30, 4, 3));
        let s = resolve_dataset("separable", root, None).unwrap();
        assert_eq!((s.n_nodes(), s.n_classes()), (60, 3));
        assert!(matches!(resolve_dataset("synthetic:q=1", root, None), Err(Error::Config(_))));
        assert!(matches!(resolve_dataset("synthetic:n", root, None), Err(Error::Config(_))));
        assert!(matches!(resolve_dataset("imagenet", root, None), Err(Error::NotFound { .. })));
    }

    #[test]
    fn missing_location_is_a_fetch_error() {
        let dir = std::env::temp_dir().join(format!("gallery-fetch-{}", std::process::id()));
        let r = fetch_dataset("cora", &dir, None);
        assert!(matches!(r, Err(Error::Fetch(_))), "{r:?}");
    }

    #[test]
    fn digest_is_lowercase_hex() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
