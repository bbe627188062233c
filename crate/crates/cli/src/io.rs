use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use sojourn::metrics::Smoothing;
use sojourn::topology::{RateProfile, Topology};

pub fn load_topology(path: &Path) -> Result<Topology> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading topology file {}", path.display()))?;
    Topology::from_json_str(&text).with_context(|| format!("in {}", path.display()))
}

pub fn load_rates(path: &Path) -> Result<RateProfile> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading rates file {}", path.display()))?;
    let raw: RateProfile = serde_json::from_str(&text)
        .with_context(|| format!("rates file {}", path.display()))?;
    RateProfile::new(raw.lambda0, raw.lambdas, raw.mus)
        .with_context(|| format!("rates file {}", path.display()))
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {what} file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{what} file {}", path.display()))
}

/// Parses `--smooth alpha=<a>` / `--smooth window=<w>`.
pub fn parse_smoothing(spec: &str) -> Result<Smoothing> {
    let (kind, value) = spec
        .split_once('=')
        .with_context(|| format!("--smooth expects alpha=<a> or window=<w>, got `{spec}`"))?;
    match kind.trim() {
        "alpha" => {
            let alpha: f64 = value.trim().parse().context("alpha must be a number")?;
            Ok(Smoothing::Alpha { alpha })
        }
        "window" => {
            let window: u32 = value.trim().parse().context("window must be an integer")?;
            Ok(Smoothing::Window { window })
        }
        other => bail!("unknown smoothing scheme `{other}`"),
    }
}

/// Resolves an output path inside `--out`, creating the directory on first use.
pub fn out_path(out: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    Ok(out.join(name))
}

/// Writes a report JSON with the manifest embedded at the top level.
pub fn write_report<R: Serialize>(
    out: &Path,
    name: &str,
    manifest: &crate::manifest::RunManifest,
    report: &R,
) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct Wrapped<'a, R> {
        manifest: &'a crate::manifest::RunManifest,
        #[serde(flatten)]
        report: &'a R,
    }
    let path = out_path(out, name)?;
    let body = serde_json::to_string_pretty(&Wrapped { manifest, report })
        .context("serializing report")?;
    fs::write(&path, body + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn write_text(out: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let path = out_path(out, name)?;
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
