//! File loading shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use tti_core::{
    assemble, join_tti_weather, parse_tti_csv, parse_weather_csv, DesignMatrix, JoinedRecord,
    PredictionCase,
};

#[derive(Debug, Args)]
pub struct Inputs {
    /// Hourly TTI file with a `timestamp,tti` header.
    #[arg(long = "in", value_name = "TTI_CSV")]
    pub tti: PathBuf,
    /// Daily weather file with a `date` column and the 34 schema columns.
    #[arg(long, value_name = "WEATHER_CSV")]
    pub weather: PathBuf,
}

impl Inputs {
    pub fn records(&self) -> Result<Vec<JoinedRecord>> {
        let tti = read(&self.tti)?;
        let weather = read(&self.weather)?;
        let obs = parse_tti_csv(&tti).with_context(|| format!("parsing {}", self.tti.display()))?;
        let days = parse_weather_csv(&weather)
            .with_context(|| format!("parsing {}", self.weather.display()))?;
        let joined = join_tti_weather(&obs, &days)?;
        if joined.dropped > 0 {
            log::warn!("{} observations had no weather record and were dropped", joined.dropped);
        }
        Ok(joined.records)
    }

    /// The 93-column matrix for `case`, optionally written to `dump` first.
    pub fn matrix(&self, case: PredictionCase, dump: Option<&Path>) -> Result<DesignMatrix> {
        let m = assemble(&self.records()?, case)?;
        if let Some(path) = dump {
            write(path, &m.to_csv())?;
            log::info!("wrote {} rows to {}", m.n_rows(), path.display());
        }
        Ok(m)
    }
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Column names from a JSON array or plain text (one name per line or
/// comma-separated; `#` starts a comment).
pub fn read_feature_list(path: &Path) -> Result<Vec<String>> {
    let text = read(path)?;
    let trimmed = text.trim_start();
    let names: Vec<String> = if trimmed.starts_with('[') {
        serde_json::from_str(trimmed).with_context(|| format!("parsing {}", path.display()))?
    } else {
        text.lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split(','))
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    };
    if names.is_empty() {
        bail!("{} lists no features", path.display());
    }
    Ok(names)
}

/// Parses `a..b`, `a..=b`, `a-b` or comma-separated sizes.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>, String> {
    let range = |a: &str, b: &str, inclusive: bool| -> Result<Vec<usize>, String> {
        let lo: usize = a.trim().parse().map_err(|_| format!("bad size `{a}`"))?;
        let hi: usize = b.trim().parse().map_err(|_| format!("bad size `{b}`"))?;
        let hi = if inclusive { hi } else { hi.saturating_sub(1) };
        if lo > hi {
            return Err(format!("empty size range `{s}`"));
        }
        Ok((lo..=hi).collect())
    };
    if let Some((a, b)) = s.split_once("..=") {
        return range(a, b, true);
    }
    // `1..24` reads as inclusive, matching how subset sizes are usually written
    if let Some((a, b)) = s.split_once("..") {
        return range(a, b, true);
    }
    if let Some((a, b)) = s.split_once('-') {
        return range(a, b, true);
    }
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("bad size `{p}`")))
        .collect()
}
