//! Windowed dataset directory: `manifest.json` plus one little-endian `f32`
//! blob per window (`C × T`, row-major) under `windows/`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use eegdif_core::imaging::ChannelScaler;
use eegdif_core::{Matrix, WindowedSample};
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowEntry {
    pub file: String,
    pub label: u8,
    pub patient_id: String,
    pub start_time: f64,
    pub split: Split,
    pub scaler_min: Vec<f64>,
    pub scaler_max: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub edf: String,
    pub annotations: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub channels: Vec<String>,
    pub rate: f64,
    /// Samples per window.
    pub window: usize,
    pub stride: usize,
    pub source: Provenance,
    pub windows: Vec<WindowEntry>,
}

/// Writes the dataset and returns every file created, manifest last.
pub fn write(
    dir: &Path,
    channels: Vec<String>,
    rate: f64,
    stride: usize,
    source: Provenance,
    samples: &[(WindowedSample, Split)],
) -> Result<Vec<PathBuf>> {
    ensure!(!samples.is_empty(), "no windows to write");
    let window = samples[0].0.data.cols();
    fs::create_dir_all(dir.join("windows")).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::with_capacity(samples.len() + 1);
    let mut entries = Vec::with_capacity(samples.len());
    for (i, (s, split)) in samples.iter().enumerate() {
        let file = format!("windows/{i:06}.bin");
        let bytes: Vec<u8> = s.data.as_slice().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
        let path = dir.join(&file);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        let scaler = ChannelScaler::fit(&s.data)?;
        entries.push(WindowEntry {
            file,
            label: s.label,
            patient_id: s.patient_id.clone(),
            start_time: s.start_time,
            split: *split,
            scaler_min: scaler.min().to_vec(),
            scaler_max: scaler.max().to_vec(),
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        channels,
        rate,
        window,
        stride,
        source,
        windows: entries,
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    written.push(path);
    Ok(written)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let m: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if m.format_version != FORMAT_VERSION {
        bail!("{}: unsupported dataset format version {}", path.display(), m.format_version);
    }
    Ok(m)
}

/// Loads the windows of `split` (all windows when `None`).
pub fn load(dir: &Path, split: Option<Split>) -> Result<(Manifest, Vec<WindowedSample>)> {
    let m = read_manifest(dir)?;
    let c = m.channels.len();
    let mut out = Vec::new();
    for e in m.windows.iter().filter(|e| split.is_none_or(|s| s == e.split)) {
        let path = dir.join(&e.file);
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        ensure!(
            bytes.len() == c * m.window * 4,
            "{}: expected {} bytes, found {}",
            path.display(),
            c * m.window * 4,
            bytes.len()
        );
        let values = bytes
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        out.push(WindowedSample {
            data: Matrix::from_vec(c, m.window, values)?,
            label: e.label,
            patient_id: e.patient_id.clone(),
            start_time: e.start_time,
        });
    }
    Ok((m, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let s = |label, t| WindowedSample {
            data: Matrix::from_fn(2, 3, |c, j| (c * 3 + j) as f64 * 0.5 + t),
            label,
            patient_id: "p1".into(),
            start_time: t,
        };
        let samples = vec![(s(0, 0.0), Split::Train), (s(1, 1.0), Split::Test)];
        let src = Provenance { edf: "x.edf".into(), annotations: None };
        let files = write(dir.path(), vec!["A".into(), "B".into()], 3.0, 3, src, &samples).unwrap();
        assert_eq!(files.len(), 3);
        let (m, train) = load(dir.path(), Some(Split::Train)).unwrap();
        assert_eq!(m.window, 3);
        assert_eq!(train.len(), 1);
        assert_eq!(train[0], samples[0].0);
        let (_, all) = load(dir.path(), None).unwrap();
        assert_eq!(all[1].label, 1);
        assert_eq!(m.windows[1].scaler_max, vec![2.0, 3.5]);
    }
}
