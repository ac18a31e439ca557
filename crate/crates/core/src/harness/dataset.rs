use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glance::{read_glance_file, write_glance_file, Glance};
use crate::metrics::CaptionSet;
use crate::text::tokenize;

const FEATURE_MAGIC: &[u8; 4] = b"PKNF";
const FEATURE_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Usage(format!("unknown split {other:?}"))),
        }
    }
}

/// A contiguous run of frames `[start, end)` showing one scene.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSegment {
    pub scene: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoRecord {
    pub id: String,
    pub split: Split,
    pub n_frames: usize,
    pub captions: Vec<String>,
    /// Paths relative to the manifest directory.
    pub features: String,
    pub glances: String,
    /// Ground-truth scene layout, present for synthetic data.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenes: Vec<SceneSegment>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub feature_dim: usize,
    pub videos: Vec<VideoRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Video {
    pub record: VideoRecord,
    pub features: Vec<Vec<f64>>,
    pub glances: Vec<Glance>,
}

impl Video {
    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn n_frames(&self) -> usize {
        self.features.len()
    }

    pub fn feature_refs(&self) -> Vec<&[f64]> {
        self.features.iter().map(|f| f.as_slice()).collect()
    }

    pub fn picked_features(&self, picks: &[usize]) -> Vec<&[f64]> {
        picks.iter().map(|&i| self.features[i].as_slice()).collect()
    }

    /// Tokenized reference captions.
    pub fn references(&self) -> CaptionSet<String> {
        CaptionSet::new(self.id(), self.record.captions.iter().map(|c| tokenize(c)).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub feature_dim: usize,
    pub videos: Vec<Video>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> Vec<&Video> {
        self.videos.iter().filter(|v| v.record.split == split).collect()
    }

    pub fn video(&self, id: &str) -> Option<&Video> {
        self.videos.iter().find(|v| v.record.id == id)
    }

    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest {
            version: MANIFEST_VERSION,
            feature_dim: self.feature_dim,
            videos: self.videos.iter().map(|v| v.record.clone()).collect(),
        }
    }

    /// Writes `manifest.json` plus one feature and one glance file per video
    /// under `dir`, using the relative paths stored in each record.
    pub fn save(&self, dir: &Path) -> Result<()> {
        for v in &self.videos {
            let fp = dir.join(&v.record.features);
            let gp = dir.join(&v.record.glances);
            for p in [&fp, &gp] {
                if let Some(parent) = p.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
            }
            write_feature_file(&fp, &v.features)?;
            write_glance_file(&gp, &v.glances)?;
        }
        let path = dir.join(MANIFEST_FILE);
        let mut json = serde_json::to_string_pretty(&self.manifest())?;
        json.push('\n');
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }

    /// Loads a dataset from a manifest file or a directory containing one.
    pub fn load(path: &Path) -> Result<Self> {
        let manifest_path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let root = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::format(&manifest_path, 0, e.to_string()))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::format(&manifest_path, 0, format!("unsupported manifest version {}", manifest.version)));
        }
        let mut seen = std::collections::HashSet::new();
        let mut videos = Vec::with_capacity(manifest.videos.len());
        for record in manifest.videos {
            if !seen.insert(record.id.clone()) {
                return Err(Error::format(&manifest_path, 0, format!("duplicate video id {}", record.id)));
            }
            let fp: PathBuf = root.join(&record.features);
            let features = read_feature_file(&fp)?;
            if features.len() != record.n_frames {
                return Err(Error::format(
                    &fp,
                    8,
                    format!("header has {} frames, manifest says {}", features.len(), record.n_frames),
                ));
            }
            if let Some(f) = features.first() {
                if f.len() != manifest.feature_dim {
                    return Err(Error::format(
                        &fp,
                        12,
                        format!("header has dimension {}, manifest says {}", f.len(), manifest.feature_dim),
                    ));
                }
            }
            let gp = root.join(&record.glances);
            let glances = read_glance_file(&gp)?;
            if glances.len() != record.n_frames {
                return Err(Error::format(
                    &gp,
                    8,
                    format!("header has {} frames, manifest says {}", glances.len(), record.n_frames),
                ));
            }
            videos.push(Video {
                record,
                features,
                glances,
            });
        }
        Ok(Self {
            feature_dim: manifest.feature_dim,
            videos,
        })
    }
}

/// Rounds through `f32` so values survive a save/load cycle unchanged.
pub fn f32_round(v: f64) -> f64 {
    v as f32 as f64
}

pub fn write_feature_file(path: &Path, features: &[Vec<f64>]) -> Result<()> {
    let dim = features.first().map_or(0, Vec::len);
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::shape("feature rows", dim, bad.len()));
    }
    let mut buf = Vec::with_capacity(16 + 4 * dim * features.len());
    buf.extend_from_slice(FEATURE_MAGIC);
    for v in [FEATURE_VERSION, features.len() as u32, dim as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for x in features.iter().flatten() {
        buf.extend_from_slice(&(*x as f32).to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_feature_file(path: &Path) -> Result<Vec<Vec<f64>>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_feature_file(path, &bytes)
}

pub(crate) fn parse_feature_file(path: &Path, bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    if bytes.len() < 16 {
        return Err(Error::format(path, bytes.len() as u64, "truncated feature header"));
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::format(path, 0, "bad magic, expected PKNF"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let (version, n, d) = (word(0), word(1) as usize, word(2) as usize);
    if version != FEATURE_VERSION {
        return Err(Error::format(path, 4, format!("unsupported version {version}")));
    }
    if n > 0 && d == 0 {
        return Err(Error::format(path, 12, "zero feature dimension"));
    }
    let expected = 16 + 4 * n * d;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            bytes.len().min(expected) as u64,
            format!("expected {expected} bytes for {n}x{d} features, found {}", bytes.len()),
        ));
    }
    Ok(bytes[16..]
        .chunks_exact(4 * d.max(1))
        .take(n)
        .map(|row| {
            row.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect()
        })
        .collect())
}
