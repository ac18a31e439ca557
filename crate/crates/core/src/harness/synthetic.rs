use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glance::{Glance, GLANCE_LEN, GLANCE_SIDE};
use crate::numerics::Rng;

use super::dataset::{f32_round, Dataset, SceneSegment, Split, Video, VideoRecord};

pub const N_SCENES: usize = 8;
pub const SUBJECTS: [&str; N_SCENES] = ["man", "woman", "dog", "cat", "boy", "girl", "horse", "bird"];
pub const VERBS: [&str; N_SCENES] = ["riding", "eating", "playing", "cutting", "holding", "chasing", "washing", "throwing"];
pub const OBJECTS: [&str; N_SCENES] = ["ball", "bike", "apple", "guitar", "bread", "car", "rope", "box"];

const MIN_SEGMENT: usize = 2;
const TEXTURE_AMPLITUDE: f64 = 0.15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub seed: u64,
    #[serde(default = "default_train")]
    pub n_train: usize,
    #[serde(default = "default_validation")]
    pub n_validation: usize,
    #[serde(default = "default_test")]
    pub n_test: usize,
    #[serde(default = "default_frames")]
    pub n_frames: usize,
    #[serde(default = "default_dim")]
    pub feature_dim: usize,
    #[serde(default = "default_max_scenes")]
    pub max_scenes: usize,
    /// Standard deviation of per-frame feature noise around the scene prototype.
    #[serde(default = "default_noise")]
    pub feature_noise: f64,
}

fn default_train() -> usize {
    200
}

fn default_validation() -> usize {
    30
}

fn default_test() -> usize {
    50
}

fn default_frames() -> usize {
    30
}

fn default_dim() -> usize {
    64
}

fn default_max_scenes() -> usize {
    4
}

fn default_noise() -> f64 {
    0.5
}

impl SyntheticConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            n_train: default_train(),
            n_validation: default_validation(),
            n_test: default_test(),
            n_frames: default_frames(),
            feature_dim: default_dim(),
            max_scenes: default_max_scenes(),
            feature_noise: default_noise(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim < 8 {
            return Err(Error::Config(format!("feature dimension {} below 8", self.feature_dim)));
        }
        if !(1..=N_SCENES).contains(&self.max_scenes) {
            return Err(Error::Config(format!("max_scenes must be in 1..={N_SCENES}")));
        }
        if self.n_frames < MIN_SEGMENT * self.max_scenes {
            return Err(Error::Config(format!(
                "{} frames cannot hold {} scenes of at least {MIN_SEGMENT} frames",
                self.n_frames, self.max_scenes
            )));
        }
        if !(self.feature_noise >= 0.0) {
            return Err(Error::Config("feature noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Scene order of a video, one entry per segment.
pub fn scene_sequence(segments: &[SceneSegment]) -> Vec<usize> {
    segments.iter().map(|s| s.scene).collect()
}

/// Subject from the first scene, verb from the second (or the only one),
/// object from the last.
pub fn caption_words(scenes: &[usize]) -> Result<(&'static str, &'static str, &'static str)> {
    let (Some(&first), Some(&last)) = (scenes.first(), scenes.last()) else {
        return Err(Error::Usage("video has no scenes".into()));
    };
    if let Some(&bad) = scenes.iter().find(|&&s| s >= N_SCENES) {
        return Err(Error::Usage(format!("scene id {bad} out of range")));
    }
    let second = scenes.get(1).copied().unwrap_or(first);
    Ok((SUBJECTS[first], VERBS[second], OBJECTS[last]))
}

/// The three reference captions for a scene sequence.
pub fn reference_captions(scenes: &[usize]) -> Result<Vec<String>> {
    let (s, v, o) = caption_words(scenes)?;
    Ok(vec![
        format!("a {s} is {v} a {o}"),
        format!("the {s} is {v} the {o}"),
        format!("a {s} is {v} the {o}"),
    ])
}

/// Captioner that reads the ground-truth scene layout.
pub fn oracle_caption(segments: &[SceneSegment]) -> Result<String> {
    let (s, v, o) = caption_words(&scene_sequence(segments))?;
    Ok(format!("a {s} is {v} a {o}"))
}

/// Grating texture of a scene: per-scene brightness, orientation and
/// frequency, shifted by `phase`.
pub fn scene_glance(scene: usize, phase: f64, jitter: f64) -> Glance {
    let base = 0.15 + 0.1 * scene as f64;
    let theta = scene as f64 * std::f64::consts::PI / N_SCENES as f64;
    let freq = 2.0 + (scene % 4) as f64;
    let (c, s) = (theta.cos(), theta.sin());
    let mut bytes = Vec::with_capacity(GLANCE_LEN);
    for y in 0..GLANCE_SIDE {
        for x in 0..GLANCE_SIDE {
            let u = (x as f64 * c + y as f64 * s) / GLANCE_SIDE as f64;
            let v = base + jitter + TEXTURE_AMPLITUDE * (std::f64::consts::TAU * freq * u + phase).sin();
            bytes.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    Glance::from_bytes(&bytes).expect("glance has the fixed size")
}

fn prototypes(cfg: &SyntheticConfig) -> Vec<Vec<f64>> {
    let mut rng = Rng::with_stream(cfg.seed, 1);
    (0..N_SCENES)
        .map(|_| (0..cfg.feature_dim).map(|_| rng.normal()).collect())
        .collect()
}

fn segments(rng: &mut Rng, n_frames: usize, max_scenes: usize) -> Vec<SceneSegment> {
    let k = 1 + rng.below(max_scenes);
    let mut pool: Vec<usize> = (0..N_SCENES).collect();
    rng.shuffle(&mut pool);
    let spare = n_frames - MIN_SEGMENT * k;
    let mut cuts: Vec<usize> = (0..k - 1).map(|_| rng.below(spare + 1)).collect();
    cuts.sort_unstable();
    cuts.push(spare);
    let mut out = Vec::with_capacity(k);
    let (mut start, mut prev) = (0, 0);
    for (i, &c) in cuts.iter().enumerate() {
        let len = MIN_SEGMENT + c - prev;
        out.push(SceneSegment {
            scene: pool[i],
            start,
            end: start + len,
        });
        start += len;
        prev = c;
    }
    out
}

fn make_video(index: usize, split: Split, cfg: &SyntheticConfig, protos: &[Vec<f64>]) -> Result<Video> {
    let mut rng = Rng::with_stream(cfg.seed, 2).derive(index as u64);
    let segs = segments(&mut rng, cfg.n_frames, cfg.max_scenes);
    let rate = rng.uniform_range(0.25, 0.45);
    let mut features = Vec::with_capacity(cfg.n_frames);
    let mut glances = Vec::with_capacity(cfg.n_frames);
    for seg in &segs {
        let phase0 = rng.uniform_range(0.0, std::f64::consts::TAU);
        for t in seg.start..seg.end {
            let phase = phase0 + rate * (t - seg.start) as f64;
            glances.push(scene_glance(seg.scene, phase, rng.uniform_range(-0.01, 0.01)));
            features.push(
                protos[seg.scene]
                    .iter()
                    .map(|p| f32_round(p + cfg.feature_noise * rng.normal()))
                    .collect(),
            );
        }
    }
    let id = format!("video{index:04}");
    let record = VideoRecord {
        id: id.clone(),
        split,
        n_frames: cfg.n_frames,
        captions: reference_captions(&scene_sequence(&segs))?,
        features: format!("features/{id}.feat"),
        glances: format!("glances/{id}.glance"),
        scenes: segs,
    };
    Ok(Video {
        record,
        features,
        glances,
    })
}

/// Deterministic scene-structured dataset: videos are runs of 1 to
/// `max_scenes` distinct scenes, each with its own glance texture (drifting
/// in phase over time) and feature prototype.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.validate()?;
    let protos = prototypes(cfg);
    let splits = std::iter::repeat_n(Split::Train, cfg.n_train)
        .chain(std::iter::repeat_n(Split::Validation, cfg.n_validation))
        .chain(std::iter::repeat_n(Split::Test, cfg.n_test));
    let videos = splits
        .enumerate()
        .map(|(i, split)| make_video(i, split, cfg, &protos))
        .collect::<Result<_>>()?;
    Ok(Dataset {
        feature_dim: cfg.feature_dim,
        videos,
    })
}
