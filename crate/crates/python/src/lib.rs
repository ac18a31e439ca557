//! Python bindings: datasets, checkpoints, training, evaluation, streaming
//! and the metric and cost helpers.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use picknet::checkpoint::Checkpoint;
use picknet::config::RunConfig;
use picknet::harness::{
    self, evaluate_split, greedy_episodes, pick_statistics, CostModelEntry, Dataset, EvalOptions, PickPolicy, Split,
    SyntheticConfig,
};
use picknet::metrics::{CaptionSet, CiderVariant};
use picknet::picknet::EpisodeRecord;
use picknet::stream::stream_caption;
use picknet::text::tokenize;
use picknet::training::run_pipeline;

fn err(e: picknet::Error) -> PyErr {
    match e {
        picknet::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        picknet::Error::NonFinite { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse<T: std::str::FromStr<Err = picknet::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// A dataset loaded from a manifest (or a directory holding one).
#[pyclass(name = "Dataset", module = "pypicknet", frozen)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: Dataset::load(&path).map_err(err)?,
        })
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim
    }

    fn __len__(&self) -> usize {
        self.inner.videos.len()
    }

    /// Video ids, optionally restricted to one split.
    #[pyo3(signature = (split=None))]
    fn ids(&self, split: Option<&str>) -> PyResult<Vec<String>> {
        let videos = match split {
            Some(s) => self.inner.split(parse(s)?),
            None => self.inner.videos.iter().collect(),
        };
        Ok(videos.iter().map(|v| v.id().to_owned()).collect())
    }

    fn features(&self, video: &str) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.video(video)?.features.clone())
    }

    fn captions(&self, video: &str) -> PyResult<Vec<String>> {
        Ok(self.video(video)?.record.captions.clone())
    }

    fn __repr__(&self) -> String {
        format!("Dataset(videos={}, feature_dim={})", self.inner.videos.len(), self.inner.feature_dim)
    }
}

impl PyDataset {
    fn video(&self, id: &str) -> PyResult<&harness::Video> {
        self.inner.video(id).ok_or_else(|| PyKeyError::new_err(id.to_owned()))
    }
}

/// Trained captioner, optional pick policy and vocabulary.
#[pyclass(name = "Checkpoint", module = "pypicknet", frozen)]
struct PyCheckpoint {
    inner: Checkpoint,
}

#[pymethods]
impl PyCheckpoint {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: Checkpoint::load(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    #[getter]
    fn stage(&self) -> &'static str {
        self.inner.stage.name()
    }

    #[getter]
    fn has_picknet(&self) -> bool {
        self.inner.picknet.is_some()
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.inner.vocab.len()
    }

    /// Greedy PickNet picks for every video of a split.
    #[pyo3(signature = (dataset, split="test"))]
    fn pick(&self, dataset: &PyDataset, split: &str) -> PyResult<Vec<(String, Vec<usize>)>> {
        let picknet = self.inner.require_picknet().map_err(err)?;
        let records = greedy_episodes(&dataset.inner.split(parse(split)?), picknet).map_err(err)?;
        Ok(records.into_iter().map(|r| (r.video, r.picks)).collect())
    }

    /// Caption decoded from the given frames of a video (all frames by default).
    #[pyo3(signature = (dataset, video, picks=None))]
    fn caption(&self, dataset: &PyDataset, video: &str, picks: Option<Vec<usize>>) -> PyResult<String> {
        let v = dataset.video(video)?;
        let picks = picks.unwrap_or_else(|| (0..v.n_frames()).collect());
        if let Some(&bad) = picks.iter().find(|&&p| p >= v.n_frames()) {
            return Err(PyValueError::new_err(format!("frame {bad} out of range for {video}")));
        }
        let words = harness::caption_words(v, &picks, &self.inner.seq2seq, &self.inner.vocab).map_err(err)?;
        Ok(words.join(" "))
    }

    /// Metric report for one pick policy over a split, as a dict.
    #[pyo3(signature = (dataset, policy, split="test", kmeans_k=None, seed=None, per_video=false))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        dataset: &PyDataset,
        policy: &str,
        split: &str,
        kmeans_k: Option<usize>,
        seed: Option<u64>,
        per_video: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let opts = EvalOptions {
            kmeans_k,
            seed: seed.unwrap_or(self.inner.seed),
            per_video,
            ..EvalOptions::new(parse::<PickPolicy>(policy)?)
        };
        let report = evaluate_split(
            &dataset.inner,
            parse::<Split>(split)?,
            &self.inner.seq2seq,
            &self.inner.vocab,
            self.inner.picknet.as_ref(),
            &opts,
        )
        .map_err(err)?;
        json_to_py(py, &report)
    }

    /// Replays a video frame by frame; one event dict per frame.
    #[pyo3(signature = (dataset, video, fps=1.0))]
    fn stream<'py>(&self, py: Python<'py>, dataset: &PyDataset, video: &str, fps: f64) -> PyResult<Bound<'py, PyAny>> {
        let v = dataset.video(video)?;
        let picknet = self.inner.require_picknet().map_err(err)?;
        let events =
            stream_caption(&v.glances, &v.features, picknet, &self.inner.seq2seq, &self.inner.vocab, fps).map_err(err)?;
        json_to_py(py, &events)
    }

    fn __repr__(&self) -> String {
        format!(
            "Checkpoint(stage={:?}, vocab_size={}, picknet={})",
            self.inner.stage.name(),
            self.inner.vocab.len(),
            self.inner.picknet.is_some()
        )
    }
}

/// Writes a synthetic dataset under `out` and returns the number of videos.
#[pyfunction]
#[pyo3(signature = (out, seed=0, n_train=200, n_validation=30, n_test=50, feature_dim=64, n_frames=30))]
fn generate_synthetic(
    out: PathBuf,
    seed: u64,
    n_train: usize,
    n_validation: usize,
    n_test: usize,
    feature_dim: usize,
    n_frames: usize,
) -> PyResult<usize> {
    let cfg = SyntheticConfig {
        n_train,
        n_validation,
        n_test,
        feature_dim,
        n_frames,
        ..SyntheticConfig::new(seed)
    };
    let ds = harness::generate_synthetic(&cfg).map_err(err)?;
    std::fs::create_dir_all(&out).map_err(|e| PyIOError::new_err(format!("{}: {e}", out.display())))?;
    ds.save(&out).map_err(err)?;
    Ok(ds.videos.len())
}

/// Runs all three stages and writes `supervision.pknc`, `reinforce.pknc`
/// and `adapt.pknc` under `out`. `config` is a run config as JSON text.
/// Returns the per-stage epoch logs.
#[pyfunction]
#[pyo3(signature = (dataset, out, config=None))]
fn train<'py>(py: Python<'py>, dataset: &PyDataset, out: PathBuf, config: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = match config {
        Some(text) => RunConfig::from_json(text).map_err(err)?,
        None => RunConfig::default(),
    };
    cfg.validate().map_err(err)?;
    let result = py.detach(|| run_pipeline(&dataset.inner, &cfg.model, &cfg.train_config(), false)).map_err(err)?;
    std::fs::create_dir_all(&out).map_err(|e| PyIOError::new_err(format!("{}: {e}", out.display())))?;
    let stages = [
        (picknet::training::Stage::Supervision, result.supervised.clone(), None),
        (picknet::training::Stage::Reinforcement, result.supervised, Some(result.reinforced)),
        (picknet::training::Stage::Adaptation, result.adapted_seq2seq, Some(result.adapted_picknet)),
    ];
    for (stage, seq2seq, picknet) in stages {
        let has_policy = picknet.is_some();
        Checkpoint {
            stage,
            seq2seq,
            picknet,
            vocab: result.vocab.clone(),
            reward: has_policy.then(|| result.reward.clone()),
            seed: cfg.seed,
        }
        .save(&out.join(format!("{}.pknc", stage.name())))
        .map_err(err)?;
    }
    let logs: Vec<(&str, &picknet::training::TrainStats)> = result.stats.iter().map(|(s, t)| (s.name(), t)).collect();
    json_to_py(py, &logs)
}

/// BLEU-4, ROUGE-L and CIDEr of candidate captions against reference sets.
#[pyfunction]
fn score_captions<'py>(
    py: Python<'py>,
    candidates: Vec<String>,
    references: Vec<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cands: Vec<Vec<String>> = candidates.iter().map(|c| tokenize(c)).collect();
    let refs: Vec<CaptionSet<String>> = references
        .iter()
        .enumerate()
        .map(|(i, r)| CaptionSet::new(i.to_string(), r.iter().map(|c| tokenize(c)).collect()))
        .collect();
    let scores = harness::score_captions(&cands, &refs, CiderVariant::Plain).map_err(err)?;
    json_to_py(py, &scores)
}

/// Relative running times for a preset name or a list of entry dicts.
#[pyfunction]
#[pyo3(signature = (preset=None, entries=None, baseline_frames=6.0))]
fn estimate_time<'py>(
    py: Python<'py>,
    preset: Option<&str>,
    entries: Option<Vec<(String, f64, f64, f64)>>,
    baseline_frames: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let (entries, base) = match (preset, entries) {
        (Some(name), None) => {
            let t = harness::preset(name).map_err(err)?;
            (t.entries, t.baseline_frames)
        }
        (None, Some(rows)) => (
            rows.into_iter()
                .map(|(method, appearance, motion, frames)| CostModelEntry {
                    method,
                    appearance,
                    motion,
                    frames,
                    listed: None,
                })
                .collect(),
            baseline_frames,
        ),
        _ => return Err(PyValueError::new_err("pass exactly one of preset or entries")),
    };
    json_to_py(py, &harness::estimate_time(&entries, base).map_err(err)?)
}

/// `kind,value,count` CSV of pick counts and positions.
#[pyfunction]
fn pick_statistics_csv(traces: Vec<(String, Vec<usize>, usize)>) -> PyResult<String> {
    let records: Vec<EpisodeRecord> = traces
        .into_iter()
        .map(|(video, picks, n)| EpisodeRecord { video, picks, n })
        .collect();
    Ok(pick_statistics(&records).map_err(err)?.to_csv())
}

#[pymodule]
fn pypicknet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyCheckpoint>()?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(score_captions, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_time, m)?)?;
    m.add_function(wrap_pyfunction!(pick_statistics_csv, m)?)?;
    m.add("RUN_CONFIG_SCHEMA", picknet::config::RUN_CONFIG_SCHEMA)?;
    Ok(())
}
