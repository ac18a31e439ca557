//! Synthetic data, dataset files, baseline pick policies, the running-time
//! cost model, pick statistics and split evaluation.

mod baselines;
mod cost;
mod dataset;
mod eval;
mod stats;
mod synthetic;

pub use baselines::{kmeans_pick, random_pick};
pub use cost::{estimate_time, msrvtt_preset, msvd_preset, preset, CostModelEntry, CostTable, TimeEstimate};
pub use dataset::{
    f32_round, read_feature_file, write_feature_file, Dataset, DatasetManifest, SceneSegment, Split, Video, VideoRecord,
    MANIFEST_FILE, MANIFEST_VERSION,
};
pub use eval::{
    caption_words, evaluate_oracle, evaluate_split, greedy_episodes, mean_greedy_picks, score_captions, EvalOptions,
    EvalReport, PickPolicy, Scores, VideoResult,
};
pub use stats::{pick_statistics, PickHistogram};
pub use synthetic::{
    generate_synthetic, oracle_caption, reference_captions, scene_glance, scene_sequence, SyntheticConfig, N_SCENES,
    OBJECTS, SUBJECTS, VERBS,
};
