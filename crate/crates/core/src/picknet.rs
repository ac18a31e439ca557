//! Glance-and-compare frame pick policy and the episode runner.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glance::{Glance, GLANCE_LEN};
use crate::numerics::{affine, softmax_stable, Param, ParamSet, Rng, Tensor};

/// Logit index of the pick action; index 1 is drop.
pub const PICK: usize = 0;
pub const DROP: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Pick,
    Drop,
}

impl Choice {
    pub fn index(self) -> usize {
        match self {
            Choice::Pick => PICK,
            Choice::Drop => DROP,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeMode {
    Stochastic,
    Greedy,
}

/// Two-layer policy `s = W2 relu(W1 d + b1) + b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PickNetParams {
    pub w1: Param,
    pub b1: Param,
    pub w2: Param,
    pub b2: Param,
}

impl PickNetParams {
    /// Policy over 56x56 glance differences.
    pub fn new(hidden: usize, rng: &mut Rng) -> Self {
        Self::with_input(GLANCE_LEN, hidden, rng)
    }

    pub fn with_input(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        Self {
            w1: Param::new("picknet.w1", Tensor::glorot(hidden, input, rng)),
            b1: Param::new("picknet.b1", Tensor::zeros(hidden, 1)),
            w2: Param::new("picknet.w2", Tensor::glorot(2, hidden, rng)),
            b2: Param::new("picknet.b2", Tensor::zeros(2, 1)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.value.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.value.rows()
    }
}

impl ParamSet for PickNetParams {
    fn params(&self) -> Vec<&Param> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    pub logits: [f64; 2],
    pub probs: [f64; 2],
    /// Post-ReLU hidden activations.
    pub hidden: Vec<f64>,
}

pub fn pick_policy(d: &[f64], params: &PickNetParams) -> Result<PolicyOutput> {
    if d.len() != params.input_dim() {
        return Err(Error::shape("picknet input", params.input_dim(), d.len()));
    }
    let hidden: Vec<f64> = affine(&params.w1.value, d, params.b1.value.as_slice())?
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    let s = affine(&params.w2.value, &hidden, params.b2.value.as_slice())?;
    let p = softmax_stable(&s)?;
    Ok(PolicyOutput {
        logits: [s[0], s[1]],
        probs: [p[0], p[1]],
        hidden,
    })
}

/// Accumulates `ds^T ds/dtheta` for one policy evaluation.
fn policy_backward(d: &[f64], out: &PolicyOutput, ds: [f64; 2], params: &mut PickNetParams) {
    params.w2.grad.outer_acc(&ds, &out.hidden, 1.0);
    params.b2.grad.add_scaled(&ds, 1.0);
    let mut dh = vec![0.0; out.hidden.len()];
    params.w2.value.matvec_t_acc(&ds, &mut dh);
    for (g, h) in dh.iter_mut().zip(&out.hidden) {
        if *h <= 0.0 {
            *g = 0.0;
        }
    }
    params.w1.grad.outer_acc(&dh, d, 1.0);
    params.b1.grad.add_scaled(&dh, 1.0);
}

/// Adds `scale * d log p(choice | d) / d theta` to the gradients.
pub fn accumulate_log_prob_grad(d: &[f64], choice: Choice, scale: f64, params: &mut PickNetParams) -> Result<()> {
    let out = pick_policy(d, params)?;
    let mut ds = [-scale * out.probs[0], -scale * out.probs[1]];
    ds[choice.index()] += scale;
    policy_backward(d, &out, ds, params);
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PickAction {
    pub choice: Choice,
    /// Probability of the taken action (1 for the forced first pick).
    pub prob: f64,
    pub logits: [f64; 2],
    pub probs: [f64; 2],
    pub forced: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub mode: EpisodeMode,
    pub actions: Vec<PickAction>,
    /// Picked frame indices, 0-based and strictly increasing.
    pub picks: Vec<usize>,
    /// Index of the template frame that step `t` was compared against.
    pub templates: Vec<usize>,
    hidden: Vec<Vec<f64>>,
}

impl EpisodeTrace {
    pub fn n_frames(&self) -> usize {
        self.actions.len()
    }

    pub fn n_picked(&self) -> usize {
        self.picks.len()
    }

    /// `sum_t log p(a_t)` over non-forced steps.
    pub fn log_prob(&self) -> f64 {
        self.actions.iter().filter(|a| !a.forced).map(|a| a.prob.ln()).sum()
    }

    pub fn record(&self, video: impl Into<String>) -> EpisodeRecord {
        EpisodeRecord {
            video: video.into(),
            picks: self.picks.clone(),
            n: self.n_frames(),
        }
    }
}

/// Runs the policy over a video's glances. The first frame is always picked
/// and becomes the template; later frames are compared to the latest pick.
pub fn run_episode(glances: &[Glance], params: &PickNetParams, mode: EpisodeMode, rng: &mut Rng) -> Result<EpisodeTrace> {
    let frames: Vec<&[f64]> = glances.iter().map(|g| g.pixels()).collect();
    run_episode_raw(&frames, params, mode, rng)
}

/// `run_episode` over arbitrary equal-length frame vectors.
pub fn run_episode_raw(frames: &[&[f64]], params: &PickNetParams, mode: EpisodeMode, rng: &mut Rng) -> Result<EpisodeTrace> {
    if frames.is_empty() {
        return Err(Error::Usage("episode needs at least one frame".into()));
    }
    let mut trace = EpisodeTrace {
        mode,
        actions: Vec::with_capacity(frames.len()),
        picks: vec![0],
        templates: vec![0],
        hidden: vec![Vec::new()],
    };
    trace.actions.push(PickAction {
        choice: Choice::Pick,
        prob: 1.0,
        logits: [0.0, 0.0],
        probs: [1.0, 0.0],
        forced: true,
    });
    let mut template = 0;
    for (t, frame) in frames.iter().enumerate().skip(1) {
        let d = diff(frame, frames[template])?;
        let out = pick_policy(&d, params)?;
        let pick = match mode {
            EpisodeMode::Greedy => out.probs[PICK] >= out.probs[DROP],
            EpisodeMode::Stochastic => rng.uniform() < out.probs[PICK],
        };
        let choice = if pick { Choice::Pick } else { Choice::Drop };
        trace.templates.push(template);
        trace.actions.push(PickAction {
            choice,
            prob: out.probs[choice.index()],
            logits: out.logits,
            probs: out.probs,
            forced: false,
        });
        trace.hidden.push(out.hidden);
        if pick {
            trace.picks.push(t);
            template = t;
        }
    }
    Ok(trace)
}

fn diff(current: &[f64], template: &[f64]) -> Result<Vec<f64>> {
    if current.len() != template.len() {
        return Err(Error::shape("episode frame", template.len(), current.len()));
    }
    Ok(current.iter().zip(template).map(|(a, b)| a - b).collect())
}

/// Accumulates `advantage * sum_t (p_t - onehot(a_t)) ds_t/dtheta` over the
/// non-forced steps. A gradient-descent step on this increases the
/// log-probability of the taken actions when the advantage is positive.
/// Zero advantage leaves the gradients untouched.
pub fn accumulate_reinforce_grad(
    frames: &[&[f64]],
    trace: &EpisodeTrace,
    advantage: f64,
    params: &mut PickNetParams,
) -> Result<()> {
    if frames.len() != trace.n_frames() {
        return Err(Error::shape("episode frames", trace.n_frames(), frames.len()));
    }
    if advantage == 0.0 {
        return Ok(());
    }
    for (t, action) in trace.actions.iter().enumerate() {
        if action.forced {
            continue;
        }
        let d = diff(frames[t], frames[trace.templates[t]])?;
        let out = PolicyOutput {
            logits: action.logits,
            probs: action.probs,
            hidden: trace.hidden[t].clone(),
        };
        let mut ds = [advantage * action.probs[0], advantage * action.probs[1]];
        ds[action.choice.index()] -= advantage;
        policy_backward(&d, &out, ds, params);
    }
    Ok(())
}

/// One line of an episode NDJSON file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeRecord {
    pub video: String,
    pub picks: Vec<usize>,
    pub n: usize,
}

impl EpisodeRecord {
    pub fn validate(&self) -> Result<()> {
        if self.picks.first() != Some(&0) {
            return Err(Error::Usage(format!("episode for {} does not start with the forced pick", self.video)));
        }
        if self.picks.windows(2).any(|w| w[0] >= w[1]) || self.picks.last().is_some_and(|&p| p >= self.n) {
            return Err(Error::Usage(format!("episode for {} has invalid pick indices", self.video)));
        }
        Ok(())
    }
}

pub fn write_episodes(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_episodes(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut offset = 0u64;
    for line in std::io::BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let len = line.len() as u64 + 1;
        if !line.trim().is_empty() {
            let r: EpisodeRecord =
                serde_json::from_str(&line).map_err(|e| Error::format(path, offset, e.to_string()))?;
            r.validate().map_err(|e| Error::format(path, offset, e.to_string()))?;
            records.push(r);
        }
        offset += len;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;

    fn zero(input: usize, hidden: usize) -> PickNetParams {
        let mut p = PickNetParams::with_input(input, hidden, &mut Rng::new(0));
        for q in p.params_mut() {
            q.value.fill(0.0);
        }
        p
    }

    fn frames(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = Rng::new(seed);
        (0..n).map(|_| (0..dim).map(|_| rng.uniform()).collect()).collect()
    }

    #[test]
    fn zero_params_are_symmetric() {
        let out = pick_policy(&[0.3; 6], &zero(6, 4)).unwrap();
        assert_eq!(out.probs, [0.5, 0.5]);
    }

    #[test]
    fn bias_saturation() {
        let mut p = zero(6, 4);
        p.b2.value.set(0, 0, 10.0);
        p.b2.value.set(1, 0, -10.0);
        assert!(pick_policy(&[0.1; 6], &p).unwrap().probs[PICK] > 1.0 - 1e-8);
        assert!(pick_policy(&[0.1; 5], &p).is_err());
    }

    #[test]
    fn first_frame_is_forced_pick() {
        let p = PickNetParams::with_input(5, 3, &mut Rng::new(1));
        let f = frames(2, 7, 5);
        let refs: Vec<&[f64]> = f.iter().map(|v| v.as_slice()).collect();
        for mode in [EpisodeMode::Greedy, EpisodeMode::Stochastic] {
            let t = run_episode_raw(&refs, &p, mode, &mut Rng::new(3)).unwrap();
            assert_eq!(t.picks[0], 0);
            assert!(t.actions[0].forced && t.actions[0].choice == Choice::Pick);
            assert!(t.actions[1..].iter().all(|a| !a.forced));
            assert!(t.picks.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(run_episode_raw(&[], &p, EpisodeMode::Greedy, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn drop_favoring_greedy_picks_only_first() {
        let mut p = zero(5, 3);
        p.b2.value.set(0, 0, -10.0);
        p.b2.value.set(1, 0, 10.0);
        let f = frames(4, 9, 5);
        let refs: Vec<&[f64]> = f.iter().map(|v| v.as_slice()).collect();
        let t = run_episode_raw(&refs, &p, EpisodeMode::Greedy, &mut Rng::new(0)).unwrap();
        assert_eq!(t.picks, vec![0]);
    }

    #[test]
    fn greedy_is_rng_free_and_stochastic_is_seeded() {
        let p = PickNetParams::with_input(5, 6, &mut Rng::new(8));
        let f = frames(5, 12, 5);
        let refs: Vec<&[f64]> = f.iter().map(|v| v.as_slice()).collect();
        let a = run_episode_raw(&refs, &p, EpisodeMode::Greedy, &mut Rng::new(1)).unwrap();
        let mut rng = Rng::new(2);
        let b = run_episode_raw(&refs, &p, EpisodeMode::Greedy, &mut rng).unwrap();
        assert_eq!(a, b);
        assert_eq!(rng.position(), Rng::new(2).position());
        let s1 = run_episode_raw(&refs, &p, EpisodeMode::Stochastic, &mut Rng::new(9)).unwrap();
        let s2 = run_episode_raw(&refs, &p, EpisodeMode::Stochastic, &mut Rng::new(9)).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn template_follows_latest_pick() {
        let mut p = zero(2, 2);
        // pick whenever the first coordinate moved by more than 0.5
        p.w1.value.set(0, 0, 1.0);
        p.w1.value.set(1, 0, -1.0);
        p.b1.value.fill(-0.5);
        p.w2.value.set(0, 0, 40.0);
        p.w2.value.set(0, 1, 40.0);
        p.b2.value.set(1, 0, 1.0);
        let xs = [0.0, 0.3, 0.6, 0.9, 1.2, 1.5];
        let f: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, 0.0]).collect();
        let refs: Vec<&[f64]> = f.iter().map(|v| v.as_slice()).collect();
        let t = run_episode_raw(&refs, &p, EpisodeMode::Greedy, &mut Rng::new(0)).unwrap();
        assert_eq!(t.picks, vec![0, 2, 4]);
        assert_eq!(t.templates, vec![0, 0, 0, 2, 2, 4]);
    }

    #[test]
    fn symmetric_policy_pick_rate() {
        let p = zero(3, 2);
        let f = frames(6, 11, 3);
        let refs: Vec<&[f64]> = f.iter().map(|v| v.as_slice()).collect();
        let mut rng = Rng::new(7);
        let (mut picked, mut total) = (0usize, 0usize);
        for _ in 0..10_000 {
            let t = run_episode_raw(&refs, &p, EpisodeMode::Stochastic, &mut rng).unwrap();
            picked += t.n_picked() - 1;
            total += 10;
        }
        let rate = picked as f64 / total as f64;
        assert!((0.49..=0.51).contains(&rate), "{rate}");
    }

    #[test]
    fn log_prob_gradient_matches_finite_differences() {
        for seed in 0..20u64 {
            let mut rng = Rng::new(seed);
            let (input, hidden) = (1 + rng.below(8), 1 + rng.below(8));
            let mut p = PickNetParams::with_input(input, hidden, &mut rng);
            for q in p.params_mut() {
                for v in q.value.as_mut_slice() {
                    *v += 0.5 * rng.normal();
                }
            }
            let d: Vec<f64> = (0..input).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            let choice = if rng.bernoulli(0.5) { Choice::Pick } else { Choice::Drop };
            accumulate_log_prob_grad(&d, choice, 1.0, &mut p).unwrap();
            let r = grad_check(&mut p, |q| pick_policy(&d, q).unwrap().probs[choice.index()].ln(), 1e-6).unwrap();
            assert!(r.max_rel_error < 1e-4, "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn reinforce_grad_is_advantage_times_negative_log_prob_grad() {
        let mut p = PickNetParams::with_input(4, 5, &mut Rng::new(3));
        let f = frames(4, 8, 4);
        let refs: Vec<&[f64]> = f.iter().map(|v| v.as_slice()).collect();
        let t = run_episode_raw(&refs, &p, EpisodeMode::Stochastic, &mut Rng::new(5)).unwrap();
        accumulate_reinforce_grad(&refs, &t, 0.7, &mut p).unwrap();
        let eval = |q: &PickNetParams| {
            let mut lp = 0.0;
            for (i, a) in t.actions.iter().enumerate().skip(1) {
                let d = diff(refs[i], refs[t.templates[i]]).unwrap();
                lp += pick_policy(&d, q).unwrap().probs[a.choice.index()].ln();
            }
            -0.7 * lp
        };
        let r = grad_check(&mut p, eval, 1e-6).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn zero_advantage_leaves_gradients_untouched() {
        let mut p = PickNetParams::with_input(4, 5, &mut Rng::new(3));
        let f = frames(4, 8, 4);
        let refs: Vec<&[f64]> = f.iter().map(|v| v.as_slice()).collect();
        let t = run_episode_raw(&refs, &p, EpisodeMode::Stochastic, &mut Rng::new(5)).unwrap();
        accumulate_reinforce_grad(&refs, &t, 0.0, &mut p).unwrap();
        assert!(p.params().iter().all(|q| q.grad.as_slice().iter().all(|g| g.to_bits() == 0)));
    }

    #[test]
    fn episode_ndjson_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ep.ndjson");
        let recs = vec![
            EpisodeRecord {
                video: "v0".into(),
                picks: vec![0, 4, 9],
                n: 30,
            },
            EpisodeRecord {
                video: "v1".into(),
                picks: vec![0],
                n: 30,
            },
        ];
        write_episodes(&path, &recs).unwrap();
        assert_eq!(read_episodes(&path).unwrap(), recs);
        std::fs::write(&path, "{\"video\":\"x\",\"picks\":[1],\"n\":3}\n").unwrap();
        assert!(matches!(read_episodes(&path), Err(Error::Format { .. })));
    }
}
