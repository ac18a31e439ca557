use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::picknet::EpisodeRecord;

/// Distributions of how many frames were picked and where.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PickHistogram {
    pub videos: usize,
    /// `count_hist[k]` = number of videos with exactly `k` picks.
    pub count_hist: Vec<usize>,
    /// `position_hist[i]` = number of picks at 0-based frame `i`.
    pub position_hist: Vec<usize>,
    pub mean_n_p: f64,
}

pub fn pick_statistics(records: &[EpisodeRecord]) -> Result<PickHistogram> {
    if records.is_empty() {
        return Err(Error::Usage("no episodes to summarize".into()));
    }
    let max_n = records.iter().map(|r| r.n).max().unwrap_or(0);
    let mut count_hist = vec![0; max_n + 1];
    let mut position_hist = vec![0; max_n];
    let mut total = 0usize;
    for r in records {
        r.validate()?;
        count_hist[r.picks.len()] += 1;
        for &p in &r.picks {
            position_hist[p] += 1;
        }
        total += r.picks.len();
    }
    Ok(PickHistogram {
        videos: records.len(),
        count_hist,
        position_hist,
        mean_n_p: total as f64 / records.len() as f64,
    })
}

impl PickHistogram {
    /// `kind,value,count` rows; positions are reported 1-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,value,count\n");
        for (k, c) in self.count_hist.iter().enumerate().skip(1) {
            out.push_str(&format!("n_picked,{k},{c}\n"));
        }
        for (i, c) in self.position_hist.iter().enumerate() {
            out.push_str(&format!("position,{},{c}\n", i + 1));
        }
        out
    }
}
