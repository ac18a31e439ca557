use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModelEntry {
    pub method: String,
    /// Relative cost of the appearance CNN.
    pub appearance: f64,
    /// 2 when motion features are extracted, else 1.
    pub motion: f64,
    /// Expected number of frames processed.
    pub frames: f64,
    /// Published multiplier, if any, for comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub listed: Option<f64>,
}

impl CostModelEntry {
    pub fn new(method: &str, appearance: f64, motion: f64, frames: f64, listed: f64) -> Self {
        Self {
            method: method.into(),
            appearance,
            motion,
            frames,
            listed: Some(listed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostTable {
    pub baseline_frames: f64,
    pub entries: Vec<CostModelEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeEstimate {
    pub method: String,
    pub relative: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub listed: Option<f64>,
}

/// `appearance * motion * frames / baseline_frames`, rounded to one decimal.
pub fn estimate_time(entries: &[CostModelEntry], baseline_frames: f64) -> Result<Vec<TimeEstimate>> {
    if !(baseline_frames >= 1.0) {
        return Err(Error::Usage(format!("baseline frame count {baseline_frames} below 1")));
    }
    entries
        .iter()
        .map(|e| {
            if !(e.appearance > 0.0 && e.frames > 0.0) || !(e.motion == 1.0 || e.motion == 2.0) {
                return Err(Error::Config(format!("invalid cost entry for {}", e.method)));
            }
            let raw = e.appearance * e.motion * e.frames / baseline_frames;
            Ok(TimeEstimate {
                method: e.method.clone(),
                relative: (raw * 10.0).round() / 10.0,
                listed: e.listed,
            })
        })
        .collect()
}

/// Cost rows for the short-clip benchmark, 6 picked frames as the unit.
pub fn msvd_preset() -> CostTable {
    CostTable {
        baseline_frames: 6.0,
        entries: vec![
            CostModelEntry::new("TA", 0.5, 2.0, 26.0, 4.0),
            CostModelEntry::new("S2VT", 0.5, 2.0, 80.0, 13.0),
            CostModelEntry::new("LSTM-E", 0.5, 2.0, 30.0, 5.0),
            CostModelEntry::new("p-RNN", 0.5, 2.0, 30.0, 5.0),
            CostModelEntry::new("HRNE", 0.5, 2.0, 200.0, 33.0),
            CostModelEntry::new("BA", 0.5, 2.0, 72.0, 12.0),
            CostModelEntry::new("Baseline", 1.0, 1.0, 30.0, 5.0),
            CostModelEntry::new("Random", 1.0, 1.0, 15.0, 2.5),
            CostModelEntry::new("k-means", 1.0, 1.0, 6.0, 1.0),
            CostModelEntry::new("PickNet", 1.0, 1.0, 6.0, 1.0),
        ],
    }
}

/// Cost rows for the web-video benchmark, 8 picked frames as the unit.
pub fn msrvtt_preset() -> CostTable {
    CostTable {
        baseline_frames: 8.0,
        entries: vec![
            CostModelEntry::new("ruc-uva", 0.5, 2.0, 36.0, 4.5),
            CostModelEntry::new("Aalto", 0.5, 2.0, 36.0, 4.5),
            CostModelEntry::new("DenseCap", 0.5, 2.0, 30.0, 3.5),
            CostModelEntry::new("MS-RNN", 1.0, 2.0, 40.0, 10.0),
            CostModelEntry::new("Baseline", 1.0, 1.0, 30.0, 3.8),
            CostModelEntry::new("Random", 1.0, 1.0, 15.0, 1.9),
            CostModelEntry::new("k-means", 1.0, 1.0, 8.0, 1.0),
            CostModelEntry::new("PickNet", 1.0, 1.0, 8.0, 1.0),
        ],
    }
}

pub fn preset(name: &str) -> Result<CostTable> {
    match name.to_ascii_lowercase().as_str() {
        "msvd" => Ok(msvd_preset()),
        "msr-vtt" | "msrvtt" => Ok(msrvtt_preset()),
        other => Err(Error::Usage(format!("unknown cost preset {other:?} (expected msvd or msr-vtt)"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_rows() {
        let t = estimate_time(&msvd_preset().entries, 6.0).unwrap();
        let get = |m: &str| t.iter().find(|e| e.method == m).unwrap().relative;
        assert_eq!(get("TA"), 4.3);
        assert_eq!(get("S2VT"), 13.3);
        assert_eq!(get("PickNet"), 1.0);
    }

    #[test]
    fn presets_within_half_of_listed() {
        for table in [msvd_preset(), msrvtt_preset()] {
            for e in estimate_time(&table.entries, table.baseline_frames).unwrap() {
                assert!((e.relative - e.listed.unwrap()).abs() <= 0.5, "{e:?}");
            }
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(estimate_time(&[], 0.5).is_err());
        let bad = CostModelEntry::new("x", 1.0, 3.0, 6.0, 1.0);
        assert!(estimate_time(&[bad], 6.0).is_err());
        assert!(preset("kinetics").is_err());
    }
}
