//! Corpus summaries: per-split sizes and the category usage histogram.
//! The text rendering is what the CLI prints after a build; the JSON
//! form goes into run manifests.

use super::corpus::{CorpusManifest, GenError, Split};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub n_videos: usize,
    pub n_transitions: usize,
    pub total_duration_s: f64,
    pub mean_transitions_per_video: f64,
    /// Uses per category id, dense over the registry.
    pub histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub category_names: Vec<String>,
    pub train: SplitStats,
    pub val: SplitStats,
}

fn split_stats(manifest: &CorpusManifest, split: Split) -> SplitStats {
    let records = manifest.split_records(split);
    let mut histogram = vec![0usize; manifest.category_count];
    let mut n_transitions = 0usize;
    let mut total_duration_s = 0.0f64;
    for r in &records {
        total_duration_s += r.duration_s;
        for a in &r.annotations {
            histogram[a.label] += 1;
            n_transitions += 1;
        }
    }
    let n_videos = records.len();
    SplitStats {
        n_videos,
        n_transitions,
        total_duration_s,
        mean_transitions_per_video: if n_videos == 0 {
            0.0
        } else {
            n_transitions as f64 / n_videos as f64
        },
        histogram,
    }
}

pub fn corpus_stats(manifest: &CorpusManifest) -> Result<StatsReport, GenError> {
    if manifest.records.is_empty() {
        return Err(GenError::EmptyCorpus);
    }
    Ok(StatsReport {
        category_names: manifest.category_names.clone(),
        train: split_stats(manifest, Split::Train),
        val: split_stats(manifest, Split::Val),
    })
}

impl StatsReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, s) in [("train", &self.train), ("val", &self.val)] {
            out.push_str(&format!(
                "{name}: {} videos, {} transitions ({:.2}/video), {:.1}s footage\n",
                s.n_videos, s.n_transitions, s.mean_transitions_per_video, s.total_duration_s
            ));
        }
        out.push_str("category usage (train+val):\n");
        let width = self
            .category_names
            .iter()
            .map(|n| n.len())
            .max()
            .unwrap_or(0);
        for (id, name) in self.category_names.iter().enumerate() {
            let total = self.train.histogram[id] + self.val.histogram[id];
            out.push_str(&format!(
                "  {name:<width$}  {total:>5}  (train {}, val {})\n",
                self.train.histogram[id], self.val.histogram[id]
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}
