//! Aggregation, long-horizon conditional success and report serialization.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::sim::Mode;
use crate::tasks::TaskType;

use super::dtw::DTW_SPACING;
use super::metrics::EpisodeResult;

/// Settings echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub mode: Mode,
    pub success_thresh: f64,
    pub oracle_stop_distance: f64,
    pub collision_thresh: f64,
    pub resolution: f64,
    pub agent_radius: f64,
    pub dtw_spacing: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Strict,
            success_thresh: 3.0,
            oracle_stop_distance: 1.5,
            collision_thresh: 0.10,
            resolution: crate::geometry::DEFAULT_RESOLUTION,
            agent_radius: 0.30,
            dtw_spacing: DTW_SPACING,
            agent: None,
        }
    }
}

/// Raw counts behind the long-horizon rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongHorizonSummary {
    pub n: usize,
    /// `reached[i]`: episodes that reached goal `i + 1`.
    pub reached: Vec<usize>,
    /// `eligible[i]`: episodes with at least `i + 1` goals that reached goal `i`,
    /// counting goals from 1 (for `i = 0`, all episodes). Denominator of `SR_{i+1}`.
    pub eligible: Vec<usize>,
    /// Episodes reaching all goals with a successful final stop.
    pub all_success: usize,
    /// `SR_n` in percent, `None` when the denominator is zero.
    #[serde(rename = "SR_n")]
    pub sr_n: Vec<Option<f64>>,
    #[serde(rename = "SR_All")]
    pub sr_all: f64,
}

fn pct(x: f64) -> f64 {
    (x * 10000.0).round() / 100.0
}

/// Conditional success over long-horizon results.
pub fn score_long_horizon(results: &[&EpisodeResult]) -> LongHorizonSummary {
    let n = results.len();
    let k = results.iter().map(|r| r.per_goal_reached.len()).max().unwrap_or(0);
    let mut reached = vec![0; k];
    let mut eligible = vec![0; k];
    for r in results {
        let g = &r.per_goal_reached;
        for i in 0..g.len() {
            if i == 0 || g[i - 1] {
                eligible[i] += 1;
            }
            if g[i] {
                reached[i] += 1;
            }
        }
    }
    let all_success = results.iter().filter(|r| r.all_goals_success()).count();
    let sr_n = (0..k)
        .map(|i| {
            let denom = if i == 0 { n } else { eligible[i] };
            (denom > 0).then(|| pct(reached[i] as f64 / denom as f64))
        })
        .collect();
    LongHorizonSummary {
        n,
        reached,
        eligible,
        all_success,
        sr_n,
        sr_all: if n > 0 { pct(all_success as f64 / n as f64) } else { 0.0 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "TL")]
    pub tl: f64,
    #[serde(rename = "NE")]
    pub ne: f64,
    /// Percent, two decimals.
    #[serde(rename = "SR")]
    pub sr: f64,
    /// Percent, two decimals.
    #[serde(rename = "OSR")]
    pub osr: f64,
    #[serde(rename = "SPL")]
    pub spl: f64,
    #[serde(rename = "nDTW")]
    pub ndtw: f64,
    #[serde(rename = "CR")]
    pub cr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub long_horizon: Option<LongHorizonSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: ReportConfig,
    pub per_episode: Vec<EpisodeResult>,
    pub aggregates: Aggregates,
}

/// Means over `results`, sorted by episode id. `None` for an empty input.
pub fn aggregate(mut results: Vec<EpisodeResult>, config: ReportConfig) -> Option<MetricsReport> {
    if results.is_empty() {
        return None;
    }
    results.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));
    let n = results.len() as f64;
    let mean = |f: fn(&EpisodeResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    let lh: Vec<&EpisodeResult> = results
        .iter()
        .filter(|r| r.task_type == TaskType::LongHorizon)
        .collect();
    let aggregates = Aggregates {
        n: results.len(),
        tl: mean(|r| r.metrics.tl),
        ne: mean(|r| r.metrics.ne),
        sr: pct(mean(|r| r.metrics.sr)),
        osr: pct(mean(|r| r.metrics.osr)),
        spl: mean(|r| r.metrics.spl),
        ndtw: mean(|r| r.metrics.ndtw),
        cr: mean(|r| r.metrics.cr),
        long_horizon: (!lh.is_empty()).then(|| score_long_horizon(&lh)),
    };
    Some(MetricsReport {
        config,
        per_episode: results,
        aggregates,
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// One row per episode; `SR_n` columns appear when any episode has
    /// several goals.
    pub fn to_csv(&self) -> String {
        let k = self
            .per_episode
            .iter()
            .filter(|r| r.task_type == TaskType::LongHorizon)
            .map(|r| r.per_goal_reached.len())
            .max()
            .unwrap_or(0);
        let mut out = String::from("episode_id,TL,NE,SR,OSR,SPL,nDTW,CR");
        for i in 1..=k {
            let _ = write!(out, ",SR_{i}");
        }
        out.push('\n');
        for r in &self.per_episode {
            let m = &r.metrics;
            let _ = write!(
                out,
                "{},{:.6},{:.6},{},{},{:.6},{:.6},{:.6}",
                r.episode_id, m.tl, m.ne, m.sr as u8, m.osr as u8, m.spl, m.ndtw, m.cr
            );
            for i in 0..k {
                out.push(',');
                if r.task_type == TaskType::LongHorizon {
                    if let Some(g) = r.per_goal_reached.get(i) {
                        out.push(if *g { '1' } else { '0' });
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}
