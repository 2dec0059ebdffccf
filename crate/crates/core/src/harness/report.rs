use serde::{Deserialize, Serialize};

use crate::hmappo::EpisodeMetrics;

/// Decile statistics of one reward curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveTrend {
    pub first_decile: f64,
    pub final_decile: f64,
    /// Range of the trailing moving average over the final decile, relative
    /// to the final-decile mean.
    pub final_band: f64,
}

impl CurveTrend {
    pub fn improved(&self) -> bool {
        self.final_decile > self.first_decile
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub high: CurveTrend,
    pub low: CurveTrend,
}

/// Trailing moving average with window `w`; entry `i` averages
/// `values[i + 1 - w ..= i]` and exists for `i >= w - 1`.
pub fn moving_average(values: &[f64], w: usize) -> Vec<f64> {
    if w == 0 || values.len() < w {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(values.len() + 1 - w);
    let mut sum: f64 = values[..w].iter().sum();
    out.push(sum / w as f64);
    for i in w..values.len() {
        sum += values[i] - values[i - w];
        out.push(sum / w as f64);
    }
    out
}

/// Needs at least ten points; the decile length is `len / 10`.
pub fn curve_trend(values: &[f64]) -> Option<CurveTrend> {
    let w = values.len() / 10;
    if w == 0 {
        return None;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let first = mean(&values[..w]);
    let last = mean(&values[values.len() - w..]);
    let ma = moving_average(values, w);
    let tail = &ma[ma.len() - w..];
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    Some(CurveTrend {
        first_decile: first,
        final_decile: last,
        final_band: (hi - lo) / last.abs(),
    })
}

pub fn convergence(history: &[EpisodeMetrics]) -> Option<Convergence> {
    let high: Vec<f64> = history.iter().map(|m| m.high_reward_avg).collect();
    let low: Vec<f64> = history.iter().map(|m| m.low_reward_avg).collect();
    Some(Convergence {
        high: curve_trend(&high)?,
        low: curve_trend(&low)?,
    })
}
