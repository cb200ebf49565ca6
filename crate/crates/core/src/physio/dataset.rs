//! Sliding windows over simulated trajectories.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::system::Trajectory;
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Per-variable affine scaling `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    /// Column means and standard deviations over every row of every series.
    /// Near-constant columns keep scale 1.
    pub fn fit(series: &[&Trajectory]) -> Result<Self> {
        let w = series
            .first()
            .map(|t| t.width())
            .ok_or_else(|| Error::Data("no trajectories".into()))?;
        let mut n = 0usize;
        let mut sum = alloc::vec![0.0; w];
        let mut sq = alloc::vec![0.0; w];
        for t in series {
            if t.width() != w {
                return Err(Error::dim("normalizer", "trajectories differ in width"));
            }
            for i in 0..t.len() {
                for (j, &x) in t.row(i).iter().enumerate() {
                    sum[j] += x;
                }
            }
            n += t.len();
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        for t in series {
            for i in 0..t.len() {
                for (j, &x) in t.row(i).iter().enumerate() {
                    sq[j] += (x - mean[j]) * (x - mean[j]);
                }
            }
        }
        let scale = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = libm::sqrt(s / n as f64);
                if sd > 1e-9 * m.abs().max(1.0) { sd } else { 1.0 }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn identity(width: usize) -> Self {
        Self {
            mean: alloc::vec![0.0; width],
            scale: alloc::vec![1.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &mut [f64]) {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (*x - self.mean[j]) / self.scale[j];
        }
    }

    pub fn invert(&self, row: &mut [f64]) {
        for (j, x) in row.iter_mut().enumerate() {
            *x = *x * self.scale[j] + self.mean[j];
        }
    }

    pub fn apply_rows(&self, rows: &mut [f64]) {
        for row in rows.chunks_mut(self.width()) {
            self.apply(row);
        }
    }

    pub fn invert_rows(&self, rows: &mut [f64]) {
        for row in rows.chunks_mut(self.width()) {
            self.invert(row);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowRef {
    pub series: usize,
    pub start: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self {
            train: 3200,
            val: 800,
            test: 1000,
        }
    }
}

/// Windows of `tau` normalised rows, each paired with the following row as
/// target. Series are stored once; windows are offsets into them.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    pub tau: usize,
    pub width: usize,
    pub normalizer: Normalizer,
    series: Vec<Vec<f64>>,
    windows: Vec<WindowRef>,
    splits: Vec<Split>,
}

/// Default offset between consecutive window starts.
pub const DEFAULT_STRIDE: usize = 25;

impl TimeSeriesDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn windows(&self) -> &[WindowRef] {
        &self.windows
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    /// Window positions belonging to `split`, in shuffled order.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    /// Row-major `tau × width` input of window `i`.
    pub fn input(&self, i: usize) -> &[f64] {
        let w = self.windows[i];
        &self.series[w.series][w.start * self.width..(w.start + self.tau) * self.width]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        let w = self.windows[i];
        let at = (w.start + self.tau) * self.width;
        &self.series[w.series][at..at + self.width]
    }
}

/// Cuts `sizes.total()` windows of length `tau` (plus one target row) with
/// starts every `stride` rows, taking series in order, then shuffles them
/// with `seed` and assigns the first `train`, next `val`, last `test`.
/// The selected windows depend only on the data, `tau` and `stride`.
pub fn make_dataset(
    trajectories: &[Trajectory],
    tau: usize,
    sizes: SplitSizes,
    stride: usize,
    seed: u64,
) -> Result<TimeSeriesDataset> {
    if tau == 0 || stride == 0 {
        return Err(Error::Contract("window length and stride must be positive".into()));
    }
    let needed = sizes.total();
    let mut windows = Vec::with_capacity(needed);
    let mut available = 0;
    for (s, t) in trajectories.iter().enumerate() {
        if t.len() <= tau {
            continue;
        }
        let count = (t.len() - tau - 1) / stride + 1;
        available += count;
        for k in 0..count {
            if windows.len() < needed {
                windows.push(WindowRef { series: s, start: k * stride });
            }
        }
    }
    if available < needed {
        return Err(Error::Size { needed, available });
    }
    let refs: Vec<&Trajectory> = trajectories.iter().collect();
    let normalizer = Normalizer::fit(&refs)?;
    let width = normalizer.width();
    let used = windows.iter().map(|w| w.series).max().map_or(0, |m| m + 1);
    let series = trajectories[..used]
        .iter()
        .map(|t| {
            if t.width() != width {
                return Err(Error::dim("make_dataset", format!("width {} vs {width}", t.width())));
            }
            let mut v = t.values.clone();
            normalizer.apply_rows(&mut v);
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    windows.shuffle(&mut seeded(seed));
    let splits = windows
        .iter()
        .enumerate()
        .map(|(i, _)| {
            if i < sizes.train {
                Split::Train
            } else if i < sizes.train + sizes.val {
                Split::Val
            } else {
                Split::Test
            }
        })
        .collect();
    Ok(TimeSeriesDataset {
        tau,
        width,
        normalizer,
        series,
        windows,
        splits,
    })
}
