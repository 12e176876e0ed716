//! Wind forecasts: perfect pass-through and a discretised Markov chain.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Number of wind levels of the chain.
pub const STATES: usize = 20;

/// Markov chain over wind levels, stepping once per planning interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovForecaster {
    /// Level representatives, strictly increasing.
    pub states: Vec<f64>,
    /// Row-stochastic one-step transition matrix.
    pub transition: Vec<Vec<f64>>,
    /// Upper edge of the binned range.
    pub max_level: f64,
}

impl MarkovForecaster {
    /// Equal-width bins over `[0, max(trace)]` with midpoint representatives;
    /// transition counts are row-normalised and unvisited rows self-loop.
    /// A constant trace gives a single self-looping state at its value.
    pub fn fit(trace: &[f64]) -> Result<Self> {
        Self::fit_with_states(trace, STATES)
    }

    pub fn fit_with_states(trace: &[f64], states: usize) -> Result<Self> {
        if trace.len() < 2 {
            return Err(CoreError::InvalidInput(
                "training trace needs at least two steps".into(),
            ));
        }
        if states == 0 {
            return Err(CoreError::InvalidInput("state count must be positive".into()));
        }
        if trace.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(CoreError::InvalidInput(
                "training trace must be finite and non-negative".into(),
            ));
        }
        let max = trace.iter().copied().fold(0.0, f64::max);
        if trace.iter().all(|w| *w == trace[0]) {
            return Ok(Self {
                states: vec![trace[0]],
                transition: vec![vec![1.0]],
                max_level: trace[0],
            });
        }
        let max_level = max;
        let width = max_level / states as f64;
        let reps = (0..states).map(|k| (k as f64 + 0.5) * width).collect();
        let mut f = Self {
            states: reps,
            transition: vec![vec![0.0; states]; states],
            max_level,
        };
        let mut counts = vec![vec![0.0; states]; states];
        for pair in trace.windows(2) {
            counts[f.state_of(pair[0])][f.state_of(pair[1])] += 1.0;
        }
        for (a, row) in counts.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if total == 0.0 {
                f.transition[a][a] = 1.0;
            } else {
                for (b, c) in row.iter().enumerate() {
                    f.transition[a][b] = c / total;
                }
            }
        }
        Ok(f)
    }

    /// Builds a chain from explicit levels and transition matrix.
    pub fn from_parts(states: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let max_level = states.last().copied().unwrap_or(0.0);
        let f = Self {
            states,
            transition,
            max_level,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.states.len();
        let bad = |m: &str| Err(CoreError::InvalidInput(m.to_string()));
        if n == 0 || self.transition.len() != n || self.transition.iter().any(|r| r.len() != n) {
            return bad("transition matrix must be square and match the states");
        }
        if self.states.windows(2).any(|w| w[0] >= w[1]) {
            return bad("state levels must be strictly increasing");
        }
        for row in &self.transition {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return bad("transition rows must be probability vectors");
            }
        }
        Ok(())
    }

    /// Index of the state nearest to `wind`: bin lookup for fitted chains,
    /// values above the range clamp to the top state.
    pub fn state_of(&self, wind: f64) -> usize {
        let n = self.states.len();
        if n == 1 {
            return 0;
        }
        // Nearest representative; for equal-width bins this is the bin.
        let mut best = 0;
        for (k, &s) in self.states.iter().enumerate() {
            if (wind - s).abs() < (wind - self.states[best]).abs() {
                best = k;
            }
        }
        best
    }

    /// Distribution after `k` steps from the state of `wind`.
    pub fn distribution(&self, wind: f64, k: usize) -> Vec<f64> {
        let n = self.states.len();
        let mut dist = vec![0.0; n];
        dist[self.state_of(wind)] = 1.0;
        for _ in 0..k {
            let mut next = vec![0.0; n];
            for (a, pa) in dist.iter().enumerate() {
                if *pa == 0.0 {
                    continue;
                }
                for (b, pab) in self.transition[a].iter().enumerate() {
                    next[b] += pa * pab;
                }
            }
            dist = next;
        }
        dist
    }

    /// `k`-step transition matrix.
    pub fn power(&self, k: usize) -> Vec<Vec<f64>> {
        let n = self.states.len();
        let mut out: Vec<Vec<f64>> = (0..n)
            .map(|a| (0..n).map(|b| f64::from(u8::from(a == b))).collect())
            .collect();
        for _ in 0..k {
            out = mat_mul(&out, &self.transition);
        }
        out
    }

    /// Expected wind `k` steps ahead. `k = 0` returns `current` unchanged.
    pub fn forecast(&self, current: f64, k: usize) -> f64 {
        if k == 0 {
            return current;
        }
        self.distribution(current, k)
            .iter()
            .zip(&self.states)
            .map(|(p, s)| p * s)
            .sum()
    }
}

pub(crate) fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            let mut out = vec![0.0; n];
            for (k, &v) in row.iter().enumerate() {
                for (j, &w) in b[k].iter().enumerate() {
                    out[j] += v * w;
                }
            }
            out
        })
        .collect()
}

/// Wind information available to the rolling-horizon planner.
#[derive(Debug, Clone, PartialEq)]
pub enum WindForecast {
    /// The realised trace is known in advance.
    Perfect,
    /// The current hour is known; later hours use the chain's expectation.
    Markov(MarkovForecaster),
}

/// Sums consecutive blocks of `per` values (trailing partial block dropped).
pub fn aggregate(trace: &[f64], per: usize) -> Vec<f64> {
    trace.chunks_exact(per.max(1)).map(|c| c.iter().sum()).collect()
}
