//! Empirical marginal distributions with linear interpolation between order
//! statistics at plotting positions `u_i = (i - 0.5) / n`.

use super::ScenarioError;

#[derive(Debug, Clone)]
pub struct EmpiricalMarginal {
    sorted: Vec<f64>,
}

impl EmpiricalMarginal {
    pub fn fit(samples: &[f64]) -> Result<Self, ScenarioError> {
        if samples.len() < 2 {
            return Err(ScenarioError::TooFewSamples {
                needed: 2,
                got: samples.len(),
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(ScenarioError::NonFiniteSample);
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Ok(EmpiricalMarginal { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        *self.sorted.last().expect("nonempty")
    }

    fn u(&self, i1: usize) -> f64 {
        (i1 as f64 - 0.5) / self.sorted.len() as f64
    }

    /// CDF with linear interpolation; clamped to the plotting positions of
    /// the extreme order statistics.
    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.sorted.len();
        let j = self.sorted.partition_point(|&s| s <= x); // samples <= x
        if j == 0 {
            return self.u(1);
        }
        if j >= n {
            return self.u(n);
        }
        let (sj, sj1) = (self.sorted[j - 1], self.sorted[j]);
        if sj1 > sj {
            let frac = (x - sj) / (sj1 - sj);
            self.u(j) + frac * (self.u(j + 1) - self.u(j))
        } else {
            self.u(j)
        }
    }

    /// Inverse CDF; `u` outside [0, 1] clamps to the sample range.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let n = self.sorted.len();
        let p = u * n as f64 + 0.5; // 1-based fractional order statistic
        if p <= 1.0 {
            return self.sorted[0];
        }
        if p >= n as f64 {
            return self.sorted[n - 1];
        }
        let i = p.floor() as usize; // 1-based
        let frac = p - i as f64;
        let lo = self.sorted[i - 1];
        let hi = self.sorted[i];
        lo + frac * (hi - lo)
    }
}
