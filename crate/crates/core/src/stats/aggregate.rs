use crate::error::{Error, Result};

/// Welford accumulator; `std` is the population standard deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        iter.into_iter().for_each(|x| s.push(x));
        s
    }
}

/// Per-episode mean/std across trials plus pooled statistics over every
/// episode of every trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialEnsemble {
    pub n_trials: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub pooled_mean: f64,
    pub pooled_std: f64,
}

impl TrialEnsemble {
    pub fn episodes(&self) -> usize {
        self.mean.len()
    }
}

pub fn aggregate<S: AsRef<[f64]>>(trials: &[S]) -> Result<TrialEnsemble> {
    if trials.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "aggregation needs at least 2 trials, got {}",
            trials.len()
        )));
    }
    let episodes = trials[0].as_ref().len();
    if let Some(bad) = trials.iter().find(|t| t.as_ref().len() != episodes) {
        return Err(Error::InvalidConfig(format!(
            "trial length mismatch: {} vs {} episodes",
            episodes,
            bad.as_ref().len()
        )));
    }
    let mut per_episode = vec![RunningStats::default(); episodes];
    let mut pooled = RunningStats::default();
    for t in trials {
        for (acc, &x) in per_episode.iter_mut().zip(t.as_ref()) {
            acc.push(x);
            pooled.push(x);
        }
    }
    Ok(TrialEnsemble {
        n_trials: trials.len(),
        mean: per_episode.iter().map(RunningStats::mean).collect(),
        std: per_episode.iter().map(RunningStats::std).collect(),
        pooled_mean: pooled.mean(),
        pooled_std: pooled.std(),
    })
}

/// `100 · (before − after) / before`.
pub fn variance_reduction_percent(std_before: f64, std_after: f64) -> Result<f64> {
    if std_before == 0.0 {
        return Err(Error::DivisionByZero(
            "baseline standard deviation is zero".into(),
        ));
    }
    if std_before < 0.0 || std_after < 0.0 || !std_before.is_finite() || !std_after.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "standard deviations must be finite and non-negative ({std_before}, {std_after})"
        )));
    }
    Ok(100.0 * (std_before - std_after) / std_before)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_trials_have_zero_spread() {
        let t = vec![1.0, 5.0, 9.0];
        let e = aggregate(&[t.clone(), t]).unwrap();
        assert_eq!(e.mean, vec![1.0, 5.0, 9.0]);
        assert!(e.std.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn zeros_and_twos() {
        let e = aggregate(&[vec![0.0; 4], vec![2.0; 4]]).unwrap();
        assert!(e.mean.iter().all(|&m| m == 1.0));
        assert!(e.std.iter().all(|&s| s == 1.0));
        assert_eq!(e.pooled_mean, 1.0);
        assert_eq!(e.pooled_std, 1.0);
    }

    #[test]
    fn rejects_short_or_ragged() {
        assert!(aggregate(&[vec![1.0]]).is_err());
        assert!(aggregate(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn matches_two_pass() {
        let trials: Vec<Vec<f64>> = (0..7)
            .map(|t| (0..50).map(|e| ((t * 31 + e * 17) % 23) as f64 * 1.37 + 100.0).collect())
            .collect();
        let e = aggregate(&trials).unwrap();
        let all: Vec<f64> = trials.iter().flatten().copied().collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / all.len() as f64;
        assert!(((e.pooled_mean - mean) / mean).abs() < 1e-12);
        assert!(((e.pooled_std - var.sqrt()) / var.sqrt()).abs() < 1e-12);
        for ep in 0..50 {
            let col: Vec<f64> = trials.iter().map(|t| t[ep]).collect();
            let m = col.iter().sum::<f64>() / 7.0;
            let sd = (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 7.0).sqrt();
            assert!(((e.mean[ep] - m) / m).abs() < 1e-12);
            assert!((e.std[ep] - sd).abs() <= 1e-12 * sd.max(1.0));
        }
    }

    #[test]
    fn reduction_percentages() {
        assert!((variance_reduction_percent(54.932, 46.846).unwrap() - 14.72).abs() < 0.01);
        assert!((variance_reduction_percent(54.932, 28.075).unwrap() - 48.89).abs() < 0.01);
        assert_eq!(variance_reduction_percent(3.5, 3.5).unwrap(), 0.0);
        assert!(matches!(
            variance_reduction_percent(0.0, 1.0),
            Err(Error::DivisionByZero(_))
        ));
    }
}
