//! Normality shift detection.
//!
//! Posterior normality probabilities are computed per sample from the
//! selected component's Gaussians and the training priors, binned into
//! fixed-width histograms over [0, 1], and compared across an old and a new
//! window with a KL test statistic under a permutation test. The test is
//! one-sided: only large KL values evidence a shift.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeler::LabelerState;

/// Additive smoothing applied to histogram masses before KL; empty bins
/// would otherwise produce infinite statistics dominated by noise.
pub const KL_SMOOTHING: f64 = 1e-10;

/// Posterior probability that a sample with similarity score `score` is
/// normal, under the selected component's Gaussians and the class priors.
///
/// Computed in log space. If both class log-likelihoods degenerate to
/// negative infinity the prior is returned with a logged warning.
pub fn posterior_normal(score: f64, state: &LabelerState) -> Result<f64> {
    if !score.is_finite() {
        return Err(Error::InvalidData(format!(
            "similarity score is not finite: {score}"
        )));
    }
    let dists = state.selected_dists();
    let log_normal = dists.normal.log_pdf(score) + state.priors.normal.ln();
    let log_abnormal = dists.abnormal.log_pdf(score) + state.priors.abnormal.ln();
    if log_normal == f64::NEG_INFINITY && log_abnormal == f64::NEG_INFINITY {
        log::warn!("both class likelihoods underflowed at score {score}; falling back to prior");
        return Ok(state.priors.normal);
    }
    // P(normal | s) = 1 / (1 + exp(log_abnormal - log_normal))
    Ok(1.0 / (1.0 + (log_abnormal - log_normal).exp()))
}

/// Binned distribution of posterior probabilities over [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistogram {
    bin_edges: Vec<f64>,
    mass: Vec<f64>,
    count: usize,
}

impl ScoreHistogram {
    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    /// Number of contributing samples (samples with positive weight for
    /// weighted histograms).
    pub fn count(&self) -> usize {
        self.count
    }
}

/// Bin index for a value in [0, 1] over `bins` equal-width bins; the last
/// bin is right-closed so 1.0 lands in it.
#[inline]
pub(crate) fn bin_index(value: f64, bins: usize) -> usize {
    ((value * bins as f64) as usize).min(bins - 1)
}

fn validate_unit_interval(values: &[f64]) -> Result<()> {
    if let Some(v) = values
        .iter()
        .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
    {
        return Err(Error::InvalidData(format!(
            "posterior value {v} outside [0, 1]"
        )));
    }
    Ok(())
}

fn edges(bins: usize) -> Vec<f64> {
    (0..=bins).map(|b| b as f64 / bins as f64).collect()
}

/// Builds a frequency histogram of posterior values over [0, 1].
pub fn build_histogram(values: &[f64], bins: usize) -> Result<ScoreHistogram> {
    if bins < 2 {
        return Err(Error::InvalidConfig(format!(
            "histogram needs at least 2 bins, got {bins}"
        )));
    }
    if values.is_empty() {
        return Err(Error::EmptyInput("histogram values"));
    }
    validate_unit_interval(values)?;
    let mut mass = vec![0.0; bins];
    for &v in values {
        mass[bin_index(v, bins)] += 1.0;
    }
    let n = values.len() as f64;
    for m in &mut mass {
        *m /= n;
    }
    Ok(ScoreHistogram {
        bin_edges: edges(bins),
        mass,
        count: values.len(),
    })
}

/// Histogram where each sample contributes its mask weight to its bin; mass
/// is normalized by the total weight. Bin assignment is fixed by the value,
/// so the mass is differentiable in each weight.
pub fn weighted_histogram(values: &[f64], weights: &[f64], bins: usize) -> Result<ScoreHistogram> {
    if bins < 2 {
        return Err(Error::InvalidConfig(format!(
            "histogram needs at least 2 bins, got {bins}"
        )));
    }
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            actual: weights.len(),
        });
    }
    if values.is_empty() {
        return Err(Error::EmptyInput("histogram values"));
    }
    validate_unit_interval(values)?;
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0 || **w > 1.0) {
        return Err(Error::InvalidData(format!(
            "mask weight {w} outside [0, 1]"
        )));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateMask);
    }
    let mut mass = vec![0.0; bins];
    for (&v, &w) in values.iter().zip(weights) {
        mass[bin_index(v, bins)] += w;
    }
    for m in &mut mass {
        *m /= total;
    }
    Ok(ScoreHistogram {
        bin_edges: edges(bins),
        mass,
        count: weights.iter().filter(|&&w| w > 0.0).count(),
    })
}

/// Smoothed mass: `(m + eps) / (1 + bins * eps)`.
#[inline]
pub(crate) fn smooth(mass: f64, bins: usize) -> f64 {
    (mass + KL_SMOOTHING) / (1.0 + bins as f64 * KL_SMOOTHING)
}

/// KL divergence between two histograms over identical bins, after additive
/// smoothing and renormalization of both.
pub fn histogram_kl(p: &ScoreHistogram, q: &ScoreHistogram) -> Result<f64> {
    if p.bin_edges != q.bin_edges {
        return Err(Error::HistogramMismatch);
    }
    let bins = p.bins();
    let mut kl = 0.0;
    for (&pm, &qm) in p.mass.iter().zip(&q.mass) {
        let ps = smooth(pm, bins);
        let qs = smooth(qm, bins);
        kl += ps * (ps / qs).ln();
    }
    Ok(kl)
}

/// Shift detection parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftConfig {
    pub bins: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            bins: 50,
            permutations: 1000,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl ShiftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::InvalidConfig("bins must be at least 2".into()));
        }
        if self.permutations < 100 {
            return Err(Error::InvalidConfig(
                "permutation test needs at least 100 permutations".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Outcome of a permutation test between two posterior windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub kl_statistic: f64,
    pub p_value: f64,
    pub shifted: bool,
    pub permutations: usize,
    pub alpha: f64,
    pub bins: usize,
    pub n_old: usize,
    pub n_new: usize,
    pub seed: u64,
}

/// Permutation test with KL(new || old) as the statistic.
///
/// Pools both windows, re-splits at the original sizes under a seeded
/// shuffle, and estimates p with the plus-one rule
/// `p = (1 + #{T_perm >= T_obs}) / (1 + n_perm)`, which never returns zero.
pub fn permutation_test(
    old_posteriors: &[f64],
    new_posteriors: &[f64],
    config: &ShiftConfig,
) -> Result<ShiftReport> {
    config.validate()?;
    if old_posteriors.is_empty() || new_posteriors.is_empty() {
        return Err(Error::EmptyInput("posterior window"));
    }

    let observed = histogram_kl(
        &build_histogram(new_posteriors, config.bins)?,
        &build_histogram(old_posteriors, config.bins)?,
    )?;

    let mut pool: Vec<f64> = old_posteriors
        .iter()
        .chain(new_posteriors.iter())
        .copied()
        .collect();
    let n_old = old_posteriors.len();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut at_least_as_extreme = 0usize;
    for _ in 0..config.permutations {
        pool.shuffle(&mut rng);
        let statistic = histogram_kl(
            &build_histogram(&pool[n_old..], config.bins)?,
            &build_histogram(&pool[..n_old], config.bins)?,
        )?;
        if statistic >= observed {
            at_least_as_extreme += 1;
        }
    }

    let p_value = (1 + at_least_as_extreme) as f64 / (1 + config.permutations) as f64;
    Ok(ShiftReport {
        kl_statistic: observed,
        p_value,
        shifted: p_value < config.alpha,
        permutations: config.permutations,
        alpha: config.alpha,
        bins: config.bins,
        n_old,
        n_new: new_posteriors.len(),
        seed: config.seed,
    })
}
