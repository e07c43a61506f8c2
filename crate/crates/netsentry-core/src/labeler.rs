//! Distribution-level pseudo-labeling.
//!
//! After contrastive training, each component (encoder, decoder) scores every
//! sample by cosine similarity to a normal-class prototype. Per-class
//! Gaussians are fitted to those scores by maximum likelihood, and the
//! component whose class distributions separate better — measured by the
//! closed-form Gaussian KL divergence — becomes the labeling authority.
//! The per-sample alternative (`pointwise`) picks whichever component has the
//! larger absolute likelihood gap for that sample; it is kept for ablations.

use serde::{Deserialize, Serialize};

use crate::data::{class_counts, LabeledSample, Label};
use crate::error::{Error, Result};
use crate::nn::{cosine_similarity, Autoencoder};

/// Lower bound on fitted standard deviations; keeps pdf evaluation finite for
/// degenerate classes.
pub const SIGMA_FLOOR: f64 = 1e-6;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Univariate Gaussian parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: f64,
    pub std: f64,
}

impl GaussianParams {
    pub fn new(mean: f64, std: f64) -> Self {
        Self {
            mean,
            std: std.max(SIGMA_FLOOR),
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std;
        -0.5 * z * z - self.std.ln() - LN_SQRT_2PI
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }
}

/// Per-class maximum-likelihood Gaussian fit over similarity scores.
///
/// With labels known per sample the mixture MLE reduces to independent
/// per-class fits: mean and population standard deviation (divisor N).
pub fn fit_gaussians(scores: &[f64], labels: &[Label]) -> Result<(GaussianParams, GaussianParams)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    let fit_class = |target: Label| -> Result<GaussianParams> {
        let class: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == target)
            .map(|(&s, _)| s)
            .collect();
        if class.len() < 2 {
            return Err(Error::TooFewClassSamples {
                label: target.as_bit(),
                count: class.len(),
                need: 2,
            });
        }
        let n = class.len() as f64;
        let mean = class.iter().sum::<f64>() / n;
        let var = class.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        Ok(GaussianParams::new(mean, var.sqrt()))
    };
    Ok((fit_class(Label::Normal)?, fit_class(Label::Abnormal)?))
}

/// Closed-form KL divergence between univariate Gaussians, KL(a || b).
pub fn gaussian_kl(a: GaussianParams, b: GaussianParams) -> f64 {
    let var_a = a.std * a.std;
    let var_b = b.std * b.std;
    let dm = a.mean - b.mean;
    (b.std / a.std).ln() + (var_a + dm * dm) / (2.0 * var_b) - 0.5
}

/// Which autoencoder representation a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Encoder,
    Decoder,
}

/// Fitted score distributions for one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDistributions {
    /// Mean embedding of normal-class samples; the similarity anchor.
    pub prototype: Vec<f64>,
    pub normal: GaussianParams,
    pub abnormal: GaussianParams,
    /// KL(abnormal || normal); larger means better class separation.
    pub kl_score: f64,
}

impl ComponentDistributions {
    /// Similarity of an embedding to this component's prototype.
    pub fn score(&self, embedding: &[f64]) -> Result<f64> {
        cosine_similarity(embedding, &self.prototype)
    }

    /// Absolute likelihood gap |pdf_normal - pdf_abnormal| at a score.
    fn likelihood_gap(&self, score: f64) -> f64 {
        (self.normal.pdf(score) - self.abnormal.pdf(score)).abs()
    }
}

/// Class priors carried from the training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPriors {
    pub normal: f64,
    pub abnormal: f64,
}

/// Fitted labeling state: both component distributions, the selected
/// authority, and the training-class priors. Immutable after fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelerState {
    pub encoder: ComponentDistributions,
    pub decoder: ComponentDistributions,
    pub selected: Component,
    pub priors: ClassPriors,
}

/// Initial label from one component: normal iff the score is more likely
/// under the normal Gaussian, abnormal otherwise (ties are abnormal).
pub fn component_label(score: f64, dists: &ComponentDistributions) -> Result<Label> {
    if !score.is_finite() {
        return Err(Error::InvalidData(format!(
            "similarity score is not finite: {score}"
        )));
    }
    if dists.normal.log_pdf(score) > dists.abnormal.log_pdf(score) {
        Ok(Label::Normal)
    } else {
        Ok(Label::Abnormal)
    }
}

/// Fits the full labeling state over a trained model and a labeled dataset.
///
/// For each component: prototype = mean normal embedding, scores = cosine
/// similarity of every sample to the prototype, Gaussians fitted per class,
/// separability scored by KL(abnormal || normal). The component with the
/// larger KL score is selected (ties go to the decoder). Priors are the class
/// proportions of the dataset.
pub fn fit_labeler(model: &Autoencoder, dataset: &[LabeledSample]) -> Result<LabelerState> {
    let (n_normal, n_abnormal) = class_counts(dataset);
    if n_normal == 0 || n_abnormal == 0 {
        return Err(Error::SingleClassDataset);
    }

    let mut embeddings = Vec::with_capacity(dataset.len());
    for sample in dataset {
        embeddings.push(model.forward(&sample.features)?);
    }

    let encoder = fit_component(
        embeddings.iter().map(|e| e.encoder.as_slice()),
        dataset,
        n_normal,
    )?;
    let decoder = fit_component(
        embeddings.iter().map(|e| e.decoder.as_slice()),
        dataset,
        n_normal,
    )?;

    let selected = if encoder.kl_score > decoder.kl_score {
        Component::Encoder
    } else {
        Component::Decoder
    };

    let total = dataset.len() as f64;
    Ok(LabelerState {
        encoder,
        decoder,
        selected,
        priors: ClassPriors {
            normal: n_normal as f64 / total,
            abnormal: n_abnormal as f64 / total,
        },
    })
}

fn fit_component<'a>(
    embeddings: impl Iterator<Item = &'a [f64]> + Clone,
    dataset: &[LabeledSample],
    n_normal: usize,
) -> Result<ComponentDistributions> {
    let dim = embeddings.clone().next().map_or(0, <[f64]>::len);
    let mut prototype = vec![0.0; dim];
    for (emb, sample) in embeddings.clone().zip(dataset) {
        if sample.label.is_normal() {
            for (p, &v) in prototype.iter_mut().zip(emb) {
                *p += v;
            }
        }
    }
    for p in &mut prototype {
        *p /= n_normal as f64;
    }
    if prototype.iter().all(|&p| p == 0.0) {
        return Err(Error::ZeroNorm);
    }

    let mut scores = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    for (emb, sample) in embeddings.zip(dataset) {
        match cosine_similarity(emb, &prototype) {
            Ok(s) => {
                scores.push(s);
                labels.push(sample.label);
            }
            Err(Error::ZeroNorm) => {
                log::warn!("skipping zero-norm embedding in labeler fit");
            }
            Err(e) => return Err(e),
        }
    }

    let (normal, abnormal) = fit_gaussians(&scores, &labels)?;
    Ok(ComponentDistributions {
        prototype,
        normal,
        abnormal,
        kl_score: gaussian_kl(abnormal, normal),
    })
}

impl LabelerState {
    pub fn selected_dists(&self) -> &ComponentDistributions {
        match self.selected {
            Component::Encoder => &self.encoder,
            Component::Decoder => &self.decoder,
        }
    }

    /// Similarity score of a sample under the selected component.
    pub fn selected_score(&self, model: &Autoencoder, features: &[f64]) -> Result<f64> {
        let pair = model.forward(features)?;
        match self.selected {
            Component::Encoder => self.encoder.score(&pair.encoder),
            Component::Decoder => self.decoder.score(&pair.decoder),
        }
    }

    /// Distribution-level vote given both component scores: only the selected
    /// component is consulted.
    pub fn vote(&self, encoder_score: f64, decoder_score: f64) -> Result<Label> {
        match self.selected {
            Component::Encoder => component_label(encoder_score, &self.encoder),
            Component::Decoder => component_label(decoder_score, &self.decoder),
        }
    }

    /// Per-sample vote: the component with the larger absolute likelihood gap
    /// at its own score wins; ties go to the decoder.
    pub fn vote_pointwise(&self, encoder_score: f64, decoder_score: f64) -> Result<Label> {
        if self.encoder.likelihood_gap(encoder_score) > self.decoder.likelihood_gap(decoder_score) {
            component_label(encoder_score, &self.encoder)
        } else {
            component_label(decoder_score, &self.decoder)
        }
    }

    /// Pseudo-label for a sample under the distribution-level vote.
    pub fn pseudo_label(&self, model: &Autoencoder, features: &[f64]) -> Result<Label> {
        let score = self.selected_score(model, features)?;
        component_label(score, self.selected_dists())
    }

    /// Pseudo-label for a sample under the per-sample vote (ablation).
    pub fn pointwise_label(&self, model: &Autoencoder, features: &[f64]) -> Result<Label> {
        let pair = model.forward(features)?;
        let s_en = self.encoder.score(&pair.encoder)?;
        let s_de = self.decoder.score(&pair.decoder)?;
        self.vote_pointwise(s_en, s_de)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn two_point_mle() {
        let scores = [0.0, 2.0, 5.0, 5.5];
        let labels = [
            Label::Normal,
            Label::Normal,
            Label::Abnormal,
            Label::Abnormal,
        ];
        let (normal, _) = fit_gaussians(&scores, &labels).unwrap();
        assert!((normal.mean - 1.0).abs() < 1e-12);
        assert!((normal.std - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_scores_clamp_to_sigma_floor() {
        let scores = [0.7, 0.7, 0.7, 0.2, 0.3];
        let labels = [
            Label::Normal,
            Label::Normal,
            Label::Normal,
            Label::Abnormal,
            Label::Abnormal,
        ];
        let (normal, _) = fit_gaussians(&scores, &labels).unwrap();
        assert_eq!(normal.std, SIGMA_FLOOR);
        assert!((normal.mean - 0.7).abs() < 1e-12);
    }

    #[test]
    fn undersized_class_is_rejected() {
        let scores = [0.1, 0.2, 0.9];
        let labels = [Label::Normal, Label::Normal, Label::Abnormal];
        assert!(matches!(
            fit_gaussians(&scores, &labels),
            Err(Error::TooFewClassSamples { label: 1, .. })
        ));
    }

    #[test]
    fn mle_recovers_generating_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gen_normal = Normal::new(0.8, 0.05).unwrap();
        let gen_abnormal = Normal::new(0.2, 0.1).unwrap();
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..10_000 {
            scores.push(gen_normal.sample(&mut rng));
            labels.push(Label::Normal);
            scores.push(gen_abnormal.sample(&mut rng));
            labels.push(Label::Abnormal);
        }
        let (normal, abnormal) = fit_gaussians(&scores, &labels).unwrap();
        assert!((normal.mean - 0.8).abs() < 0.005);
        assert!((normal.std - 0.05).abs() < 0.005);
        assert!((abnormal.mean - 0.2).abs() < 0.005);
        assert!((abnormal.std - 0.1).abs() < 0.005);
    }

    #[test]
    fn gaussian_kl_known_values() {
        let a = GaussianParams::new(1.0, 1.0);
        let b = GaussianParams::new(0.0, 1.0);
        assert!((gaussian_kl(a, b) - 0.5).abs() < 1e-12);
        assert_eq!(gaussian_kl(a, a), 0.0);

        // KL(N(0,2) || N(0,1)) = ln(1/2) + 4/2 - 1/2 = 1.5 - ln 2.
        let wide = GaussianParams::new(0.0, 2.0);
        let narrow = GaussianParams::new(0.0, 1.0);
        let expected = 1.5 - std::f64::consts::LN_2;
        assert!((gaussian_kl(wide, narrow) - expected).abs() < 1e-12);
    }

    fn dists(normal: GaussianParams, abnormal: GaussianParams) -> ComponentDistributions {
        ComponentDistributions {
            prototype: vec![1.0],
            kl_score: gaussian_kl(abnormal, normal),
            normal,
            abnormal,
        }
    }

    #[test]
    fn component_label_follows_likelihood() {
        let d = dists(
            GaussianParams::new(0.9, 0.05),
            GaussianParams::new(0.2, 0.1),
        );
        assert_eq!(component_label(0.85, &d).unwrap(), Label::Normal);
        assert_eq!(component_label(0.2, &d).unwrap(), Label::Abnormal);
        // Equal Gaussians: every score falls through to the otherwise branch.
        let tie = dists(GaussianParams::new(0.5, 0.1), GaussianParams::new(0.5, 0.1));
        assert_eq!(component_label(0.9, &tie).unwrap(), Label::Abnormal);
        assert!(component_label(f64::NAN, &d).is_err());
    }

    #[test]
    fn vote_uses_only_selected_component() {
        // Encoder says normal at 0.8, decoder says abnormal there.
        let encoder = dists(
            GaussianParams::new(0.8, 0.05),
            GaussianParams::new(0.1, 0.05),
        );
        let decoder = dists(
            GaussianParams::new(0.1, 0.05),
            GaussianParams::new(0.8, 0.05),
        );
        let mut state = LabelerState {
            encoder,
            decoder,
            selected: Component::Encoder,
            priors: ClassPriors {
                normal: 0.5,
                abnormal: 0.5,
            },
        };
        assert_eq!(state.vote(0.8, 0.8).unwrap(), Label::Normal);
        state.selected = Component::Decoder;
        assert_eq!(state.vote(0.8, 0.8).unwrap(), Label::Abnormal);
    }

    #[test]
    fn selection_breaks_ties_toward_decoder() {
        let model = Autoencoder::seeded(Architecture::new(2, vec![], 2), 5).unwrap();
        let dataset = vec![
            LabeledSample::new(vec![1.0, 0.1], Label::Normal),
            LabeledSample::new(vec![0.9, 0.2], Label::Normal),
            LabeledSample::new(vec![-1.0, 0.4], Label::Abnormal),
            LabeledSample::new(vec![-0.8, 0.5], Label::Abnormal),
        ];
        let mut state = fit_labeler(&model, &dataset).unwrap();
        // Force equal KL scores: selection must resolve to the decoder.
        state.decoder.kl_score = state.encoder.kl_score;
        let selected = if state.encoder.kl_score > state.decoder.kl_score {
            Component::Encoder
        } else {
            Component::Decoder
        };
        assert_eq!(selected, Component::Decoder);
    }

    #[test]
    fn fit_labeler_is_order_independent() {
        let model = Autoencoder::seeded(Architecture::new(3, vec![4], 2), 21).unwrap();
        let mut dataset = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = Normal::new(2.0, 0.3).unwrap();
        let a = Normal::new(-1.0, 0.5).unwrap();
        for _ in 0..40 {
            dataset.push(LabeledSample::new(
                (0..3).map(|_| n.sample(&mut rng)).collect(),
                Label::Normal,
            ));
        }
        for _ in 0..20 {
            dataset.push(LabeledSample::new(
                (0..3).map(|_| a.sample(&mut rng)).collect(),
                Label::Abnormal,
            ));
        }
        let state = fit_labeler(&model, &dataset).unwrap();
        dataset.reverse();
        let reversed = fit_labeler(&model, &dataset).unwrap();

        // Summation order differs between the two fits, so compare at 1e-12
        // relative to each quantity's scale.
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        assert_eq!(state.selected, reversed.selected);
        for (p, q) in state.encoder.prototype.iter().zip(&reversed.encoder.prototype) {
            assert!(close(*p, *q));
        }
        assert!(close(state.encoder.kl_score, reversed.encoder.kl_score));
        assert!(close(state.decoder.normal.mean, reversed.decoder.normal.mean));
        assert!((state.priors.normal - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pointwise_can_disagree_with_distribution_vote() {
        // Encoder separates globally (high KL); the decoder's Gaussians are
        // nearly identical but sharply peaked, so near their means the
        // decoder's pointwise likelihood gap dominates.
        let encoder = dists(
            GaussianParams::new(0.8, 0.1),
            GaussianParams::new(0.48, 0.1),
        );
        let decoder = dists(
            GaussianParams::new(0.3, 0.01),
            GaussianParams::new(0.302, 0.01),
        );
        assert!(encoder.kl_score > decoder.kl_score);
        let state = LabelerState {
            encoder,
            decoder,
            selected: Component::Encoder,
            priors: ClassPriors {
                normal: 0.5,
                abnormal: 0.5,
            },
        };
        let (s_en, s_de) = (0.299, 0.299);
        let dist_label = state.vote(s_en, s_de).unwrap();
        let point_label = state.vote_pointwise(s_en, s_de).unwrap();
        assert_eq!(dist_label, Label::Abnormal);
        assert_eq!(point_label, Label::Normal);
    }
}
