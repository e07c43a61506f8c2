//! InfoNCE training objective over normal anchors and abnormal negatives.
//!
//! Every normal sample anchors against every other normal sample in the
//! batch, with all batch abnormals as the negative set. The per-pair losses
//! are averaged over ordered anchor-positive pairs, computed once on encoder
//! embeddings and once on decoder embeddings, and summed. All softmax
//! expressions run in log space with max subtraction: at temperature 0.02
//! the raw exponentials overflow.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{class_counts, LabeledSample, Label};
use crate::error::{Error, Result};
use crate::nn::optim::Optimizer;
use crate::nn::{cosine_with_grad, Autoencoder, GradientTape};

/// Default total batch size when per-class batch sizes are derived from the
/// training-set prior.
pub const DEFAULT_BATCH_TOTAL: usize = 64;

/// Configuration for contrastive training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    /// Softmax temperature in (0, 1].
    pub temperature: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Normal samples per batch; derived from the class prior when absent.
    pub batch_normals: Option<usize>,
    /// Abnormal samples per batch; derived from the class prior when absent.
    pub batch_abnormals: Option<usize>,
    pub seed: u64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self {
            temperature: 0.02,
            epochs: 10,
            learning_rate: 1e-5,
            batch_normals: None,
            batch_abnormals: None,
            seed: 0,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "temperature must be in (0, 1], got {}",
                self.temperature
            )));
        }
        if self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig("learning rate must be >= 0".into()));
        }
        if let Some(n) = self.batch_normals {
            if n < 2 {
                return Err(Error::InvalidConfig(
                    "batch_normals must be at least 2".into(),
                ));
            }
        }
        if let Some(a) = self.batch_abnormals {
            if a < 1 {
                return Err(Error::InvalidConfig(
                    "batch_abnormals must be at least 1".into(),
                ));
            }
        }
        Ok(())
    }
}

fn log_sum_exp_softmax(args: &[f64]) -> (f64, Vec<f64>) {
    let max = args.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = args.iter().map(|&a| (a - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let softmax = exps.iter().map(|&e| e / sum).collect();
    (max + sum.ln(), softmax)
}

/// InfoNCE loss for one anchor-positive pair against a negative set.
pub fn infonce_pair_loss(anchor_sim: f64, negative_sims: &[f64], temperature: f64) -> Result<f64> {
    infonce_pair_grad(anchor_sim, negative_sims, temperature).map(|(loss, _, _)| loss)
}

/// Pair loss together with its gradients with respect to the anchor
/// similarity and each negative similarity.
pub fn infonce_pair_grad(
    anchor_sim: f64,
    negative_sims: &[f64],
    temperature: f64,
) -> Result<(f64, f64, Vec<f64>)> {
    if temperature <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if negative_sims.is_empty() {
        return Err(Error::BatchSkip("empty negative set"));
    }
    let inv_t = 1.0 / temperature;
    let mut args = Vec::with_capacity(1 + negative_sims.len());
    args.push(anchor_sim * inv_t);
    args.extend(negative_sims.iter().map(|&s| s * inv_t));
    let (lse, softmax) = log_sum_exp_softmax(&args);
    let loss = lse - args[0];
    let d_anchor = (softmax[0] - 1.0) * inv_t;
    let d_negatives = softmax[1..].iter().map(|&p| p * inv_t).collect();
    Ok((loss, d_anchor, d_negatives))
}

/// Outcome of the per-component loss over one batch.
struct ComponentLoss {
    value: f64,
    /// Gradient with respect to each batch embedding; present only when
    /// requested.
    d_embeddings: Option<Vec<Vec<f64>>>,
}

/// Averaged InfoNCE loss over all ordered normal anchor-positive pairs in a
/// batch, with all batch abnormals as negatives.
pub fn average_contrastive_loss(
    embeddings: &[Vec<f64>],
    labels: &[Label],
    temperature: f64,
) -> Result<f64> {
    let refs: Vec<&[f64]> = embeddings.iter().map(Vec::as_slice).collect();
    component_loss(&refs, labels, temperature, false).map(|c| c.value)
}

fn component_loss(
    embeddings: &[&[f64]],
    labels: &[Label],
    temperature: f64,
    with_grad: bool,
) -> Result<ComponentLoss> {
    if embeddings.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: embeddings.len(),
        });
    }
    let mut normals = Vec::new();
    let mut abnormals = Vec::new();
    for (idx, (&emb, &label)) in embeddings.iter().zip(labels).enumerate() {
        if emb.iter().all(|&v| v == 0.0) {
            log::warn!("excluding zero-norm embedding {idx} from contrastive batch");
            continue;
        }
        match label {
            Label::Normal => normals.push(idx),
            Label::Abnormal => abnormals.push(idx),
        }
    }
    if normals.len() < 2 {
        return Err(Error::BatchSkip("fewer than two normal samples"));
    }
    if abnormals.is_empty() {
        return Err(Error::BatchSkip("no abnormal samples"));
    }

    let n = embeddings.len();
    let sim = |a: usize, b: usize| -> Result<f64> {
        cosine_with_grad(embeddings[a], embeddings[b]).map(|(h, _, _)| h)
    };

    // Similarities used by every pair term.
    let mut neg_sims = vec![vec![0.0; abnormals.len()]; normals.len()];
    for (ni, &i) in normals.iter().enumerate() {
        for (ki, &k) in abnormals.iter().enumerate() {
            neg_sims[ni][ki] = sim(i, k)?;
        }
    }

    let pairs = (normals.len() * (normals.len() - 1)) as f64;
    let coeff = 1.0 / pairs;
    let mut total = 0.0;
    // Accumulated dL/dh for each unordered index pair, keyed (min, max).
    let mut d_sim = if with_grad {
        Some(vec![0.0; n * n])
    } else {
        None
    };

    for (ni, &i) in normals.iter().enumerate() {
        for &j in &normals {
            if i == j {
                continue;
            }
            let anchor_sim = sim(i, j)?;
            let (loss, d_anchor, d_negs) =
                infonce_pair_grad(anchor_sim, &neg_sims[ni], temperature)?;
            total += coeff * loss;
            if let Some(d_sim) = d_sim.as_mut() {
                let key = (i.min(j), i.max(j));
                d_sim[key.0 * n + key.1] += coeff * d_anchor;
                for (ki, &k) in abnormals.iter().enumerate() {
                    let key = (i.min(k), i.max(k));
                    d_sim[key.0 * n + key.1] += coeff * d_negs[ki];
                }
            }
        }
    }

    let d_embeddings = match d_sim {
        None => None,
        Some(d_sim) => {
            let mut grads: Vec<Vec<f64>> =
                embeddings.iter().map(|e| vec![0.0; e.len()]).collect();
            for a in 0..n {
                for b in (a + 1)..n {
                    let scale = d_sim[a * n + b];
                    if scale == 0.0 {
                        continue;
                    }
                    let (_, ga, gb) = cosine_with_grad(embeddings[a], embeddings[b])?;
                    for (dst, g) in grads[a].iter_mut().zip(&ga) {
                        *dst += scale * g;
                    }
                    for (dst, g) in grads[b].iter_mut().zip(&gb) {
                        *dst += scale * g;
                    }
                }
            }
            Some(grads)
        }
    };

    Ok(ComponentLoss {
        value: total,
        d_embeddings,
    })
}

/// Total contrastive loss: encoder-component average plus decoder-component
/// average on a batch.
pub fn total_loss(model: &Autoencoder, batch: &[LabeledSample], temperature: f64) -> Result<f64> {
    let mut encoder = Vec::with_capacity(batch.len());
    let mut decoder = Vec::with_capacity(batch.len());
    for sample in batch {
        let pair = model.forward(&sample.features)?;
        encoder.push(pair.encoder);
        decoder.push(pair.decoder);
    }
    let labels: Vec<Label> = batch.iter().map(|s| s.label).collect();
    let enc_refs: Vec<&[f64]> = encoder.iter().map(Vec::as_slice).collect();
    let dec_refs: Vec<&[f64]> = decoder.iter().map(Vec::as_slice).collect();
    let l_en = component_loss(&enc_refs, &labels, temperature, false)?.value;
    let l_de = component_loss(&dec_refs, &labels, temperature, false)?.value;
    Ok(l_en + l_de)
}

/// Total contrastive loss with parameter gradients accumulated into `tape`.
pub fn total_loss_with_tape(
    model: &Autoencoder,
    batch: &[LabeledSample],
    temperature: f64,
    tape: &mut GradientTape,
) -> Result<f64> {
    let mut traced = Vec::with_capacity(batch.len());
    for sample in batch {
        traced.push(model.forward_traced(&sample.features)?);
    }
    let labels: Vec<Label> = batch.iter().map(|s| s.label).collect();
    let enc_refs: Vec<&[f64]> = traced.iter().map(|(p, _)| p.encoder.as_slice()).collect();
    let dec_refs: Vec<&[f64]> = traced.iter().map(|(p, _)| p.decoder.as_slice()).collect();

    let (value, grads) = contrastive_terms(&enc_refs, &dec_refs, &labels, temperature, true)?;
    let (d_enc, d_dec) = grads.expect("gradients requested");
    for (i, (_, trace)) in traced.iter().enumerate() {
        model.backward(trace, &d_enc[i], &d_dec[i], tape);
    }
    Ok(value)
}

/// Encoder plus decoder contrastive loss over pre-computed embeddings, with
/// optional gradients per embedding. Shared with the adaptation objective.
#[allow(clippy::type_complexity)]
pub(crate) fn contrastive_terms(
    encoder_embeddings: &[&[f64]],
    decoder_embeddings: &[&[f64]],
    labels: &[Label],
    temperature: f64,
    with_grad: bool,
) -> Result<(f64, Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>)> {
    let enc = component_loss(encoder_embeddings, labels, temperature, with_grad)?;
    let dec = component_loss(decoder_embeddings, labels, temperature, with_grad)?;
    let value = enc.value + dec.value;
    if with_grad {
        Ok((
            value,
            Some((
                enc.d_embeddings.expect("gradients requested"),
                dec.d_embeddings.expect("gradients requested"),
            )),
        ))
    } else {
        Ok((value, None))
    }
}

/// Per-epoch loss trace from a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_trace: Vec<f64>,
    pub batches_per_epoch: usize,
}

fn resolve_batch_sizes(
    config: &ContrastiveConfig,
    n_normal: usize,
    n_abnormal: usize,
) -> Result<(usize, usize)> {
    let (mut bn, mut ba) = match (config.batch_normals, config.batch_abnormals) {
        (Some(n), Some(a)) => (n, a),
        _ => {
            // Stratify at the training-set prior over the default total.
            let total = DEFAULT_BATCH_TOTAL;
            let n = ((total * n_normal) as f64 / (n_normal + n_abnormal) as f64).round() as usize;
            let n = n.clamp(2, total - 1);
            (n, total - n)
        }
    };
    bn = bn.min(n_normal);
    ba = ba.min(n_abnormal);
    if bn < 2 {
        return Err(Error::TooFewClassSamples {
            label: 0,
            count: n_normal,
            need: 2,
        });
    }
    if ba < 1 {
        return Err(Error::TooFewClassSamples {
            label: 1,
            count: n_abnormal,
            need: 1,
        });
    }
    Ok((bn, ba))
}

/// Trains the model with Adam on the total contrastive loss.
///
/// Batches are stratified: a seeded shuffle partitions each class once and
/// the same full batches are revisited every epoch (trailing partial batches
/// are dropped). Returns the per-epoch mean batch loss.
pub fn train(
    model: &mut Autoencoder,
    dataset: &[LabeledSample],
    config: &ContrastiveConfig,
) -> Result<TrainReport> {
    config.validate()?;
    let (n_normal, n_abnormal) = class_counts(dataset);
    if n_normal == 0 || n_abnormal == 0 {
        return Err(Error::SingleClassDataset);
    }
    let (batch_normals, batch_abnormals) = resolve_batch_sizes(config, n_normal, n_abnormal)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut normal_idx: Vec<usize> = (0..dataset.len())
        .filter(|&i| dataset[i].label.is_normal())
        .collect();
    let mut abnormal_idx: Vec<usize> = (0..dataset.len())
        .filter(|&i| !dataset[i].label.is_normal())
        .collect();
    normal_idx.shuffle(&mut rng);
    abnormal_idx.shuffle(&mut rng);

    let n_batches = (normal_idx.len() / batch_normals).min(abnormal_idx.len() / batch_abnormals);
    if n_batches == 0 {
        return Err(Error::InvalidConfig(
            "batch sizes exceed available samples".into(),
        ));
    }

    let mut optimizer = Optimizer::adam(config.learning_rate, model);
    let mut tape = GradientTape::zeros_like(model);
    let mut batch = Vec::with_capacity(batch_normals + batch_abnormals);
    let mut loss_trace = Vec::with_capacity(config.epochs);

    for _epoch in 0..config.epochs {
        let mut epoch_loss = 0.0;
        let mut used = 0usize;
        for b in 0..n_batches {
            batch.clear();
            for &i in &normal_idx[b * batch_normals..(b + 1) * batch_normals] {
                batch.push(dataset[i].clone());
            }
            for &i in &abnormal_idx[b * batch_abnormals..(b + 1) * batch_abnormals] {
                batch.push(dataset[i].clone());
            }
            tape.zero();
            match total_loss_with_tape(model, &batch, config.temperature, &mut tape) {
                Ok(loss) => {
                    optimizer.step(model, &tape)?;
                    epoch_loss += loss;
                    used += 1;
                }
                Err(Error::BatchSkip(reason)) => {
                    log::warn!("skipping batch {b}: {reason}");
                }
                Err(e) => return Err(e),
            }
        }
        loss_trace.push(epoch_loss / used.max(1) as f64);
    }

    Ok(TrainReport {
        loss_trace,
        batches_per_epoch: n_batches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;

    #[test]
    fn equal_similarities_give_ln2() {
        for &tau in &[1.0, 0.3, 0.02] {
            let loss = infonce_pair_loss(0.4, &[0.4], tau).unwrap();
            assert!((loss - std::f64::consts::LN_2).abs() < 1e-12, "tau {tau}");
        }
    }

    #[test]
    fn separated_pair_scalar_value() {
        // -ln(e / (e + e^-1)) = ln(1 + e^-2)
        let loss = infonce_pair_loss(1.0, &[-1.0], 1.0).unwrap();
        assert!((loss - (1.0 + (-2.0f64).exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn sharp_temperature_drives_loss_to_zero() {
        let loss = infonce_pair_loss(1.0, &[-1.0], 0.02).unwrap();
        assert!(loss >= 0.0);
        assert!(loss < 1e-12);
    }

    #[test]
    fn all_equal_similarities_hit_the_bound() {
        for l_a in 1..6 {
            let negs = vec![0.25; l_a];
            let loss = infonce_pair_loss(0.25, &negs, 0.5).unwrap();
            assert!((loss - (1.0 + l_a as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_negatives_are_a_batch_skip() {
        assert!(matches!(
            infonce_pair_loss(0.5, &[], 1.0),
            Err(Error::BatchSkip(_))
        ));
    }

    #[test]
    fn pair_grad_matches_finite_differences() {
        let negs = [0.3, -0.4, 0.1];
        let (_, d_anchor, d_negs) = infonce_pair_grad(0.6, &negs, 0.1).unwrap();
        let h = 1e-7;
        let f = |a: f64, n: &[f64]| infonce_pair_loss(a, n, 0.1).unwrap();
        let num = (f(0.6 + h, &negs) - f(0.6 - h, &negs)) / (2.0 * h);
        assert!((d_anchor - num).abs() < 1e-6);
        for i in 0..negs.len() {
            let mut plus = negs;
            plus[i] += h;
            let mut minus = negs;
            minus[i] -= h;
            let num = (f(0.6, &plus) - f(0.6, &minus)) / (2.0 * h);
            assert!((d_negs[i] - num).abs() < 1e-6);
        }
    }

    #[test]
    fn average_over_identical_normals() {
        // Two identical normal embeddings, one orthogonal abnormal, tau = 1:
        // both ordered pairs give ln(1 + e^-1).
        let embeddings = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let labels = vec![Label::Normal, Label::Normal, Label::Abnormal];
        let loss = average_contrastive_loss(&embeddings, &labels, 1.0).unwrap();
        let expected = (1.0 + (-1.0f64).exp()).ln();
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn indistinguishable_batch_averages_ln2() {
        let embeddings = vec![vec![0.5, 0.5]; 4];
        let labels = vec![
            Label::Normal,
            Label::Normal,
            Label::Normal,
            Label::Abnormal,
        ];
        let loss = average_contrastive_loss(&embeddings, &labels, 0.7).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn two_normals_average_two_ordered_pairs() {
        let embeddings = vec![vec![1.0, 0.2], vec![0.8, 0.4], vec![-1.0, 0.3]];
        let labels = vec![Label::Normal, Label::Normal, Label::Abnormal];
        let s01 = crate::nn::cosine_similarity(&embeddings[0], &embeddings[1]).unwrap();
        let s0a = crate::nn::cosine_similarity(&embeddings[0], &embeddings[2]).unwrap();
        let s1a = crate::nn::cosine_similarity(&embeddings[1], &embeddings[2]).unwrap();
        let tau = 0.5;
        let by_hand = (infonce_pair_loss(s01, &[s0a], tau).unwrap()
            + infonce_pair_loss(s01, &[s1a], tau).unwrap())
            / 2.0;
        let loss = average_contrastive_loss(&embeddings, &labels, tau).unwrap();
        assert!((loss - by_hand).abs() < 1e-12);
    }

    #[test]
    fn batch_composition_errors() {
        let one_normal = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let labels = vec![Label::Normal, Label::Abnormal];
        assert!(matches!(
            average_contrastive_loss(&one_normal, &labels, 1.0),
            Err(Error::BatchSkip(_))
        ));
        let no_abnormal = vec![vec![1.0, 0.0], vec![0.9, 0.1]];
        let labels = vec![Label::Normal, Label::Normal];
        assert!(matches!(
            average_contrastive_loss(&no_abnormal, &labels, 1.0),
            Err(Error::BatchSkip(_))
        ));
    }

    fn toy_batch() -> Vec<LabeledSample> {
        vec![
            LabeledSample::new(vec![1.0, 0.3, -0.2, 0.8], Label::Normal),
            LabeledSample::new(vec![0.9, 0.5, -0.1, 0.7], Label::Normal),
            LabeledSample::new(vec![1.1, 0.2, -0.3, 0.9], Label::Normal),
            LabeledSample::new(vec![-0.8, 1.2, 0.4, -0.5], Label::Abnormal),
            LabeledSample::new(vec![-0.7, 1.0, 0.6, -0.6], Label::Abnormal),
        ]
    }

    #[test]
    fn constant_output_model_doubles_ln2() {
        // Zero weights with nonzero biases map every input to the same
        // vector, so each component contributes ln 2 with one abnormal
        // negative.
        let mut model = Autoencoder::seeded(Architecture::new(2, vec![3], 2), 1).unwrap();
        for p in model.params_mut() {
            *p = 0.0;
        }
        set_all_biases(&mut model, 0.6);
        let batch = vec![
            LabeledSample::new(vec![1.0, 2.0], Label::Normal),
            LabeledSample::new(vec![-1.0, 0.5], Label::Normal),
            LabeledSample::new(vec![3.0, -2.0], Label::Abnormal),
        ];
        let loss = total_loss(&model, &batch, 0.5).unwrap();
        assert!((loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    fn set_all_biases(model: &mut Autoencoder, value: f64) {
        // Parameters iterate weights-then-bias per layer; reconstruct layout
        // from the architecture to find bias slots.
        let arch = model.architecture().clone();
        let mut sizes = Vec::new();
        let mut prev = arch.input_dim;
        for &h in &arch.hidden_dims {
            sizes.push((prev * h, h));
            prev = h;
        }
        sizes.push((prev * arch.latent_dim, arch.latent_dim));
        prev = arch.latent_dim;
        for &h in arch.hidden_dims.iter().rev() {
            sizes.push((prev * h, h));
            prev = h;
        }
        sizes.push((prev * arch.input_dim, arch.input_dim));

        let mut params: Vec<&mut f64> = model.params_mut().collect();
        let mut offset = 0;
        for (w, b) in sizes {
            for i in 0..b {
                *params[offset + w + i] = value;
            }
            offset += w + b;
        }
    }

    #[test]
    fn total_loss_gradient_matches_finite_differences() {
        let mut model = Autoencoder::seeded(Architecture::new(4, vec![5], 3), 77).unwrap();
        let batch = toy_batch();
        let tau = 0.1;

        let mut tape = GradientTape::zeros_like(&model);
        total_loss_with_tape(&model, &batch, tau, &mut tape).unwrap();
        let analytic: Vec<f64> = tape.values().collect();

        let h = 1e-5;
        for idx in 0..model.param_count() {
            let orig = *model.params_mut().nth(idx).unwrap();
            *model.params_mut().nth(idx).unwrap() = orig + h;
            let plus = total_loss(&model, &batch, tau).unwrap();
            *model.params_mut().nth(idx).unwrap() = orig - h;
            let minus = total_loss(&model, &batch, tau).unwrap();
            *model.params_mut().nth(idx).unwrap() = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let denom = analytic[idx].abs().max(numeric.abs()).max(1e-6);
            assert!(
                (analytic[idx] - numeric).abs() / denom < 1e-4,
                "param {idx}: analytic {} numeric {}",
                analytic[idx],
                numeric
            );
        }
    }

    fn training_set(seed: u64, n: usize) -> Vec<LabeledSample> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(2.0, 0.4).unwrap();
        let abnormal = Normal::new(-1.5, 0.6).unwrap();
        let mut out = Vec::new();
        for i in 0..n {
            if i % 4 == 3 {
                out.push(LabeledSample::new(
                    (0..4).map(|_| abnormal.sample(&mut rng)).collect(),
                    Label::Abnormal,
                ));
            } else {
                out.push(LabeledSample::new(
                    (0..4).map(|_| normal.sample(&mut rng)).collect(),
                    Label::Normal,
                ));
            }
        }
        out
    }

    #[test]
    fn zero_learning_rate_is_a_fixed_point() {
        let mut model = Autoencoder::seeded(Architecture::new(4, vec![6], 3), 3).unwrap();
        let before: Vec<f64> = model.params().collect();
        let dataset = training_set(1, 40);
        let config = ContrastiveConfig {
            learning_rate: 0.0,
            epochs: 3,
            temperature: 0.5,
            batch_normals: Some(4),
            batch_abnormals: Some(2),
            seed: 7,
        };
        let report = train(&mut model, &dataset, &config).unwrap();
        assert_eq!(before, model.params().collect::<Vec<f64>>());
        assert_eq!(report.loss_trace.len(), 3);
        for w in report.loss_trace.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-12, "trace must stay constant");
        }
    }

    #[test]
    fn zero_epochs_returns_model_unchanged() {
        let mut model = Autoencoder::seeded(Architecture::new(4, vec![6], 3), 4).unwrap();
        let before = model.clone();
        let dataset = training_set(2, 24);
        let config = ContrastiveConfig {
            epochs: 0,
            ..ContrastiveConfig::default()
        };
        let report = train(&mut model, &dataset, &config).unwrap();
        assert_eq!(before, model);
        assert!(report.loss_trace.is_empty());
    }

    #[test]
    fn single_class_dataset_is_rejected() {
        let mut model = Autoencoder::seeded(Architecture::new(2, vec![], 2), 0).unwrap();
        let dataset = vec![
            LabeledSample::new(vec![1.0, 2.0], Label::Normal),
            LabeledSample::new(vec![2.0, 1.0], Label::Normal),
        ];
        assert!(matches!(
            train(&mut model, &dataset, &ContrastiveConfig::default()),
            Err(Error::SingleClassDataset)
        ));
    }

    #[test]
    fn training_pulls_normal_pairs_together() {
        let mut model = Autoencoder::seeded(Architecture::new(4, vec![8], 3), 12).unwrap();
        let dataset = training_set(5, 120);

        let mean_normal_sim = |m: &Autoencoder| {
            let embs: Vec<Vec<f64>> = dataset
                .iter()
                .filter(|s| s.label.is_normal())
                .map(|s| m.forward(&s.features).unwrap().encoder)
                .collect();
            let mut total = 0.0;
            let mut count = 0;
            for i in 0..embs.len() {
                for j in (i + 1)..embs.len() {
                    total += crate::nn::cosine_similarity(&embs[i], &embs[j]).unwrap();
                    count += 1;
                }
            }
            total / count as f64
        };

        let before = mean_normal_sim(&model);
        let config = ContrastiveConfig {
            temperature: 0.1,
            epochs: 30,
            learning_rate: 1e-3,
            batch_normals: Some(12),
            batch_abnormals: Some(4),
            seed: 9,
        };
        train(&mut model, &dataset, &config).unwrap();
        let after = mean_normal_sim(&model);
        assert!(
            after > before,
            "mean normal-normal similarity should increase: {before} -> {after}"
        );
    }
}
