//! Teacher-student shift adaptation.
//!
//! The pre-adaptation model is cloned and frozen as the teacher; the student
//! starts from the same weights and fine-tunes with SGD on the
//! explanation-selected samples. The loss couples the contrastive objective
//! on the student with a knowledge-distillation term that preserves the
//! teacher's pairwise similarity structure: per anchor, pairwise cosine
//! similarities are softmax-normalized (no temperature) into a distribution
//! over batch neighbors, and the student is penalized by the average KL
//! divergence from the teacher's distributions, on both encoder and decoder
//! embeddings.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contrastive;
use crate::data::{LabeledSample, Label};
use crate::error::{Error, Result};
use crate::labeler::{fit_labeler, LabelerState};
use crate::nn::optim::Optimizer;
use crate::nn::{cosine_with_grad, Autoencoder, GradientTape};

/// Frozen copy of the pre-adaptation model.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherSnapshot {
    model: Autoencoder,
}

impl TeacherSnapshot {
    pub fn new(model: &Autoencoder) -> Self {
        Self {
            model: model.clone(),
        }
    }

    pub fn model(&self) -> &Autoencoder {
        &self.model
    }
}

/// Configuration for shift adaptation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    /// Weight of the distillation term, in [0, 1].
    pub gamma: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Temperature of the contrastive term.
    pub temperature: f64,
    /// Batch size; pairwise structure is computed within each batch. The
    /// distillation softmax has no temperature, so over many neighbors the
    /// per-anchor distributions flatten toward uniform and the relational
    /// signal washes out; small anchor batches keep it sharp.
    pub anchor_batch: usize,
    pub seed: u64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            epochs: 10,
            learning_rate: 1e-4,
            temperature: 0.02,
            anchor_batch: 8,
            seed: 0,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be in [0, 1], got {}",
                self.gamma
            )));
        }
        if self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig("learning rate must be >= 0".into()));
        }
        if !(self.temperature > 0.0 && self.temperature <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "temperature must be in (0, 1], got {}",
                self.temperature
            )));
        }
        if self.anchor_batch < 2 {
            return Err(Error::InvalidConfig(
                "anchor_batch must be at least 2 for pairwise structure".into(),
            ));
        }
        Ok(())
    }
}

/// Softmax distribution over an anchor's similarities to every other
/// embedding in the set. No temperature is applied.
pub fn similarity_distribution(embeddings: &[Vec<f64>], anchor: usize) -> Result<Vec<f64>> {
    if embeddings.len() < 2 {
        return Err(Error::InvalidData(
            "similarity distribution needs at least two embeddings".into(),
        ));
    }
    let mut sims = Vec::with_capacity(embeddings.len() - 1);
    for (j, other) in embeddings.iter().enumerate() {
        if j == anchor {
            continue;
        }
        let (h, _, _) = cosine_with_grad(&embeddings[anchor], other)?;
        sims.push(h);
    }
    let max = sims.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = sims.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.iter().map(|&e| e / sum).collect())
}

/// Average KL divergence between the teacher's and the student's similarity
/// distributions over index-aligned embeddings, KL(teacher || student).
pub fn kd_loss(teacher: &[Vec<f64>], student: &[Vec<f64>]) -> Result<f64> {
    let t_refs: Vec<&[f64]> = teacher.iter().map(Vec::as_slice).collect();
    let s_refs: Vec<&[f64]> = student.iter().map(Vec::as_slice).collect();
    kd_component(&t_refs, &s_refs, false).map(|(v, _)| v)
}

fn pairwise_sims(embeddings: &[&[f64]]) -> Result<Vec<f64>> {
    let n = embeddings.len();
    let mut sims = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (h, _, _) = cosine_with_grad(embeddings[i], embeddings[j])?;
            sims[i * n + j] = h;
            sims[j * n + i] = h;
        }
    }
    Ok(sims)
}

fn anchor_softmax(sims: &[f64], n: usize, anchor: usize) -> Vec<f64> {
    let mut max = f64::NEG_INFINITY;
    for j in 0..n {
        if j != anchor {
            max = max.max(sims[anchor * n + j]);
        }
    }
    let mut exps = vec![0.0; n];
    let mut sum = 0.0;
    for j in 0..n {
        if j != anchor {
            let e = (sims[anchor * n + j] - max).exp();
            exps[j] = e;
            sum += e;
        }
    }
    for e in &mut exps {
        *e /= sum;
    }
    exps
}

/// KD loss for one embedding component; optionally returns the gradient with
/// respect to each student embedding.
fn kd_component(
    teacher: &[&[f64]],
    student: &[&[f64]],
    with_grad: bool,
) -> Result<(f64, Option<Vec<Vec<f64>>>)> {
    if teacher.len() != student.len() {
        return Err(Error::DimensionMismatch {
            expected: teacher.len(),
            actual: student.len(),
        });
    }
    let n = teacher.len();
    if n < 2 {
        return Err(Error::InvalidData(
            "knowledge distillation needs at least two samples".into(),
        ));
    }

    let t_sims = pairwise_sims(teacher)?;
    let s_sims = pairwise_sims(student)?;

    let mut loss = 0.0;
    let inv_n = 1.0 / n as f64;
    // Accumulated dL/dh for each unordered student pair.
    let mut d_sim = if with_grad { Some(vec![0.0; n * n]) } else { None };

    for anchor in 0..n {
        let p_teacher = anchor_softmax(&t_sims, n, anchor);
        let p_student = anchor_softmax(&s_sims, n, anchor);
        for j in 0..n {
            if j == anchor {
                continue;
            }
            loss += inv_n * p_teacher[j] * (p_teacher[j] / p_student[j]).ln();
            if let Some(d_sim) = d_sim.as_mut() {
                let (a, b) = (anchor.min(j), anchor.max(j));
                d_sim[a * n + b] += inv_n * (p_student[j] - p_teacher[j]);
            }
        }
    }

    let d_embeddings = match d_sim {
        None => None,
        Some(d_sim) => {
            let mut grads: Vec<Vec<f64>> = student.iter().map(|e| vec![0.0; e.len()]).collect();
            for a in 0..n {
                for b in (a + 1)..n {
                    let scale = d_sim[a * n + b];
                    if scale == 0.0 {
                        continue;
                    }
                    let (_, ga, gb) = cosine_with_grad(student[a], student[b])?;
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

    Ok((loss, d_embeddings))
}

/// Loss terms of one adaptation batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationLossParts {
    /// Contrastive term; absent when the batch has a single pseudo-class.
    pub contrastive: Option<f64>,
    /// Raw distillation term, before weighting by gamma.
    pub distillation: f64,
    /// Contrastive + gamma * distillation.
    pub total: f64,
}

/// Adaptation loss on one batch: contrastive loss on the student plus
/// gamma-weighted distillation against the teacher, on both components.
///
/// A single-pseudo-class batch keeps the distillation term and drops the
/// contrastive term with a warning; gradients flow only into the student.
pub fn adaptation_loss(
    student: &Autoencoder,
    teacher: &TeacherSnapshot,
    batch: &[LabeledSample],
    config: &AdaptConfig,
) -> Result<AdaptationLossParts> {
    adaptation_loss_inner(student, teacher, batch, config, None)
}

/// Adaptation loss with parameter gradients accumulated into `tape`.
pub fn adaptation_loss_with_tape(
    student: &Autoencoder,
    teacher: &TeacherSnapshot,
    batch: &[LabeledSample],
    config: &AdaptConfig,
    tape: &mut GradientTape,
) -> Result<AdaptationLossParts> {
    adaptation_loss_inner(student, teacher, batch, config, Some(tape))
}

fn adaptation_loss_inner(
    student: &Autoencoder,
    teacher: &TeacherSnapshot,
    batch: &[LabeledSample],
    config: &AdaptConfig,
    tape: Option<&mut GradientTape>,
) -> Result<AdaptationLossParts> {
    config.validate()?;
    if batch.len() < 2 {
        return Err(Error::InvalidData(
            "adaptation batch needs at least two samples".into(),
        ));
    }
    let with_grad = tape.is_some();

    let mut traced = Vec::with_capacity(batch.len());
    let mut teacher_pairs = Vec::with_capacity(batch.len());
    for sample in batch {
        traced.push(student.forward_traced(&sample.features)?);
        teacher_pairs.push(teacher.model.forward(&sample.features)?);
    }
    let labels: Vec<Label> = batch.iter().map(|s| s.label).collect();
    let stu_enc: Vec<&[f64]> = traced.iter().map(|(p, _)| p.encoder.as_slice()).collect();
    let stu_dec: Vec<&[f64]> = traced.iter().map(|(p, _)| p.decoder.as_slice()).collect();
    let tea_enc: Vec<&[f64]> = teacher_pairs.iter().map(|p| p.encoder.as_slice()).collect();
    let tea_dec: Vec<&[f64]> = teacher_pairs.iter().map(|p| p.decoder.as_slice()).collect();

    let latent_dim = student.latent_dim();
    let input_dim = student.input_dim();
    let mut d_enc = vec![vec![0.0; latent_dim]; batch.len()];
    let mut d_dec = vec![vec![0.0; input_dim]; batch.len()];

    let contrastive_value = match contrastive::contrastive_terms(
        &stu_enc,
        &stu_dec,
        &labels,
        config.temperature,
        with_grad,
    ) {
        Ok((value, grads)) => {
            if let Some((g_enc, g_dec)) = grads {
                for i in 0..batch.len() {
                    for (dst, g) in d_enc[i].iter_mut().zip(&g_enc[i]) {
                        *dst += g;
                    }
                    for (dst, g) in d_dec[i].iter_mut().zip(&g_dec[i]) {
                        *dst += g;
                    }
                }
            }
            Some(value)
        }
        Err(Error::BatchSkip(reason)) => {
            log::warn!("contrastive term skipped for adaptation batch: {reason}");
            None
        }
        Err(e) => return Err(e),
    };

    let (kd_en, kd_en_grad) = kd_component(&tea_enc, &stu_enc, with_grad)?;
    let (kd_de, kd_de_grad) = kd_component(&tea_dec, &stu_dec, with_grad)?;
    let distillation = kd_en + kd_de;

    if let Some(tape) = tape {
        if let (Some(g_enc), Some(g_dec)) = (kd_en_grad, kd_de_grad) {
            for i in 0..batch.len() {
                for (dst, g) in d_enc[i].iter_mut().zip(&g_enc[i]) {
                    *dst += config.gamma * g;
                }
                for (dst, g) in d_dec[i].iter_mut().zip(&g_dec[i]) {
                    *dst += config.gamma * g;
                }
            }
        }
        for (i, (_, trace)) in traced.iter().enumerate() {
            student.backward(trace, &d_enc[i], &d_dec[i], tape);
        }
    }

    Ok(AdaptationLossParts {
        contrastive: contrastive_value,
        distillation,
        total: contrastive_value.unwrap_or(0.0) + config.gamma * distillation,
    })
}

/// Per-epoch loss traces and sample provenance from an adaptation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptReport {
    pub epochs_run: usize,
    pub gamma: f64,
    /// Mean contrastive term per epoch, over batches where it applied.
    pub contrastive_trace: Vec<f64>,
    /// Mean raw distillation term per epoch.
    pub kd_trace: Vec<f64>,
    pub n_old: usize,
    pub n_new: usize,
}

/// Fine-tunes the model on the explanation-selected samples and refits the
/// labeler on the post-adaptation embeddings.
///
/// Samples must carry pseudo-labels assigned by `labeler` — adaptation never
/// consumes manual labels; those labels drive the contrastive term. After
/// fine-tuning, the selected samples are pseudo-labeled again under the
/// adapted embeddings (the fine-tune pulls the shifted normal cluster back
/// together, so the second pass is cleaner than the first) and the labeler
/// state is refitted on those labels, with priors from their proportions.
/// Returns the frozen teacher for provenance together with the refitted
/// labeler state and the loss traces.
pub fn adapt(
    model: &mut Autoencoder,
    old_selected: &[LabeledSample],
    new_selected: &[LabeledSample],
    labeler: &LabelerState,
    config: &AdaptConfig,
) -> Result<(TeacherSnapshot, LabelerState, AdaptReport)> {
    config.validate()?;
    if old_selected.is_empty() && new_selected.is_empty() {
        return Err(Error::EmptyInput("explanation-selected samples"));
    }

    let selected: Vec<LabeledSample> = old_selected
        .iter()
        .chain(new_selected.iter())
        .cloned()
        .collect();
    let teacher = TeacherSnapshot::new(model);
    let mut optimizer = Optimizer::sgd(config.learning_rate);
    let mut tape = GradientTape::zeros_like(model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut indices: Vec<usize> = (0..selected.len()).collect();

    let mut contrastive_trace = Vec::with_capacity(config.epochs);
    let mut kd_trace = Vec::with_capacity(config.epochs);
    let mut batch = Vec::with_capacity(config.anchor_batch);

    for _epoch in 0..config.epochs {
        indices.shuffle(&mut rng);
        let mut contrastive_sum = 0.0;
        let mut contrastive_batches = 0usize;
        let mut kd_sum = 0.0;
        let mut kd_batches = 0usize;

        for chunk in indices.chunks(config.anchor_batch) {
            if chunk.len() < 2 {
                // Pairwise structure is undefined on a singleton tail.
                continue;
            }
            batch.clear();
            batch.extend(chunk.iter().map(|&i| selected[i].clone()));
            tape.zero();
            let parts = adaptation_loss_with_tape(model, &teacher, &batch, config, &mut tape)?;
            optimizer.step(model, &tape)?;
            if let Some(c) = parts.contrastive {
                contrastive_sum += c;
                contrastive_batches += 1;
            }
            kd_sum += parts.distillation;
            kd_batches += 1;
        }

        contrastive_trace.push(contrastive_sum / contrastive_batches.max(1) as f64);
        kd_trace.push(kd_sum / kd_batches.max(1) as f64);
    }

    // Second labeling pass under the adapted embeddings, then refit. If the
    // second pass degenerates to one class, fall back to the input labels.
    let mut relabeled = selected.clone();
    for sample in &mut relabeled {
        sample.label = labeler.pseudo_label(model, &sample.features)?;
    }
    let refit = match fit_labeler(model, &relabeled) {
        Ok(state) => state,
        Err(Error::SingleClassDataset | Error::TooFewClassSamples { .. }) => {
            log::warn!("post-adaptation relabeling collapsed to one class; refitting on the input pseudo-labels");
            fit_labeler(model, &selected)?
        }
        Err(e) => return Err(e),
    };
    let report = AdaptReport {
        epochs_run: config.epochs,
        gamma: config.gamma,
        contrastive_trace,
        kd_trace,
        n_old: old_selected.len(),
        n_new: new_selected.len(),
    };
    Ok((teacher, refit, report))
}
