//! Distillation retention ablation: fine-tuning on a pseudo-labeled drifted
//! window with the distillation term at full strength must retain more of
//! the original window's performance than fine-tuning without it.
//!
//! The adaptation here is deliberately hot (high learning rate, many epochs,
//! small anchor batches) and the pseudo-labels are noisy, so the contrastive
//! term actively rearranges the embedding space; the distillation term is
//! what resists the rearrangement.

use netsentry_core::adapt::{adapt, AdaptConfig};
use netsentry_core::contrastive::{train, ContrastiveConfig};
use netsentry_core::data::{LabeledSample, Label};
use netsentry_core::labeler::{fit_labeler, LabelerState};
use netsentry_core::metrics::{compute_metrics, confusion};
use netsentry_core::simulate::{DriftKind, DriftScenario, Segment};
use netsentry_core::{Architecture, Autoencoder};

fn f1(model: &Autoencoder, labeler: &LabelerState, samples: &[LabeledSample]) -> f64 {
    let predictions: Vec<Label> = samples
        .iter()
        .map(|s| labeler.pseudo_label(model, &s.features).unwrap())
        .collect();
    let truths: Vec<Label> = samples.iter().map(|s| s.label).collect();
    compute_metrics(&confusion(&predictions, &truths).unwrap())
        .unwrap()
        .f1
}

/// Two-window scenario with a delicate boundary: classes about 60 degrees
/// apart, normals drifting two sigmas toward the abnormal cluster.
fn delicate_scenario(seed: u64) -> DriftScenario {
    let d = 8;
    let level = 1.2;
    let normal_mean = vec![level; d];
    let abnormal_mean: Vec<f64> = (0..d)
        .map(|i| if i < 2 { -level } else { level })
        .collect();
    let direction: Vec<f64> = abnormal_mean
        .iter()
        .zip(&normal_mean)
        .map(|(a, n)| a - n)
        .collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let segments = (0..2)
        .map(|w| Segment {
            n_normal: 400,
            n_abnormal: 100,
            normal_mean: normal_mean
                .iter()
                .zip(&direction)
                .map(|(m, dir)| m + 2.0 * w as f64 * dir / norm)
                .collect(),
            abnormal_mean: abnormal_mean.clone(),
            normal_scale: 1.0,
            abnormal_scale: 1.0,
        })
        .collect();
    DriftScenario {
        feature_dim: d,
        drift_kind: DriftKind::MeanShift,
        seed,
        segments,
    }
}

#[test]
fn full_distillation_retains_more_than_none() {
    for seed in [2u64, 3, 5] {
        let scenario = delicate_scenario(seed);
        let windows = scenario.generate().unwrap();
        let origin_test = scenario.reseeded(seed + 777).generate().unwrap().remove(0);

        let mut model = Autoencoder::seeded(Architecture::new(8, vec![32], 8), seed * 3).unwrap();
        let train_config = ContrastiveConfig {
            temperature: 0.1,
            epochs: 5,
            learning_rate: 1e-3,
            batch_normals: Some(16),
            batch_abnormals: Some(4),
            seed: seed * 5,
        };
        train(&mut model, &windows[0], &train_config).unwrap();
        let labeler = fit_labeler(&model, &windows[0]).unwrap();

        let selected: Vec<LabeledSample> = windows[1]
            .iter()
            .map(|s| {
                LabeledSample::new(
                    s.features.clone(),
                    labeler.pseudo_label(&model, &s.features).unwrap(),
                )
            })
            .collect();

        let run = |gamma: f64| {
            let mut student = model.clone();
            let config = AdaptConfig {
                gamma,
                epochs: 30,
                learning_rate: 5e-3,
                temperature: 0.1,
                anchor_batch: 4,
                seed: seed * 9,
            };
            let (teacher, refit, _) =
                adapt(&mut student, &[], &selected, &labeler, &config).unwrap();
            let drift = student
                .params()
                .zip(teacher.model().params())
                .map(|(s, t)| (s - t).abs())
                .fold(0.0f64, f64::max);
            (f1(&student, &refit, &origin_test), drift)
        };

        let (with_kd, drift_kd) = run(1.0);
        let (without_kd, drift_none) = run(0.0);
        assert!(
            with_kd > without_kd,
            "seed {seed}: gamma=1 must retain more original-window F1 \
             (got {with_kd:.4} vs {without_kd:.4})"
        );
        assert!(
            drift_kd < drift_none,
            "seed {seed}: distillation must hold the student closer to the teacher \
             (parameter drift {drift_kd:.4} vs {drift_none:.4})"
        );
    }
}
