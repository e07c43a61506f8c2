//! Seeded synthetic generator of drifting two-class flow datasets.
//!
//! Windows are drawn from class-conditional isotropic Gaussians, one segment
//! per window. Class means sit away from the origin so cosine similarities of
//! embeddings are informative, and the builders express the drift kinds as
//! controlled changes of the normal-class geometry between consecutive
//! segments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{LabeledSample, Label};
use crate::error::{Error, Result};

/// What changes between consecutive segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    None,
    MeanShift,
    ScaleShift,
    PriorShift,
}

/// One generated window: class-conditional Gaussian parameters and counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub n_normal: usize,
    pub n_abnormal: usize,
    pub normal_mean: Vec<f64>,
    pub abnormal_mean: Vec<f64>,
    pub normal_scale: f64,
    pub abnormal_scale: f64,
}

/// Full scenario description; `generate` is deterministic under the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftScenario {
    pub feature_dim: usize,
    pub drift_kind: DriftKind,
    pub seed: u64,
    pub segments: Vec<Segment>,
}

impl DriftScenario {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::InvalidConfig("feature_dim must be positive".into()));
        }
        if self.segments.is_empty() {
            return Err(Error::InvalidConfig("scenario needs segments".into()));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.n_normal == 0 || seg.n_abnormal == 0 {
                return Err(Error::InvalidConfig(format!(
                    "segment {i} must have positive class counts"
                )));
            }
            if seg.normal_scale <= 0.0 || seg.abnormal_scale <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "segment {i} must have positive covariance scales"
                )));
            }
            if seg.normal_mean.len() != self.feature_dim
                || seg.abnormal_mean.len() != self.feature_dim
            {
                return Err(Error::InvalidConfig(format!(
                    "segment {i} mean dimension does not match feature_dim"
                )));
            }
        }
        Ok(())
    }

    /// Draws one window per segment.
    pub fn generate(&self) -> Result<Vec<Vec<LabeledSample>>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let mut windows = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            let mut window = Vec::with_capacity(seg.n_normal + seg.n_abnormal);
            for _ in 0..seg.n_normal {
                let features = seg
                    .normal_mean
                    .iter()
                    .map(|&m| m + seg.normal_scale * unit.sample(&mut rng))
                    .collect();
                window.push(LabeledSample::new(features, Label::Normal));
            }
            for _ in 0..seg.n_abnormal {
                let features = seg
                    .abnormal_mean
                    .iter()
                    .map(|&m| m + seg.abnormal_scale * unit.sample(&mut rng))
                    .collect();
                window.push(LabeledSample::new(features, Label::Abnormal));
            }
            windows.push(window);
        }
        Ok(windows)
    }

    /// Re-seeded copy; windows drawn from the same distributions but with an
    /// independent sample stream, e.g. held-out test windows.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    fn base_means(feature_dim: usize) -> (Vec<f64>, Vec<f64>) {
        // Normal and abnormal means are orthogonal directions of equal norm,
        // both away from the origin, so cosine geometry separates them. The
        // scale keeps the clusters tight enough to train on while leaving a
        // few-sigma drift clearly visible.
        let level = 1.5;
        let normal: Vec<f64> = vec![level; feature_dim];
        let abnormal: Vec<f64> = (0..feature_dim)
            .map(|i| if i < feature_dim / 2 { level } else { -level })
            .collect();
        (normal, abnormal)
    }

    /// Stationary scenario: every window drawn from the same distributions.
    pub fn stationary(
        feature_dim: usize,
        windows: usize,
        n_normal: usize,
        n_abnormal: usize,
        seed: u64,
    ) -> Self {
        let (normal_mean, abnormal_mean) = Self::base_means(feature_dim);
        let segment = Segment {
            n_normal,
            n_abnormal,
            normal_mean,
            abnormal_mean,
            normal_scale: 1.0,
            abnormal_scale: 1.0,
        };
        Self {
            feature_dim,
            drift_kind: DriftKind::None,
            seed,
            segments: vec![segment; windows],
        }
    }

    /// Normality shift: the normal-class mean moves by `shift_sigmas`
    /// standard deviations per window along the class axis, sliding toward
    /// the abnormal cluster — the kind of drift that erodes a similarity
    /// boundary.
    pub fn mean_shift(
        feature_dim: usize,
        windows: usize,
        n_normal: usize,
        n_abnormal: usize,
        shift_sigmas: f64,
        seed: u64,
    ) -> Self {
        let mut scenario =
            Self::stationary(feature_dim, windows, n_normal, n_abnormal, seed);
        scenario.drift_kind = DriftKind::MeanShift;
        let (normal_mean, abnormal_mean) = Self::base_means(feature_dim);
        let direction: Vec<f64> = abnormal_mean
            .iter()
            .zip(&normal_mean)
            .map(|(a, n)| a - n)
            .collect();
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (w, seg) in scenario.segments.iter_mut().enumerate() {
            let step = shift_sigmas * seg.normal_scale * w as f64;
            for (m, d) in seg.normal_mean.iter_mut().zip(&direction) {
                *m += step * d / norm;
            }
        }
        scenario
    }

    /// The normal-class covariance scale grows by `factor` per window.
    pub fn scale_shift(
        feature_dim: usize,
        windows: usize,
        n_normal: usize,
        n_abnormal: usize,
        factor: f64,
        seed: u64,
    ) -> Self {
        let mut scenario =
            Self::stationary(feature_dim, windows, n_normal, n_abnormal, seed);
        scenario.drift_kind = DriftKind::ScaleShift;
        for (w, seg) in scenario.segments.iter_mut().enumerate() {
            seg.normal_scale *= factor.powi(w as i32);
        }
        scenario
    }

    /// Class proportions swing toward abnormal with each window while the
    /// total count stays fixed.
    pub fn prior_shift(
        feature_dim: usize,
        windows: usize,
        n_normal: usize,
        n_abnormal: usize,
        abnormal_step: usize,
        seed: u64,
    ) -> Self {
        let mut scenario =
            Self::stationary(feature_dim, windows, n_normal, n_abnormal, seed);
        scenario.drift_kind = DriftKind::PriorShift;
        for (w, seg) in scenario.segments.iter_mut().enumerate() {
            let moved = (abnormal_step * w).min(n_normal.saturating_sub(2));
            seg.n_normal = n_normal - moved;
            seg.n_abnormal = n_abnormal + moved;
        }
        scenario
    }
}

/// Writes samples as CSV with header `f0,...,f{d-1},label`. Floats use the
/// shortest decimal form that parses back to the same bits.
pub fn export_csv(samples: &[LabeledSample], feature_dim: usize, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..feature_dim {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "f{i}");
    }
    out.push_str(",label\n");
    for sample in samples {
        if sample.features.len() != feature_dim {
            return Err(Error::DimensionMismatch {
                expected: feature_dim,
                actual: sample.features.len(),
            });
        }
        for (i, v) in sample.features.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        let _ = writeln!(out, ",{}", sample.label.as_bit());
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes feature-only CSV (no label column), e.g. unlabeled arrivals.
pub fn export_features_csv(features: &[Vec<f64>], feature_dim: usize, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..feature_dim {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "f{i}");
    }
    out.push('\n');
    for row in features {
        if row.len() != feature_dim {
            return Err(Error::DimensionMismatch {
                expected: feature_dim,
                actual: row.len(),
            });
        }
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parsed CSV: features per row, labels when the label column is present.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDataset {
    pub feature_dim: usize,
    pub features: Vec<Vec<f64>>,
    pub labels: Option<Vec<Label>>,
}

impl CsvDataset {
    /// Converts to labeled samples; errors when the label column is absent.
    pub fn into_labeled(self) -> Result<Vec<LabeledSample>> {
        let labels = self.labels.ok_or(Error::CsvParse {
            line: 1,
            message: "label column is required".into(),
        })?;
        Ok(self
            .features
            .into_iter()
            .zip(labels)
            .map(|(features, label)| LabeledSample { features, label })
            .collect())
    }
}

fn parse_header(line: &str) -> Result<(usize, bool)> {
    let columns: Vec<&str> = line.split(',').map(str::trim).collect();
    let labeled = columns.last() == Some(&"label");
    let feature_columns = if labeled {
        &columns[..columns.len() - 1]
    } else {
        &columns[..]
    };
    if feature_columns.is_empty() {
        return Err(Error::CsvParse {
            line: 1,
            message: "no feature columns in header".into(),
        });
    }
    for (i, col) in feature_columns.iter().enumerate() {
        if *col != format!("f{i}") {
            return Err(Error::CsvParse {
                line: 1,
                message: format!("expected column f{i}, found {col:?}"),
            });
        }
    }
    Ok((feature_columns.len(), labeled))
}

/// Reads a CSV with header `f0,...,f{d-1}[,label]`. Malformed rows are
/// rejected with their line number.
pub fn read_csv(path: &Path) -> Result<CsvDataset> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::CsvParse {
        line: 1,
        message: "empty file".into(),
    })?;
    let (feature_dim, labeled) = parse_header(header)?;

    let mut features = Vec::new();
    let mut labels = if labeled { Some(Vec::new()) } else { None };
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let expected = feature_dim + usize::from(labeled);
        if cells.len() != expected {
            return Err(Error::CsvParse {
                line: line_no,
                message: format!("expected {expected} cells, found {}", cells.len()),
            });
        }
        let mut row = Vec::with_capacity(feature_dim);
        for (i, cell) in cells[..feature_dim].iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::CsvParse {
                line: line_no,
                message: format!("feature f{i} is not numeric: {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::CsvParse {
                    line: line_no,
                    message: format!("feature f{i} is not finite: {cell:?}"),
                });
            }
            row.push(value);
        }
        features.push(row);
        if let Some(labels) = labels.as_mut() {
            let bit: u8 = cells[feature_dim].trim().parse().map_err(|_| Error::CsvParse {
                line: line_no,
                message: format!("label is not 0/1: {:?}", cells[feature_dim]),
            })?;
            labels.push(Label::from_bit(bit).map_err(|_| Error::CsvParse {
                line: line_no,
                message: format!("label is not 0/1: {bit}"),
            })?);
        }
    }
    Ok(CsvDataset {
        feature_dim,
        features,
        labels,
    })
}

/// Reads a labeled CSV into samples.
pub fn import_csv(path: &Path) -> Result<Vec<LabeledSample>> {
    read_csv(path)?.into_labeled()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::class_counts;

    #[test]
    fn generation_is_deterministic_and_sized() {
        let scenario = DriftScenario::stationary(5, 3, 40, 10, 77);
        let a = scenario.generate().unwrap();
        let b = scenario.generate().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        for window in &a {
            assert_eq!(window.len(), 50);
            assert_eq!(class_counts(window), (40, 10));
        }
    }

    #[test]
    fn mean_shift_moves_normal_means_only() {
        let scenario = DriftScenario::mean_shift(6, 3, 10, 5, 3.0, 1);
        let s0 = &scenario.segments[0];
        let s1 = &scenario.segments[1];
        let s2 = &scenario.segments[2];
        assert_eq!(s0.abnormal_mean, s1.abnormal_mean);
        let dist = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        assert!((dist(&s0.normal_mean, &s1.normal_mean) - 3.0).abs() < 1e-12);
        assert!((dist(&s0.normal_mean, &s2.normal_mean) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn prior_shift_keeps_totals() {
        let scenario = DriftScenario::prior_shift(4, 3, 50, 10, 15, 3);
        for seg in &scenario.segments {
            assert_eq!(seg.n_normal + seg.n_abnormal, 60);
        }
        assert_eq!(scenario.segments[2].n_abnormal, 40);
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let mut scenario = DriftScenario::stationary(4, 2, 10, 5, 0);
        scenario.segments[0].normal_scale = 0.0;
        assert!(matches!(
            scenario.generate(),
            Err(Error::InvalidConfig(_))
        ));
        let mut scenario = DriftScenario::stationary(4, 2, 10, 5, 0);
        scenario.segments[1].normal_mean.pop();
        assert!(scenario.generate().is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("window.csv");
        let scenario = DriftScenario::stationary(7, 1, 25, 8, 5);
        let window = scenario.generate().unwrap().remove(0);
        export_csv(&window, 7, &path).unwrap();
        let restored = import_csv(&path).unwrap();
        assert_eq!(window.len(), restored.len());
        for (a, b) in window.iter().zip(&restored) {
            assert_eq!(a.label, b.label);
            for (x, y) in a.features.iter().zip(&b.features) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn missing_label_column_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        fs::write(&path, "f0,f1\n0.5,1.25\n").unwrap();
        let dataset = read_csv(&path).unwrap();
        assert!(dataset.labels.is_none());
        let err = dataset.into_labeled().unwrap_err();
        assert!(matches!(err, Error::CsvParse { line: 1, .. }));
    }

    #[test]
    fn bad_cells_name_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "f0,f1,label\n0.5,1.0,0\n0.5,oops,1\n").unwrap();
        match read_csv(&path) {
            Err(Error::CsvParse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("f1"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }

        fs::write(&path, "f0,f1,label\n0.5,1.0,2\n").unwrap();
        match read_csv(&path) {
            Err(Error::CsvParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        fs::write(&path, "f0,f1,label\n0.5,1.0\n").unwrap();
        assert!(matches!(
            read_csv(&path),
            Err(Error::CsvParse { line: 2, .. })
        ));
    }

    #[test]
    fn unlabeled_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("unlabeled.csv");
        let rows = vec![vec![0.125, -3.5], vec![1e-12, 42.0]];
        export_features_csv(&rows, 2, &path).unwrap();
        let dataset = read_csv(&path).unwrap();
        assert_eq!(dataset.features, rows);
        assert!(dataset.labels.is_none());
    }
}
