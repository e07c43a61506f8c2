//! `simulate`: generate drifting two-class windows plus held-out test
//! windows from the configured scenario.

use std::path::PathBuf;

use netsentry_core::error::{Error, Result};
use netsentry_core::simulate::{export_csv, DriftKind, DriftScenario};

use crate::report::Manifest;

use super::RunContext;

pub struct SimulateOutcome {
    pub windows: Vec<PathBuf>,
    pub test_windows: Vec<PathBuf>,
    pub manifest_path: PathBuf,
}

pub(crate) fn build_scenario(ctx: &RunContext) -> Result<DriftScenario> {
    let sim = ctx.config.simulate.as_ref().ok_or_else(|| {
        Error::InvalidConfig("simulate requires a [simulate] section".into())
    })?;
    let seed = sim.seed.unwrap_or(ctx.seed);
    let scenario = match sim.drift_kind {
        DriftKind::None => DriftScenario::stationary(
            sim.feature_dim,
            sim.windows,
            sim.n_normal,
            sim.n_abnormal,
            seed,
        ),
        DriftKind::MeanShift => DriftScenario::mean_shift(
            sim.feature_dim,
            sim.windows,
            sim.n_normal,
            sim.n_abnormal,
            sim.magnitude,
            seed,
        ),
        DriftKind::ScaleShift => {
            if sim.magnitude <= 0.0 {
                return Err(Error::InvalidConfig(
                    "scale_shift needs a positive simulate.magnitude".into(),
                ));
            }
            DriftScenario::scale_shift(
                sim.feature_dim,
                sim.windows,
                sim.n_normal,
                sim.n_abnormal,
                sim.magnitude,
                seed,
            )
        }
        DriftKind::PriorShift => DriftScenario::prior_shift(
            sim.feature_dim,
            sim.windows,
            sim.n_normal,
            sim.n_abnormal,
            sim.magnitude.max(0.0).round() as usize,
            seed,
        ),
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Same distributions, scaled counts, independent sample stream.
pub(crate) fn heldout_scenario(scenario: &DriftScenario, fraction: f64) -> DriftScenario {
    let mut test = scenario.reseeded(scenario.seed.wrapping_add(0x7e57));
    for segment in &mut test.segments {
        segment.n_normal = ((segment.n_normal as f64 * fraction).round() as usize).max(2);
        segment.n_abnormal = ((segment.n_abnormal as f64 * fraction).round() as usize).max(2);
    }
    test
}

pub fn run_simulate(ctx: &RunContext) -> Result<SimulateOutcome> {
    let scenario = build_scenario(ctx)?;
    let fraction = ctx
        .config
        .simulate
        .as_ref()
        .map(|s| s.test_fraction)
        .unwrap_or(0.5);
    let windows = scenario.generate()?;
    let test_windows = heldout_scenario(&scenario, fraction).generate()?;

    ctx.ensure_out_dir()?;
    let mut manifest = Manifest::new("simulate", ctx.seed, ctx.config_text.as_deref());
    manifest.note("drift_kind", format!("{:?}", scenario.drift_kind));
    manifest.note("windows", windows.len());

    let mut window_paths = Vec::new();
    for (k, window) in windows.iter().enumerate() {
        let path = ctx.out_dir.join(format!("window_{k}.csv"));
        export_csv(window, scenario.feature_dim, &path)?;
        manifest.record_output(&format!("window_{k}"), &path)?;
        window_paths.push(path);
    }
    let mut test_paths = Vec::new();
    for (k, window) in test_windows.iter().enumerate() {
        let path = ctx.out_dir.join(format!("test_{k}.csv"));
        export_csv(window, scenario.feature_dim, &path)?;
        manifest.record_output(&format!("test_{k}"), &path)?;
        test_paths.push(path);
    }

    let manifest_path = ctx.out_dir.join("simulate.manifest");
    manifest.save(&manifest_path)?;

    Ok(SimulateOutcome {
        windows: window_paths,
        test_windows: test_paths,
        manifest_path,
    })
}
