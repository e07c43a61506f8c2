//! Central finite-difference verification of analytic gradients.
//!
//! Used by the test suites to check every differentiable objective against a
//! numeric oracle that is independent of the reverse-mode path.

use crate::error::Result;
use crate::nn::Autoencoder;

/// Central finite difference of `loss` with respect to every model
/// parameter, in canonical parameter order.
pub fn central_difference_params<F>(
    model: &mut Autoencoder,
    mut loss: F,
    step: f64,
) -> Result<Vec<f64>>
where
    F: FnMut(&Autoencoder) -> Result<f64>,
{
    let n = model.param_count();
    let mut numeric = Vec::with_capacity(n);
    for idx in 0..n {
        let orig = *model.params_mut().nth(idx).expect("index in range");
        *model.params_mut().nth(idx).expect("index in range") = orig + step;
        let plus = loss(model)?;
        *model.params_mut().nth(idx).expect("index in range") = orig - step;
        let minus = loss(model)?;
        *model.params_mut().nth(idx).expect("index in range") = orig;
        numeric.push((plus - minus) / (2.0 * step));
    }
    Ok(numeric)
}

/// Central finite difference of `loss` with respect to a flat vector.
pub fn central_difference_vec<F>(values: &[f64], mut loss: F, step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut work = values.to_vec();
    let mut numeric = Vec::with_capacity(values.len());
    for idx in 0..values.len() {
        let orig = work[idx];
        work[idx] = orig + step;
        let plus = loss(&work)?;
        work[idx] = orig - step;
        let minus = loss(&work)?;
        work[idx] = orig;
        numeric.push((plus - minus) / (2.0 * step));
    }
    Ok(numeric)
}

/// Worst relative error between analytic and numeric gradients.
///
/// Each component is scored as `|a - n| / max(|a|, |n|, floor)`; the floor
/// keeps near-zero components from amplifying finite-difference noise.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> (f64, usize) {
    assert_eq!(analytic.len(), numeric.len());
    let mut worst = 0.0;
    let mut worst_idx = 0;
    for (idx, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let denom = a.abs().max(n.abs()).max(floor);
        let err = (a - n).abs() / denom;
        if err > worst {
            worst = err;
            worst_idx = idx;
        }
    }
    (worst, worst_idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;

    #[test]
    fn finite_difference_of_quadratic_is_exact() {
        let values = [1.0, -2.0, 0.5];
        let numeric = central_difference_vec(
            &values,
            |v| Ok(v.iter().map(|x| x * x).sum::<f64>()),
            1e-6,
        )
        .unwrap();
        let analytic: Vec<f64> = values.iter().map(|x| 2.0 * x).collect();
        let (err, _) = max_relative_error(&analytic, &numeric, 1e-8);
        assert!(err < 1e-8);
    }

    #[test]
    fn param_walk_covers_every_parameter() {
        let mut model = Autoencoder::seeded(Architecture::new(2, vec![3], 2), 1).unwrap();
        let numeric =
            central_difference_params(&mut model, |m| Ok(m.params().sum::<f64>()), 1e-5).unwrap();
        assert_eq!(numeric.len(), model.param_count());
        for g in numeric {
            assert!((g - 1.0).abs() < 1e-6);
        }
    }
}
