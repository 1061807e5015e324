//! Evaluation protocols: resolution transfer, coefficient convergence across
//! meshes, semigroup time upscaling, feature-count sweeps, and the scalar
//! Brownian-bridge demonstration.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::{FeatureFamily, FeatureMap, RandomFeatures};
use crate::rfm::{self, composed_test_error, expected_relative_test_error, RfmModel, SolveOptions, TrainConfig};
use crate::rng::{self, stream_id, StreamKind};

/// Test error of one model at each requested resolution of `test`.
pub fn transfer_errors(model: &RfmModel, test: &Dataset, resolutions: &[usize]) -> Result<Vec<(usize, f64)>> {
    resolutions
        .iter()
        .map(|&r| {
            let t = test.restrict_to_resolution(r)?;
            Ok((r, expected_relative_test_error(model, &t)?.mean))
        })
        .collect()
}

/// One row of a coefficient-convergence study.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientRow {
    pub resolution: usize,
    /// `||alpha(r) - alpha(r_max)|| / ||alpha(r_max)||`.
    pub alpha_distance: f64,
    pub test_error: Option<f64>,
}

/// Trains one model per resolution with a shared feature draw and compares
/// the coefficients to those at the finest resolution.
pub fn coefficient_convergence(
    train: &Dataset,
    test: Option<&Dataset>,
    family: FeatureFamily,
    m: usize,
    seed: u64,
    solve: &SolveOptions,
    resolutions: &[usize],
) -> Result<Vec<CoefficientRow>> {
    let finest = *resolutions
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidParameter("no resolutions given".into()))?;
    let fine = train.restrict_to_resolution(finest)?;
    let j_max = family.default_j_max(fine.grid().ok_or(Error::EmptyDataset)?)?;
    let features = RandomFeatures::draw(family, m, j_max, seed)?;
    let models = resolutions
        .iter()
        .map(|&r| RfmModel::train_with(features.clone(), &train.restrict_to_resolution(r)?, seed, solve))
        .collect::<Result<Vec<_>>>()?;
    let idx = resolutions.iter().position(|&r| r == finest).unwrap_or(0);
    let reference = DVector::from_column_slice(&models[idx].alpha);
    let norm = reference.norm();
    resolutions
        .iter()
        .zip(&models)
        .map(|(&r, model)| {
            let alpha = DVector::from_column_slice(&model.alpha);
            let test_error = match test {
                Some(t) => Some(expected_relative_test_error(model, &t.restrict_to_resolution(r)?)?.mean),
                None => None,
            };
            Ok(CoefficientRow {
                resolution: r,
                alpha_distance: (alpha - &reference).norm() / norm,
                test_error,
            })
        })
        .collect()
}

/// Error of the `j`-fold composed model against data at horizon `j T`, for
/// `j = 1, ..., tests.len()`. All datasets must share their inputs.
pub fn semigroup_errors(model: &RfmModel, tests: &[Dataset]) -> Result<Vec<(usize, f64)>> {
    let first = tests
        .first()
        .ok_or_else(|| Error::InvalidParameter("need at least one horizon".into()))?;
    if tests.iter().any(|t| t.inputs != first.inputs) {
        return Err(Error::InvalidParameter(
            "horizon datasets must share identical inputs".into(),
        ));
    }
    tests
        .iter()
        .enumerate()
        .map(|(i, t)| Ok((i + 1, composed_test_error(model, t, i + 1)?.mean)))
        .collect()
}

/// Test error for each feature count, with an independent feature draw per count.
pub fn m_sweep(
    train: &Dataset,
    test: &Dataset,
    family: FeatureFamily,
    ms: &[usize],
    seed: u64,
    solve: &SolveOptions,
) -> Result<Vec<(usize, f64)>> {
    ms.iter()
        .map(|&m| {
            let cfg = TrainConfig {
                family,
                m,
                j_max: None,
                seed,
                solve: *solve,
            };
            let model = RfmModel::train(train, &cfg)?;
            Ok((m, expected_relative_test_error(&model, test)?.mean))
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Fixed target of the Brownian-bridge demo, with a kink at 0.6. It does not
/// vanish at 1, where every bridge feature does.
pub fn bb_target(x: f64) -> f64 {
    x - x * x + 0.5 * (x - 0.6).max(0.0) * (x - 0.6)
}

/// Limit kernel of the Brownian-bridge features.
pub fn bb_kernel(x: f64, y: f64) -> f64 {
    x.min(y) - x * y
}

/// Empirical kernel `(1/m) sum_j phi(x; theta_j) phi(y; theta_j)` and its
/// Monte Carlo standard error.
pub fn bb_kernel_estimate(x: f64, y: f64, m: usize, j_max: usize, seed: u64) -> Result<(f64, f64)> {
    let features = RandomFeatures::draw(FeatureFamily::BrownianBridge, m, j_max, seed)?;
    let bridge = features.bridge()?;
    let px = bridge.evaluate(&x)?;
    let py = bridge.evaluate(&y)?;
    let prods: Vec<f64> = px.iter().zip(py.iter()).map(|(a, b)| a * b).collect();
    let mean = prods.iter().sum::<f64>() / m as f64;
    let var = prods.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (m as f64 - 1.0);
    Ok((mean, (var / m as f64).sqrt()))
}

/// Brownian-bridge demo output on a uniform evaluation grid of `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BbDemo {
    pub train_x: Vec<f64>,
    pub x: Vec<f64>,
    pub truth: Vec<f64>,
    pub ms: Vec<usize>,
    /// `predictions[k]` belongs to `ms[k]`.
    pub predictions: Vec<Vec<f64>>,
    /// Exact kernel interpolant.
    pub oracle: Vec<f64>,
}

impl BbDemo {
    /// `sup_x |pred - oracle|` per feature count.
    pub fn sup_gaps(&self) -> Vec<f64> {
        self.predictions
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&self.oracle)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,truth");
        for m in &self.ms {
            let _ = write!(out, ",pred_m{m}");
        }
        out.push_str(",oracle\n");
        for i in 0..self.x.len() {
            let _ = write!(out, "{:?},{:?}", self.x[i], self.truth[i]);
            for p in &self.predictions {
                let _ = write!(out, ",{:?}", p[i]);
            }
            let _ = writeln!(out, ",{:?}", self.oracle[i]);
        }
        out
    }
}

/// Fits `n` noiseless samples of [`bb_target`] with `lambda = 0` for each
/// feature count and compares with the exact kernel interpolant.
pub fn bb_demo(n: usize, ms: &[usize], j_max: usize, seed: u64, points: usize) -> Result<BbDemo> {
    if n == 0 || points < 2 || ms.is_empty() {
        return Err(Error::InvalidParameter(
            "need n >= 1, at least two evaluation points, and one feature count".into(),
        ));
    }
    let train_x = rng::uniforms(seed, stream_id(StreamKind::Scalar, 0, 0), n);
    let train_y: Vec<[f64; 1]> = train_x.iter().map(|&x| [bb_target(x)]).collect();
    let x: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let truth = x.iter().map(|&v| bb_target(v)).collect();
    let predictions = ms
        .iter()
        .map(|&m| {
            let features = RandomFeatures::draw(FeatureFamily::BrownianBridge, m, j_max, seed)?;
            let bridge = features.bridge()?;
            let alpha = rfm::fit(&bridge, &train_x, &train_y, &SolveOptions::default())?;
            x.par_iter()
                .map(|v| Ok((bridge.evaluate(v)? * &alpha)[0] / m as f64))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let gram = DMatrix::from_fn(n, n, |i, j| bb_kernel(train_x[i], train_x[j]));
    let y = DVector::from_iterator(n, train_y.iter().map(|v| v[0]));
    let beta = rfm::pinv_solve(&gram, &y, rfm::DEFAULT_RCOND)?;
    let oracle = x
        .iter()
        .map(|&v| {
            train_x
                .iter()
                .zip(beta.iter())
                .map(|(&xi, b)| bb_kernel(v, xi) * b)
                .sum()
        })
        .collect();
    Ok(BbDemo {
        train_x,
        x,
        truth,
        ms: ms.to_vec(),
        predictions,
        oracle,
    })
}
