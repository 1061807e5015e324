//! The random feature model `F_m(a; alpha) = (1/m) sum_j alpha_j phi(a; theta_j)`:
//! normal equations, coefficient solves, prediction, and model files.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::{FeatureFamily, FeatureMap, GridFeatures, RandomFeatures};
use crate::grf::FeatureParam;
use crate::grid::{relative_l2_error, Grid, GridFunction};
use crate::io::{self, Tensor};

pub const DEFAULT_RCOND: f64 = 1e-13;
pub const DEFAULT_BATCH_SIZE: usize = 16;

/// `A alpha = b` with `A = (1/m) sum_i <phi_l(a_i), phi_j(a_i)> + lambda I` and
/// `b_l = sum_i <phi_l(a_i), y_i>`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

fn sqrt_weights<F: FeatureMap>(features: &F) -> Vec<f64> {
    features.output_weights().iter().map(|w| w.sqrt()).collect()
}

/// Scales row `k` of `phi` by `sqrt(w_k)`.
fn weight_rows(mut phi: DMatrix<f64>, sqrt_w: &[f64]) -> Result<DMatrix<f64>> {
    if phi.nrows() != sqrt_w.len() {
        return Err(Error::GridMismatch(format!(
            "features have {} output nodes, quadrature has {}",
            phi.nrows(),
            sqrt_w.len()
        )));
    }
    for (mut row, &s) in phi.row_iter_mut().zip(sqrt_w) {
        row *= s;
    }
    Ok(phi)
}

fn weighted_output(y: &[f64], sqrt_w: &[f64]) -> Result<DVector<f64>> {
    if y.len() != sqrt_w.len() {
        return Err(Error::GridMismatch(format!(
            "output has {} nodes, features produce {}",
            y.len(),
            sqrt_w.len()
        )));
    }
    Ok(DVector::from_iterator(
        y.len(),
        y.iter().zip(sqrt_w).map(|(v, s)| v * s),
    ))
}

fn check_pairs<X, Y>(inputs: &[X], outputs: &[Y]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if inputs.len() != outputs.len() {
        return Err(Error::InvalidParameter(format!(
            "{} inputs but {} outputs",
            inputs.len(),
            outputs.len()
        )));
    }
    Ok(())
}

/// Features are evaluated for `batch_size` samples at a time in parallel, then
/// accumulated in sample order, so the result does not depend on thread count.
pub fn assemble_normal_system<F, Y>(
    features: &F,
    inputs: &[F::Input],
    outputs: &[Y],
    lambda: f64,
    batch_size: usize,
) -> Result<NormalSystem>
where
    F: FeatureMap,
    Y: AsRef<[f64]> + Sync,
{
    check_pairs(inputs, outputs)?;
    check_lambda(lambda)?;
    let m = features.num_features();
    let sqrt_w = sqrt_weights(features);
    let mut a = DMatrix::zeros(m, m);
    let mut b = DVector::zeros(m);
    let inv_m = 1.0 / m as f64;
    let batch = batch_size.max(1);
    for (chunk_in, chunk_out) in inputs.chunks(batch).zip(outputs.chunks(batch)) {
        let phis = chunk_in
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let phi = weight_rows(features.evaluate(x)?, &sqrt_w)?;
                let y = weighted_output(chunk_out[i].as_ref(), &sqrt_w)?;
                Ok((phi, y))
            })
            .collect::<Result<Vec<_>>>()?;
        for (phi, y) in &phis {
            a.gemm_tr(inv_m, phi, phi, 1.0);
            b.gemv_tr(1.0, phi, y, 1.0);
        }
    }
    symmetrize(&mut a);
    for i in 0..m {
        a[(i, i)] += lambda;
    }
    Ok(NormalSystem { matrix: a, rhs: b })
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let m = a.nrows();
    for j in 0..m {
        for i in (j + 1)..m {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(())
}

/// Minimum-norm solution of `M x = rhs` for symmetric `M`, dropping singular
/// values below `rcond * sigma_max`.
pub fn pinv_solve(matrix: &DMatrix<f64>, rhs: &DVector<f64>, rcond: f64) -> Result<DVector<f64>> {
    if !(rcond >= 0.0) {
        return Err(Error::InvalidParameter(format!("rcond must be >= 0, got {rcond}")));
    }
    let svd = SVD::try_new(matrix.clone(), true, true, f64::EPSILON, 0).ok_or(Error::Factorization)?;
    let sigma_max = svd.singular_values.max();
    if sigma_max == 0.0 {
        return Ok(DVector::zeros(matrix.ncols()));
    }
    let cutoff = rcond * sigma_max;
    let u = svd.u.as_ref().ok_or(Error::Factorization)?;
    let v_t = svd.v_t.as_ref().ok_or(Error::Factorization)?;
    let mut coeffs = u.tr_mul(rhs);
    for (c, &s) in coeffs.iter_mut().zip(svd.singular_values.iter()) {
        *c = if s > cutoff { *c / s } else { 0.0 };
    }
    Ok(v_t.tr_mul(&coeffs))
}

/// Cholesky for `lambda > 0` (the matrix already contains `lambda I`),
/// truncated-SVD pseudoinverse for `lambda = 0`.
pub fn solve_coefficients(system: &NormalSystem, lambda: f64, rcond: f64) -> Result<DVector<f64>> {
    check_lambda(lambda)?;
    if lambda > 0.0 {
        let chol = Cholesky::new(system.matrix.clone()).ok_or(Error::Factorization)?;
        Ok(chol.solve(&system.rhs))
    } else {
        pinv_solve(&system.matrix, &system.rhs, rcond)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub lambda: f64,
    pub rcond: f64,
    pub batch_size: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            rcond: DEFAULT_RCOND,
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }
}

/// Trains coefficients for `features` on the pairs `(inputs, outputs)`.
///
/// With `lambda = 0` and more features than data rows, the minimum-norm
/// solution is computed in sample space as `alpha = m G^T (G G^T)^+ y`,
/// which equals the normal-equation pseudoinverse solution.
pub fn fit<F, Y>(features: &F, inputs: &[F::Input], outputs: &[Y], opts: &SolveOptions) -> Result<DVector<f64>>
where
    F: FeatureMap,
    Y: AsRef<[f64]> + Sync,
{
    check_pairs(inputs, outputs)?;
    let m = features.num_features();
    let rows = inputs.len() * features.output_weights().len();
    if opts.lambda == 0.0 && m > rows {
        return fit_min_norm_dual(features, inputs, outputs, opts.rcond);
    }
    let system = assemble_normal_system(features, inputs, outputs, opts.lambda, opts.batch_size)?;
    solve_coefficients(&system, opts.lambda, opts.rcond)
}

fn fit_min_norm_dual<F, Y>(features: &F, inputs: &[F::Input], outputs: &[Y], rcond: f64) -> Result<DVector<f64>>
where
    F: FeatureMap,
    Y: AsRef<[f64]> + Sync,
{
    let m = features.num_features();
    let sqrt_w = sqrt_weights(features);
    let k = sqrt_w.len();
    let blocks = inputs
        .par_iter()
        .zip(outputs.par_iter())
        .map(|(x, y)| {
            Ok((
                weight_rows(features.evaluate(x)?, &sqrt_w)?,
                weighted_output(y.as_ref(), &sqrt_w)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = blocks.len() * k;
    let mut g = DMatrix::zeros(rows, m);
    let mut y = DVector::zeros(rows);
    for (i, (phi, yi)) in blocks.iter().enumerate() {
        g.rows_mut(i * k, k).copy_from(phi);
        y.rows_mut(i * k, k).copy_from(yi);
    }
    let mut h = &g * g.transpose();
    symmetrize(&mut h);
    let beta = pinv_solve(&h, &y, rcond)?;
    Ok(g.tr_mul(&beta) * m as f64)
}

/// `(1/2) sum_i ||y_i - F_m(a_i; alpha)||^2 + lambda / (2 m) ||alpha||^2`.
pub fn objective<F, Y>(
    features: &F,
    inputs: &[F::Input],
    outputs: &[Y],
    alpha: &DVector<f64>,
    lambda: f64,
) -> Result<f64>
where
    F: FeatureMap,
    Y: AsRef<[f64]> + Sync,
{
    check_pairs(inputs, outputs)?;
    let m = features.num_features() as f64;
    let w = features.output_weights();
    let mut total = 0.0;
    for (x, y) in inputs.iter().zip(outputs) {
        let pred = features.evaluate(x)? * alpha / m;
        total += 0.5
            * y.as_ref()
                .iter()
                .zip(pred.iter())
                .zip(&w)
                .map(|((y, p), w)| w * (y - p) * (y - p))
                .sum::<f64>();
    }
    Ok(total + 0.5 * lambda / m * alpha.norm_squared())
}

/// `(1/m) W^{1/2} Phi(a) Phi(a')^T W^{1/2}`: the empirical operator-valued kernel
/// in symmetric quadrature coordinates.
pub fn empirical_kernel<F: FeatureMap>(features: &F, a: &F::Input, a_prime: &F::Input) -> Result<DMatrix<f64>> {
    let sqrt_w = sqrt_weights(features);
    let pa = weight_rows(features.evaluate(a)?, &sqrt_w)?;
    let pb = weight_rows(features.evaluate(a_prime)?, &sqrt_w)?;
    Ok(kernel_block(&pa, &pb))
}

fn kernel_block(pa: &DMatrix<f64>, pb: &DMatrix<f64>) -> DMatrix<f64> {
    (pa * pb.transpose()) / pa.ncols() as f64
}

pub const MAX_ORACLE_UNKNOWNS: usize = 2000;

/// Kernel ridge regression with the empirical kernel, solved in representer
/// form. Minimizes `(1/2) sum_i ||y_i - F(a_i)||^2 + (lambda / 2) ||F||_H^2`,
/// whose minimizer coincides with the trained random feature model.
pub struct KernelRidgeOracle<'a, F: FeatureMap> {
    features: &'a F,
    sqrt_w: Vec<f64>,
    train_phis: Vec<DMatrix<f64>>,
    beta: Vec<DVector<f64>>,
}

impl<'a, F: FeatureMap> KernelRidgeOracle<'a, F> {
    pub fn fit<Y: AsRef<[f64]> + Sync>(
        features: &'a F,
        inputs: &[F::Input],
        outputs: &[Y],
        lambda: f64,
    ) -> Result<Self> {
        check_pairs(inputs, outputs)?;
        check_lambda(lambda)?;
        let sqrt_w = sqrt_weights(features);
        let k = sqrt_w.len();
        let unknowns = inputs.len() * k;
        if unknowns > MAX_ORACLE_UNKNOWNS {
            return Err(Error::TooLarge(unknowns));
        }
        let train_phis = inputs
            .iter()
            .map(|x| weight_rows(features.evaluate(x)?, &sqrt_w))
            .collect::<Result<Vec<_>>>()?;
        let mut gram = DMatrix::zeros(unknowns, unknowns);
        for (i, pi) in train_phis.iter().enumerate() {
            for (j, pj) in train_phis.iter().enumerate() {
                gram.view_mut((i * k, j * k), (k, k)).copy_from(&kernel_block(pi, pj));
            }
        }
        symmetrize(&mut gram);
        let mut y = DVector::zeros(unknowns);
        for (i, yi) in outputs.iter().enumerate() {
            y.rows_mut(i * k, k).copy_from(&weighted_output(yi.as_ref(), &sqrt_w)?);
        }
        let stacked = if lambda > 0.0 {
            for d in 0..unknowns {
                gram[(d, d)] += lambda;
            }
            Cholesky::new(gram).ok_or(Error::Factorization)?.solve(&y)
        } else {
            pinv_solve(&gram, &y, DEFAULT_RCOND)?
        };
        let beta = (0..inputs.len()).map(|i| stacked.rows(i * k, k).into_owned()).collect();
        Ok(Self {
            features,
            sqrt_w,
            train_phis,
            beta,
        })
    }

    /// `F(a) = W^{-1/2} sum_i S(a, a_i) beta_i`, values at the output nodes.
    pub fn predict(&self, a: &F::Input) -> Result<Vec<f64>> {
        let pa = weight_rows(self.features.evaluate(a)?, &self.sqrt_w)?;
        let mut out = DVector::zeros(self.sqrt_w.len());
        for (pi, bi) in self.train_phis.iter().zip(&self.beta) {
            out += kernel_block(&pa, pi) * bi;
        }
        Ok(out.iter().zip(&self.sqrt_w).map(|(v, s)| v / s).collect())
    }
}

/// Provenance of a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub n: usize,
    pub resolution: usize,
    pub dataset_digest: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RfmModel {
    pub features: RandomFeatures,
    pub alpha: Vec<f64>,
    pub lambda: f64,
    pub rcond: f64,
    pub seed: u64,
    pub training: TrainingInfo,
}

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    family: FeatureFamily,
    m: usize,
    j_max: usize,
    lambda: f64,
    rcond: f64,
    seed: u64,
    training: TrainingInfo,
    alpha_file: String,
    xi_file: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub family: FeatureFamily,
    pub m: usize,
    /// KL truncation for the feature fields; `None` keeps every mode the
    /// training grid resolves.
    pub j_max: Option<usize>,
    pub seed: u64,
    pub solve: SolveOptions,
}

impl RfmModel {
    pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<Self> {
        let grid = *data.grid().ok_or(Error::EmptyDataset)?;
        let j_max = match cfg.j_max {
            Some(j) => j,
            None => cfg.family.default_j_max(&grid)?,
        };
        let features = RandomFeatures::draw(cfg.family, cfg.m, j_max, cfg.seed)?;
        Self::train_with(features, data, cfg.seed, &cfg.solve)
    }

    /// Trains coefficients for already drawn features.
    pub fn train_with(features: RandomFeatures, data: &Dataset, seed: u64, opts: &SolveOptions) -> Result<Self> {
        let grid = *data.grid().ok_or(Error::EmptyDataset)?;
        let prepared = features.on_grid(&grid)?;
        let alpha = fit(&prepared, &data.inputs, &data.outputs, opts)?;
        Ok(Self {
            features,
            alpha: alpha.as_slice().to_vec(),
            lambda: opts.lambda,
            rcond: opts.rcond,
            seed,
            training: TrainingInfo {
                n: data.len(),
                resolution: grid.resolution(),
                dataset_digest: None,
            },
        })
    }

    pub fn m(&self) -> usize {
        self.alpha.len()
    }

    /// Synthesizes the feature fields on `grid` for repeated prediction.
    pub fn on_grid(&self, grid: &Grid) -> Result<Predictor<'_>> {
        Ok(Predictor {
            alpha: DVector::from_column_slice(&self.alpha),
            features: self.features.on_grid(grid)?,
            model: self,
        })
    }

    pub fn predict(&self, a: &GridFunction) -> Result<GridFunction> {
        self.on_grid(a.grid())?.predict(a)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let m = self.m();
        let per = self.features.family.fields_per_feature();
        let j = self.features.j_max;
        Tensor::new(vec![m], self.alpha.clone())?.write(&dir.join("alpha.bin"))?;
        let xi: Vec<f64> = self
            .features
            .params
            .iter()
            .flat_map(|p| p.iter().flat_map(|x| x.xi.iter().copied()))
            .collect();
        let dims = if per == 1 { vec![m, j] } else { vec![m, per, j] };
        Tensor::new(dims, xi)?.write(&dir.join("xi.bin"))?;
        let manifest = ModelManifest {
            family: self.features.family,
            m,
            j_max: j,
            lambda: self.lambda,
            rcond: self.rcond,
            seed: self.seed,
            training: self.training.clone(),
            alpha_file: "alpha.bin".into(),
            xi_file: "xi.bin".into(),
        };
        io::write_json(&dir.join("model.json"), &manifest)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let json = dir.join("model.json");
        let manifest: ModelManifest = io::read_json(&json)?;
        let alpha = Tensor::read(&dir.join(&manifest.alpha_file))?;
        let xi_path = dir.join(&manifest.xi_file);
        let xi = Tensor::read(&xi_path)?;
        let per = manifest.family.fields_per_feature();
        let m = manifest.m;
        let j = manifest.j_max;
        let expected_xi = if per == 1 { vec![m, j] } else { vec![m, per, j] };
        if alpha.dims != [m] {
            return Err(Error::Format {
                path: dir.join(&manifest.alpha_file),
                reason: format!("expected dims [{m}], found {:?}", alpha.dims),
            });
        }
        if xi.dims != expected_xi {
            return Err(Error::Format {
                path: xi_path,
                reason: format!("expected dims {expected_xi:?}, found {:?}", xi.dims),
            });
        }
        let params = xi
            .data
            .chunks(per * j)
            .map(|feat| feat.chunks(j).map(|c| FeatureParam { xi: c.to_vec() }).collect())
            .collect();
        Ok(Self {
            features: RandomFeatures::from_params(manifest.family, params)?,
            alpha: alpha.data,
            lambda: manifest.lambda,
            rcond: manifest.rcond,
            seed: manifest.seed,
            training: manifest.training,
        })
    }
}

/// A model with its features synthesized on one grid.
pub struct Predictor<'a> {
    model: &'a RfmModel,
    features: GridFeatures,
    alpha: DVector<f64>,
}

impl Predictor<'_> {
    pub fn grid(&self) -> &Grid {
        self.features.grid()
    }

    pub fn model(&self) -> &RfmModel {
        self.model
    }

    pub fn predict(&self, a: &GridFunction) -> Result<GridFunction> {
        let phi = self.features.evaluate(a)?;
        let values = phi * &self.alpha / self.alpha.len() as f64;
        GridFunction::new(*a.grid(), values.as_slice().to_vec())
    }

    /// `j`-fold self-composition of the prediction.
    pub fn compose_predict(&self, a: &GridFunction, j: usize) -> Result<GridFunction> {
        if j == 0 {
            return Err(Error::InvalidParameter("composition count must be >= 1".into()));
        }
        if !matches!(self.model.features.family, FeatureFamily::FourierBurgers(_)) {
            return Err(Error::InvalidParameter(
                "composition needs a model whose input and output spaces agree".into(),
            ));
        }
        let mut u = self.predict(a)?;
        for _ in 1..j {
            u = self.predict(&u)?;
        }
        Ok(u)
    }

    /// Relative L2 error on each test pair, after `j`-fold composition.
    pub fn relative_errors(&self, test: &Dataset, j: usize) -> Result<Vec<f64>> {
        if test.is_empty() {
            return Err(Error::EmptyDataset);
        }
        test.inputs
            .par_iter()
            .zip(&test.outputs)
            .enumerate()
            .map(|(index, (a, y))| {
                let pred = if j == 1 {
                    self.predict(a)
                } else {
                    self.compose_predict(a, j)
                };
                pred.and_then(|p| relative_l2_error(y, &p)).map_err(|e| Error::Sample {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

/// Mean relative L2 test error and the per-sample values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub mean: f64,
    pub per_sample: Vec<f64>,
}

impl ErrorReport {
    pub fn from_samples(per_sample: Vec<f64>) -> Self {
        let mean = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
        Self { mean, per_sample }
    }
}

pub fn expected_relative_test_error(model: &RfmModel, test: &Dataset) -> Result<ErrorReport> {
    composed_test_error(model, test, 1)
}

pub fn composed_test_error(model: &RfmModel, test: &Dataset, j: usize) -> Result<ErrorReport> {
    let grid = test.grid().ok_or(Error::EmptyDataset)?;
    let predictor = model.on_grid(grid)?;
    Ok(ErrorReport::from_samples(predictor.relative_errors(test, j)?))
}
