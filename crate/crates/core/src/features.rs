//! Random feature maps `phi(a; theta)`: Fourier-space features for the
//! Burgers semigroup, predictor-corrector features for Darcy flow, and the
//! scalar Brownian-bridge features.
//!
//! Feature parameters are KL coefficient vectors, so the same draw can be
//! evaluated on any grid that resolves it.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::darcy::{self, FastPoisson, SmoothingConfig};
use crate::error::{Error, Result};
use crate::grf::{self, CovarianceSpectrum, DomainKind, FeatureParam};
use crate::grid::{Grid, GridFunction};
use crate::rng::{stream_id, StreamKind};

/// `chi(k) = max(0, min(2 r, (r + 1/2)^(-beta)))`, `r = 2 pi |k| delta`.
pub fn wavenumber_filter(k: i64, delta: f64, beta: f64) -> f64 {
    let r = 2.0 * PI * k.unsigned_abs() as f64 * delta;
    (2.0 * r).min((r + 0.5).powf(-beta)).max(0.0)
}

pub fn elu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmoidParams {
    pub s_plus: f64,
    pub s_minus: f64,
    pub delta: f64,
}

impl Default for SigmoidParams {
    fn default() -> Self {
        Self {
            s_plus: 1.0 / 12.0,
            s_minus: -1.0 / 3.0,
            delta: 0.15,
        }
    }
}

/// `(s+ - s-) / (1 + exp(-x / delta)) + s-`.
pub fn thresholded_sigmoid(x: f64, gamma: &SigmoidParams) -> f64 {
    (gamma.s_plus - gamma.s_minus) / (1.0 + (-x / gamma.delta).exp()) + gamma.s_minus
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierParams {
    pub tau: f64,
    pub alpha_reg: f64,
    pub delta: f64,
    pub beta: f64,
    /// Multiplies the filtered product before the activation. Coefficients
    /// are taken as `FFT / N`, so the default reproduces an unnormalized FFT
    /// product at 512 unique nodes while staying mesh independent.
    pub gain: f64,
}

impl Default for FourierParams {
    fn default() -> Self {
        Self {
            tau: 5.0,
            alpha_reg: 2.0,
            delta: 0.0025,
            beta: 4.0,
            gain: 512.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorCorrectorParams {
    pub tau: f64,
    pub alpha_reg: f64,
    pub sigmoid: SigmoidParams,
    /// Constant source term `f`.
    pub forcing: f64,
    pub smoothing: SmoothingConfig,
}

impl Default for PredictorCorrectorParams {
    fn default() -> Self {
        Self {
            tau: 7.5,
            alpha_reg: 2.0,
            sigmoid: SigmoidParams::default(),
            forcing: 1.0,
            smoothing: SmoothingConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeatureFamily {
    FourierBurgers(FourierParams),
    PredictorCorrectorDarcy(PredictorCorrectorParams),
    BrownianBridge,
}

impl FeatureFamily {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match self {
            FeatureFamily::FourierBurgers(p) => {
                if !(p.delta > 0.0 && p.beta > 0.0) {
                    return bad(format!("filter needs delta, beta > 0: {p:?}"));
                }
            }
            FeatureFamily::PredictorCorrectorDarcy(p) => {
                let s = p.sigmoid;
                if !(s.delta > 0.0) || !(s.s_minus <= s.s_plus) {
                    return bad(format!("sigmoid needs delta > 0 and s- <= s+: {s:?}"));
                }
            }
            FeatureFamily::BrownianBridge => {}
        }
        Ok(())
    }

    /// Number of Gaussian fields per feature draw.
    pub fn fields_per_feature(&self) -> usize {
        match self {
            FeatureFamily::PredictorCorrectorDarcy(_) => 2,
            _ => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeatureFamily::FourierBurgers(_) => "fourier-burgers",
            FeatureFamily::PredictorCorrectorDarcy(_) => "predictor-corrector-darcy",
            FeatureFamily::BrownianBridge => "brownian-bridge",
        }
    }

    fn spectrum(&self, j_max: usize) -> Result<Option<CovarianceSpectrum>> {
        match self {
            FeatureFamily::FourierBurgers(p) => {
                grf::eigenpairs(DomainKind::Periodic1d, p.tau, p.alpha_reg, j_max).map(Some)
            }
            FeatureFamily::PredictorCorrectorDarcy(p) => {
                grf::eigenpairs(DomainKind::Neumann2d, p.tau, p.alpha_reg, j_max).map(Some)
            }
            FeatureFamily::BrownianBridge => Ok(None),
        }
    }

    /// Default KL truncation on `grid`: every mode below the grid Nyquist wavenumber.
    pub fn default_j_max(&self, grid: &Grid) -> Result<usize> {
        match self {
            FeatureFamily::FourierBurgers(_) => grf::nyquist_mode_count(DomainKind::Periodic1d, grid),
            FeatureFamily::PredictorCorrectorDarcy(_) => grf::nyquist_mode_count(DomainKind::Neumann2d, grid),
            FeatureFamily::BrownianBridge => Ok(DEFAULT_BRIDGE_MODES),
        }
    }
}

pub const DEFAULT_BRIDGE_MODES: usize = 512;

/// `phi(a; theta) = elu(gain * IFFT(chi * c_a * c_theta))`, with `c = FFT / N`.
pub fn fourier_feature(a: &GridFunction, theta: &FeatureParam, params: &FourierParams) -> Result<GridFunction> {
    let spectrum = grf::eigenpairs(DomainKind::Periodic1d, params.tau, params.alpha_reg, theta.len().max(1))?;
    let prepared = FourierPrepared::new(a.grid(), &spectrum, std::slice::from_ref(theta), params)?;
    let mut out = vec![0.0; a.grid().len()];
    prepared.evaluate_into(a, 0, &mut out, &mut prepared.scratch())?;
    Ok(GridFunction::from_parts(*a.grid(), out))
}

/// Pre-activation of a Fourier feature (before `elu`), for inspection.
pub fn fourier_preactivation(a: &GridFunction, theta: &FeatureParam, params: &FourierParams) -> Result<GridFunction> {
    let spectrum = grf::eigenpairs(DomainKind::Periodic1d, params.tau, params.alpha_reg, theta.len().max(1))?;
    let prepared = FourierPrepared::new(a.grid(), &spectrum, std::slice::from_ref(theta), params)?;
    let mut out = vec![0.0; a.grid().len()];
    prepared.preactivation_into(a, 0, &mut out, &mut prepared.scratch())?;
    Ok(GridFunction::from_parts(*a.grid(), out))
}

struct FourierPrepared {
    grid: Grid,
    n: usize,
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
    /// Per feature: `gain * chi(k) * c_theta(k)`.
    multipliers: Vec<Vec<Complex64>>,
}

impl FourierPrepared {
    fn new(
        grid: &Grid,
        spectrum: &CovarianceSpectrum,
        thetas: &[FeatureParam],
        params: &FourierParams,
    ) -> Result<Self> {
        let Grid::Periodic(g) = grid else {
            return Err(Error::GridMismatch(format!(
                "Fourier features need a periodic grid, got {grid:?}"
            )));
        };
        let n = g.n_unique();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let chi: Vec<f64> = (0..n)
            .map(|k| {
                if 2 * k == n {
                    // Nyquist has no Hermitian partner.
                    0.0
                } else {
                    let w = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
                    wavenumber_filter(w, params.delta, params.beta)
                }
            })
            .collect();
        let multipliers = thetas
            .par_iter()
            .map(|theta| {
                let (s, p) = grf::truncate_to_grid(spectrum, theta, grid);
                let field = grf::sample_field(&s, &p, grid)?;
                let mut c: Vec<Complex64> = field.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
                forward.process(&mut c);
                let scale = params.gain / n as f64;
                Ok(c.iter().zip(&chi).map(|(c, x)| c * (scale * x)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: *grid,
            n,
            forward,
            inverse,
            multipliers,
        })
    }

    fn scratch(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        (
            vec![Complex64::new(0.0, 0.0); self.n],
            vec![Complex64::new(0.0, 0.0); self.n],
        )
    }

    fn transform_input(&self, a: &GridFunction, ahat: &mut [Complex64]) -> Result<()> {
        if *a.grid() != self.grid {
            return Err(Error::GridMismatch(format!(
                "input on {:?}, features prepared for {:?}",
                a.grid(),
                self.grid
            )));
        }
        let inv_n = 1.0 / self.n as f64;
        for (c, &v) in ahat.iter_mut().zip(a.values()) {
            *c = Complex64::new(v * inv_n, 0.0);
        }
        self.forward.process(ahat);
        Ok(())
    }

    fn preactivation_from_hat(&self, ahat: &[Complex64], j: usize, out: &mut [f64], work: &mut [Complex64]) {
        for ((w, a), m) in work.iter_mut().zip(ahat).zip(&self.multipliers[j]) {
            *w = a * m;
        }
        self.inverse.process(work);
        for (o, w) in out.iter_mut().zip(work.iter()) {
            *o = w.re;
        }
    }

    fn preactivation_into(
        &self,
        a: &GridFunction,
        j: usize,
        out: &mut [f64],
        scratch: &mut (Vec<Complex64>, Vec<Complex64>),
    ) -> Result<()> {
        self.transform_input(a, &mut scratch.0)?;
        self.preactivation_from_hat(&scratch.0, j, out, &mut scratch.1);
        Ok(())
    }

    fn evaluate_into(
        &self,
        a: &GridFunction,
        j: usize,
        out: &mut [f64],
        scratch: &mut (Vec<Complex64>, Vec<Complex64>),
    ) -> Result<()> {
        self.preactivation_into(a, j, out, scratch)?;
        out.iter_mut().for_each(|v| *v = elu(*v));
        Ok(())
    }

    fn evaluate_all(&self, a: &GridFunction) -> Result<DMatrix<f64>> {
        let mut scratch = self.scratch();
        self.transform_input(a, &mut scratch.0)?;
        let mut phi = DMatrix::zeros(self.n, self.multipliers.len());
        for j in 0..self.multipliers.len() {
            let mut col = phi.column_mut(j);
            let out = col.as_mut_slice();
            self.preactivation_from_hat(&scratch.0, j, out, &mut scratch.1);
            out.iter_mut().for_each(|v| *v = elu(*v));
        }
        Ok(phi)
    }
}

struct PredictorCorrectorPrepared {
    grid: Grid,
    poisson: FastPoisson,
    params: PredictorCorrectorParams,
    /// Per feature: `sigma_gamma(theta_1)` and `sigma_gamma(theta_2)`.
    forcings: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Input-dependent pieces shared by every feature: `f / a` and `grad log a_eps`.
struct PcInput {
    f_over_a: Vec<f64>,
    grad_log: (Vec<f64>, Vec<f64>),
}

impl PredictorCorrectorPrepared {
    fn new(
        grid: &Grid,
        spectrum: &CovarianceSpectrum,
        thetas: &[(FeatureParam, FeatureParam)],
        params: &PredictorCorrectorParams,
    ) -> Result<Self> {
        let Grid::Square(g) = grid else {
            return Err(Error::GridMismatch(format!(
                "predictor-corrector features need a square grid, got {grid:?}"
            )));
        };
        let sigma = |theta: &FeatureParam| -> Result<Vec<f64>> {
            let (s, p) = grf::truncate_to_grid(spectrum, theta, grid);
            let field = grf::sample_field(&s, &p, grid)?;
            Ok(field
                .values()
                .iter()
                .map(|&v| thresholded_sigmoid(v, &params.sigmoid))
                .collect())
        };
        let forcings = thetas
            .par_iter()
            .map(|(t1, t2)| Ok((sigma(t1)?, sigma(t2)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: *grid,
            poisson: FastPoisson::new(*g),
            params: *params,
            forcings,
        })
    }

    fn prepare_input(&self, a: &GridFunction) -> Result<PcInput> {
        if *a.grid() != self.grid {
            return Err(Error::GridMismatch(format!(
                "input on {:?}, features prepared for {:?}",
                a.grid(),
                self.grid
            )));
        }
        if let Some(&bad) = a.values().iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::NonPositiveCoefficient(bad));
        }
        let f = self.params.forcing;
        let f_over_a = a.values().iter().map(|&v| f / v).collect();
        let smoothed = darcy::smooth_coefficient(a, &self.params.smoothing)?;
        let grad_log = darcy::gradient(&smoothed.map(f64::ln))?;
        Ok(PcInput { f_over_a, grad_log })
    }

    fn evaluate_into(&self, input: &PcInput, j: usize, out: &mut [f64]) -> Result<()> {
        let (s1, s2) = &self.forcings[j];
        let rhs0: Vec<f64> = input.f_over_a.iter().zip(s1).map(|(a, b)| a + b).collect();
        let p0 = self.poisson.solve(&GridFunction::from_parts(self.grid, rhs0))?;
        let (px, py) = darcy::gradient(&p0)?;
        let (lx, ly) = &input.grad_log;
        let rhs1: Vec<f64> = (0..out.len())
            .map(|k| input.f_over_a[k] + s2[k] + lx[k] * px[k] + ly[k] * py[k])
            .collect();
        let p1 = self.poisson.solve(&GridFunction::from_parts(self.grid, rhs1))?;
        out.copy_from_slice(p1.values());
        Ok(())
    }

    fn evaluate_all(&self, a: &GridFunction) -> Result<DMatrix<f64>> {
        let input = self.prepare_input(a)?;
        let mut phi = DMatrix::zeros(self.grid.len(), self.forcings.len());
        for j in 0..self.forcings.len() {
            let mut col = phi.column_mut(j);
            self.evaluate_into(&input, j, col.as_mut_slice())?;
        }
        Ok(phi)
    }
}

/// Predictor-corrector feature `p_1` for the pair `(theta_1, theta_2)`.
pub fn pc_feature(
    a: &GridFunction,
    theta1: &FeatureParam,
    theta2: &FeatureParam,
    params: &PredictorCorrectorParams,
) -> Result<GridFunction> {
    let j = theta1.len().max(theta2.len()).max(1);
    let spectrum = grf::eigenpairs(DomainKind::Neumann2d, params.tau, params.alpha_reg, j)?;
    let prepared = PredictorCorrectorPrepared::new(a.grid(), &spectrum, &[(theta1.clone(), theta2.clone())], params)?;
    let input = prepared.prepare_input(a)?;
    let mut out = vec![0.0; a.grid().len()];
    prepared.evaluate_into(&input, 0, &mut out)?;
    Ok(GridFunction::from_parts(*a.grid(), out))
}

/// `sin(pi t)` with exact zeros at integer `t`.
fn sin_pi(t: f64) -> f64 {
    let r = t.rem_euclid(2.0);
    if r <= 0.5 {
        (PI * r).sin()
    } else if r <= 1.5 {
        (PI * (1.0 - r)).sin()
    } else {
        (PI * (r - 2.0)).sin()
    }
}

/// `sum_{j <= J} theta_j sqrt(2) sin(j pi x) / (j pi)`.
pub fn bb_feature(x: f64, param: &FeatureParam, j_max: usize) -> Result<f64> {
    if j_max > param.len() {
        return Err(Error::InvalidParameter(format!(
            "{j_max} bridge modes requested, parameter holds {}",
            param.len()
        )));
    }
    Ok(param.xi[..j_max]
        .iter()
        .enumerate()
        .map(|(idx, t)| {
            let j = (idx + 1) as f64;
            t * SQRT_2 * sin_pi(j * x) / (j * PI)
        })
        .sum())
}

/// Evaluates `m` features at one input. Column `j` of the returned matrix is
/// feature `j` at the output nodes.
pub trait FeatureMap: Sync {
    type Input: Sync;

    fn num_features(&self) -> usize;

    /// Quadrature weights of the output space, one per output node.
    fn output_weights(&self) -> Vec<f64>;

    fn evaluate(&self, input: &Self::Input) -> Result<DMatrix<f64>>;
}

/// A family together with its `m` drawn parameter sets.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomFeatures {
    pub family: FeatureFamily,
    /// KL truncation shared by every drawn field.
    pub j_max: usize,
    /// `params[j]` holds `family.fields_per_feature()` coefficient vectors.
    pub params: Vec<Vec<FeatureParam>>,
}

impl RandomFeatures {
    /// Draws `m` features. Streams depend on `(seed, m, j)`, so each feature
    /// count gets its own independent draw.
    pub fn draw(family: FeatureFamily, m: usize, j_max: usize, seed: u64) -> Result<Self> {
        family.validate()?;
        if m == 0 {
            return Err(Error::InvalidParameter("need at least one feature".into()));
        }
        if j_max == 0 {
            return Err(Error::InvalidParameter("need at least one KL mode".into()));
        }
        let per = family.fields_per_feature();
        let params = (0..m)
            .into_par_iter()
            .map(|j| {
                (0..per)
                    .map(|q| {
                        let id = stream_id(StreamKind::Feature, m as u64, (j * per + q) as u64);
                        grf::draw_xi(seed, id, j_max)
                    })
                    .collect()
            })
            .collect();
        Ok(Self { family, j_max, params })
    }

    pub fn from_params(family: FeatureFamily, params: Vec<Vec<FeatureParam>>) -> Result<Self> {
        family.validate()?;
        let per = family.fields_per_feature();
        let j_max = params.first().and_then(|p| p.first()).map_or(0, |p| p.len());
        if params.is_empty()
            || params
                .iter()
                .any(|p| p.len() != per || p.iter().any(|x| x.len() != j_max))
        {
            return Err(Error::InvalidParameter(format!(
                "expected m >= 1 draws of {per} vectors of equal length"
            )));
        }
        Ok(Self { family, j_max, params })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Synthesizes the feature fields on `grid` once, for repeated evaluation.
    pub fn on_grid(&self, grid: &Grid) -> Result<GridFeatures> {
        let spectrum = self.family.spectrum(self.j_max)?;
        let inner = match (&self.family, spectrum) {
            (FeatureFamily::FourierBurgers(p), Some(s)) => {
                let thetas: Vec<FeatureParam> = self.params.iter().map(|v| v[0].clone()).collect();
                Prepared::Fourier(FourierPrepared::new(grid, &s, &thetas, p)?)
            }
            (FeatureFamily::PredictorCorrectorDarcy(p), Some(s)) => {
                let thetas: Vec<(FeatureParam, FeatureParam)> =
                    self.params.iter().map(|v| (v[0].clone(), v[1].clone())).collect();
                Prepared::PredictorCorrector(PredictorCorrectorPrepared::new(grid, &s, &thetas, p)?)
            }
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "{} features do not act on grid functions",
                    self.family.name()
                )))
            }
        };
        Ok(GridFeatures { grid: *grid, inner })
    }

    /// Scalar Brownian-bridge view of these features.
    pub fn bridge(&self) -> Result<BridgeFeatures<'_>> {
        match self.family {
            FeatureFamily::BrownianBridge => Ok(BridgeFeatures { features: self }),
            _ => Err(Error::InvalidParameter(format!(
                "{} features are not scalar",
                self.family.name()
            ))),
        }
    }
}

enum Prepared {
    Fourier(FourierPrepared),
    PredictorCorrector(PredictorCorrectorPrepared),
}

/// Grid-function features with their random fields synthesized on one grid.
pub struct GridFeatures {
    grid: Grid,
    inner: Prepared,
}

impl GridFeatures {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

impl FeatureMap for GridFeatures {
    type Input = GridFunction;

    fn num_features(&self) -> usize {
        match &self.inner {
            Prepared::Fourier(p) => p.multipliers.len(),
            Prepared::PredictorCorrector(p) => p.forcings.len(),
        }
    }

    fn output_weights(&self) -> Vec<f64> {
        self.grid.quadrature_weights()
    }

    fn evaluate(&self, input: &GridFunction) -> Result<DMatrix<f64>> {
        match &self.inner {
            Prepared::Fourier(p) => p.evaluate_all(input),
            Prepared::PredictorCorrector(p) => p.evaluate_all(input),
        }
    }
}

/// Brownian-bridge features on scalar inputs in (0, 1); the output space is R.
pub struct BridgeFeatures<'a> {
    features: &'a RandomFeatures,
}

impl FeatureMap for BridgeFeatures<'_> {
    type Input = f64;

    fn num_features(&self) -> usize {
        self.features.len()
    }

    fn output_weights(&self) -> Vec<f64> {
        vec![1.0]
    }

    fn evaluate(&self, x: &f64) -> Result<DMatrix<f64>> {
        let j = self.features.j_max;
        let basis: Vec<f64> = (1..=j)
            .map(|k| {
                let k = k as f64;
                SQRT_2 * sin_pi(k * x) / (k * PI)
            })
            .collect();
        Ok(DMatrix::from_iterator(
            1,
            self.features.len(),
            self.features
                .params
                .iter()
                .map(|p| p[0].xi.iter().zip(&basis).map(|(t, b)| t * b).sum()),
        ))
    }
}
