//! Mean-zero Gaussian random fields with Matérn-like covariance
//! `tau^(2 alpha - d) (-Laplacian + tau^2)^(-alpha)`, sampled through a
//! truncated Karhunen–Loève expansion.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    /// Torus [0, 1)_per, zero mode removed.
    Periodic1d,
    /// Unit square with homogeneous Neumann conditions, zero mode removed.
    Neumann2d,
}

impl DomainKind {
    pub fn dim(self) -> usize {
        match self {
            DomainKind::Periodic1d => 1,
            DomainKind::Neumann2d => 2,
        }
    }
}

/// One covariance eigenfunction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// `sqrt(2) sin(2 pi j x)` or `sqrt(2) cos(2 pi j x)`.
    Periodic { j: usize, cosine: bool },
    /// Products `cos(k1 pi x1) cos(k2 pi x2)` normalised in L2.
    Neumann { k1: usize, k2: usize },
}

impl Mode {
    fn squared_index(&self) -> usize {
        match *self {
            Mode::Periodic { j, .. } => j * j,
            Mode::Neumann { k1, k2 } => k1 * k1 + k2 * k2,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Mode::Periodic { j, cosine } => {
                let arg = 2.0 * PI * j as f64 * x[0];
                SQRT_2 * if cosine { arg.cos() } else { arg.sin() }
            }
            Mode::Neumann { k1, k2 } => {
                let c = (k1 as f64 * PI * x[0]).cos() * (k2 as f64 * PI * x[1]).cos();
                if k1 == 0 || k2 == 0 {
                    SQRT_2 * c
                } else {
                    2.0 * c
                }
            }
        }
    }

    fn normalization(&self) -> f64 {
        match *self {
            Mode::Periodic { .. } => SQRT_2,
            Mode::Neumann { k1, k2 } => {
                if k1 == 0 || k2 == 0 {
                    SQRT_2
                } else {
                    2.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceSpectrum {
    pub domain_kind: DomainKind,
    pub tau: f64,
    pub alpha_reg: f64,
    /// `(mode, eigenvalue)` pairs, eigenvalues nonincreasing.
    pub modes: Vec<(Mode, f64)>,
}

/// Resolution-independent KL coordinates of one field draw.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureParam {
    pub xi: Vec<f64>,
}

impl FeatureParam {
    pub fn zeros(len: usize) -> Self {
        Self { xi: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }
}

/// Serializable spectrum description, as stored in manifests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    pub domain_kind: DomainKind,
    pub tau: f64,
    pub alpha_reg: f64,
    pub j_max: usize,
}

impl SpectrumParams {
    pub fn build(&self) -> Result<CovarianceSpectrum> {
        eigenpairs(self.domain_kind, self.tau, self.alpha_reg, self.j_max)
    }
}

pub fn eigenvalue(kind: DomainKind, tau: f64, alpha_reg: f64, mode: &Mode) -> f64 {
    match kind {
        DomainKind::Periodic1d => {
            let j = mode.squared_index() as f64;
            tau.powf(2.0 * alpha_reg - 1.0) * (4.0 * PI * PI * j + tau * tau).powf(-alpha_reg)
        }
        DomainKind::Neumann2d => {
            let k2 = mode.squared_index() as f64;
            tau.powf(2.0 * alpha_reg - 2.0) * (PI * PI * k2 + tau * tau).powf(-alpha_reg)
        }
    }
}

/// The `j_max` leading eigenpairs, ordered by `|k|^2` with lexicographic
/// tie-breaks (sine before cosine in 1D).
pub fn eigenpairs(kind: DomainKind, tau: f64, alpha_reg: f64, j_max: usize) -> Result<CovarianceSpectrum> {
    let d = kind.dim() as f64;
    if !(alpha_reg > d / 2.0) || !alpha_reg.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "regularity exponent must exceed d/2 = {}, got {alpha_reg}",
            d / 2.0
        )));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "inverse length scale must be positive, got {tau}"
        )));
    }
    if j_max == 0 {
        return Err(Error::InvalidParameter("need at least one mode".into()));
    }
    let mut modes: Vec<Mode> = match kind {
        DomainKind::Periodic1d => (1..=j_max.div_ceil(2))
            .flat_map(|j| [Mode::Periodic { j, cosine: false }, Mode::Periodic { j, cosine: true }])
            .take(j_max)
            .collect(),
        DomainKind::Neumann2d => {
            // The disc holding the first j_max lattice points fits in this box.
            let bound = 2 * (j_max as f64).sqrt().ceil() as usize + 1;
            let mut all: Vec<Mode> = (0..=bound)
                .flat_map(|k1| (0..=bound).map(move |k2| Mode::Neumann { k1, k2 }))
                .filter(|m| m.squared_index() > 0)
                .collect();
            all.sort_by_key(|m| match *m {
                Mode::Neumann { k1, k2 } => (m.squared_index(), k1, k2),
                Mode::Periodic { .. } => unreachable!(),
            });
            all.truncate(j_max);
            all
        }
    };
    modes.shrink_to_fit();
    let modes = modes
        .into_iter()
        .map(|m| (m, eigenvalue(kind, tau, alpha_reg, &m)))
        .collect();
    Ok(CovarianceSpectrum {
        domain_kind: kind,
        tau,
        alpha_reg,
        modes,
    })
}

/// KL coefficients for one draw: `j_max` i.i.d. standard normals.
pub fn draw_xi(master_seed: u64, stream_id: u64, j_max: usize) -> FeatureParam {
    FeatureParam {
        xi: rng::standard_normals(master_seed, stream_id, j_max),
    }
}

/// Whether `mode` is resolved on `grid` (strictly below the Nyquist wavenumber).
pub fn mode_fits(mode: &Mode, grid: &Grid) -> bool {
    match (mode, grid) {
        (Mode::Periodic { j, .. }, Grid::Periodic(g)) => 2 * j < g.n_unique(),
        (Mode::Neumann { k1, k2 }, Grid::Square(g)) => *k1 < g.cells() && *k2 < g.cells(),
        _ => false,
    }
}

/// Default truncation: every mode, in spectrum order, below the grid Nyquist
/// wavenumber.
pub fn nyquist_mode_count(kind: DomainKind, grid: &Grid) -> Result<usize> {
    match (kind, grid) {
        (DomainKind::Periodic1d, Grid::Periodic(g)) => Ok(2 * (g.n_unique() / 2 - 1)),
        (DomainKind::Neumann2d, Grid::Square(g)) => {
            let n = g.cells();
            let inside = (0..n)
                .map(|k1| (0..n).filter(|k2| k1 * k1 + k2 * k2 < n * n).count())
                .sum::<usize>();
            Ok(inside - 1)
        }
        _ => Err(Error::GridMismatch(format!("{kind:?} spectrum on {grid:?}"))),
    }
}

/// Drops the modes (and matching coefficients) that `grid` cannot resolve.
/// Pointwise the kept expansion is unchanged, so evaluation on a coarse grid
/// sees the band-limited part of the same random field.
pub fn truncate_to_grid(
    spectrum: &CovarianceSpectrum,
    param: &FeatureParam,
    grid: &Grid,
) -> (CovarianceSpectrum, FeatureParam) {
    let (modes, xi): (Vec<_>, Vec<_>) = spectrum
        .modes
        .iter()
        .zip(&param.xi)
        .filter(|((m, _), _)| mode_fits(m, grid))
        .map(|(m, x)| (*m, *x))
        .unzip();
    (
        CovarianceSpectrum {
            modes,
            ..spectrum.clone()
        },
        FeatureParam { xi },
    )
}

/// `g = sum_l xi_l sqrt(lambda_l) phi_l` on the grid nodes.
///
/// 1D uses an inverse FFT of the Hermitian coefficient vector; 2D sums the
/// separable cosine products as two dense passes.
pub fn sample_field(spectrum: &CovarianceSpectrum, param: &FeatureParam, grid: &Grid) -> Result<GridFunction> {
    if param.len() > spectrum.modes.len() {
        return Err(Error::InvalidParameter(format!(
            "{} coefficients for a spectrum of {} modes",
            param.len(),
            spectrum.modes.len()
        )));
    }
    let used = &spectrum.modes[..param.len()];
    if let Some((m, _)) = used.iter().find(|(m, _)| !mode_fits(m, grid)) {
        return Err(Error::TooFewModes {
            needed: param.len(),
            reason: format!("{m:?} is at or above the Nyquist wavenumber of {grid:?}"),
        });
    }
    match *grid {
        Grid::Periodic(g) => {
            let n = g.n_unique();
            let mut coeff = vec![Complex64::new(0.0, 0.0); n];
            for ((mode, lambda), &xi) in used.iter().zip(&param.xi) {
                let Mode::Periodic { j, cosine } = *mode else {
                    unreachable!("checked by mode_fits")
                };
                // sqrt(2) cos = (e + e*) / sqrt(2); sqrt(2) sin = (e - e*) / (i sqrt(2))
                let amp = xi * lambda.sqrt() / SQRT_2;
                let z = if cosine {
                    Complex64::new(amp, 0.0)
                } else {
                    Complex64::new(0.0, -amp)
                };
                coeff[j] += z;
                coeff[n - j] += z.conj();
            }
            FftPlanner::new().plan_fft_inverse(n).process(&mut coeff);
            Ok(GridFunction::from_parts(
                *grid,
                coeff.into_iter().map(|c| c.re).collect(),
            ))
        }
        Grid::Square(g) => {
            let r = g.r();
            let h = g.spacing();
            let kmax = used
                .iter()
                .map(|(m, _)| match *m {
                    Mode::Neumann { k1, k2 } => k1.max(k2),
                    Mode::Periodic { .. } => unreachable!(),
                })
                .max()
                .unwrap_or(0);
            let nk = kmax + 1;
            let mut c = vec![0.0; nk * nk];
            for ((mode, lambda), &xi) in used.iter().zip(&param.xi) {
                let Mode::Neumann { k1, k2 } = *mode else {
                    unreachable!()
                };
                c[k1 * nk + k2] += xi * lambda.sqrt() * mode.normalization();
            }
            let cos_table: Vec<f64> = (0..nk)
                .flat_map(|k| (0..r).map(move |i| (k as f64 * PI * i as f64 * h).cos()))
                .collect();
            // t[k1][j] = sum_k2 c[k1][k2] cos(k2 pi x_j)
            let mut t = vec![0.0; nk * r];
            for k1 in 0..nk {
                for k2 in 0..nk {
                    let ck = c[k1 * nk + k2];
                    if ck == 0.0 {
                        continue;
                    }
                    let row = &cos_table[k2 * r..(k2 + 1) * r];
                    for (tv, cv) in t[k1 * r..(k1 + 1) * r].iter_mut().zip(row) {
                        *tv += ck * cv;
                    }
                }
            }
            let mut values = vec![0.0; r * r];
            for k1 in 0..nk {
                let trow = &t[k1 * r..(k1 + 1) * r];
                for i in 0..r {
                    let ci = cos_table[k1 * r + i];
                    for (v, tv) in values[i * r..(i + 1) * r].iter_mut().zip(trow) {
                        *v += ci * tv;
                    }
                }
            }
            Ok(GridFunction::from_parts(*grid, values))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::restrict;

    /// Independent oracle: direct evaluation of the truncated expansion.
    fn direct_sum(spec: &CovarianceSpectrum, p: &FeatureParam, grid: Grid) -> GridFunction {
        GridFunction::from_fn(grid, |x| {
            spec.modes
                .iter()
                .zip(&p.xi)
                .map(|((m, l), xi)| xi * l.sqrt() * m.eval(x))
                .sum()
        })
    }

    #[test]
    fn periodic_eigenvalue_value() {
        let s = eigenpairs(DomainKind::Periodic1d, 7.0, 2.5, 4).unwrap();
        let expected = 7f64.powi(4) * (4.0 * PI * PI + 49.0).powf(-2.5);
        assert!((s.modes[0].1 - expected).abs() < 1e-15);
        assert!((s.modes[0].1 - 0.0326).abs() < 5e-5);
        // lambda_{2j} == lambda_{2j-1}
        assert_eq!(s.modes[0].1, s.modes[1].1);
        assert_eq!(s.modes[2].1, s.modes[3].1);
        assert_eq!(s.modes[0].0, Mode::Periodic { j: 1, cosine: false });
    }

    #[test]
    fn neumann_eigenvalue_value() {
        let s = eigenpairs(DomainKind::Neumann2d, 3.0, 2.0, 10).unwrap();
        assert_eq!(s.modes[0].0, Mode::Neumann { k1: 0, k2: 1 });
        assert_eq!(s.modes[1].0, Mode::Neumann { k1: 1, k2: 0 });
        let expected = 9.0 * (PI * PI + 9.0).powi(-2);
        assert!((s.modes[1].1 - expected).abs() < 1e-15);
        assert!((expected - 0.025277).abs() < 1e-6);
    }

    #[test]
    fn ordering_nonincreasing() {
        for kind in [DomainKind::Periodic1d, DomainKind::Neumann2d] {
            let s = eigenpairs(kind, 3.0, 2.0, 500).unwrap();
            assert_eq!(s.modes.len(), 500);
            assert!(s.modes.windows(2).all(|w| w[0].1 >= w[1].1));
            assert!(s.modes.iter().all(|(_, l)| *l > 0.0));
        }
    }

    #[test]
    fn rejects_invalid_regularity() {
        assert!(eigenpairs(DomainKind::Periodic1d, 7.0, 0.5, 4).is_err());
        assert!(eigenpairs(DomainKind::Neumann2d, 3.0, 1.0, 4).is_err());
        assert!(eigenpairs(DomainKind::Neumann2d, 0.0, 2.0, 4).is_err());
    }

    #[test]
    fn draw_statistics() {
        let a = draw_xi(11, 3, 100_000);
        assert_eq!(a, draw_xi(11, 3, 100_000));
        let n = a.len() as f64;
        let mean = a.xi.iter().sum::<f64>() / n;
        let var = a.xi.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((0.97..=1.03).contains(&var), "var {var}");
    }

    #[test]
    fn fft_synthesis_matches_direct_sum() {
        let grid = Grid::periodic(128).unwrap();
        let j = nyquist_mode_count(DomainKind::Periodic1d, &grid).unwrap();
        let s = eigenpairs(DomainKind::Periodic1d, 7.0, 2.5, j).unwrap();
        let p = draw_xi(5, 1, j);
        let fast = sample_field(&s, &p, &grid).unwrap();
        let slow = direct_sum(&s, &p, grid);
        let rel = fast.sub(&slow).unwrap().max_abs() / slow.max_abs();
        assert!(rel < 1e-10, "{rel}");
    }

    #[test]
    fn separable_synthesis_matches_direct_sum() {
        let grid = Grid::square(17).unwrap();
        let j = nyquist_mode_count(DomainKind::Neumann2d, &grid).unwrap();
        let s = eigenpairs(DomainKind::Neumann2d, 3.0, 2.0, j).unwrap();
        let p = draw_xi(5, 2, j);
        let fast = sample_field(&s, &p, &grid).unwrap();
        let slow = direct_sum(&s, &p, grid);
        let rel = fast.sub(&slow).unwrap().max_abs() / slow.max_abs();
        assert!(rel < 1e-10, "{rel}");
    }

    #[test]
    fn zero_and_single_mode() {
        let grid = Grid::periodic(64).unwrap();
        let s = eigenpairs(DomainKind::Periodic1d, 7.0, 2.5, 20).unwrap();
        let zero = sample_field(&s, &FeatureParam::zeros(20), &grid).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        for l in [0, 5, 19] {
            let mut p = FeatureParam::zeros(20);
            p.xi[l] = 1.0;
            let f = sample_field(&s, &p, &grid).unwrap();
            let (m, lam) = s.modes[l];
            let expect = GridFunction::from_fn(grid, |x| lam.sqrt() * m.eval(x));
            assert!(f.sub(&expect).unwrap().max_abs() < 1e-12);
        }
        let g2 = Grid::square(9).unwrap();
        let s2 = eigenpairs(DomainKind::Neumann2d, 3.0, 2.0, 20).unwrap();
        let mut p = FeatureParam::zeros(20);
        p.xi[7] = 1.0;
        let f = sample_field(&s2, &p, &g2).unwrap();
        let (m, lam) = s2.modes[7];
        let expect = GridFunction::from_fn(g2, |x| lam.sqrt() * m.eval(x));
        assert!(f.sub(&expect).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn too_coarse_grid_is_an_error() {
        let grid = Grid::periodic(16).unwrap();
        let s = eigenpairs(DomainKind::Periodic1d, 7.0, 2.5, 40).unwrap();
        assert!(matches!(
            sample_field(&s, &draw_xi(1, 1, 40), &grid),
            Err(Error::TooFewModes { .. })
        ));
        let (ts, tp) = truncate_to_grid(&s, &draw_xi(1, 1, 40), &grid);
        assert_eq!(ts.modes.len(), 14);
        assert!(sample_field(&ts, &tp, &grid).is_ok());
    }

    #[test]
    fn zero_mean_and_resolution_consistency() {
        let coarse = Grid::periodic(256).unwrap();
        let fine = Grid::periodic(512).unwrap();
        let j = nyquist_mode_count(DomainKind::Periodic1d, &coarse).unwrap();
        let s = eigenpairs(DomainKind::Periodic1d, 5.0, 2.0, j).unwrap();
        let p = draw_xi(2, 9, j);
        let a = sample_field(&s, &p, &coarse).unwrap();
        let b = restrict(&sample_field(&s, &p, &fine).unwrap(), 2).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() <= 1e-10 * a.max_abs());
        assert!(a.integral().abs() < 1e-12);

        let c2 = Grid::square(33).unwrap();
        let f2 = Grid::square(65).unwrap();
        let j = nyquist_mode_count(DomainKind::Neumann2d, &c2).unwrap();
        let s = eigenpairs(DomainKind::Neumann2d, 7.5, 2.0, j).unwrap();
        let p = draw_xi(2, 10, j);
        let a = sample_field(&s, &p, &c2).unwrap();
        let b = restrict(&sample_field(&s, &p, &f2).unwrap(), 2).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() <= 1e-10 * a.max_abs());
        assert!(a.integral().abs() < 1e-12);
    }

    #[test]
    fn pointwise_variance_and_covariance() {
        let grid = Grid::periodic(64).unwrap();
        let j = nyquist_mode_count(DomainKind::Periodic1d, &grid).unwrap();
        let s = eigenpairs(DomainKind::Periodic1d, 7.0, 2.5, j).unwrap();
        let (x0, x1) = (5usize, 9usize);
        let xs = [x0 as f64 / 64.0, x1 as f64 / 64.0];
        let kernel = |a: f64, b: f64| -> f64 { s.modes.iter().map(|(m, l)| l * m.eval(&[a]) * m.eval(&[b])).sum() };
        let draws = 10_000;
        let (mut v0, mut c01) = (0.0, 0.0);
        for i in 0..draws {
            let f = sample_field(&s, &draw_xi(77, i, j), &grid).unwrap();
            v0 += f.values()[x0].powi(2);
            c01 += f.values()[x0] * f.values()[x1];
        }
        v0 /= draws as f64;
        c01 /= draws as f64;
        let var = kernel(xs[0], xs[0]);
        assert!((v0 - var).abs() < 0.05 * var, "{v0} vs {var}");
        // Monte Carlo standard error of a product of two unit-correlated normals.
        let cov = kernel(xs[0], xs[1]);
        let se = ((var * kernel(xs[1], xs[1]) + cov * cov) / draws as f64).sqrt();
        assert!((c01 - cov).abs() < 4.0 * se, "{c01} vs {cov}");
    }

    #[test]
    fn nyquist_counts() {
        let g = Grid::periodic(128).unwrap();
        assert_eq!(nyquist_mode_count(DomainKind::Periodic1d, &g).unwrap(), 126);
        let g = Grid::square(17).unwrap();
        let n = nyquist_mode_count(DomainKind::Neumann2d, &g).unwrap();
        let s = eigenpairs(DomainKind::Neumann2d, 3.0, 2.0, n).unwrap();
        assert!(s.modes.iter().all(|(m, _)| mode_fits(m, &g)));
        let s1 = eigenpairs(DomainKind::Neumann2d, 3.0, 2.0, n + 1).unwrap();
        assert!(!mode_fits(&s1.modes[n].0, &g));
    }
}
