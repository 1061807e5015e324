//! Viscous Burgers on the unit torus, `u_t + (u^2/2)_x = eps u_xx`, by a
//! Fourier pseudospectral discretization with integrating-factor RK4 in time.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dataset::{BurgersManifest, Dataset, DatasetManifest};
use crate::error::{Error, Result};
use crate::grf::{self, DomainKind};
use crate::grid::{Grid, Grid1D, GridFunction};
use crate::rng::{stream_id, StreamKind};

pub const DEFAULT_TAU: f64 = 7.0;
pub const DEFAULT_ALPHA: f64 = 2.5;
pub const DEFAULT_VISCOSITY: f64 = 1e-2;

/// Tolerance on the spatial mean of an initial condition.
pub const MEAN_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurgersConfig {
    pub viscosity: f64,
    pub t_final: f64,
    pub dt: f64,
    pub grid: Grid1D,
    pub dealias: bool,
}

impl BurgersConfig {
    /// Time step `1e-4` at 1024 unique nodes, scaled with the mesh spacing.
    pub fn default_dt(grid: Grid1D) -> f64 {
        1e-4 * 1024.0 / grid.n_unique() as f64
    }

    pub fn new(grid: Grid1D, viscosity: f64, t_final: f64) -> Self {
        Self {
            viscosity,
            t_final,
            dt: Self::default_dt(grid),
            grid,
            dealias: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.viscosity > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "viscosity must be positive, got {}",
                self.viscosity
            )));
        }
        if !(self.t_final > 0.0) || !(self.dt > 0.0) || self.dt > self.t_final {
            return Err(Error::InvalidParameter(format!(
                "need 0 < dt <= T, got dt = {}, T = {}",
                self.dt, self.t_final
            )));
        }
        Ok(())
    }
}

struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `-i k / 2` times the dealiasing mask (`k = 2 pi * wavenumber`).
    flux: Vec<Complex64>,
    mask: Vec<f64>,
    /// `-eps k^2`.
    decay: Vec<f64>,
}

impl Spectral {
    fn new(cfg: &BurgersConfig) -> Self {
        let n = cfg.grid.n_unique();
        let mut planner = FftPlanner::new();
        let wavenumber = |k: usize| -> i64 {
            if k <= n / 2 {
                k as i64
            } else {
                k as i64 - n as i64
            }
        };
        let cutoff = n as f64 / 3.0;
        let mask: Vec<f64> = (0..n)
            .map(|k| {
                let w = wavenumber(k);
                let keep = !cfg.dealias || (w.unsigned_abs() as f64) < cutoff;
                // The Nyquist mode has no well-defined odd derivative.
                if keep && 2 * k != n {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let flux = (0..n)
            .map(|k| Complex64::new(0.0, -PI * wavenumber(k) as f64) * mask[k])
            .collect();
        let decay = (0..n)
            .map(|k| {
                let kk = 2.0 * PI * wavenumber(k) as f64;
                -cfg.viscosity * kk * kk
            })
            .collect();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            flux,
            mask,
            decay,
        }
    }

    /// `-(u^2 / 2)_x` in Fourier space, with dealiasing on input and output.
    fn nonlinear(&self, v: &[Complex64], out: &mut [Complex64], scratch: &mut [Complex64]) {
        let inv_n = 1.0 / self.n as f64;
        for ((s, x), m) in scratch.iter_mut().zip(v).zip(&self.mask) {
            *s = x * *m;
        }
        self.inverse.process(scratch);
        for s in scratch.iter_mut() {
            let u = s.re * inv_n;
            *s = Complex64::new(u * u, 0.0);
        }
        self.forward.process(scratch);
        for ((o, s), f) in out.iter_mut().zip(scratch.iter()).zip(&self.flux) {
            *o = f * s;
        }
    }

    /// One integrating-factor RK4 step of size `dt`.
    fn step(&self, u: &mut [Complex64], dt: f64, work: &mut Work) {
        let n = self.n;
        let half: Vec<f64> = self.decay.iter().map(|d| (0.5 * dt * d).exp()).collect();
        let Work {
            k1,
            k2,
            k3,
            k4,
            tmp,
            scratch,
        } = work;
        self.nonlinear(u, k1, scratch);
        for i in 0..n {
            tmp[i] = half[i] * (u[i] + 0.5 * dt * k1[i]);
        }
        self.nonlinear(tmp, k2, scratch);
        for i in 0..n {
            tmp[i] = half[i] * u[i] + 0.5 * dt * k2[i];
        }
        self.nonlinear(tmp, k3, scratch);
        for i in 0..n {
            let full = half[i] * half[i];
            tmp[i] = full * u[i] + dt * half[i] * k3[i];
        }
        self.nonlinear(tmp, k4, scratch);
        for i in 0..n {
            let e = half[i];
            let full = e * e;
            u[i] = full * u[i] + dt / 6.0 * (full * k1[i] + 2.0 * e * (k2[i] + k3[i]) + k4[i]);
        }
    }
}

struct Work {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Work {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z.clone(),
            scratch: z,
        }
    }
}

/// `u(T)` for the initial condition `a`. The last step is shortened so the
/// solution lands exactly on `T`.
pub fn solve_burgers(a: &GridFunction, cfg: &BurgersConfig) -> Result<GridFunction> {
    Ok(solve_burgers_trajectory(a, cfg, 1)?.pop().expect("one horizon"))
}

/// `u(T), u(2T), ..., u(horizons * T)`.
pub fn solve_burgers_trajectory(a: &GridFunction, cfg: &BurgersConfig, horizons: usize) -> Result<Vec<GridFunction>> {
    cfg.validate()?;
    if *a.grid() != Grid::Periodic(cfg.grid) {
        return Err(Error::GridMismatch(format!(
            "initial condition on {:?}, solver configured for {:?}",
            a.grid(),
            cfg.grid
        )));
    }
    let mean = a.integral();
    if mean.abs() > MEAN_TOLERANCE * a.max_abs().max(1.0) {
        return Err(Error::NonZeroMean(mean));
    }
    let spec = Spectral::new(cfg);
    let n = spec.n;
    let mut u: Vec<Complex64> = a.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    spec.forward.process(&mut u);
    let mut work = Work::new(n);

    let full_steps = (cfg.t_final / cfg.dt).floor() as usize;
    let remainder = cfg.t_final - full_steps as f64 * cfg.dt;
    let mut out = Vec::with_capacity(horizons);
    let mut time = 0.0;
    for _ in 0..horizons {
        for _ in 0..full_steps {
            spec.step(&mut u, cfg.dt, &mut work);
            time += cfg.dt;
            check_finite(&u, time)?;
        }
        if remainder > 1e-12 * cfg.t_final {
            spec.step(&mut u, remainder, &mut work);
            time += remainder;
            check_finite(&u, time)?;
        }
        let mut phys = u.clone();
        spec.inverse.process(&mut phys);
        let inv_n = 1.0 / n as f64;
        out.push(GridFunction::from_parts(
            *a.grid(),
            phys.iter().map(|c| c.re * inv_n).collect(),
        ));
    }
    Ok(out)
}

fn check_finite(u: &[Complex64], time: f64) -> Result<()> {
    if u.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite { time });
    }
    Ok(())
}

/// Prior `N(0, C)` for initial conditions on the periodic grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurgersPrior {
    pub tau: f64,
    pub alpha_reg: f64,
}

impl Default for BurgersPrior {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            alpha_reg: DEFAULT_ALPHA,
        }
    }
}

/// Initial condition `i` of the dataset seeded by `master_seed`.
pub fn sample_initial_condition(
    prior: &BurgersPrior,
    grid: Grid1D,
    master_seed: u64,
    index: usize,
) -> Result<GridFunction> {
    let g = Grid::Periodic(grid);
    let j = grf::nyquist_mode_count(DomainKind::Periodic1d, &g)?;
    let spectrum = grf::eigenpairs(DomainKind::Periodic1d, prior.tau, prior.alpha_reg, j)?;
    let xi = grf::draw_xi(master_seed, stream_id(StreamKind::Input, 0, index as u64), j);
    grf::sample_field(&spectrum, &xi, &g)
}

/// `n` pairs `(a_i, u_i(T))`; additional horizons give `u_i(jT)` in the
/// returned vector (index 0 is `T`).
pub fn gen_burgers_datasets(
    n: usize,
    prior: &BurgersPrior,
    cfg: &BurgersConfig,
    master_seed: u64,
    horizons: usize,
) -> Result<Vec<Dataset>> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    if horizons == 0 {
        return Err(Error::InvalidParameter("need at least one horizon".into()));
    }
    cfg.validate()?;
    let grid = cfg.grid;
    let j_max = grf::nyquist_mode_count(DomainKind::Periodic1d, &Grid::Periodic(grid))?;
    let pairs: Vec<(GridFunction, Vec<GridFunction>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = sample_initial_condition(prior, grid, master_seed, i)?;
            let traj = solve_burgers_trajectory(&a, cfg, horizons)?;
            Ok((a, traj))
        })
        .collect::<Result<Vec<_>>>()?;
    let inputs: Vec<GridFunction> = pairs.iter().map(|(a, _)| a.clone()).collect();
    (0..horizons)
        .map(|h| {
            let manifest = DatasetManifest::Burgers(BurgersManifest {
                n,
                epsilon: cfg.viscosity,
                t_final: cfg.t_final * (h + 1) as f64,
                dt: cfg.dt,
                dealias: cfg.dealias,
                tau: prior.tau,
                alpha_reg: prior.alpha_reg,
                j_max,
                seed: master_seed,
                k: grid.mesh_size(),
                k_generated: grid.mesh_size(),
            });
            let outputs = pairs.iter().map(|(_, t)| t[h].clone()).collect();
            Dataset::new(inputs.clone(), outputs, manifest)
        })
        .collect()
}

pub fn gen_burgers_dataset(n: usize, prior: &BurgersPrior, cfg: &BurgersConfig, master_seed: u64) -> Result<Dataset> {
    Ok(gen_burgers_datasets(n, prior, cfg, master_seed, 1)?.remove(0))
}
