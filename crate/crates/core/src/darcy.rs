//! Darcy flow `-div(a grad u) = f` on the unit square with zero Dirichlet data:
//! level-set coefficients, the sine-transform Poisson solver, the
//! preconditioned CG solve, and Neumann heat-flow smoothing of coefficients.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dataset::{DarcyManifest, Dataset, DatasetManifest};
use crate::error::{Error, Result};
use crate::grf::{self, DomainKind};
use crate::grid::{Grid, Grid2D, GridFunction};
use crate::rng::{stream_id, StreamKind};

pub const DEFAULT_A_PLUS: f64 = 12.0;
pub const DEFAULT_A_MINUS: f64 = 3.0;
pub const DEFAULT_TAU: f64 = 3.0;
pub const DEFAULT_ALPHA: f64 = 2.0;

fn square(grid: &Grid) -> Result<Grid2D> {
    match grid {
        Grid::Square(g) => Ok(*g),
        other => Err(Error::GridMismatch(format!("expected a square grid, got {other:?}"))),
    }
}

/// DST-I of every length-`n - 1` row, via an odd extension to length `2n`.
struct SineTransform {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl SineTransform {
    fn new(n: usize) -> Self {
        Self {
            n,
            fft: FftPlanner::new().plan_fft_forward(2 * n),
        }
    }

    /// In place on `rows` contiguous rows of length `n - 1`:
    /// `S_k = sum_m x_m sin(pi k m / n)`.
    fn apply_rows(&self, data: &mut [f64], buf: &mut [Complex64]) {
        let n = self.n;
        let m = n - 1;
        for row in data.chunks_exact_mut(m) {
            buf[0] = Complex64::new(0.0, 0.0);
            buf[n] = Complex64::new(0.0, 0.0);
            for (j, &v) in row.iter().enumerate() {
                buf[j + 1] = Complex64::new(v, 0.0);
                buf[2 * n - 1 - j] = Complex64::new(-v, 0.0);
            }
            self.fft.process(buf);
            for (k, v) in row.iter_mut().enumerate() {
                *v = -0.5 * buf[k + 1].im;
            }
        }
    }
}

fn transpose(data: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            out[j * m + i] = data[i * m + j];
        }
    }
    out
}

/// Exact solver for the 5-point discretization of `-Laplacian u = rhs` with zero
/// Dirichlet data on a [`Grid2D`], by diagonalization in the sine basis.
pub struct FastPoisson {
    grid: Grid2D,
    dst: SineTransform,
    /// Eigenvalues of the negative 5-point Laplacian, interior layout.
    eigenvalues: Vec<f64>,
}

impl FastPoisson {
    pub fn new(grid: Grid2D) -> Self {
        let n = grid.cells();
        let m = n - 1;
        let h = grid.spacing();
        let s: Vec<f64> = (1..n)
            .map(|k| {
                let v = (k as f64 * std::f64::consts::PI * h / 2.0).sin();
                4.0 / (h * h) * v * v
            })
            .collect();
        let mut eigenvalues = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                eigenvalues.push(s[i] + s[j]);
            }
        }
        Self {
            grid,
            dst: SineTransform::new(n),
            eigenvalues,
        }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    /// Solves on interior values (row-major `(r-2)^2`), in place.
    fn solve_interior(&self, interior: &mut Vec<f64>) {
        let n = self.grid.cells();
        let m = n - 1;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        self.dst.apply_rows(interior, &mut buf);
        let mut t = transpose(interior, m);
        self.dst.apply_rows(&mut t, &mut buf);
        // Inverse DST-I is (2 / n) times the forward transform, per axis.
        let scale = (2.0 / n as f64) * (2.0 / n as f64);
        for (v, lam) in t.iter_mut().zip(transpose(&self.eigenvalues, m)) {
            *v *= scale / lam;
        }
        self.dst.apply_rows(&mut t, &mut buf);
        *interior = transpose(&t, m);
        self.dst.apply_rows(interior, &mut buf);
    }

    /// Solution with zero boundary values; boundary entries of `rhs` are ignored.
    pub fn solve(&self, rhs: &GridFunction) -> Result<GridFunction> {
        let g = square(rhs.grid())?;
        if g != self.grid {
            return Err(Error::GridMismatch(format!(
                "rhs on {g:?}, solver built for {:?}",
                self.grid
            )));
        }
        let mut interior = extract_interior(g, rhs.values());
        self.solve_interior(&mut interior);
        Ok(GridFunction::from_parts(*rhs.grid(), embed_interior(g, &interior)))
    }
}

fn extract_interior(g: Grid2D, values: &[f64]) -> Vec<f64> {
    let r = g.r();
    let mut out = Vec::with_capacity((r - 2) * (r - 2));
    for i in 1..r - 1 {
        out.extend_from_slice(&values[i * r + 1..i * r + r - 1]);
    }
    out
}

fn embed_interior(g: Grid2D, interior: &[f64]) -> Vec<f64> {
    let r = g.r();
    let m = r - 2;
    let mut out = vec![0.0; r * r];
    for i in 0..m {
        out[(i + 1) * r + 1..(i + 1) * r + 1 + m].copy_from_slice(&interior[i * m..(i + 1) * m]);
    }
    out
}

/// Solves `-Laplacian_h u = rhs`, `u = 0` on the boundary.
pub fn fast_poisson_dirichlet(rhs: &GridFunction) -> Result<GridFunction> {
    FastPoisson::new(square(rhs.grid())?).solve(rhs)
}

/// The negative 5-point Laplacian at interior nodes (zero on the boundary).
pub fn neg_laplacian_5pt(u: &GridFunction) -> Result<GridFunction> {
    let g = square(u.grid())?;
    let r = g.r();
    let inv_h2 = 1.0 / (g.spacing() * g.spacing());
    let v = u.values();
    let mut out = vec![0.0; r * r];
    for i in 1..r - 1 {
        for j in 1..r - 1 {
            let c = i * r + j;
            out[c] = inv_h2 * (4.0 * v[c] - v[c - r] - v[c + r] - v[c - 1] - v[c + 1]);
        }
    }
    Ok(GridFunction::from_parts(*u.grid(), out))
}

/// Gradient by centered differences inside and one-sided differences on the
/// boundary. Returns `(d/dx1, d/dx2)`, where `x1` follows the first index.
pub fn gradient(u: &GridFunction) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = square(u.grid())?;
    let r = g.r();
    let h = g.spacing();
    let v = u.values();
    let mut gx = vec![0.0; r * r];
    let mut gy = vec![0.0; r * r];
    let diff = |lo: f64, hi: f64, span: f64| (hi - lo) / (span * h);
    for i in 0..r {
        for j in 0..r {
            let c = i * r + j;
            gx[c] = if i == 0 {
                diff(v[c], v[c + r], 1.0)
            } else if i == r - 1 {
                diff(v[c - r], v[c], 1.0)
            } else {
                diff(v[c - r], v[c + r], 2.0)
            };
            gy[c] = if j == 0 {
                diff(v[c], v[c + 1], 1.0)
            } else if j == r - 1 {
                diff(v[c - 1], v[c], 1.0)
            } else {
                diff(v[c - 1], v[c + 1], 2.0)
            };
        }
    }
    Ok((gx, gy))
}

/// High-contrast level-set prior: `a = a_plus` where the underlying Gaussian
/// field is `>= 0`, `a_minus` where it is negative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSetPrior {
    pub a_plus: f64,
    pub a_minus: f64,
    pub tau: f64,
    pub alpha_reg: f64,
}

impl Default for LevelSetPrior {
    fn default() -> Self {
        Self {
            a_plus: DEFAULT_A_PLUS,
            a_minus: DEFAULT_A_MINUS,
            tau: DEFAULT_TAU,
            alpha_reg: DEFAULT_ALPHA,
        }
    }
}

impl LevelSetPrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_minus > 0.0 && self.a_minus <= self.a_plus && self.a_plus.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < a_minus <= a_plus < inf, got a_minus = {}, a_plus = {}",
                self.a_minus, self.a_plus
            )));
        }
        Ok(())
    }

    /// Pointwise threshold map.
    pub fn threshold(&self, g: f64) -> f64 {
        if g >= 0.0 {
            self.a_plus
        } else {
            self.a_minus
        }
    }
}

pub fn sample_levelset_coefficient(
    prior: &LevelSetPrior,
    grid: Grid2D,
    master_seed: u64,
    index: usize,
) -> Result<GridFunction> {
    prior.validate()?;
    let g = Grid::Square(grid);
    let j = grf::nyquist_mode_count(DomainKind::Neumann2d, &g)?;
    let spectrum = grf::eigenpairs(DomainKind::Neumann2d, prior.tau, prior.alpha_reg, j)?;
    let xi = grf::draw_xi(master_seed, stream_id(StreamKind::Input, 0, index as u64), j);
    let field = grf::sample_field(&spectrum, &xi, &g)?;
    Ok(field.map(|v| prior.threshold(v)))
}

/// Explicit heat-flow mollifier `v_t = eta Laplacian v` with zero-flux walls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub eta: f64,
    pub dt: f64,
    pub steps: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            eta: 1e-4,
            dt: 0.03,
            steps: 34,
        }
    }
}

/// Forward Euler on the 5-point Laplacian with mirrored ghost nodes. Conserves
/// the trapezoid-rule integral exactly.
pub fn smooth_coefficient(a: &GridFunction, cfg: &SmoothingConfig) -> Result<GridFunction> {
    let g = square(a.grid())?;
    let r = g.r();
    let h = g.spacing();
    let ratio = cfg.eta * cfg.dt / (h * h);
    if ratio > 0.25 {
        return Err(Error::InvalidParameter(format!(
            "explicit smoothing unstable at r = {r}: eta dt / h^2 = {ratio} > 1/4"
        )));
    }
    let mut v = a.values().to_vec();
    let mut next = vec![0.0; r * r];
    let mirror = |k: usize, d: isize| -> usize {
        let t = k as isize + d;
        if t < 0 {
            1
        } else if t as usize >= r {
            r - 2
        } else {
            t as usize
        }
    };
    for _ in 0..cfg.steps {
        for i in 0..r {
            let (im, ip) = (mirror(i, -1), mirror(i, 1));
            for j in 0..r {
                let (jm, jp) = (mirror(j, -1), mirror(j, 1));
                let c = v[i * r + j];
                let lap = v[im * r + j] + v[ip * r + j] + v[i * r + jm] + v[i * r + jp] - 4.0 * c;
                next[i * r + j] = c + ratio * lap;
            }
        }
        std::mem::swap(&mut v, &mut next);
    }
    Ok(GridFunction::from_parts(*a.grid(), v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceAverage {
    Arithmetic,
    Harmonic,
}

impl FaceAverage {
    fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            FaceAverage::Arithmetic => 0.5 * (a + b),
            FaceAverage::Harmonic => 2.0 * a * b / (a + b),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FaceAverage::Arithmetic => "arithmetic",
            FaceAverage::Harmonic => "harmonic",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Forcing {
    Constant(f64),
    Field(GridFunction),
}

impl Forcing {
    pub fn on(&self, grid: &Grid) -> Result<GridFunction> {
        match self {
            Forcing::Constant(c) => Ok(GridFunction::from_fn(*grid, |_| *c)),
            Forcing::Field(f) => {
                if f.grid() == grid {
                    Ok(f.clone())
                } else {
                    f.restrict(f.grid().factor_to(grid)?)
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Forcing::Constant(c) => format!("constant:{c}"),
            Forcing::Field(_) => "field".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DarcyConfig {
    pub grid: Grid2D,
    pub forcing: Forcing,
    pub cg_tolerance: f64,
    pub max_iterations: usize,
    pub face_average: FaceAverage,
    pub smoothing: SmoothingConfig,
}

impl DarcyConfig {
    pub fn new(grid: Grid2D) -> Self {
        Self {
            grid,
            forcing: Forcing::Constant(1.0),
            cg_tolerance: 1e-10,
            max_iterations: 500,
            face_average: FaceAverage::Arithmetic,
            smoothing: SmoothingConfig::default(),
        }
    }

    /// Same settings on another grid.
    pub fn with_grid(&self, grid: Grid2D) -> Self {
        Self { grid, ..self.clone() }
    }
}

/// Outcome details of a CG solve.
#[derive(Clone, Copy, Debug)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Face coefficients: `x_faces[i * r + j]` joins `(i, j)`-`(i+1, j)`,
/// `y_faces[i * r + j]` joins `(i, j)`-`(i, j+1)`.
struct Faces {
    r: usize,
    inv_h2: f64,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Faces {
    fn new(g: Grid2D, a: &[f64], avg: FaceAverage) -> Self {
        let r = g.r();
        let mut x = vec![0.0; r * r];
        let mut y = vec![0.0; r * r];
        for i in 0..r {
            for j in 0..r {
                let c = i * r + j;
                if i + 1 < r {
                    x[c] = avg.combine(a[c], a[c + r]);
                }
                if j + 1 < r {
                    y[c] = avg.combine(a[c], a[c + 1]);
                }
            }
        }
        Self {
            r,
            inv_h2: 1.0 / (g.spacing() * g.spacing()),
            x,
            y,
        }
    }

    /// Applies the flux operator to an interior vector.
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let r = self.r;
        let m = r - 2;
        let at = |i: usize, j: usize| -> f64 {
            if i == 0 || j == 0 || i == r - 1 || j == r - 1 {
                0.0
            } else {
                u[(i - 1) * m + (j - 1)]
            }
        };
        for i in 1..r - 1 {
            for j in 1..r - 1 {
                let c = i * r + j;
                let uc = at(i, j);
                let flux = self.x[c] * (uc - at(i + 1, j))
                    + self.x[c - r] * (uc - at(i - 1, j))
                    + self.y[c] * (uc - at(i, j + 1))
                    + self.y[c - 1] * (uc - at(i, j - 1));
                out[(i - 1) * m + (j - 1)] = self.inv_h2 * flux;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conservative 5-point discretization with face-averaged coefficients,
/// solved by CG preconditioned with the fast Poisson solver.
pub fn solve_darcy(a: &GridFunction, cfg: &DarcyConfig) -> Result<GridFunction> {
    solve_darcy_with_report(a, cfg).map(|(u, _)| u)
}

pub fn solve_darcy_with_report(a: &GridFunction, cfg: &DarcyConfig) -> Result<(GridFunction, CgReport)> {
    let g = square(a.grid())?;
    if g != cfg.grid {
        return Err(Error::GridMismatch(format!(
            "coefficient on {g:?}, solver configured for {:?}",
            cfg.grid
        )));
    }
    if let Some(&bad) = a.values().iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::NonPositiveCoefficient(bad));
    }
    if !(cfg.cg_tolerance > 0.0) {
        return Err(Error::InvalidParameter("cg tolerance must be positive".into()));
    }
    let f = cfg.forcing.on(a.grid())?;
    let b = extract_interior(g, f.values());
    let faces = Faces::new(g, a.values(), cfg.face_average);
    let precond = FastPoisson::new(g);

    let len = b.len();
    let b_norm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; len];
    if b_norm == 0.0 {
        return Ok((
            GridFunction::zeros(*a.grid()),
            CgReport {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut res = b.clone();
    let mut z = res.clone();
    precond.solve_interior(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&res, &z);
    let mut ap = vec![0.0; len];
    let mut rel = 1.0;
    for it in 1..=cfg.max_iterations {
        faces.apply(&p, &mut ap);
        let step = rz / dot(&p, &ap);
        for k in 0..len {
            x[k] += step * p[k];
            res[k] -= step * ap[k];
        }
        rel = dot(&res, &res).sqrt() / b_norm;
        if !rel.is_finite() {
            return Err(Error::NonFinite { time: it as f64 });
        }
        if rel <= cfg.cg_tolerance {
            let u = GridFunction::from_parts(*a.grid(), embed_interior(g, &x));
            return Ok((
                u,
                CgReport {
                    iterations: it,
                    relative_residual: rel,
                },
            ));
        }
        z.copy_from_slice(&res);
        precond.solve_interior(&mut z);
        let rz_next = dot(&res, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..len {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::CgNotConverged {
        iterations: cfg.max_iterations,
        residual: rel,
    })
}

/// Discrete energy `sum_faces a_face |du|^2` and load `sum f u h^2` for `u`
/// solving the flux discretization. The two agree up to the CG residual.
pub fn energy_identity(a: &GridFunction, u: &GridFunction, cfg: &DarcyConfig) -> Result<(f64, f64)> {
    let g = square(a.grid())?;
    let r = g.r();
    let faces = Faces::new(g, a.values(), cfg.face_average);
    let v = u.values();
    let mut energy = 0.0;
    for i in 0..r {
        for j in 0..r {
            let c = i * r + j;
            if i + 1 < r {
                energy += faces.x[c] * (v[c + r] - v[c]).powi(2);
            }
            if j + 1 < r {
                energy += faces.y[c] * (v[c + 1] - v[c]).powi(2);
            }
        }
    }
    let f = cfg.forcing.on(a.grid())?;
    let h2 = g.spacing() * g.spacing();
    let load = h2 * f.values().iter().zip(v).map(|(f, u)| f * u).sum::<f64>();
    Ok((energy, load))
}

pub fn gen_darcy_dataset(n: usize, prior: &LevelSetPrior, cfg: &DarcyConfig, master_seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    prior.validate()?;
    let g = Grid::Square(cfg.grid);
    let pairs = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = sample_levelset_coefficient(prior, cfg.grid, master_seed, i)?;
            let u = solve_darcy(&a, cfg).map_err(|e| Error::Sample {
                index: i,
                source: Box::new(e),
            })?;
            Ok((a, u))
        })
        .collect::<Result<Vec<_>>>()?;
    let (inputs, outputs) = pairs.into_iter().unzip();
    let manifest = DatasetManifest::Darcy(DarcyManifest {
        n,
        a_plus: prior.a_plus,
        a_minus: prior.a_minus,
        contrast_ratio: prior.a_plus / prior.a_minus,
        tau: prior.tau,
        alpha_reg: prior.alpha_reg,
        j_max: grf::nyquist_mode_count(DomainKind::Neumann2d, &g)?,
        f: cfg.forcing.describe(),
        r: cfg.grid.r(),
        r_generated: cfg.grid.r(),
        seed: master_seed,
        cg_tolerance: cfg.cg_tolerance,
        face_average: cfg.face_average.name().to_string(),
    });
    Dataset::new(inputs, outputs, manifest)
}
