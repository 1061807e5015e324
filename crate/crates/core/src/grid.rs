//! Equispaced grids on the unit interval (periodic) and the unit square
//! (boundary inclusive), sampled fields, and trapezoid-rule L2 geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic grid on [0, 1) holding the unique nodes `x_j = j / n_unique`.
///
/// Files store `K = n_unique + 1` nodes with the endpoint duplicated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid1D {
    n_unique: usize,
}

impl Grid1D {
    pub fn new(n_unique: usize) -> Result<Self> {
        if n_unique < 16 || !n_unique.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "periodic grid needs a power of two >= 16 unique nodes, got {n_unique}"
            )));
        }
        Ok(Self { n_unique })
    }

    /// Grid from the external mesh size `K` (endpoint counted twice).
    pub fn from_mesh_size(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("mesh size {k} too small")));
        }
        Self::new(k - 1)
    }

    pub fn n_unique(&self) -> usize {
        self.n_unique
    }

    pub fn mesh_size(&self) -> usize {
        self.n_unique + 1
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n_unique as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.spacing();
        (0..self.n_unique).map(move |j| j as f64 * h)
    }
}

/// Boundary-inclusive grid on [0, 1]^2 with `r` nodes per side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid2D {
    r: usize,
}

impl Grid2D {
    pub fn new(r: usize) -> Result<Self> {
        if r < 5 || !(r - 1).is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "square grid needs r = 2^p + 1 >= 5 nodes per side, got {r}"
            )));
        }
        Ok(Self { r })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Number of cells per side.
    pub fn cells(&self) -> usize {
        self.r - 1
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.r - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.r * self.r
    }

    pub fn is_empty(&self) -> bool {
        self.r == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.r + j
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.r - 1 || j == self.r - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Grid {
    Periodic(Grid1D),
    Square(Grid2D),
}

impl Grid {
    pub fn periodic(n_unique: usize) -> Result<Self> {
        Grid1D::new(n_unique).map(Grid::Periodic)
    }

    pub fn square(r: usize) -> Result<Self> {
        Grid2D::new(r).map(Grid::Square)
    }

    /// Number of stored values.
    pub fn len(&self) -> usize {
        match self {
            Grid::Periodic(g) => g.n_unique(),
            Grid::Square(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Resolution as reported externally: `K` in 1D, `r` in 2D.
    pub fn resolution(&self) -> usize {
        match self {
            Grid::Periodic(g) => g.mesh_size(),
            Grid::Square(g) => g.r(),
        }
    }

    /// Trapezoid quadrature weights, one per stored value.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        match self {
            Grid::Periodic(g) => vec![g.spacing(); g.n_unique()],
            Grid::Square(g) => {
                let r = g.r();
                let h2 = g.spacing() * g.spacing();
                let edge = |i: usize| if i == 0 || i == r - 1 { 0.5 } else { 1.0 };
                let mut w = Vec::with_capacity(r * r);
                for i in 0..r {
                    for j in 0..r {
                        w.push(edge(i) * edge(j) * h2);
                    }
                }
                w
            }
        }
    }

    /// Grid coarsened by `factor`, keeping node 0 (and all boundaries in 2D).
    pub fn coarsen(&self, factor: usize) -> Result<Grid> {
        if factor == 0 {
            return Err(Error::InvalidParameter("restriction factor must be >= 1".into()));
        }
        match self {
            Grid::Periodic(g) => {
                let n = g.n_unique();
                if n % factor != 0 {
                    return Err(Error::NotDivisible { factor, size: n });
                }
                Grid::periodic(n / factor)
            }
            Grid::Square(g) => {
                let c = g.cells();
                if c % factor != 0 {
                    return Err(Error::NotDivisible { factor, size: c });
                }
                Grid::square(c / factor + 1)
            }
        }
    }

    /// Factor by which `self` coarsens to `target`, if it is a whole power of two.
    pub fn factor_to(&self, target: &Grid) -> Result<usize> {
        let (fine, coarse) = match (self, target) {
            (Grid::Periodic(a), Grid::Periodic(b)) => (a.n_unique(), b.n_unique()),
            (Grid::Square(a), Grid::Square(b)) => (a.cells(), b.cells()),
            _ => return Err(Error::GridMismatch(format!("{self:?} vs {target:?}"))),
        };
        if coarse == 0 || fine % coarse != 0 {
            return Err(Error::NotDivisible {
                factor: fine.max(1) / coarse.max(1),
                size: fine,
            });
        }
        Ok(fine / coarse)
    }
}

/// Real field sampled on a [`Grid`]; 2D values are row-major (second index fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite field value {v}")));
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without the finiteness check; callers guarantee the length.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = match grid {
            Grid::Periodic(g) => g.nodes().map(|x| f(&[x])).collect(),
            Grid::Square(g) => {
                let h = g.spacing();
                let mut v = Vec::with_capacity(g.len());
                for i in 0..g.r() {
                    for j in 0..g.r() {
                        v.push(f(&[i as f64 * h, j as f64 * h]));
                    }
                }
                v
            }
        };
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        Self::from_parts(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_same_grid(other)?;
        Ok(Self::from_parts(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Integral over the domain (trapezoid rule).
    pub fn integral(&self) -> f64 {
        match self.grid {
            Grid::Periodic(g) => g.spacing() * self.values.iter().sum::<f64>(),
            Grid::Square(_) => self
                .grid
                .quadrature_weights()
                .iter()
                .zip(&self.values)
                .map(|(w, v)| w * v)
                .sum(),
        }
    }

    pub fn norm_l2(&self) -> f64 {
        inner_product_l2(self, self).expect("same grid").max(0.0).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn restrict(&self, factor: usize) -> Result<GridFunction> {
        restrict(self, factor)
    }
}

impl AsRef<[f64]> for GridFunction {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Trapezoid-rule L2 inner product.
pub fn inner_product_l2(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.check_same_grid(g)?;
    Ok(match f.grid {
        Grid::Periodic(grid) => grid.spacing() * f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum::<f64>(),
        Grid::Square(_) => f
            .grid
            .quadrature_weights()
            .iter()
            .zip(f.values.iter().zip(&g.values))
            .map(|(w, (a, b))| w * a * b)
            .sum(),
    })
}

/// `||truth - pred|| / ||truth||` in the trapezoid L2 norm.
pub fn relative_l2_error(truth: &GridFunction, pred: &GridFunction) -> Result<f64> {
    let diff = truth.sub(pred)?;
    let denom = truth.norm_l2();
    if denom == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(diff.norm_l2() / denom)
}

/// Strided subsampling. Node 0 is always retained; in 2D the boundary rows and
/// columns are retained as well.
pub fn restrict(f: &GridFunction, factor: usize) -> Result<GridFunction> {
    let coarse = f.grid.coarsen(factor)?;
    let values = match (f.grid, coarse) {
        (Grid::Periodic(_), Grid::Periodic(c)) => (0..c.n_unique()).map(|j| f.values[j * factor]).collect(),
        (Grid::Square(fine), Grid::Square(c)) => {
            let mut v = Vec::with_capacity(c.len());
            for i in 0..c.r() {
                for j in 0..c.r() {
                    v.push(f.values[fine.index(i * factor, j * factor)]);
                }
            }
            v
        }
        _ => unreachable!("coarsen preserves the grid kind"),
    };
    Ok(GridFunction::from_parts(coarse, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn periodic(n: usize, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_fn(Grid::periodic(n).unwrap(), |x| f(x[0]))
    }

    #[test]
    fn constant_integrates_to_one() {
        let one = periodic(16, |_| 1.0);
        assert!((inner_product_l2(&one, &one).unwrap() - 1.0).abs() < 1e-15);
        let g = Grid::square(9).unwrap();
        let one = GridFunction::from_fn(g, |_| 1.0);
        assert!((inner_product_l2(&one, &one).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trig_orthogonality() {
        let s = periodic(64, |x| (2.0 * PI * x).sin());
        let c = periodic(64, |x| (2.0 * PI * x).cos());
        assert!(inner_product_l2(&s, &c).unwrap().abs() < 1e-12);
        assert!((inner_product_l2(&s, &s).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn periodic_rule_exact_below_nyquist() {
        for k in 1..32 {
            let f = periodic(64, |x| (2.0 * PI * k as f64 * x).cos().powi(2));
            assert!((f.integral() - 0.5).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn relative_error_cases() {
        let t = periodic(32, |x| (2.0 * PI * x).sin() + 0.3);
        assert_eq!(relative_l2_error(&t, &t).unwrap(), 0.0);
        let zero = GridFunction::zeros(*t.grid());
        assert!((relative_l2_error(&t, &zero).unwrap() - 1.0).abs() < 1e-15);
        assert!((relative_l2_error(&t, &t.scaled(2.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(relative_l2_error(&zero, &t), Err(Error::ZeroNorm)));
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = periodic(16, |x| x);
        let b = periodic(32, |x| x);
        assert!(matches!(inner_product_l2(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn restrict_strides() {
        let f = periodic(1024, |x| (7.0 * x).sin());
        assert_eq!(restrict(&f, 1).unwrap(), f);
        let c = restrict(&f, 8).unwrap();
        assert_eq!(c.grid(), &Grid::periodic(128).unwrap());
        for (j, v) in c.values().iter().enumerate() {
            assert_eq!(*v, f.values()[8 * j]);
        }
        assert_eq!(
            restrict(&restrict(&f, 2).unwrap(), 2).unwrap(),
            restrict(&f, 4).unwrap()
        );
        assert!(matches!(restrict(&f, 3), Err(Error::NotDivisible { .. })));
    }

    #[test]
    fn restrict_square_keeps_boundary() {
        let g = Grid::square(257).unwrap();
        let f = GridFunction::from_fn(g, |x| x[0] + 10.0 * x[1]);
        let c = restrict(&f, 2).unwrap();
        assert_eq!(c.grid().resolution(), 129);
        let Grid::Square(cg) = *c.grid() else { unreachable!() };
        assert_eq!(c.values()[cg.index(128, 128)], 11.0);
        assert_eq!(c.values()[cg.index(0, 128)], 10.0);
        assert!(matches!(restrict(&f, 3), Err(Error::NotDivisible { .. })));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid1D::new(8).is_err());
        assert!(Grid1D::new(100).is_err());
        assert!(Grid2D::new(10).is_err());
        assert_eq!(Grid1D::from_mesh_size(1025).unwrap().n_unique(), 1024);
    }

    proptest! {
        #[test]
        fn cauchy_schwarz(a in prop::collection::vec(-10.0f64..10.0, 64),
                          b in prop::collection::vec(-10.0f64..10.0, 64)) {
            let g = Grid::periodic(64).unwrap();
            let f = GridFunction::new(g, a).unwrap();
            let h = GridFunction::new(g, b).unwrap();
            let ip = inner_product_l2(&f, &h).unwrap();
            prop_assert!(ip.abs() <= f.norm_l2() * h.norm_l2() + 1e-12);
        }

        #[test]
        fn restriction_is_value_subset(a in prop::collection::vec(-1.0f64..1.0, 81)) {
            let f = GridFunction::new(Grid::square(9).unwrap(), a).unwrap();
            let c = restrict(&f, 2).unwrap();
            for v in c.values() {
                prop_assert!(f.values().iter().any(|w| w.to_bits() == v.to_bits()));
            }
        }
    }
}
