//! Paired input/output fields with a provenance manifest, and their on-disk
//! layout (`inputs.bin`, `outputs.bin`, `manifest.json`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::io::{self, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurgersManifest {
    pub n: usize,
    pub epsilon: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    pub dealias: bool,
    pub tau: f64,
    pub alpha_reg: f64,
    pub j_max: usize,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    /// Mesh size the data was generated at before any restriction.
    #[serde(rename = "K_generated")]
    pub k_generated: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarcyManifest {
    pub n: usize,
    pub a_plus: f64,
    pub a_minus: f64,
    pub contrast_ratio: f64,
    pub tau: f64,
    pub alpha_reg: f64,
    pub j_max: usize,
    /// Source term description, e.g. `"constant:1"`.
    pub f: String,
    pub r: usize,
    pub r_generated: usize,
    pub seed: u64,
    pub cg_tolerance: f64,
    pub face_average: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pde", rename_all = "lowercase")]
pub enum DatasetManifest {
    Burgers(BurgersManifest),
    Darcy(DarcyManifest),
}

impl DatasetManifest {
    pub fn seed(&self) -> u64 {
        match self {
            DatasetManifest::Burgers(m) => m.seed,
            DatasetManifest::Darcy(m) => m.seed,
        }
    }

    fn set_resolution(&mut self, n: usize, res: usize) {
        match self {
            DatasetManifest::Burgers(m) => {
                m.n = n;
                m.k = res;
            }
            DatasetManifest::Darcy(m) => {
                m.n = n;
                m.r = res;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub inputs: Vec<GridFunction>,
    pub outputs: Vec<GridFunction>,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn new(inputs: Vec<GridFunction>, outputs: Vec<GridFunction>, manifest: DatasetManifest) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::InvalidParameter(format!(
                "{} inputs but {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        if let Some(first) = inputs.first() {
            let g = first.grid();
            if inputs.iter().chain(&outputs).any(|f| f.grid() != g) {
                return Err(Error::GridMismatch("dataset fields on different grids".into()));
            }
        }
        Ok(Self {
            inputs,
            outputs,
            manifest,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.inputs.first().map(|f| f.grid())
    }

    /// First `n` pairs.
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        let mut manifest = self.manifest.clone();
        let res = self.grid().map(|g| g.resolution()).unwrap_or(0);
        manifest.set_resolution(n, res);
        Dataset {
            inputs: self.inputs[..n].to_vec(),
            outputs: self.outputs[..n].to_vec(),
            manifest,
        }
    }

    pub fn restrict(&self, factor: usize) -> Result<Dataset> {
        let inputs = self
            .inputs
            .iter()
            .map(|f| f.restrict(factor))
            .collect::<Result<Vec<_>>>()?;
        let outputs = self
            .outputs
            .iter()
            .map(|f| f.restrict(factor))
            .collect::<Result<Vec<_>>>()?;
        let mut manifest = self.manifest.clone();
        let res = inputs.first().map(|f| f.grid().resolution()).unwrap_or(0);
        manifest.set_resolution(inputs.len(), res);
        Dataset::new(inputs, outputs, manifest)
    }

    /// Restricts to the resolution `K` (1D) or `r` (2D).
    pub fn restrict_to_resolution(&self, resolution: usize) -> Result<Dataset> {
        let grid = self.grid().ok_or(Error::EmptyDataset)?;
        let target = match grid {
            Grid::Periodic(_) => Grid::periodic(resolution.saturating_sub(1))?,
            Grid::Square(_) => Grid::square(resolution)?,
        };
        self.restrict(grid.factor_to(&target)?)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        fields_to_tensor(&self.inputs)?.write(&dir.join("inputs.bin"))?;
        fields_to_tensor(&self.outputs)?.write(&dir.join("outputs.bin"))?;
        io::write_json(&dir.join("manifest.json"), &self.manifest)
    }

    pub fn load(dir: &Path) -> Result<Dataset> {
        let manifest: DatasetManifest = io::read_json(&dir.join("manifest.json"))?;
        let inputs = tensor_to_fields(&Tensor::read(&dir.join("inputs.bin"))?, &dir.join("inputs.bin"))?;
        let outputs = tensor_to_fields(&Tensor::read(&dir.join("outputs.bin"))?, &dir.join("outputs.bin"))?;
        Dataset::new(inputs, outputs, manifest)
    }
}

/// Stacks fields into the external layout: `[n, K]` with the periodic endpoint
/// repeated, or `[n, r, r]`.
pub fn fields_to_tensor(fields: &[GridFunction]) -> Result<Tensor> {
    let Some(first) = fields.first() else {
        return Err(Error::EmptyDataset);
    };
    let n = fields.len();
    match *first.grid() {
        Grid::Periodic(g) => {
            let k = g.mesh_size();
            let mut data = Vec::with_capacity(n * k);
            for f in fields {
                data.extend_from_slice(f.values());
                data.push(f.values()[0]);
            }
            Tensor::new(vec![n, k], data)
        }
        Grid::Square(g) => {
            let mut data = Vec::with_capacity(n * g.len());
            for f in fields {
                data.extend_from_slice(f.values());
            }
            Tensor::new(vec![n, g.r(), g.r()], data)
        }
    }
}

pub fn tensor_to_fields(t: &Tensor, path: &Path) -> Result<Vec<GridFunction>> {
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    match t.dims.as_slice() {
        &[n, k] => {
            let grid = Grid::periodic(k.saturating_sub(1)).map_err(|e| bad(e.to_string()))?;
            (0..n)
                .map(|i| {
                    let row = &t.data[i * k..(i + 1) * k];
                    GridFunction::new(grid, row[..k - 1].to_vec())
                })
                .collect()
        }
        &[n, r, r2] if r == r2 => {
            let grid = Grid::square(r).map_err(|e| bad(e.to_string()))?;
            let len = r * r;
            (0..n)
                .map(|i| GridFunction::new(grid, t.data[i * len..(i + 1) * len].to_vec()))
                .collect()
        }
        dims => Err(bad(format!("unexpected dataset dims {dims:?}"))),
    }
}
