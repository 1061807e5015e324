//! Command-line interface: data generation, training, evaluation, and the
//! experiment protocols. Every command writes a `run.json` manifest next to
//! its outputs.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::burgers::{self, BurgersConfig, BurgersPrior};
use crate::darcy::{self, DarcyConfig, FaceAverage, Forcing, LevelSetPrior};
use crate::dataset::{Dataset, DatasetManifest};
use crate::error::{Error, Result};
use crate::experiments;
use crate::features::{FeatureFamily, FourierParams, PredictorCorrectorParams, DEFAULT_BRIDGE_MODES};
use crate::grid::{Grid1D, Grid2D};
use crate::io;
use crate::rfm::{self, RfmModel, SolveOptions, TrainConfig};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const DARCY_DEFAULT_LAMBDA: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(name = "fvrf", version, about = "Random feature models for PDE solution operators")]
pub struct Cli {
    /// Worker thread cap (0 or unset: all cores).
    #[arg(long, env = "FVRF_THREADS", global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a dataset of input/solution pairs.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Train a random feature model.
    Train(TrainArgs),
    /// Evaluate a model on a test dataset.
    Eval(EvalArgs),
    /// Test error across resolutions, or coefficient convergence under refinement.
    Transfer(TransferArgs),
    /// Test error of the composed model at multiples of the training horizon.
    Semigroup(SemigroupArgs),
    /// Scalar Brownian-bridge features against the exact kernel interpolant.
    BbDemo(BbDemoArgs),
}

#[derive(Subcommand, Debug)]
pub enum GenCommand {
    /// Viscous Burgers on the periodic unit interval.
    Burgers(GenBurgersArgs),
    /// Darcy flow with a level-set coefficient on the unit square.
    Darcy(GenDarcyArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct GenBurgersArgs {
    #[arg(long)]
    pub n: usize,
    /// Mesh size including the periodic endpoint.
    #[arg(long, default_value_t = 1025)]
    pub k: usize,
    /// Final time `T`.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = burgers::DEFAULT_VISCOSITY)]
    pub viscosity: f64,
    #[arg(long, default_value_t = burgers::DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = burgers::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Time step (default scales as 1e-4 * 1024 / N).
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub no_dealias: bool,
    /// Also record `u(jT)` for `j` up to this count, one dataset per horizon
    /// in subdirectories `j1`, `j2`, ...
    #[arg(long, default_value_t = 1)]
    pub horizons: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FaceAverageArg {
    Arithmetic,
    Harmonic,
}

#[derive(Args, Debug, Serialize)]
pub struct GenDarcyArgs {
    #[arg(long)]
    pub n: usize,
    /// Nodes per side, `2^p + 1`.
    #[arg(long, default_value_t = 257)]
    pub r: usize,
    #[arg(long, default_value_t = darcy::DEFAULT_A_PLUS)]
    pub aplus: f64,
    #[arg(long, default_value_t = darcy::DEFAULT_A_MINUS)]
    pub aminus: f64,
    #[arg(long, default_value_t = darcy::DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = darcy::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Constant source term.
    #[arg(long, default_value_t = 1.0)]
    pub f: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub cg_tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = FaceAverageArg::Arithmetic)]
    pub face_average: FaceAverageArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Fourier,
    Pc,
}

/// Feature family and hyperparameters. Unset values take the family defaults.
#[derive(Args, Debug, Serialize)]
pub struct FeatureArgs {
    /// Feature family (default: from the dataset's PDE).
    #[arg(long, value_enum)]
    pub features: Option<FeatureKind>,
    #[arg(long)]
    pub tau_prime: Option<f64>,
    #[arg(long)]
    pub alpha_prime: Option<f64>,
    /// Fourier filter length scale.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Fourier filter decay exponent.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Fourier pre-activation gain.
    #[arg(long)]
    pub gain: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub s_plus: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub s_minus: Option<f64>,
    /// Sigmoid transition width.
    #[arg(long)]
    pub sigmoid_delta: Option<f64>,
}

impl FeatureArgs {
    fn family(&self, manifest: &DatasetManifest) -> Result<FeatureFamily> {
        let kind = self.features.unwrap_or(match manifest {
            DatasetManifest::Burgers(_) => FeatureKind::Fourier,
            DatasetManifest::Darcy(_) => FeatureKind::Pc,
        });
        let family = match kind {
            FeatureKind::Fourier => {
                let d = FourierParams::default();
                FeatureFamily::FourierBurgers(FourierParams {
                    tau: self.tau_prime.unwrap_or(d.tau),
                    alpha_reg: self.alpha_prime.unwrap_or(d.alpha_reg),
                    delta: self.delta.unwrap_or(d.delta),
                    beta: self.beta.unwrap_or(d.beta),
                    gain: self.gain.unwrap_or(d.gain),
                })
            }
            FeatureKind::Pc => {
                let d = PredictorCorrectorParams::default();
                let forcing = match manifest {
                    DatasetManifest::Darcy(m) => parse_constant_forcing(&m.f)?,
                    DatasetManifest::Burgers(_) => d.forcing,
                };
                let mut p = PredictorCorrectorParams { forcing, ..d };
                p.tau = self.tau_prime.unwrap_or(d.tau);
                p.alpha_reg = self.alpha_prime.unwrap_or(d.alpha_reg);
                p.sigmoid.s_plus = self.s_plus.unwrap_or(d.sigmoid.s_plus);
                p.sigmoid.s_minus = self.s_minus.unwrap_or(d.sigmoid.s_minus);
                p.sigmoid.delta = self.sigmoid_delta.unwrap_or(d.sigmoid.delta);
                FeatureFamily::PredictorCorrectorDarcy(p)
            }
        };
        family.validate()?;
        Ok(family)
    }
}

fn parse_constant_forcing(f: &str) -> Result<f64> {
    f.strip_prefix("constant:")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::InvalidParameter(format!("unsupported source term {f:?}")))
}

/// Dataset location plus optional subsetting.
#[derive(Args, Debug, Serialize)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Use only the first `n` pairs.
    #[arg(long)]
    pub n: Option<usize>,
    /// Restrict to this mesh size `K` (1D) or side length `r` (2D).
    #[arg(long)]
    pub resolution: Option<usize>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        load_dataset(&self.data, self.n, self.resolution)
    }
}

fn load_dataset(dir: &Path, n: Option<usize>, resolution: Option<usize>) -> Result<Dataset> {
    let mut d = Dataset::load(dir)?;
    if let Some(n) = n {
        if n == 0 || n > d.len() {
            return Err(Error::InvalidParameter(format!(
                "requested {n} pairs, dataset holds {}",
                d.len()
            )));
        }
        d = d.take(n);
    }
    if let Some(r) = resolution {
        d = d.restrict_to_resolution(r)?;
    }
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(d)
}

/// Coefficient solve settings.
#[derive(Args, Debug, Serialize)]
pub struct SolveArgs {
    /// Number of random features.
    #[arg(long, default_value_t = 256)]
    pub m: usize,
    /// Ridge parameter (default 0 for Fourier features, 1e-8 for predictor-corrector).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = rfm::DEFAULT_RCOND)]
    pub rcond: f64,
    /// Training samples whose features are held in memory at once.
    #[arg(long, default_value_t = rfm::DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    /// KL modes per feature field (default: all the training grid resolves).
    #[arg(long)]
    pub j_max: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SolveArgs {
    fn options(&self, family: &FeatureFamily) -> SolveOptions {
        let lambda = self.lambda.unwrap_or(match family {
            FeatureFamily::PredictorCorrectorDarcy(_) => DARCY_DEFAULT_LAMBDA,
            _ => 0.0,
        });
        SolveOptions {
            lambda,
            rcond: self.rcond,
            batch_size: self.batch_size,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[arg(long)]
    pub model_out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct TransferArgs {
    /// Trained model to evaluate at each resolution.
    #[arg(long, required_unless_present = "coefficients")]
    pub model: Option<PathBuf>,
    /// Test data, or training data with `--coefficients`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub resolutions: Vec<usize>,
    /// Train one model per resolution with shared features and report the
    /// coefficient distance to the finest one.
    #[arg(long)]
    pub coefficients: bool,
    /// Optional test data for `--coefficients` mode.
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SemigroupArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Test datasets at horizons `T, 2T, ...`, in order.
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct BbDemoArgs {
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "50,500,5000")]
    pub m: Vec<usize>,
    /// Sine modes per feature.
    #[arg(long, default_value_t = DEFAULT_BRIDGE_MODES)]
    pub j: usize,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct FileDigest {
    path: PathBuf,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    threads: usize,
    config: &'a C,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    wall_seconds: f64,
}

const DATASET_FILES: [&str; 3] = ["manifest.json", "inputs.bin", "outputs.bin"];
const MODEL_FILES: [&str; 3] = ["model.json", "alpha.bin", "xi.bin"];

fn digests(dir: &Path, names: &[&str]) -> Result<Vec<FileDigest>> {
    names
        .iter()
        .map(|n| {
            let path = dir.join(n);
            Ok(FileDigest {
                sha256: io::file_digest(&path)?,
                path,
            })
        })
        .collect()
}

/// SHA-256 over the digests of a dataset directory's files.
pub fn dataset_digest(dir: &Path) -> Result<String> {
    let joined: String = digests(dir, &DATASET_FILES)?.into_iter().map(|d| d.sha256).collect();
    Ok(io::hex_digest(joined.as_bytes()))
}

struct Recorder {
    start: Instant,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl Recorder {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            inputs: vec![],
            outputs: vec![],
        }
    }

    fn input_dir(&mut self, dir: &Path, names: &[&str]) -> Result<()> {
        self.inputs.extend(digests(dir, names)?);
        Ok(())
    }

    fn output_dir(&mut self, dir: &Path, names: &[&str]) -> Result<()> {
        self.outputs.extend(digests(dir, names)?);
        Ok(())
    }

    fn output_file(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileDigest {
            sha256: io::file_digest(path)?,
            path: path.to_path_buf(),
        });
        Ok(())
    }

    fn finish<C: Serialize>(self, command: &str, config: &C, manifest_path: &Path) -> Result<()> {
        let manifest = RunManifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            threads: rayon::current_num_threads(),
            config,
            inputs: self.inputs,
            outputs: self.outputs,
            wall_seconds: self.start.elapsed().as_secs_f64(),
        };
        io::write_json(manifest_path, &manifest)
    }
}

/// `report.json` gets `report.run.json`; a directory gets `dir/run.json`.
fn manifest_for_file(path: &Path) -> PathBuf {
    path.with_extension("run.json")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn gen_burgers(args: &GenBurgersArgs) -> Result<()> {
    let mut rec = Recorder::new();
    let grid = Grid1D::from_mesh_size(args.k)?;
    let mut cfg = BurgersConfig::new(grid, args.viscosity, args.t);
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    cfg.dealias = !args.no_dealias;
    let prior = BurgersPrior {
        tau: args.tau,
        alpha_reg: args.alpha,
    };
    let sets = burgers::gen_burgers_datasets(args.n, &prior, &cfg, args.seed, args.horizons)?;
    if sets.len() == 1 {
        sets[0].save(&args.out)?;
        rec.output_dir(&args.out, &DATASET_FILES)?;
    } else {
        for (j, d) in sets.iter().enumerate() {
            let dir = args.out.join(format!("j{}", j + 1));
            d.save(&dir)?;
            rec.output_dir(&dir, &DATASET_FILES)?;
        }
    }
    rec.finish("gen burgers", args, &args.out.join("run.json"))
}

fn gen_darcy(args: &GenDarcyArgs) -> Result<()> {
    let mut rec = Recorder::new();
    let mut cfg = DarcyConfig::new(Grid2D::new(args.r)?);
    cfg.forcing = Forcing::Constant(args.f);
    cfg.cg_tolerance = args.cg_tol;
    cfg.max_iterations = args.max_iter;
    cfg.face_average = match args.face_average {
        FaceAverageArg::Arithmetic => FaceAverage::Arithmetic,
        FaceAverageArg::Harmonic => FaceAverage::Harmonic,
    };
    let prior = LevelSetPrior {
        a_plus: args.aplus,
        a_minus: args.aminus,
        tau: args.tau,
        alpha_reg: args.alpha,
    };
    darcy::gen_darcy_dataset(args.n, &prior, &cfg, args.seed)?.save(&args.out)?;
    rec.output_dir(&args.out, &DATASET_FILES)?;
    rec.finish("gen darcy", args, &args.out.join("run.json"))
}

fn train(args: &TrainArgs) -> Result<()> {
    let mut rec = Recorder::new();
    let data = args.data.load()?;
    rec.input_dir(&args.data.data, &DATASET_FILES)?;
    let family = args.features.family(&data.manifest)?;
    let cfg = TrainConfig {
        family,
        m: args.solve.m,
        j_max: args.solve.j_max,
        seed: args.solve.seed,
        solve: args.solve.options(&family),
    };
    let mut model = RfmModel::train(&data, &cfg)?;
    model.training.dataset_digest = Some(dataset_digest(&args.data.data)?);
    model.save(&args.model_out)?;
    rec.output_dir(&args.model_out, &MODEL_FILES)?;
    rec.finish("train", args, &args.model_out.join("run.json"))
}

#[derive(Serialize)]
struct EvalReport {
    error: f64,
    n_test: usize,
    m: usize,
    resolution: usize,
    per_sample: Vec<f64>,
}

fn eval(args: &EvalArgs) -> Result<()> {
    let mut rec = Recorder::new();
    let model = RfmModel::load(&args.model)?;
    rec.input_dir(&args.model, &MODEL_FILES)?;
    let data = args.data.load()?;
    rec.input_dir(&args.data.data, &DATASET_FILES)?;
    let report = rfm::expected_relative_test_error(&model, &data)?;
    let out = EvalReport {
        error: report.mean,
        n_test: data.len(),
        m: model.m(),
        resolution: data.grid().map_or(0, |g| g.resolution()),
        per_sample: report.per_sample,
    };
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    io::write_json(&args.out, &out)?;
    rec.output_file(&args.out)?;
    rec.finish("eval", args, &manifest_for_file(&args.out))
}

fn transfer(args: &TransferArgs) -> Result<()> {
    let mut rec = Recorder::new();
    let data = load_dataset(&args.data, args.n, None)?;
    rec.input_dir(&args.data, &DATASET_FILES)?;
    let mut csv = String::new();
    if args.coefficients {
        let test = match &args.test_data {
            Some(dir) => {
                rec.input_dir(dir, &DATASET_FILES)?;
                Some(Dataset::load(dir)?)
            }
            None => None,
        };
        let family = args.features.family(&data.manifest)?;
        let rows = experiments::coefficient_convergence(
            &data,
            test.as_ref(),
            family,
            args.solve.m,
            args.solve.seed,
            &args.solve.options(&family),
            &args.resolutions,
        )?;
        csv.push_str(if test.is_some() {
            "resolution,alpha_distance,error\n"
        } else {
            "resolution,alpha_distance\n"
        });
        for row in rows {
            let _ = write!(csv, "{},{:?}", row.resolution, row.alpha_distance);
            if let Some(e) = row.test_error {
                let _ = write!(csv, ",{e:?}");
            }
            csv.push('\n');
        }
    } else {
        let dir = args
            .model
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("--model is required unless --coefficients is set".into()))?;
        let model = RfmModel::load(dir)?;
        rec.input_dir(dir, &MODEL_FILES)?;
        csv.push_str("resolution,error\n");
        for (r, e) in experiments::transfer_errors(&model, &data, &args.resolutions)? {
            let _ = writeln!(csv, "{r},{e:?}");
        }
    }
    write_text(&args.out, &csv)?;
    rec.output_file(&args.out)?;
    rec.finish("transfer", args, &manifest_for_file(&args.out))
}

fn semigroup(args: &SemigroupArgs) -> Result<()> {
    let mut rec = Recorder::new();
    let model = RfmModel::load(&args.model)?;
    rec.input_dir(&args.model, &MODEL_FILES)?;
    let tests = args
        .data
        .iter()
        .map(|dir| {
            rec.input_dir(dir, &DATASET_FILES)?;
            load_dataset(dir, args.n, args.resolution)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("j,error\n");
    for (j, e) in experiments::semigroup_errors(&model, &tests)? {
        let _ = writeln!(csv, "{j},{e:?}");
    }
    write_text(&args.out, &csv)?;
    rec.output_file(&args.out)?;
    rec.finish("semigroup", args, &manifest_for_file(&args.out))
}

fn bb_demo(args: &BbDemoArgs) -> Result<()> {
    let mut rec = Recorder::new();
    let demo = experiments::bb_demo(args.n, &args.m, args.j, args.seed, args.points)?;
    write_text(&args.out, &demo.to_csv())?;
    rec.output_file(&args.out)?;
    rec.finish("bb-demo", args, &manifest_for_file(&args.out))
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        // A global pool can only be built once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Gen(GenCommand::Burgers(a)) => gen_burgers(a),
        Command::Gen(GenCommand::Darcy(a)) => gen_darcy(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Transfer(a) => transfer(a),
        Command::Semigroup(a) => semigroup(a),
        Command::BbDemo(a) => bb_demo(a),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_documented_invocations() {
        let cli = Cli::try_parse_from([
            "fvrf",
            "gen",
            "burgers",
            "--n",
            "8",
            "--k",
            "1025",
            "--t",
            "1.0",
            "--viscosity",
            "0.01",
            "--tau",
            "7",
            "--alpha",
            "2.5",
            "--seed",
            "1",
            "--out",
            "data/b/",
        ])
        .unwrap();
        assert!(matches!(cli.command, Command::Gen(GenCommand::Burgers(ref a)) if a.k == 1025 && a.n == 8));
        let cli = Cli::try_parse_from([
            "fvrf",
            "train",
            "--data",
            "data/b",
            "--features",
            "fourier",
            "--m",
            "64",
            "--lambda",
            "0",
            "--seed",
            "7",
            "--model-out",
            "m/",
        ])
        .unwrap();
        assert!(matches!(cli.command, Command::Train(ref a) if a.solve.m == 64));
        let cli = Cli::try_parse_from(["fvrf", "bb-demo", "--out", "bb.csv"]).unwrap();
        assert!(matches!(cli.command, Command::BbDemo(ref a) if a.m == [50, 500, 5000] && a.n == 32));
        assert!(Cli::try_parse_from(["fvrf", "transfer", "--data", "d", "--out", "o"]).is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::InvalidParameter("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::NonFinite { time: 0.1 }), EXIT_NUMERICAL);
        assert_eq!(
            main_with_args([
                "fvrf",
                "gen",
                "burgers",
                "--n",
                "1",
                "--k",
                "100",
                "--out",
                "/nonexistent/x"
            ]),
            EXIT_CONFIG
        );
        assert_eq!(main_with_args(["fvrf", "bogus"]), EXIT_CONFIG);
    }

    #[test]
    fn forcing_parse() {
        assert_eq!(parse_constant_forcing("constant:1").unwrap(), 1.0);
        assert!(parse_constant_forcing("field").is_err());
    }
}
