//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers as arguments to run a subset,
//! e.g. `cargo test --test acceptance -- 1 2 3`.

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use fvrf::burgers::{self, BurgersConfig, BurgersPrior};
use fvrf::darcy::{self, DarcyConfig, LevelSetPrior};
use fvrf::dataset::Dataset;
use fvrf::experiments::{self, bb_target};
use fvrf::features::{bb_feature, FeatureFamily, FeatureMap, FourierParams, PredictorCorrectorParams, RandomFeatures};
use fvrf::rfm::{self, KernelRidgeOracle, RfmModel, SolveOptions, TrainConfig};
use fvrf::rng::{self, stream_id, StreamKind};
use fvrf::{Grid, Grid1D, Grid2D, GridFunction, Result};

const TRAIN_SEED: u64 = 11;
const TEST_SEED: u64 = 12;
const FEATURE_SEED: u64 = 13;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn within_budget(elapsed: Duration, seconds: f64) -> bool {
    elapsed.as_secs_f64() < seconds
}

/// Bridge features acting on scalars, with outputs on a 9-node grid of
/// `[0, 1]`: `phi(x; theta)(t) = bb((x + t) / 2; theta)`.
struct ShiftedBridge {
    features: RandomFeatures,
    nodes: Vec<f64>,
}

impl FeatureMap for ShiftedBridge {
    type Input = f64;

    fn num_features(&self) -> usize {
        self.features.len()
    }

    fn output_weights(&self) -> Vec<f64> {
        let h = 1.0 / (self.nodes.len() - 1) as f64;
        let last = self.nodes.len() - 1;
        (0..self.nodes.len())
            .map(|k| if k == 0 || k == last { 0.5 * h } else { h })
            .collect()
    }

    fn evaluate(&self, x: &f64) -> Result<DMatrix<f64>> {
        let j = self.features.j_max;
        let mut phi = DMatrix::zeros(self.nodes.len(), self.features.len());
        for (col, p) in self.features.params.iter().enumerate() {
            for (row, t) in self.nodes.iter().enumerate() {
                phi[(row, col)] = bb_feature(0.5 * (x + t), &p[0], j)?;
            }
        }
        Ok(phi)
    }
}

fn kernel_equivalence() -> Result<Outcome> {
    let start = Instant::now();
    let nodes: Vec<f64> = (0..9).map(|k| k as f64 / 8.0).collect();
    let features = RandomFeatures::draw(FeatureFamily::BrownianBridge, 3, 512, FEATURE_SEED)?;
    let map = ShiftedBridge {
        features,
        nodes: nodes.clone(),
    };
    let xs = rng::uniforms(FEATURE_SEED, stream_id(StreamKind::Scalar, 0, 0), 9);
    let (train_x, held_out) = xs.split_at(4);
    let ys: Vec<Vec<f64>> = train_x
        .iter()
        .map(|x| nodes.iter().map(|t| bb_target(0.5 * (x + t))).collect())
        .collect();
    let lambda = 1e-3;
    let alpha = rfm::fit(
        &map,
        train_x,
        &ys,
        &SolveOptions {
            lambda,
            ..Default::default()
        },
    )?;
    let oracle = KernelRidgeOracle::fit(&map, train_x, &ys, lambda)?;
    let mut worst: f64 = 0.0;
    for x in held_out {
        let rfm_pred = map.evaluate(x)? * &alpha / 3.0;
        let ker = oracle.predict(x)?;
        let diff: f64 = rfm_pred
            .iter()
            .zip(&ker)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(diff / rfm_pred.norm());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-8 && within_budget(elapsed, 1.0),
        format!(
            "max relative gap {worst:.2e} (<= 1e-8), {:.2}s (< 1s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn bridge_kernel() -> Result<Outcome> {
    let start = Instant::now();
    let (x, y, exact) = (0.5, 0.25, 0.125);
    let (k, se) = experiments::bb_kernel_estimate(x, y, 10_000, 512, FEATURE_SEED)?;
    let rms = |m: usize| -> Result<f64> {
        let mut s = 0.0;
        for rep in 0..20u64 {
            let (v, _) = experiments::bb_kernel_estimate(x, y, m, 512, FEATURE_SEED + 1000 + rep)?;
            s += (v - exact) * (v - exact);
        }
        Ok((s / 20.0).sqrt())
    };
    let (e_small, e_large) = (rms(2_500)?, rms(10_000)?);
    let ratio = e_large / e_small;
    let elapsed = start.elapsed();
    let pass = (k - exact).abs() <= 3.0 * se && (0.35..=0.65).contains(&ratio) && within_budget(elapsed, 5.0);
    outcome(
        pass,
        format!(
            "k = {k:.5} vs 0.125, |gap| = {:.2} SE (<= 3); rms error m=2500 {e_small:.2e} -> m=10000 {e_large:.2e}, ratio {ratio:.3} (0.5 +- 30%); {:.2}s (< 5s)",
            (k - exact).abs() / se,
            elapsed.as_secs_f64()
        ),
    )
}

fn bridge_interpolant() -> Result<Outcome> {
    let start = Instant::now();
    let demo = experiments::bb_demo(32, &[50, 500, 5000], 512, FEATURE_SEED, 201)?;
    let gaps = demo.sup_gaps();
    let elapsed = start.elapsed();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    outcome(
        decreasing && within_budget(elapsed, 30.0),
        format!(
            "sup gaps m=50 {:.3e}, m=500 {:.3e}, m=5000 {:.3e} (strictly decreasing); {:.2}s (< 30s)",
            gaps[0],
            gaps[1],
            gaps[2],
            elapsed.as_secs_f64()
        ),
    )
}

fn darcy_order() -> Result<Outcome> {
    use std::f64::consts::PI;
    let start = Instant::now();
    let mut errs = vec![];
    for r in [33, 65] {
        let grid = Grid2D::new(r)?;
        let g = Grid::Square(grid);
        let mut cfg = DarcyConfig::new(grid);
        cfg.forcing = darcy::Forcing::Field(GridFunction::from_fn(g, |x| {
            2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin()
        }));
        let a = GridFunction::from_fn(g, |_| 1.0);
        let u = darcy::solve_darcy(&a, &cfg)?;
        let exact = GridFunction::from_fn(g, |x| (PI * x[0]).sin() * (PI * x[1]).sin());
        errs.push(u.sub(&exact)?.max_abs());
    }
    let ratio = errs[0] / errs[1];
    let elapsed = start.elapsed();
    outcome(
        (3.5..=4.5).contains(&ratio) && within_budget(elapsed, 5.0),
        format!(
            "max errors r=33 {:.3e}, r=65 {:.3e}, ratio {ratio:.3} (in [3.5, 4.5]); {:.2}s (< 5s)",
            errs[0],
            errs[1],
            elapsed.as_secs_f64()
        ),
    )
}

fn burgers_order() -> Result<Outcome> {
    use std::f64::consts::PI;
    let start = Instant::now();
    let grid = Grid1D::new(256)?;
    let a = GridFunction::from_fn(Grid::Periodic(grid), |x| (2.0 * PI * x[0]).sin());
    let sols = [4e-4, 2e-4, 1e-4]
        .iter()
        .map(|&dt| {
            let mut cfg = BurgersConfig::new(grid, 1e-2, 0.5);
            cfg.dt = dt;
            burgers::solve_burgers(&a, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let e1 = sols[0].sub(&sols[1])?.norm_l2();
    let e2 = sols[1].sub(&sols[2])?.norm_l2();
    let order = (e1 / e2).log2();
    let drift = sols.iter().map(|u| u.integral().abs()).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    outcome(
        order >= 3.5 && drift <= 1e-10 && within_budget(elapsed, 60.0),
        format!(
            "successive differences {e1:.3e}, {e2:.3e}, observed order {order:.3} (>= 3.5); max |mean| {drift:.1e} (<= 1e-10); {:.2}s (< 60s)",
            elapsed.as_secs_f64()
        ),
    )
}

struct BurgersData {
    train: Dataset,
    test: Dataset,
}

/// Burgers pairs at `T = 1` generated at `K = 257`, restricted to `K = 129`.
fn burgers_data() -> &'static BurgersData {
    static DATA: OnceLock<BurgersData> = OnceLock::new();
    DATA.get_or_init(|| {
        let cfg = BurgersConfig::new(Grid1D::new(256).unwrap(), 1e-2, 1.0);
        let prior = BurgersPrior::default();
        let gen = |n, seed| {
            burgers::gen_burgers_dataset(n, &prior, &cfg, seed)
                .and_then(|d| d.restrict_to_resolution(129))
                .unwrap()
        };
        BurgersData {
            train: gen(128, TRAIN_SEED),
            test: gen(200, TEST_SEED),
        }
    })
}

fn fourier() -> FeatureFamily {
    FeatureFamily::FourierBurgers(FourierParams::default())
}

fn burgers_model() -> &'static RfmModel {
    static MODEL: OnceLock<RfmModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let cfg = TrainConfig {
            family: fourier(),
            m: 256,
            j_max: None,
            seed: FEATURE_SEED,
            solve: SolveOptions::default(),
        };
        RfmModel::train(&burgers_data().train, &cfg).unwrap()
    })
}

fn burgers_learning() -> Result<Outcome> {
    let start = Instant::now();
    let data = burgers_data();
    let model = burgers_model();
    let e = rfm::expected_relative_test_error(model, &data.test)?.mean;
    outcome(
        e <= 0.08,
        format!(
            "n=128, m=256, K=129, n'=200: test error {e:.4} (<= 0.08); {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

struct DarcyData {
    train: Dataset,
    test: Dataset,
}

/// Darcy pairs generated at `r = 129`.
fn darcy_data() -> &'static DarcyData {
    static DATA: OnceLock<DarcyData> = OnceLock::new();
    DATA.get_or_init(|| {
        let cfg = DarcyConfig::new(Grid2D::new(129).unwrap());
        let prior = LevelSetPrior::default();
        DarcyData {
            train: darcy::gen_darcy_dataset(64, &prior, &cfg, TRAIN_SEED).unwrap(),
            test: darcy::gen_darcy_dataset(100, &prior, &cfg, TEST_SEED).unwrap(),
        }
    })
}

fn darcy_solve() -> SolveOptions {
    SolveOptions {
        lambda: 1e-8,
        ..Default::default()
    }
}

fn darcy_learning() -> Result<Outcome> {
    let start = Instant::now();
    let data = darcy_data();
    let train = data.train.restrict_to_resolution(33)?;
    let test = data.test.restrict_to_resolution(33)?;
    let cfg = TrainConfig {
        family: FeatureFamily::PredictorCorrectorDarcy(PredictorCorrectorParams::default()),
        m: 128,
        j_max: None,
        seed: FEATURE_SEED,
        solve: darcy_solve(),
    };
    let model = RfmModel::train(&train, &cfg)?;
    let e = rfm::expected_relative_test_error(&model, &test)?.mean;
    outcome(
        e <= 0.12,
        format!(
            "n=64, m=128, r=33, n'=100, lambda=1e-8: test error {e:.4} (<= 0.12); {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn m_scaling() -> Result<Outcome> {
    let start = Instant::now();
    let data = burgers_data();
    let ms = [32, 64, 128, 256, 512];
    let sweep = experiments::m_sweep(
        &data.train,
        &data.test,
        fourier(),
        &ms,
        FEATURE_SEED,
        &SolveOptions::default(),
    )?;
    let pts: Vec<(f64, f64)> = sweep.iter().map(|&(m, e)| (m as f64, e)).collect();
    let slope = experiments::loglog_slope(&pts);
    let listing: Vec<String> = sweep.iter().map(|(m, e)| format!("{m}:{e:.4}")).collect();
    outcome(
        (slope + 0.5).abs() <= 0.2,
        format!(
            "errors {}; log-log slope {slope:.3} (-0.5 +- 0.2); {:.1}s",
            listing.join(" "),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn resolution_transfer() -> Result<Outcome> {
    let start = Instant::now();
    let cfg = BurgersConfig::new(Grid1D::new(512)?, 1e-2, 1.0);
    let test = burgers::gen_burgers_dataset(200, &BurgersPrior::default(), &cfg, TEST_SEED)?;
    let errors = experiments::transfer_errors(burgers_model(), &test, &[65, 129, 257, 513])?;
    let lo = errors.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    let hi = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    let band = (hi - lo) / lo;
    let data = darcy_data();
    let rows = experiments::coefficient_convergence(
        &data.train,
        None,
        FeatureFamily::PredictorCorrectorDarcy(PredictorCorrectorParams::default()),
        128,
        FEATURE_SEED,
        &darcy_solve(),
        &[17, 33, 65, 129],
    )?;
    let dists: Vec<f64> = rows.iter().map(|r| r.alpha_distance).collect();
    let monotone = dists.windows(2).all(|w| w[1] < w[0]);
    let listing: Vec<String> = errors.iter().map(|(k, e)| format!("K={k}:{e:.4}")).collect();
    let dlisting: Vec<String> = rows
        .iter()
        .map(|r| format!("r={}:{:.3e}", r.resolution, r.alpha_distance))
        .collect();
    outcome(
        band <= 0.2 && monotone,
        format!(
            "Burgers {} band {:.2}% (<= 20%); Darcy alpha distance {} (decreasing); {:.1}s",
            listing.join(" "),
            100.0 * band,
            dlisting.join(" "),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn semigroup() -> Result<Outcome> {
    let start = Instant::now();
    let cfg = BurgersConfig::new(Grid1D::new(256)?, 1e-2, 0.5);
    let prior = BurgersPrior::default();
    let train = burgers::gen_burgers_dataset(128, &prior, &cfg, TRAIN_SEED)?.restrict_to_resolution(129)?;
    let tests = burgers::gen_burgers_datasets(200, &prior, &cfg, TEST_SEED, 4)?
        .iter()
        .map(|d| d.restrict_to_resolution(129))
        .collect::<Result<Vec<_>>>()?;
    let model = RfmModel::train(
        &train,
        &TrainConfig {
            family: fourier(),
            m: 256,
            j_max: None,
            seed: FEATURE_SEED,
            solve: SolveOptions::default(),
        },
    )?;
    let errors = experiments::semigroup_errors(&model, &tests)?;
    let e: Vec<f64> = errors.iter().map(|x| x.1).collect();
    let nondecreasing = e.windows(2).all(|w| w[1] >= w[0]);
    let ratio = e[3] / e[0];
    let listing: Vec<String> = errors.iter().map(|(j, v)| format!("j={j}:{v:.4}")).collect();
    outcome(
        nondecreasing && ratio <= 3.0,
        format!(
            "{} (nondecreasing); e(4T)/e(T) = {ratio:.2} (<= 3); {:.1}s",
            listing.join(" "),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_fvrf"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

/// Every file under `dir` except run manifests, as (relative path, bytes).
fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = vec![];
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if !p.to_string_lossy().ends_with("run.json") {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Result<Outcome> {
    let start = Instant::now();
    let run_all = |dir: &Path, threads: &str| -> bool {
        let p = |s: &str| dir.join(s).to_string_lossy().into_owned();
        let steps: Vec<Vec<String>> = vec![
            vec![
                "gen",
                "burgers",
                "--n",
                "12",
                "--k",
                "129",
                "--t",
                "0.25",
                "--horizons",
                "2",
                "--seed",
                "1",
                "--out",
                &p("b"),
            ],
            vec![
                "gen",
                "burgers",
                "--n",
                "6",
                "--k",
                "129",
                "--t",
                "0.25",
                "--horizons",
                "2",
                "--seed",
                "2",
                "--out",
                &p("bt"),
            ],
            vec!["gen", "darcy", "--n", "6", "--r", "33", "--seed", "1", "--out", &p("d")],
            vec![
                "train",
                "--data",
                &p("b/j1"),
                "--m",
                "24",
                "--seed",
                "3",
                "--model-out",
                &p("mb"),
            ],
            vec![
                "train",
                "--data",
                &p("d"),
                "--resolution",
                "17",
                "--m",
                "8",
                "--seed",
                "3",
                "--model-out",
                &p("md"),
            ],
            vec![
                "eval",
                "--model",
                &p("mb"),
                "--data",
                &p("bt/j1"),
                "--out",
                &p("eval.json"),
            ],
            vec![
                "transfer",
                "--model",
                &p("mb"),
                "--data",
                &p("bt/j1"),
                "--resolutions",
                "65,129",
                "--out",
                &p("transfer.csv"),
            ],
            vec![
                "transfer",
                "--coefficients",
                "--data",
                &p("d"),
                "--resolutions",
                "9,17,33",
                "--m",
                "8",
                "--out",
                &p("coef.csv"),
            ],
            vec![
                "semigroup",
                "--model",
                &p("mb"),
                "--data",
                &p("bt/j1"),
                "--data",
                &p("bt/j2"),
                "--out",
                &p("semigroup.csv"),
            ],
            vec!["bb-demo", "--m", "20,200", "--points", "21", "--out", &p("bb.csv")],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(String::from).collect())
        .collect();
        steps.iter().all(|s| {
            let mut args: Vec<&str> = vec!["--threads", threads];
            args.extend(s.iter().map(String::as_str));
            run_cli(&args)
        })
    };
    let a = tempfile::tempdir().map_err(|e| fvrf::Error::InvalidParameter(e.to_string()))?;
    let b = tempfile::tempdir().map_err(|e| fvrf::Error::InvalidParameter(e.to_string()))?;
    let ok = run_all(a.path(), "1") && run_all(b.path(), "3");
    let (fa, fb) = (artifacts(a.path()), artifacts(b.path()));
    let identical = ok && !fa.is_empty() && fa == fb;
    outcome(
        identical,
        format!(
            "{} artifacts from gen/train/eval/transfer/semigroup/bb-demo, repeated with 1 and 3 threads: {}; {:.1}s",
            fa.len(),
            if identical { "byte-identical" } else { "MISMATCH" },
            start.elapsed().as_secs_f64()
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "kernel ridge equivalence", kernel_equivalence),
        (2, "Brownian bridge empirical kernel", bridge_kernel),
        (3, "Brownian bridge interpolant limit", bridge_interpolant),
        (4, "Darcy solver second order", darcy_order),
        (5, "Burgers integrator fourth order", burgers_order),
        (6, "Burgers learning", burgers_learning),
        (7, "Darcy learning", darcy_learning),
        (8, "Monte Carlo rate in m", m_scaling),
        (9, "resolution transfer", resolution_transfer),
        (10, "semigroup time upscaling", semigroup),
        (11, "determinism", determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = vec![];
    for (id, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        println!("{} {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
