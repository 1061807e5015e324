use fvrf::burgers::{self, BurgersConfig, BurgersPrior};
use fvrf::dataset::Dataset;
use fvrf::features::{FeatureFamily, FourierParams};
use fvrf::rfm::{expected_relative_test_error, RfmModel, SolveOptions, TrainConfig};
use fvrf::Grid1D;

fn data(n: usize, seed: u64) -> Dataset {
    let cfg = BurgersConfig::new(Grid1D::new(128).unwrap(), 1e-2, 0.5);
    burgers::gen_burgers_dataset(n, &BurgersPrior::default(), &cfg, seed).unwrap()
}

fn config(seed: u64) -> TrainConfig {
    TrainConfig {
        family: FeatureFamily::FourierBurgers(FourierParams::default()),
        m: 48,
        j_max: None,
        seed,
        solve: SolveOptions::default(),
    }
}

#[test]
fn saved_data_and_model_reproduce_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let train = data(24, 1);
    train.save(&dir.path().join("train")).unwrap();
    let reloaded = Dataset::load(&dir.path().join("train")).unwrap();
    assert_eq!(reloaded.inputs, train.inputs);
    assert_eq!(reloaded.outputs, train.outputs);

    let model = RfmModel::train(&reloaded, &config(5)).unwrap();
    model.save(&dir.path().join("model")).unwrap();
    let loaded = RfmModel::load(&dir.path().join("model")).unwrap();
    let a = &train.inputs[0];
    assert_eq!(model.predict(a).unwrap(), loaded.predict(a).unwrap());
}

#[test]
fn training_is_deterministic_and_seed_dependent() {
    let train = data(16, 2);
    let a = RfmModel::train(&train, &config(7)).unwrap();
    let b = RfmModel::train(&train, &config(7)).unwrap();
    let c = RfmModel::train(&train, &config(8)).unwrap();
    assert_eq!(a.alpha, b.alpha);
    assert_ne!(a.alpha, c.alpha);
}

#[test]
fn more_training_data_lowers_test_error() {
    let test = data(20, 3);
    let small = RfmModel::train(&data(8, 4), &config(9)).unwrap();
    let large = RfmModel::train(&data(48, 4), &config(9)).unwrap();
    let e_small = expected_relative_test_error(&small, &test).unwrap().mean;
    let e_large = expected_relative_test_error(&large, &test).unwrap().mean;
    assert!(e_large < e_small, "{e_large} vs {e_small}");
}
