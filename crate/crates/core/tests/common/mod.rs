#![allow(dead_code)]

use fxdir_core::calendar::ymd;
use fxdir_core::features::{apply_transforms, build_dataset, DatasetConfig, FeatureMatrix, Representation};
use fxdir_core::marketdata::{build_panel, AlignedPanel};
use fxdir_core::matrix::Matrix;
use fxdir_core::seed;
use fxdir_core::synth::{generate, PlantedSignal, SynthConfig};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn normal_matrix(rows: usize, cols: usize, s: u64) -> Matrix {
    let mut rng = seed::rng(s);
    let data = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_labels(n: usize, s: u64) -> Vec<u8> {
    let mut rng = seed::rng(s);
    (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect()
}

/// Small synthetic panel covering the default fold plan and test year 2022.
pub fn small_synth(seed_value: u64, planted: Option<PlantedSignal>) -> SynthConfig {
    SynthConfig {
        seed: seed_value,
        days: 2600,
        end: ymd(2022, 12, 31),
        instruments: vec!["EURUSD".into(), "DAX".into()],
        indicators: vec!["USA_CPI_YOY".into(), "EA_CPI_YOY".into(), "EA_INTEREST_RATE".into()],
        planted,
        ..SynthConfig::default()
    }
}

pub fn panel(cfg: &SynthConfig) -> AlignedPanel {
    let data = generate(cfg).unwrap();
    let raw = build_panel(&data.series, &data.calendars, &cfg.target).unwrap();
    apply_transforms(&raw, None, None).unwrap().0
}

pub fn dataset(panel: &AlignedPanel, repr: Representation) -> FeatureMatrix {
    let cfg = DatasetConfig { lag_depth: 5, ..DatasetConfig::default() };
    build_dataset(panel, repr, &cfg).unwrap()
}
