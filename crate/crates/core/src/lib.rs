#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod backtest;
pub mod calendar;
pub mod error;
pub mod features;
pub mod indicators;
pub mod marketdata;
pub mod math;
pub mod matrix;
pub mod models;
pub mod pipeline;
pub mod preprocess;
pub mod seed;
pub mod stacking;
pub mod synth;
pub mod tuning;
