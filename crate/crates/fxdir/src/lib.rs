//! Std companion of `fxdir-core`: file formats, experiment config, run
//! manifests, report emission and the command implementations behind the
//! `fxdir` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod report;
pub mod svg;
