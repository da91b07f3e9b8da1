//! Multi-modal video-game genre classification from cover images and
//! descriptions, built on a small reverse-mode autodiff engine.

pub mod autodiff;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod imaging;
pub mod models;
pub mod optim;
pub mod text;
pub mod training;

pub use error::{Error, Result};
