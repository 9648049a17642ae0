//! Product-level demand forecasting for working-day retail series.
//!
//! The crate covers the full pipeline: CSV ingestion and feature
//! engineering, min-max scaling with moving-window framing, a from-scratch
//! LSTM engine trained by BPTT and Adam, the retailer's five benchmark
//! models, random-search hyperparameter tuning, lookahead-resolved error
//! evaluation, the experiment ladder (univariate through parallel
//! multi-product forecasting), and a seeded synthetic data generator for
//! desk-scale verification.

pub mod baselines;
pub mod calendar;
pub mod config;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod ingest;
pub mod nn;
pub mod pipeline;
pub mod plot;
pub mod seed;
pub mod synthgen;
pub mod tune;

pub use calendar::{ProductId, SalesRecord, StoreCalendar, WarehouseId};
pub use error::{Error, Result};
pub use ingest::{FeatureMatrix, SalesTable};
pub use nn::{ModelConfig, TrainedModel};
pub use pipeline::{DataSplit, MinMaxScaler, WindowedSample, HORIZON, INPUT_WINDOW};
