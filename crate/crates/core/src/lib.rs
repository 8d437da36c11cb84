//! Counterparty credit exposure and XVA engine for interest-rate derivatives.
//!
//! The crate is organised around the calculation pipeline: market data
//! ingestion and curve bootstrapping ([`marketdata`]), the multi-curve
//! two-factor Gaussian short-rate model ([`g2pp`]), swap and swaption
//! pricing ([`pricing`]), collateral simulation with margin period of risk
//! ([`collateral`]), ISDA-SIMM v2.1 dynamic initial margin ([`simm`]), and
//! CVA/DVA with model-risk AVA ([`xva`]).

pub mod collateral;
pub mod g2pp;
pub mod marketdata;
pub mod math;
pub mod pricing;
pub mod rng;
pub mod simm;
pub mod time;
pub mod xva;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("curve extrapolation: t = {t_days} days beyond last pillar {last_days}")]
    Extrapolation { t_days: f64, last_days: i64 },
    #[error("bootstrap failed at pillar {pillar_days}d: {msg}")]
    Bootstrap { pillar_days: i64, msg: String },
    #[error("root solve failed: {0}")]
    RootSolve(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("implied volatility inversion failed: {0}")]
    ImpliedVol(String),
    #[error("unsupported request: {0}")]
    Unsupported(String),
    #[error("config error in field `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error("numerical failure at path {path_id} step {step_days}d: {msg}")]
    PathStep {
        path_id: u64,
        step_days: i64,
        msg: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
