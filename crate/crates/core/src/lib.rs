//! Insolvency contagion in interbank credit networks.
//!
//! The pipeline is: draw a credit network ([`netgen`]), size the loans and
//! balance sheets from two global constants ([`balance`]), shock one bank and
//! let distress travel up creditor chains ([`cascade`]), and repeat over a
//! random ensemble for a grid of equity capital ratios ([`experiment`]).
//!
//! Balance-sheet and cascade code is generic over [`Scalar`] (`f32` or
//! `f64`); the aliases below fix it to `f64`, which the sweeps use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balance;
pub mod cascade;
pub mod config;
pub mod error;
pub mod experiment;
pub mod netgen;
pub mod rng;
pub mod scalar;

pub use balance::{
    apply_surcharge, build_balance_sheets, build_from_topology, compute_weights, validate, Check,
    ValidationReport, Violation,
};
pub use cascade::{initial_shock, propagate, transmit_shares, LossRule};
pub use config::{emit_config, parse_config, parse_config_str};
pub use error::{ConfigError, Error, Result};
pub use experiment::{
    percentile, run_replication, sweep, InitialBankPolicy, Scenario, ScenarioConfig, Surcharge,
    SweepRecord, SweepResult,
};
pub use netgen::{
    degree_stats, gen_erdos_renyi, gen_preferential_attachment, AttachmentKernel, DegreeStats,
    Topology, TopologyKind,
};
pub use rng::RngStream;
pub use scalar::Scalar;

pub type WeightMatrix = balance::WeightMatrix<f64>;
pub type BalanceSheetSet = balance::BalanceSheetSet<f64>;
pub type Constants = balance::Constants<f64>;
pub type ShockState = cascade::ShockState<f64>;
pub type CascadeResult = cascade::CascadeResult<f64>;
pub type DefaultEvent = cascade::DefaultEvent<f64>;

pub type WeightMatrix32 = balance::WeightMatrix<f32>;
pub type BalanceSheetSet32 = balance::BalanceSheetSet<f32>;
pub type CascadeResult32 = cascade::CascadeResult<f32>;
