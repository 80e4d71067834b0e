//! Household driving costs, VMT demand elasticities, and induced-travel and
//! energy-rebound forecasts for connected and automated vehicles.
//!
//! The crate is organised as a pipeline:
//!
//! - [`model`] computes per-mile fuel and time costs for a household.
//! - [`ingest`] reads raw travel-survey tables and fuel-economy data into
//!   [`model::HouseholdRecord`]s.
//! - [`design`] turns records into a weighted regression design.
//! - [`estimator`] fits log-log demand models by weighted least squares with
//!   cluster-robust standard errors.
//! - [`forecast`] maps elasticities to induced travel, energy ratios and
//!   backfire frontiers.
//! - [`synthetic`] generates populations with known elasticities and runs
//!   Monte Carlo recovery studies.
//! - [`report`] renders fitted models and scenario grids as text tables.
//!
//! The guide in `book/` walks through each stage with runnable examples.

pub mod design;
pub mod estimator;
pub mod forecast;
pub mod ingest;
pub mod model;
pub mod report;
pub mod synthetic;
pub mod table;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/costs.md")]
mod book_costs {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/estimation.md")]
mod book_estimation {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/forecasting.md")]
mod book_forecasting {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/synthetic.md")]
mod book_synthetic {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/ingest.md")]
mod book_ingest {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
