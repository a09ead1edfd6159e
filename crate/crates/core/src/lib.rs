//! Surveillance analytics for wastewater virus measurements.
//!
//! The pipeline turns per-plant laboratory samples into national indicator
//! curves ([`excretion`], [`aggregation`]), evaluates cheaper sampling
//! designs against the reference design ([`scenario`], [`dissimilarity`]),
//! quantifies curve uncertainty ([`uncertainty`]) and monitors the curve with
//! process-control charts ([`spm`]) or a count time-series model
//! ([`count_model`]). [`synth`] generates panels with a known truth.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod arma;
pub mod count_model;
pub mod dissimilarity;
pub mod error;
pub mod excretion;
pub mod ingest;
pub mod optim;
pub mod scenario;
pub mod series;
pub mod spm;
pub mod stats;
pub mod synth;
pub mod uncertainty;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use aggregation::{AggregationConfig, Method, NationalCurve};
pub use dissimilarity::{DissimilarityConfig, Measure};
pub use error::{CoreError, Result};
pub use excretion::{ExcretionConfig, ExcretorsPanel};
pub use ingest::{PanelDataset, PlantId, PlantMeta, SampleRecord, SewerType};
pub use series::{DailySeries, GappedSeries};
