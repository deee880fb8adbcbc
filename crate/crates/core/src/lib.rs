//! Causal effect of database tuples on query answers.
//!
//! Tuples are Boolean variables of a uniform outcome space. A query is
//! compiled into its lineage over those variables, specialized to the
//! instance, and the effect of a tuple is the difference of the query's
//! expectations under the two interventions on that tuple. Actual causes,
//! responsibility and the Pearson normalization are provided alongside.

pub mod error;
pub mod lineage;
pub mod metrics;
pub mod probability;
pub mod query;
pub mod rational;
pub mod relational;
pub mod report;

pub use error::{Error, Result};
pub use rational::Rational;
pub use relational::{Assignment, Instance, Schema, Tuple};
