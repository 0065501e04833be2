//! Causal explanation summaries for group-by-average query results.
//!
//! The pipeline evaluates the query, mines frequent grouping patterns over
//! attributes the group-by attributes determine, searches a lattice of
//! treatment patterns for the largest positive and negative conditional
//! average treatment effects per grouping pattern, and selects at most `k`
//! explanations covering a `theta` fraction of the groups by rounding an LP
//! relaxation.

pub mod dag;
pub mod effect;
pub mod error;
pub mod groupmine;
pub mod lpsolve;
pub mod oracle;
pub mod patterns;
pub mod pipeline;
pub mod report;
pub mod synthgen;
pub mod tabular;
pub mod treatmine;

pub use dag::{parse_dot, CausalDag};
pub use effect::{CateEstimate, Skip};
pub use error::{Error, Phase, Result};
pub use patterns::{Literal, Op, Pattern, SimplePredicate};
pub use groupmine::mine_grouping_patterns;
pub use lpsolve::{FractionalSolution, IlpInstance, Selection};
pub use pipeline::{explain, run_pipeline, Algorithm, RunConfig, Settings};
pub use report::{render_json, render_text, SummaryReport};
pub use tabular::{load_csv, AggregateView, Dataset, Kind, QuerySpec};
pub use treatmine::{Direction, ExplanationCandidate, LatticeNode};
