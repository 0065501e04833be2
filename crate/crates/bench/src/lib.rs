//! Shared inputs for the benchmarks.

use causumx_core::synthgen::{generate_synthetic, synthetic_dag, synthetic_grouping_attrs};
use causumx_core::{CausalDag, Dataset, QuerySpec, Settings};

pub struct Workload {
    pub data: Dataset,
    pub dag: CausalDag,
    pub query: QuerySpec,
    pub settings: Settings,
}

/// Synthetic instance with `n` rows, `i` bucket attributes, `j` treatments.
pub fn synthetic(n: usize, i: usize, j: usize) -> Workload {
    Workload {
        data: generate_synthetic(n, i, j, 1).expect("valid sizes"),
        dag: synthetic_dag(i, j),
        query: QuerySpec::new(vec!["G".into()], "O"),
        settings: Settings {
            grouping_attrs: Some(synthetic_grouping_attrs(i)),
            ..Settings::default()
        },
    }
}
