//! Synthetic data with a known answer.
//!
//! Schema `G, G_1..G_i, T_1..T_j, O`: `G` is unique per row, `G_p` splits
//! `G`'s range into `2p` equal-width buckets, each `T_q` is uniform on
//! `1..=5`, and `O = T_1 - T_2 + T_3 - ...`. The strongest positive treatment
//! therefore sets odd `T`s to 5 and even `T`s to 1.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dag::CausalDag;
use crate::error::{Error, Result};
use crate::tabular::{write_csv, Column, Dataset};

pub fn bucket_attr(p: usize) -> String {
    format!("G_{p}")
}

pub fn treatment_attr(q: usize) -> String {
    format!("T_{q}")
}

/// Bucket label of 1-based row `r` in `G_p`.
pub fn bucket_of(r: usize, p: usize, n: usize) -> usize {
    (r * 2 * p).div_ceil(n)
}

pub fn generate_synthetic(n: usize, i: usize, j: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || j == 0 {
        return Err(Error::Config(format!("synthetic data needs n >= 1 and j >= 1, got n={n}, j={j}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = vec![vec![0u8; n]; j];
    let mut o = Vec::with_capacity(n);
    for r in 0..n {
        let mut sum = 0i64;
        for (q, col) in t.iter_mut().enumerate() {
            let v: u8 = rng.gen_range(1..=5);
            col[r] = v;
            sum += if q % 2 == 0 { v as i64 } else { -(v as i64) };
        }
        o.push(Some(sum as f64));
    }

    let labels = |f: &dyn Fn(usize) -> String| -> Column {
        let cells: Vec<Option<String>> = (0..n).map(|r| Some(f(r))).collect();
        Column::categorical(&cells)
    };
    let mut cols = vec![("G".to_string(), labels(&|r| (r + 1).to_string()))];
    for p in 1..=i {
        cols.push((bucket_attr(p), labels(&|r| bucket_of(r + 1, p, n).to_string())));
    }
    for (q, col) in t.iter().enumerate() {
        cols.push((treatment_attr(q + 1), labels(&|r| col[r].to_string())));
    }
    cols.push(("O".to_string(), Column::numeric(o)));
    Dataset::new(cols)
}

/// `T_q -> O` edges; `G` and the buckets are isolated nodes.
pub fn synthetic_dag(i: usize, j: usize) -> CausalDag {
    let mut nodes = vec!["G".to_string()];
    nodes.extend((1..=i).map(bucket_attr));
    nodes.extend((1..=j).map(treatment_attr));
    nodes.push("O".to_string());
    let edges: Vec<(String, String)> = (1..=j).map(|q| (treatment_attr(q), "O".to_string())).collect();
    CausalDag::new(&nodes, &edges).expect("synthetic DAG is acyclic")
}

/// Attributes to mine grouping patterns over: the buckets, or `G` itself
/// when there are none.
pub fn synthetic_grouping_attrs(i: usize) -> Vec<String> {
    if i == 0 {
        vec!["G".to_string()]
    } else {
        (1..=i).map(bucket_attr).collect()
    }
}

/// Writes `data.csv` and `dag.dot` into `dir`, returning both paths.
pub fn write_synthetic(dir: &Path, n: usize, i: usize, j: usize, seed: u64) -> Result<(PathBuf, PathBuf)> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let d = generate_synthetic(n, i, j, seed)?;
    let data = dir.join("data.csv");
    let file = fs::File::create(&data).map_err(io(&data))?;
    write_csv(&d, std::io::BufWriter::new(file))?;
    let dag = dir.join("dag.dot");
    fs::write(&dag, synthetic_dag(i, j).to_dot()).map_err(io(&dag))?;
    Ok((data, dag))
}
