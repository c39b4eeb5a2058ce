//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, RowDVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Row = RowDVector<f64>;
pub type Col = DVector<f64>;

/// Condition numbers above this trigger a warning on inversion.
pub const CONDITION_WARNING: f64 = 1e12;

pub fn ones(n: usize) -> Col {
    Col::from_element(n, 1.0)
}

/// Induced infinity norm (max absolute row sum).
pub fn inf_norm(m: &Mat) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_slice(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Largest deviation of the row sums of `m` from `target`.
pub fn row_sum_residual(m: &Mat, target: &Col) -> f64 {
    let sums = m * ones(m.ncols());
    (sums - target).amax()
}

/// Dense LU inverse with a condition-number warning.
pub fn inverse(m: &Mat, what: &str) -> Result<Mat> {
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular(what.to_string()))?;
    if inv.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular(what.to_string()));
    }
    let cond = inf_norm(m) * inf_norm(&inv);
    if cond > CONDITION_WARNING {
        log::warn!("{what}: condition number {cond:.3e}");
    }
    Ok(inv)
}

/// Solves `x * m = rhs` for the row vector `x`.
pub fn solve_left(m: &Mat, rhs: &Row, what: &str) -> Result<Row> {
    let sol = m
        .transpose()
        .lu()
        .solve(&rhs.transpose())
        .ok_or_else(|| Error::Singular(what.to_string()))?;
    Ok(sol.transpose())
}

/// `m^k` by repeated squaring.
pub fn power(m: &Mat, mut k: u64) -> Mat {
    let n = m.nrows();
    let mut result = Mat::identity(n, n);
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Spectral radius of a nonnegative matrix from `||M^(2^p)||^(1/2^p)`.
pub fn spectral_radius_nonneg(m: &Mat) -> f64 {
    let mut base = m.map(f64::abs);
    let mut log_scale = 0.0_f64;
    let mut exponent = 1.0_f64;
    for _ in 0..60 {
        let norm = inf_norm(&base);
        if norm == 0.0 {
            return 0.0;
        }
        log_scale += norm.ln() / exponent;
        base /= norm;
        base = &base * &base;
        exponent *= 2.0;
    }
    let norm = inf_norm(&base);
    if norm == 0.0 {
        return 0.0;
    }
    (log_scale + norm.ln() / exponent).exp()
}

fn pattern_graph(m: &Mat) -> DiGraph<(), ()> {
    let n = m.nrows();
    let mut graph = DiGraph::with_capacity(n, n * 2);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if m[(i, j)] > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    graph
}

/// Strongly connected components of the positive pattern of `m`.
pub fn communicating_classes(m: &Mat) -> Vec<Vec<usize>> {
    let graph = pattern_graph(m);
    let mut classes: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    classes.sort();
    classes
}

/// Communicating classes that no transition leaves.
pub fn closed_classes(m: &Mat) -> Vec<Vec<usize>> {
    let classes = communicating_classes(m);
    let n = m.nrows();
    let mut owner = vec![0usize; n];
    for (c, members) in classes.iter().enumerate() {
        for &i in members {
            owner[i] = c;
        }
    }
    classes
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members
                .iter()
                .all(|&i| (0..n).all(|j| m[(i, j)] <= 0.0 || owner[j] == *c))
        })
        .map(|(_, members)| members.clone())
        .collect()
}

pub fn is_irreducible(m: &Mat) -> bool {
    m.nrows() > 0 && communicating_classes(m).len() == 1
}

pub fn outer(col: &Col, row: &Row) -> Mat {
    col * row
}

/// Copies `block` into `target` with its top-left corner at (`r`, `c`).
pub fn put(target: &mut Mat, r: usize, c: usize, block: &Mat) {
    target
        .view_mut((r, c), (block.nrows(), block.ncols()))
        .copy_from(block);
}

pub fn add_into(target: &mut Mat, r: usize, c: usize, block: &Mat) {
    let mut view = target.view_mut((r, c), (block.nrows(), block.ncols()));
    view += block;
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
