use serde::Serialize;

use crate::chain::{BlockFamily, ChainSpec};
use crate::error::{Error, Result};
use crate::linalg::{inf_norm, inverse, ones, spectral_radius_nonneg, Mat, Row};
use crate::oracle::gth;

#[derive(Clone, Debug)]
pub struct GOptions {
    /// Stop when successive iterates differ by less than this.
    pub tol: f64,
    /// Tail mass of `A` folded into the closure block.
    pub trunc_tol: f64,
    pub max_iter: usize,
}

impl Default for GOptions {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            trunc_tol: 1e-13,
            max_iter: 200_000,
        }
    }
}

/// `G`, its stationary vector and `Phi(0)`, with convergence metadata.
#[derive(Clone, Debug)]
pub struct MatanSolution {
    pub g: Mat,
    pub g_vec: Row,
    pub phi0: Mat,
    /// `(I - Phi(0))^-1`.
    pub phi_inv: Mat,
    pub info: GInfo,
}

#[derive(Clone, Debug, Serialize)]
pub struct GInfo {
    pub iterations: usize,
    /// `||G - sum_m A(m) G^(m+1)||_inf` at the returned `G`.
    pub residual: f64,
    pub row_residual: f64,
    /// Whether every iterate dominated its predecessor entrywise (to roundoff).
    pub monotone: bool,
    /// Cut-off index of the `A` family and the tail mass left beyond it.
    pub truncation: i64,
    pub truncation_tail: f64,
    pub phi0_spectral_radius: f64,
}

/// Materialized blocks `F(first..=cut)` of a family.
pub(crate) fn materialize(f: &BlockFamily, cut: i64) -> Vec<Mat> {
    (f.first()..=cut).map(|k| f.block(k)).collect()
}

/// `sum_{m=-1}^{M} A(m) X^(m+1)` with `Abar(M)` lumped into the last power.
fn horner(blocks: &[Mat], closure: &Mat, x: &Mat, buf: &mut Mat) -> Mat {
    let last = blocks.len() - 1;
    let mut acc = &blocks[last] + closure;
    for block in blocks[..last].iter().rev() {
        buf.gemm(1.0, &acc, x, 0.0);
        acc.copy_from(block);
        acc += &*buf;
    }
    acc
}

/// Natural fixed-point iteration `G <- sum_m A(m) G^(m+1)` from `G = O`.
pub fn solve_g(spec: &ChainSpec, opts: &GOptions) -> Result<MatanSolution> {
    let sigma = spec.sigma()?;
    if sigma >= 0.0 {
        return Err(Error::NotPositiveRecurrent(sigma));
    }
    let m = spec.m1();
    let a = spec.a_family();
    let (cut, tail) = a.truncation_index(opts.trunc_tol);
    let cut = cut.max(0);
    let blocks = materialize(a, cut);
    let closure = a.tail_sum(cut);
    let mut g = Mat::zeros(m, m);
    let mut buf = Mat::zeros(m, m);
    let mut monotone = true;
    let mut iterations = 0;
    let mut diff = f64::INFINITY;
    while iterations < opts.max_iter {
        let next = horner(&blocks, &closure, &g, &mut buf);
        iterations += 1;
        let delta = &next - &g;
        if delta.min() < -1e-14 {
            monotone = false;
        }
        diff = inf_norm(&delta);
        g = next;
        if diff < opts.tol {
            break;
        }
    }
    if diff >= opts.tol {
        return Err(Error::NoConvergence {
            what: "G iteration".into(),
            iterations,
            residual: diff,
        });
    }
    let residual = inf_norm(&(horner(&blocks, &closure, &g, &mut buf) - &g));
    let row_residual = (&g * ones(m)).add_scalar(-1.0).amax();
    if row_residual > 10.0 * opts.tol.max(1e-13) * (1.0 / -sigma).max(1.0) {
        log::warn!("G row sums deviate from one by {row_residual:.3e}");
    }
    let g_vec = stationary_of_g(&g)?;
    let phi0 = phi0(spec, &g, cut);
    let rho = spectral_radius_nonneg(&phi0);
    if rho >= 1.0 {
        return Err(Error::Inconsistent {
            what: "spectral radius of Phi(0)".into(),
            residual: rho,
            tolerance: 1.0,
        });
    }
    let phi_inv = inverse(&(Mat::identity(m, m) - &phi0), "I - Phi(0)")?;
    Ok(MatanSolution {
        g,
        g_vec,
        phi0,
        phi_inv,
        info: GInfo {
            iterations,
            residual,
            row_residual,
            monotone,
            truncation: cut,
            truncation_tail: tail,
            phi0_spectral_radius: rho,
        },
    })
}

/// Stationary vector of `G` on its unique closed class.
pub fn stationary_of_g(g: &Mat) -> Result<Row> {
    // renormalize rows so roundoff in G does not bias the elimination
    let m = g.nrows();
    let mut p = g.clone();
    for i in 0..m {
        let s: f64 = p.row(i).sum();
        if s > 0.0 {
            p.row_mut(i).unscale_mut(s);
        }
    }
    gth(&p)
}

/// `Phi(0) = sum_{m >= 0} A(m) G^m`.
fn phi0(spec: &ChainSpec, g: &Mat, cut: i64) -> Mat {
    let a = spec.a_family();
    let blocks: Vec<Mat> = (0..=cut.max(0)).map(|k| a.block(k)).collect();
    let closure = a.tail_sum(cut.max(0));
    let m = g.nrows();
    let mut buf = Mat::zeros(m, m);
    horner(&blocks, &closure, g, &mut buf)
}

impl MatanSolution {
    pub fn solve(spec: &ChainSpec) -> Result<Self> {
        solve_g(spec, &GOptions::default())
    }
}
