//! Finite-level truncations with augmented last column.

use serde::{Deserialize, Serialize};

use super::spec::{ChainSpec, BUILD_TOLERANCE, INPUT_TOLERANCE};
use crate::error::{Error, Result};
use crate::linalg::{ones, put, row_sum_residual, Mat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    LastColumn,
    Custom,
}

/// A chain truncated at level `n`, with the last column block replaced by
/// `aug_a[k] = A^(N)(k)` (row level `N - k`) and `aug_b = B^(N)(N)`.
#[derive(Clone, Debug)]
pub struct FiniteChainSpec {
    base: ChainSpec,
    n: usize,
    aug_a: Vec<Mat>,
    aug_b: Mat,
    scheme: Augmentation,
}

impl FiniteChainSpec {
    /// Last-column-block augmentation: `A^(N)(k) = Abar(k-1)`, `B^(N)(N) = Bbar(N-1)`.
    pub fn last_column(base: &ChainSpec, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("truncation level must be at least 1".into()));
        }
        let aug_a = (0..n as i64).map(|k| base.tail_a(k - 1)).collect();
        let aug_b = base.tail_b(n as i64 - 1);
        let spec = Self {
            base: base.clone(),
            n,
            aug_a,
            aug_b,
            scheme: Augmentation::LastColumn,
        };
        spec.check(BUILD_TOLERANCE)?;
        Ok(spec)
    }

    /// Caller-supplied augmentation blocks, checked against the row-sum constraints.
    pub fn custom(base: &ChainSpec, n: usize, aug_a: Vec<Mat>, aug_b: Mat) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("truncation level must be at least 1".into()));
        }
        if aug_a.len() != n {
            return Err(Error::Dimension(format!(
                "expected {n} augmentation blocks A^(N)(0..N-1), got {}",
                aug_a.len()
            )));
        }
        let (m0, m1) = (base.m0(), base.m1());
        if aug_a.iter().any(|m| m.nrows() != m1 || m.ncols() != m1)
            || aug_b.nrows() != m0
            || aug_b.ncols() != m1
        {
            return Err(Error::Dimension("augmentation block shape".into()));
        }
        if aug_a
            .iter()
            .chain([&aug_b])
            .any(|m| m.iter().any(|x| *x < 0.0))
        {
            return Err(Error::Negative("augmentation block".into()));
        }
        let spec = Self {
            base: base.clone(),
            n,
            aug_a,
            aug_b,
            scheme: Augmentation::Custom,
        };
        spec.check(INPUT_TOLERANCE)?;
        Ok(spec)
    }

    fn check(&self, tol: f64) -> Result<()> {
        let m1 = self.base.m1();
        for (k, block) in self.aug_a.iter().enumerate() {
            let target = self.base.tail_a(k as i64 - 1) * ones(m1);
            let residual = row_sum_residual(block, &target);
            if residual > tol {
                return Err(Error::NotStochastic {
                    what: format!("A^(N)({k}) against Abar({})", k as i64 - 1),
                    residual,
                });
            }
        }
        let target = self.base.tail_b(self.n as i64 - 1) * ones(m1);
        let residual = row_sum_residual(&self.aug_b, &target);
        if residual > tol {
            return Err(Error::NotStochastic {
                what: "B^(N)(N) against Bbar(N-1)".into(),
                residual,
            });
        }
        Ok(())
    }

    pub fn base(&self) -> &ChainSpec {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scheme(&self) -> Augmentation {
        self.scheme
    }

    /// `A^(N)(k)` for `k` in `0..N`.
    pub fn aug_a(&self, k: usize) -> &Mat {
        &self.aug_a[k]
    }

    /// `B^(N)(N)`.
    pub fn aug_b(&self) -> &Mat {
        &self.aug_b
    }

    pub fn dim(&self) -> usize {
        self.base.states_through(self.n)
    }

    /// Transition block from level `k` to level `l` of `P^(N)`.
    pub fn p_block(&self, k: usize, l: usize) -> Mat {
        if l == self.n && k <= self.n {
            if k == 0 {
                return self.aug_b.clone();
            }
            return self.aug_a[self.n - k].clone();
        }
        self.base.p_block(k, l)
    }

    /// The full matrix `P^(N)`.
    pub fn assemble(&self) -> Mat {
        let n = self.dim();
        let mut p = Mat::zeros(n, n);
        for k in 0..=self.n {
            for l in k.saturating_sub(1)..=self.n {
                put(
                    &mut p,
                    self.base.offset(k),
                    self.base.offset(l),
                    &self.p_block(k, l),
                );
            }
        }
        p
    }

    /// `sup_k ||A^(N)(k) - Abar(k-1)||_inf`; zero for last-column augmentation.
    pub fn augmentation_deviation(&self) -> f64 {
        self.aug_a
            .iter()
            .enumerate()
            .map(|(k, m)| crate::linalg::inf_norm(&(m - self.base.tail_a(k as i64 - 1))))
            .fold(0.0, f64::max)
    }
}
