//! Infinite-level chain specification and validation.

use serde::Serialize;

use super::family::BlockFamily;
use crate::error::{Error, Result};
use crate::linalg::{
    add_into, inf_norm, is_irreducible, ones, put, row_sum_residual, Col, Mat, Row,
};
use crate::oracle::gth;

/// Tolerance on row sums of user-supplied specifications.
pub const INPUT_TOLERANCE: f64 = 1e-9;
/// Tolerance on row sums of internally constructed matrices.
pub const BUILD_TOLERANCE: f64 = 1e-12;
/// Levels scanned when certifying irreducibility of the full chain.
pub const IRREDUCIBILITY_WINDOW: usize = 20;

/// An infinite-level M/G/1-type chain.
///
/// Level 0 has `m0` phases, every other level `m1`. From level 0 the chain
/// moves to level `k >= 1` through `B(k)` (`m0 x m1`) and stays through
/// `B(0)`; from level 1 it drops to level 0 through `B(-1)` (`m1 x m0`).
/// Above the boundary it jumps by `k >= -1` levels through `A(k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainSpec {
    m0: usize,
    m1: usize,
    a: BlockFamily,
    b_down: Mat,
    b0: Mat,
    b_up: BlockFamily,
}

impl ChainSpec {
    /// Checks shapes and signs; stochasticity is left to [`ChainSpec::validate`].
    pub fn new(a: BlockFamily, b_down: Mat, b0: Mat, b_up: BlockFamily) -> Result<Self> {
        let m1 = a.rows();
        let m0 = b0.nrows();
        if m0 == 0 || m1 == 0 {
            return Err(Error::Dimension("phase counts must be positive".into()));
        }
        if a.first() != -1 || a.cols() != m1 {
            return Err(Error::Dimension(
                "A blocks must be square and start at -1".into(),
            ));
        }
        if b0.ncols() != m0 {
            return Err(Error::Dimension("B(0) must be square".into()));
        }
        if b_down.nrows() != m1 || b_down.ncols() != m0 {
            return Err(Error::Dimension(format!("B(-1) must be {m1}x{m0}")));
        }
        if b_up.first() != 1 || b_up.rows() != m0 || b_up.cols() != m1 {
            return Err(Error::Dimension(format!(
                "B(k), k >= 1, must be {m0}x{m1} and start at 1"
            )));
        }
        for (name, m) in [("B(-1)", &b_down), ("B(0)", &b0)] {
            if m.iter().any(|x| *x < 0.0 || !x.is_finite()) {
                return Err(Error::Negative(name.into()));
            }
        }
        Ok(Self {
            m0,
            m1,
            a,
            b_down,
            b0,
            b_up,
        })
    }

    pub fn m0(&self) -> usize {
        self.m0
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn a_family(&self) -> &BlockFamily {
        &self.a
    }

    pub fn b_up_family(&self) -> &BlockFamily {
        &self.b_up
    }

    /// `A(k)`; zero for `k < -1`.
    pub fn a(&self, k: i64) -> Mat {
        self.a.block(k)
    }

    /// `B(-1)`.
    pub fn b_down(&self) -> &Mat {
        &self.b_down
    }

    /// `B(0)`.
    pub fn b0(&self) -> &Mat {
        &self.b0
    }

    /// `B(k)` for `k >= 1`.
    pub fn b(&self, k: i64) -> Mat {
        assert!(k >= 1, "upward boundary blocks start at 1");
        self.b_up.block(k)
    }

    /// `sum_{l > k} A(l)` for `k >= -2`.
    pub fn tail_a(&self, k: i64) -> Mat {
        self.a.tail_sum(k)
    }

    /// `sum_{l > k} B(l)` for `k >= 0`.
    pub fn tail_b(&self, k: i64) -> Mat {
        assert!(k >= 0, "upward boundary tail sums start at 0");
        self.b_up.tail_sum(k)
    }

    /// `sum_{m > n} (m - n) A(m)` for `n >= -1`.
    pub fn double_tail_a(&self, n: i64) -> Result<Mat> {
        self.a.double_tail(n)
    }

    /// `sum_{m > n} (m - n) B(m)` for `n >= -1`.
    pub fn double_tail_b(&self, n: i64) -> Result<Mat> {
        self.b_up.double_tail(n)
    }

    /// `A = sum_k A(k)`.
    pub fn a_total(&self) -> Mat {
        self.a.total()
    }

    /// `beta_A = sum_k k A(k) e`.
    pub fn beta_a(&self) -> Col {
        let m = self.a.moment_tail(1, -1).expect("first moment of A");
        m * ones(self.m1)
    }

    /// Stationary vector of `A`.
    pub fn varpi(&self) -> Result<Row> {
        gth(&self.a_total())
    }

    /// Mean drift `sigma = varpi beta_A`.
    pub fn sigma(&self) -> Result<f64> {
        Ok((self.varpi()? * self.beta_a())[(0, 0)])
    }

    /// Largest upward jump with a nonzero block, `None` for infinite support.
    pub fn max_jump(&self) -> Option<i64> {
        let a = self.a.support_end()?;
        let b = self.b_up.support_end()?;
        Some(a.max(b).max(1))
    }

    pub fn has_finite_support(&self) -> bool {
        self.a.is_finite() && self.b_up.is_finite()
    }

    /// Number of states on levels `0..=levels`.
    pub fn states_through(&self, levels: usize) -> usize {
        self.m0 + levels * self.m1
    }

    /// First state index of `level`.
    pub fn offset(&self, level: usize) -> usize {
        if level == 0 {
            0
        } else {
            self.m0 + (level - 1) * self.m1
        }
    }

    pub fn phases(&self, level: usize) -> usize {
        if level == 0 {
            self.m0
        } else {
            self.m1
        }
    }

    /// Transition block from level `k` to level `l` of the infinite chain.
    pub fn p_block(&self, k: usize, l: usize) -> Mat {
        let jump = l as i64 - k as i64;
        match (k, l) {
            (0, 0) => self.b0.clone(),
            (0, _) => self.b(l as i64),
            (_, 0) => {
                if k == 1 {
                    self.b_down.clone()
                } else {
                    Mat::zeros(self.m1, self.m0)
                }
            }
            _ => self.a(jump),
        }
    }

    /// Top-left block of `P` covering levels `0..=levels`.
    pub fn assemble_p_window(&self, levels: usize) -> PWindow {
        let n = self.states_through(levels);
        let mut matrix = Mat::zeros(n, n);
        for k in 0..=levels {
            let lo = k.saturating_sub(1);
            for l in lo..=levels {
                put(
                    &mut matrix,
                    self.offset(k),
                    self.offset(l),
                    &self.p_block(k, l),
                );
            }
        }
        let deficiency = (Col::from_element(n, 1.0) - &matrix * ones(n))
            .iter()
            .map(|x| x.max(0.0))
            .collect();
        PWindow {
            levels,
            matrix,
            deficiency,
        }
    }

    /// Checks stochasticity, irreducibility and drift.
    pub fn validate(&self) -> Result<ValidationReport> {
        let a_total = self.a_total();
        let a_rows = row_sum_residual(&a_total, &ones(self.m1));
        let b_total = &self.b0 * ones(self.m0) + self.b_up.total() * ones(self.m1);
        let b_rows = (b_total - ones(self.m0)).amax();
        let down = (&self.b_down * ones(self.m0) - self.a(-1) * ones(self.m1)).amax();
        for (what, residual) in [
            ("sum_k A(k)", a_rows),
            ("sum_k B(k)", b_rows),
            ("B(-1) against A(-1)", down),
        ] {
            if residual > INPUT_TOLERANCE {
                return Err(Error::NotStochastic {
                    what: what.into(),
                    residual,
                });
            }
        }
        let a_irreducible = is_irreducible(&a_total);
        if !a_irreducible {
            return Err(Error::Reducible("A = sum_k A(k)".into()));
        }
        let varpi = self.varpi()?;
        let beta_a = self.beta_a();
        let sigma = (&varpi * &beta_a)[(0, 0)];
        let window = self.assemble_p_window(IRREDUCIBILITY_WINDOW);
        // reflect the lost mass back to level 0 so the pattern is a closed chain
        let mut closed = window.matrix.clone();
        for (i, d) in window.deficiency.iter().enumerate() {
            if *d > 0.0 {
                let mut first = Mat::zeros(1, self.m0);
                first.fill(*d / self.m0 as f64);
                add_into(&mut closed, i, 0, &first);
            }
        }
        let p_window_irreducible = is_irreducible(&closed);
        let b_first_moment = self
            .b_up
            .moment_tail(1, 1)
            .map(|m| inf_norm(&m))
            .unwrap_or(f64::INFINITY);
        let second = |f: &BlockFamily| f.moment_tail(2, 1).map(|m| inf_norm(&m)).is_ok();
        Ok(ValidationReport {
            m0: self.m0,
            m1: self.m1,
            a_row_residual: a_rows,
            b_row_residual: b_rows,
            down_residual: down,
            sigma,
            varpi: varpi.iter().copied().collect(),
            beta_a: beta_a.iter().copied().collect(),
            a_irreducible,
            p_window_irreducible,
            window_levels: IRREDUCIBILITY_WINDOW,
            caveat: format!(
                "irreducibility of P certified on levels 0..={IRREDUCIBILITY_WINDOW} only"
            ),
            boundary_first_moment_finite: b_first_moment.is_finite(),
            negative_drift: sigma < 0.0,
            second_moments_finite: second(&self.a) && second(&self.b_up),
        })
    }

    /// Like [`ChainSpec::validate`] but also demands negative drift.
    pub fn validate_recurrent(&self) -> Result<ValidationReport> {
        let report = self.validate()?;
        if !report.negative_drift {
            return Err(Error::NotPositiveRecurrent(report.sigma));
        }
        Ok(report)
    }
}

/// Explicit top-left block of `P` with the mass each row sends past it.
#[derive(Clone, Debug)]
pub struct PWindow {
    pub levels: usize,
    pub matrix: Mat,
    pub deficiency: Vec<f64>,
}

/// Outcome of [`ChainSpec::validate`].
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub m0: usize,
    pub m1: usize,
    pub a_row_residual: f64,
    pub b_row_residual: f64,
    pub down_residual: f64,
    pub sigma: f64,
    pub varpi: Vec<f64>,
    pub beta_a: Vec<f64>,
    /// `sum_k A(k)` is irreducible.
    pub a_irreducible: bool,
    /// `P` is irreducible, checked on a finite window only.
    pub p_window_irreducible: bool,
    pub window_levels: usize,
    pub caveat: String,
    /// `sum_k k B(k)` is finite.
    pub boundary_first_moment_finite: bool,
    /// The mean level drift is negative.
    pub negative_drift: bool,
    pub second_moments_finite: bool,
}
