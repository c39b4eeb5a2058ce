//! Level-increment block families with exact tail sums.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, Mat};
use crate::special::hurwitz_zeta;

/// Hard cap on the level at which infinite block families are cut off.
pub const MAX_TRUNCATION: i64 = 1 << 18;

/// Scalar weights `w(k)` of an analytic tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailWeights {
    /// `w(k) = ratio^k`
    Geometric { ratio: f64 },
    /// `w(k) = (k + shift)^(-exponent)`
    PowerLaw {
        exponent: f64,
        #[serde(default)]
        shift: f64,
    },
}

impl TailWeights {
    pub fn check(&self, start: i64) -> Result<()> {
        match *self {
            TailWeights::Geometric { ratio } => {
                if !(ratio > 0.0 && ratio < 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "geometric ratio must lie in (0,1), got {ratio}"
                    )));
                }
            }
            TailWeights::PowerLaw { exponent, shift } => {
                if !(exponent > 1.0 && exponent.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "power-law exponent must exceed 1, got {exponent}"
                    )));
                }
                if !(start as f64 + shift > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "power-law base start + shift must be positive (start {start}, shift {shift})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn weight(&self, k: i64) -> f64 {
        match *self {
            TailWeights::Geometric { ratio } => ratio.powi(k as i32),
            TailWeights::PowerLaw { exponent, shift } => (k as f64 + shift).powf(-exponent),
        }
    }

    /// `sum_{k >= n} k^order w(k)` for `order <= 2`.
    pub fn moment_from(&self, order: u32, n: i64) -> Result<f64> {
        let nf = n as f64;
        match *self {
            TailWeights::Geometric { ratio: r } => {
                let head = r.powi(n as i32);
                let q = 1.0 - r;
                Ok(match order {
                    0 => head / q,
                    1 => head * (nf * q + r) / (q * q),
                    2 => head * (nf * nf * q * q + 2.0 * nf * r * q + r * (1.0 + r)) / (q * q * q),
                    _ => unreachable!("moments above order 2 are not used"),
                })
            }
            TailWeights::PowerLaw {
                exponent: b,
                shift: c,
            } => {
                if b <= order as f64 + 1.0 {
                    return Err(Error::Divergent(format!(
                        "moment of order {order} of a power law with exponent {b}"
                    )));
                }
                let q = nf + c;
                let z0 = hurwitz_zeta(b, q);
                Ok(match order {
                    0 => z0,
                    1 => hurwitz_zeta(b - 1.0, q) - c * z0,
                    2 => hurwitz_zeta(b - 2.0, q) - 2.0 * c * hurwitz_zeta(b - 1.0, q) + c * c * z0,
                    _ => unreachable!("moments above order 2 are not used"),
                })
            }
        }
    }

    pub fn power_exponent(&self) -> Option<f64> {
        match *self {
            TailWeights::PowerLaw { exponent, .. } => Some(exponent),
            TailWeights::Geometric { .. } => None,
        }
    }
}

/// Continuation `F(k) = w(k) * profile` for `k` past the explicit head.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticTail {
    pub weights: TailWeights,
    pub profile: Mat,
}

/// A family `k -> F(k)` of equally sized nonnegative blocks indexed from
/// `first`, given by explicit head blocks and an optional analytic tail.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockFamily {
    first: i64,
    rows: usize,
    cols: usize,
    head: Vec<Mat>,
    tail: Option<AnalyticTail>,
}

impl BlockFamily {
    pub fn new(
        first: i64,
        rows: usize,
        cols: usize,
        head: Vec<Mat>,
        tail: Option<AnalyticTail>,
    ) -> Result<Self> {
        for (i, m) in head.iter().enumerate() {
            if m.nrows() != rows || m.ncols() != cols {
                return Err(Error::Dimension(format!(
                    "block {} is {}x{}, expected {rows}x{cols}",
                    first + i as i64,
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|x| *x < 0.0 || !x.is_finite()) {
                return Err(Error::Negative(format!("block {}", first + i as i64)));
            }
        }
        if let Some(t) = &tail {
            if t.profile.nrows() != rows || t.profile.ncols() != cols {
                return Err(Error::Dimension("tail profile".into()));
            }
            if t.profile.iter().any(|x| *x < 0.0 || !x.is_finite()) {
                return Err(Error::Negative("tail profile".into()));
            }
            t.weights.check(first + head.len() as i64)?;
        }
        Ok(Self {
            first,
            rows,
            cols,
            head,
            tail,
        })
    }

    pub fn finite(first: i64, rows: usize, cols: usize, head: Vec<Mat>) -> Result<Self> {
        Self::new(first, rows, cols, head, None)
    }

    pub fn first(&self) -> i64 {
        self.first
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn head(&self) -> &[Mat] {
        &self.head
    }

    pub fn tail(&self) -> Option<&AnalyticTail> {
        self.tail.as_ref()
    }

    /// First index not covered by the explicit head.
    pub fn head_end(&self) -> i64 {
        self.first + self.head.len() as i64
    }

    /// Last index with a possibly nonzero block, or `None` for infinite support.
    pub fn support_end(&self) -> Option<i64> {
        if self.tail.is_some() {
            None
        } else {
            Some(self.head_end() - 1)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tail.is_none()
    }

    pub fn zero(&self) -> Mat {
        Mat::zeros(self.rows, self.cols)
    }

    pub fn block(&self, k: i64) -> Mat {
        if k < self.first {
            return self.zero();
        }
        if k < self.head_end() {
            return self.head[(k - self.first) as usize].clone();
        }
        match &self.tail {
            Some(t) => &t.profile * t.weights.weight(k),
            None => self.zero(),
        }
    }

    /// `sum_{k >= from} k^order F(k)`.
    pub fn moment_tail(&self, order: u32, from: i64) -> Result<Mat> {
        let mut acc = self.zero();
        let lo = from.max(self.first);
        let end = self.head_end();
        // largest indices first
        for k in (lo..end).rev() {
            let w = (k as f64).powi(order as i32);
            if w != 0.0 {
                acc += &self.head[(k - self.first) as usize] * w;
            }
        }
        if let Some(t) = &self.tail {
            let n = from.max(end);
            acc += &t.profile * t.weights.moment_from(order, n)?;
        }
        Ok(acc)
    }

    /// `sum_{l > k} F(l)`.
    pub fn tail_sum(&self, k: i64) -> Mat {
        self.moment_tail(0, k + 1)
            .expect("zeroth moments of validated tails are finite")
    }

    /// Sum of all blocks.
    pub fn total(&self) -> Mat {
        self.tail_sum(self.first - 1)
    }

    /// `sum_{m > n} Fbar(m) = sum_{m > n + 1} (m - n - 1) F(m)`.
    pub fn double_tail(&self, n: i64) -> Result<Mat> {
        if let Some(b) = self.tail.as_ref().and_then(|t| t.weights.power_exponent()) {
            if b <= 3.0 {
                return Err(Error::Divergent(format!(
                    "double tail sum needs finite second moments (power-law exponent {b} <= 3)"
                )));
            }
        }
        let m1 = self.moment_tail(1, n + 2)?;
        let m0 = self.moment_tail(0, n + 2)?;
        Ok(m1 - m0 * (n + 1) as f64)
    }

    /// Smallest `M >= head_end - 1` with `||tail_sum(M)|| <= tol`, capped at
    /// [`MAX_TRUNCATION`]; also returns the tail norm left at `M`.
    pub fn truncation_index(&self, tol: f64) -> (i64, f64) {
        let base = self.head_end() - 1;
        if self.tail.is_none() {
            return (base.max(self.first), 0.0);
        }
        let norm_at = |m: i64| inf_norm(&self.tail_sum(m));
        if norm_at(base) <= tol {
            return (base, norm_at(base));
        }
        let mut hi = base.max(1);
        while norm_at(hi) > tol {
            if hi >= MAX_TRUNCATION {
                return (MAX_TRUNCATION, norm_at(MAX_TRUNCATION));
            }
            hi = (hi * 2).min(MAX_TRUNCATION);
        }
        let mut lo = base;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if norm_at(mid) > tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (hi, norm_at(hi))
    }

    /// `D * F(k)` for every block, keeping the tail analytic.
    pub fn left_multiplied(&self, d: &Mat) -> Result<Self> {
        let head = self.head.iter().map(|m| d * m).collect();
        let tail = self.tail.as_ref().map(|t| AnalyticTail {
            weights: t.weights.clone(),
            profile: d * &t.profile,
        });
        Self::new(self.first, d.nrows(), self.cols, head, tail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: &[f64], first: i64) -> BlockFamily {
        BlockFamily::finite(
            first,
            1,
            1,
            v.iter().map(|x| Mat::from_element(1, 1, *x)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn finite_tail_sums() {
        let a = scalar(&[0.5, 0.3, 0.2], -1);
        assert!((a.tail_sum(0)[(0, 0)] - 0.2).abs() < 1e-16);
        assert_eq!(a.tail_sum(5)[(0, 0)], 0.0);
        assert!((a.tail_sum(-2)[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((a.double_tail(-1).unwrap()[(0, 0)] - 0.2).abs() < 1e-16);
        assert_eq!(a.double_tail(0).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn double_tail_sums_single_tails() {
        let a = BlockFamily::new(
            -1,
            1,
            1,
            vec![Mat::from_element(1, 1, 0.6), Mat::from_element(1, 1, 0.1)],
            Some(AnalyticTail {
                weights: TailWeights::PowerLaw {
                    exponent: 4.5,
                    shift: 0.0,
                },
                profile: Mat::from_element(1, 1, 0.2),
            }),
        )
        .unwrap();
        for n in [0_i64, 3, 10] {
            let top = 1_000_000_i64;
            let direct: f64 = (n + 2..=top)
                .rev()
                .map(|m| (m - n - 1) as f64 * 0.2 * (m as f64).powf(-4.5))
                .sum();
            let bound = 0.2 * (top as f64).powf(-2.5) / 2.5;
            let exact = a.double_tail(n).unwrap()[(0, 0)];
            assert!(
                exact >= direct - 1e-16 && exact <= direct + bound + 1e-16,
                "n={n}"
            );
        }
    }

    #[test]
    fn geometric_moments_match_partial_sums() {
        let w = TailWeights::Geometric { ratio: 0.37 };
        for n in [0_i64, 1, 5, 12] {
            for order in 0..=2u32 {
                let direct: f64 = (n..n + 400)
                    .rev()
                    .map(|k| (k as f64).powi(order as i32) * w.weight(k))
                    .sum();
                let closed = w.moment_from(order, n).unwrap();
                assert!(
                    ((direct - closed) / closed).abs() < 1e-13,
                    "n={n} order={order}"
                );
            }
        }
    }

    #[test]
    fn power_law_divergence_is_signalled() {
        let w = TailWeights::PowerLaw {
            exponent: 2.5,
            shift: 0.0,
        };
        assert!(w.moment_from(1, 1).is_ok());
        assert!(matches!(w.moment_from(2, 1), Err(Error::Divergent(_))));
    }
}
