use super::g::MatanSolution;
use super::rmat::RFamily;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, Mat};

/// Blocks `F+(k;l)` of the fundamental matrix of the chain restricted to
/// levels `>= 1`, for `1 <= k, l <= w`.
#[derive(Clone, Debug)]
pub struct FPlusWindow {
    w: usize,
    g: Mat,
    blocks: Vec<Mat>,
    /// Largest deviation of `F+(k;1)` from `G^(k-1) (I - Phi(0))^-1`.
    pub closed_form_gap: f64,
}

impl FPlusWindow {
    pub fn new(sol: &MatanSolution, r: &RFamily, w: usize) -> Result<Self> {
        if w == 0 {
            return Err(Error::Domain("F+ window needs w >= 1".into()));
        }
        if r.kmax + 1 < w {
            return Err(Error::WindowTooSmall { required: w - 1 });
        }
        let m = sol.g.nrows();
        let mut blocks = vec![Mat::zeros(m, m); w * w];
        let at = |k: usize, l: usize| (k - 1) * w + (l - 1);
        for k in 1..=w {
            for l in 1..=w {
                let block = if k == 1 && l == 1 {
                    sol.phi_inv.clone()
                } else if l < k {
                    &sol.g * &blocks[at(k - 1, l)]
                } else if l == k {
                    &sol.phi_inv + &sol.g * &blocks[at(k - 1, k)]
                } else {
                    let mut acc = Mat::zeros(m, m);
                    for n in 1..l {
                        acc.gemm(1.0, &blocks[at(k, n)], r.r(l - n), 1.0);
                    }
                    acc
                };
                blocks[at(k, l)] = block;
            }
        }
        let mut gap = 0.0f64;
        let mut closed = sol.phi_inv.clone();
        for k in 1..=w {
            gap = gap.max(max_abs(&(&blocks[at(k, 1)] - &closed)));
            closed = &sol.g * &closed;
        }
        if gap > 1e-10 * max_abs(&sol.phi_inv).max(1.0) {
            return Err(Error::Inconsistent {
                what: "F+(k;1) against its closed form".into(),
                residual: gap,
                tolerance: 1e-10,
            });
        }
        Ok(Self {
            w,
            g: sol.g.clone(),
            blocks,
            closed_form_gap: gap,
        })
    }

    pub fn w(&self) -> usize {
        self.w
    }

    /// `F+(k;l)`; rows below the window use `F+(k;l) = G^(k-l) F+(l;l)`.
    pub fn get(&self, k: usize, l: usize) -> Result<Mat> {
        if k == 0 || l == 0 || l > self.w {
            return Err(Error::Domain(format!(
                "F+({k};{l}) outside window {}",
                self.w
            )));
        }
        if k <= self.w {
            return Ok(self.blocks[(k - 1) * self.w + (l - 1)].clone());
        }
        let mut x = self.blocks[(self.w - 1) * self.w + (l - 1)].clone();
        for _ in self.w..k {
            x = &self.g * x;
        }
        Ok(x)
    }

    pub fn block(&self, k: usize, l: usize) -> &Mat {
        &self.blocks[(k - 1) * self.w + (l - 1)]
    }
}
