use super::g::MatanSolution;
use crate::chain::{BlockFamily, ChainSpec};
use crate::error::Result;
use crate::linalg::Mat;

/// Power tail sums `S_F(k) = sum_{m >= k} F(m) G^(m-k)` of both block
/// families, and the matrices `R(k) = S_A(k) (I - Phi(0))^-1`,
/// `R0(k) = S_B(k) (I - Phi(0))^-1` for `k = 1..=kmax`.
#[derive(Clone, Debug)]
pub struct RFamily {
    pub kmax: usize,
    /// `S_A(k)` for `k = 0..=kmax + 1`.
    pub s_a: Vec<Mat>,
    /// `S_B(k)` for `k = 1..=kmax + 1`, stored at `k - 1`.
    pub s_b: Vec<Mat>,
    r: Vec<Mat>,
    r0: Vec<Mat>,
    /// `sum_{k >= 1} R(k)` and `sum_{k >= 1} R0(k)`.
    pub r_total: Mat,
    pub r0_total: Mat,
}

struct TailSums {
    stored: Vec<Mat>,
    total_from_one: Mat,
}

/// Backward recursion `S(k) = F(k) + S(k+1) G` started from the lumped tail
/// `S(cut+1) = Fbar(cut)`.
fn power_tail_sums(f: &BlockFamily, g: &Mat, from: i64, upto: i64, tol: f64) -> Result<TailSums> {
    let (cut_tol, _) = f.truncation_index(tol);
    let cut = cut_tol.max(upto).max(from);
    let mut s = f.tail_sum(cut);
    let mut total = Mat::zeros(f.rows(), f.cols());
    // S(k) for k >= cut + 2 approximated by Fbar(k-1)
    let m1 = f.moment_tail(1, cut + 2)?;
    let m0 = f.moment_tail(0, cut + 2)?;
    total += m1 - m0 * (cut + 1) as f64;
    total += &s;
    let mut stored = vec![Mat::zeros(f.rows(), f.cols()); (upto - from + 1).max(0) as usize];
    if cut < upto {
        stored[(cut + 1 - from) as usize] = s.clone();
    }
    let mut buf = s.clone();
    for k in (from..=cut).rev() {
        buf.gemm(1.0, &s, g, 0.0);
        s = f.block(k) + &buf;
        if k >= 1 {
            total += &s;
        }
        if k <= upto {
            stored[(k - from) as usize] = s.clone();
        }
    }
    Ok(TailSums {
        stored,
        total_from_one: total,
    })
}

impl RFamily {
    pub fn new(spec: &ChainSpec, sol: &MatanSolution, kmax: usize, tol: f64) -> Result<Self> {
        let upto = kmax as i64 + 1;
        let a = power_tail_sums(spec.a_family(), &sol.g, 0, upto, tol)?;
        let b = power_tail_sums(spec.b_up_family(), &sol.g, 1, upto, tol)?;
        let r = a.stored[1..=kmax]
            .iter()
            .map(|s| s * &sol.phi_inv)
            .collect();
        let r0 = b.stored[..kmax].iter().map(|s| s * &sol.phi_inv).collect();
        Ok(Self {
            kmax,
            r_total: &a.total_from_one * &sol.phi_inv,
            r0_total: &b.total_from_one * &sol.phi_inv,
            s_a: a.stored,
            s_b: b.stored,
            r,
            r0,
        })
    }

    /// `R(k)` for `1 <= k <= kmax`.
    pub fn r(&self, k: usize) -> &Mat {
        &self.r[k - 1]
    }

    /// `R0(k)` for `1 <= k <= kmax`.
    pub fn r0(&self, k: usize) -> &Mat {
        &self.r0[k - 1]
    }

    /// `S_A(k)` for `0 <= k <= kmax + 1`.
    pub fn s_a(&self, k: usize) -> &Mat {
        &self.s_a[k]
    }

    /// `S_B(k)` for `1 <= k <= kmax + 1`.
    pub fn s_b(&self, k: usize) -> &Mat {
        &self.s_b[k - 1]
    }
}
