use serde::Serialize;

use super::window::DeviationWindow;
use crate::chain::{BlockFamily, ChainSpec, FiniteChainSpec, MAX_TRUNCATION};
use crate::error::{Error, Result};
use crate::linalg::{inf_norm, max_abs, ones, outer, Mat, Row};
use crate::stationary::LevelVector;

/// Smallest `J` whose remainder `sum_{j > J} (j + shift) ||F(j)||` is below
/// `tol`, with the remainder left at `J`.
pub(crate) fn weighted_cut(f: &BlockFamily, shift: f64, tol: f64) -> (i64, f64) {
    if let Some(end) = f.support_end() {
        return (end.max(f.first()), 0.0);
    }
    let rem = |j: i64| -> f64 {
        let m1 = f
            .moment_tail(1, j + 1)
            .map(|m| inf_norm(&m))
            .unwrap_or(f64::INFINITY);
        let m0 = inf_norm(&f.tail_sum(j));
        m1 + shift * m0
    };
    let mut hi = f.head_end().max(1);
    while rem(hi) > tol {
        if hi >= MAX_TRUNCATION {
            return (MAX_TRUNCATION, rem(MAX_TRUNCATION));
        }
        hi = (hi * 2).min(MAX_TRUNCATION);
    }
    let mut lo = f.first();
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if rem(mid) > tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (hi, rem(hi))
}

/// Mass-weighted cut: `sum_{j > J} ||F(j)|| <= tol`.
fn mass_cut(f: &BlockFamily, tol: f64) -> (i64, f64) {
    let (j, rem) = f.truncation_index(tol);
    (j.max(f.first()), rem)
}

#[derive(Clone, Debug, Serialize)]
pub struct PoissonResidual {
    pub max_residual: f64,
    pub rows: usize,
    pub jump_cut: i64,
    /// Bound on the neglected part of the infinite row sums.
    pub tail_bound: f64,
}

/// Residual of `(I - P) H = I - e pi` on rows of levels `0..=K` and columns
/// of levels `0..=L`. Blocks above `K` needed by the row sums come from the
/// exact block formula.
pub fn poisson_residual(spec: &ChainSpec, win: &DeviationWindow) -> Result<PoissonResidual> {
    let k_rows = win.k_max;
    if k_rows < win.l_max {
        return Err(Error::WindowTooSmall {
            required: win.l_max,
        });
    }
    let scale = (k_rows as f64 + 1.0) / -win.sigma;
    let tol = 1e-13 / scale.max(1.0);
    let (ja, ra) = weighted_cut(spec.a_family(), k_rows as f64, tol);
    let (jb, rb) = weighted_cut(spec.b_up_family(), 0.0, tol);
    let jump = ja.max(jb).max(1) as usize;
    let m0 = spec.m0();
    let m1 = spec.m1();
    let mut worst = 0.0f64;
    for l in 0..=win.l_max {
        let col = win.h_column(l, k_rows + jump)?;
        let pi_l = win.pi_level(l);
        let ml = pi_l.len();
        // level 0
        let mut lhs = &col[0] - spec.b0() * &col[0];
        for m in 1..=jb.max(0) as usize {
            lhs -= spec.b(m as i64) * &col[m];
        }
        let mut rhs = -outer(&ones(m0), pi_l);
        if l == 0 {
            rhs += Mat::identity(m0, m0);
        }
        worst = worst.max(max_abs(&(lhs - rhs)));
        for k in 1..=k_rows {
            let mut lhs = col[k].clone();
            if k == 1 {
                lhs -= spec.b_down() * &col[0];
            } else {
                lhs -= spec.a(-1) * &col[k - 1];
            }
            for j in 0..=ja.max(0) as usize {
                lhs -= spec.a(j as i64) * &col[k + j];
            }
            let mut rhs = -outer(&ones(m1), pi_l);
            if k == l {
                rhs += Mat::identity(m1, ml);
            }
            worst = worst.max(max_abs(&(lhs - rhs)));
        }
    }
    Ok(PoissonResidual {
        max_residual: worst,
        rows: k_rows + 1,
        jump_cut: jump as i64,
        tail_bound: (ra + rb) * scale,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DifferenceReport {
    pub n: usize,
    pub max_error: f64,
    /// Per column level: `max |(pi_N - pi)(l) - rhs(l)|`.
    pub column_errors: Vec<f64>,
    /// `P^(N)` and `P` agree on every column level below `N`.
    pub structural_zero: bool,
    pub jump_cut: i64,
    pub tail_bound: f64,
}

/// `rhs = pi_N (P^(N) - P) H` against `pi_N - pi` for column levels `0..=L`.
pub fn difference_formula_check(
    spec: &ChainSpec,
    win: &DeviationWindow,
    fspec: &FiniteChainSpec,
    pi_n: &LevelVector,
) -> Result<DifferenceReport> {
    let n = fspec.n();
    if win.k_max < n {
        return Err(Error::WindowTooSmall { required: n });
    }
    let scale = (2.0 * n as f64 + 1.0) / -win.sigma;
    let tol = 1e-13 / scale.max(1.0);
    let (ja, ra) = weighted_cut(spec.a_family(), 0.0, tol);
    let (jb, rb) = weighted_cut(spec.b_up_family(), 0.0, tol);
    let jump = ja.max(jb).max(1) as usize;

    let mut structural_zero = true;
    for k in 0..=n {
        for l in k.saturating_sub(1)..n {
            if fspec.p_block(k, l) != spec.p_block(k, l) {
                structural_zero = false;
            }
        }
    }
    let p_block = |k: usize, l: usize| -> Mat {
        if k == 0 {
            spec.b(l as i64)
        } else {
            spec.a(l as i64 - k as i64)
        }
    };
    let mut column_errors = Vec::with_capacity(win.l_max + 1);
    for l in 0..=win.l_max {
        let col = win.h_column(l, n + jump)?;
        let ml = win.pi_level(l).len();
        let mut rhs = Row::zeros(ml);
        for k in 0..=n {
            let pk = pi_n.level(k);
            let mut d = (fspec.p_block(k, n) - spec.p_block(k, n)) * &col[n];
            let reach = if k == 0 {
                jb.max(0) as usize
            } else {
                k + ja.max(0) as usize
            };
            for np in n + 1..=reach.max(n) {
                d -= p_block(k, np) * &col[np];
            }
            rhs += pk * d;
        }
        let lhs = pi_n.level(l) - win.pi_level(l);
        column_errors.push((lhs - rhs).amax());
    }
    Ok(DifferenceReport {
        n,
        max_error: column_errors.iter().copied().fold(0.0, f64::max),
        column_errors,
        structural_zero,
        jump_cut: jump as i64,
        tail_bound: (ra + rb) * scale,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    pub n: usize,
    pub k: usize,
    /// `(1/-sigma) [pi_N(0) B=(N-1) e + sum_l pi_N(l) A=(N-l-1) e] pi(k)`.
    pub main: Vec<f64>,
    pub phi: Vec<f64>,
    /// The four terms of `phi` in order: boundary augmentation, level
    /// augmentation, boundary overshoot, level overshoot.
    pub phi_terms: [Vec<f64>; 4],
    pub lhs: Vec<f64>,
    pub gap: f64,
    pub tail_bound: f64,
}

/// Splits `pi_N(k) - pi(k)` into the main term and the correction `phi`.
pub fn difference_decomposition(
    spec: &ChainSpec,
    win: &DeviationWindow,
    fspec: &FiniteChainSpec,
    pi_n: &LevelVector,
    k: usize,
) -> Result<Decomposition> {
    let n = fspec.n();
    if k > n {
        return Err(Error::Domain(format!(
            "decomposition needs k <= N, got k = {k}, N = {n}"
        )));
    }
    if k > win.l_max {
        return Err(Error::WindowTooSmall { required: k });
    }
    let sigma = win.sigma;
    let m1 = spec.m1();
    let e1 = ones(m1);
    let pi_k = win.pi_level(k).clone();

    let bb = spec.double_tail_b(n as i64 - 1)?;
    let mut weight = (pi_n.level(0) * bb * &e1)[(0, 0)];
    for l in 1..=n {
        let aa = spec.double_tail_a(n as i64 - l as i64 - 1)?;
        weight += (pi_n.level(l) * aa * &e1)[(0, 0)];
    }
    let main = &pi_k * (weight / -sigma);

    let tol = 1e-14;
    let (ja, ra) = mass_cut(spec.a_family(), tol);
    let (jb, rb) = mass_cut(spec.b_up_family(), tol);
    let reach = (n + ja.max(0) as usize).max(jb.max(0) as usize).max(n + 1);
    let es = win.e_column(k, n, reach)?;
    let e_at = |m: usize| &es[m - n];
    let e_n = es[0].clone();

    let t1 = pi_n.level(0) * (fspec.aug_b() - spec.tail_b(n as i64 - 1)) * &e_n;
    let mut t2 = Row::zeros(pi_k.len());
    for l in 1..=n {
        t2 += pi_n.level(l) * (fspec.aug_a(n - l) - spec.tail_a(n as i64 - l as i64 - 1)) * &e_n;
    }
    let mut t3 = Row::zeros(pi_k.len());
    let p0 = pi_n.level(0);
    for m in n + 1..=(jb.max(0) as usize).max(n) {
        t3 += &p0 * spec.b(m as i64) * (&e_n - e_at(m));
    }
    let mut t4 = Row::zeros(pi_k.len());
    for l in 1..=n {
        let pl = pi_n.level(l);
        for m in n + 1..=(l + ja.max(0) as usize).max(n) {
            t4 += &pl * spec.a(m as i64 - l as i64) * (&e_n - e_at(m));
        }
    }
    let phi = &t1 + &t2 + &t3 + &t4;
    let lhs = pi_n.level(k) - &pi_k;
    let gap = (&main + &phi - &lhs).amax();
    let e_max = es.iter().map(max_abs).fold(0.0, f64::max);
    let to_vec = |r: &Row| r.iter().copied().collect::<Vec<f64>>();
    Ok(Decomposition {
        n,
        k,
        main: to_vec(&main),
        phi: to_vec(&phi),
        phi_terms: [to_vec(&t1), to_vec(&t2), to_vec(&t3), to_vec(&t4)],
        lhs: to_vec(&lhs),
        gap,
        tail_bound: 2.0 * e_max * (ra + rb),
    })
}

/// Window of the deviation matrix `D = (I - e pi) H`.
#[derive(Clone, Debug)]
pub struct DWindow {
    /// `D(k;l)` for `k = 0..=K`, `l = 0..=L`, stored row-major in `(k, l)`.
    pub blocks: Vec<Mat>,
    /// `sum_k pi(k) H(k;l)`.
    pub pi_h: Vec<Row>,
    /// Size of the tail correction added to each `pi H(.;l)`.
    pub tail_bound: f64,
    pub k_max: usize,
    pub l_max: usize,
}

impl DWindow {
    pub fn block(&self, k: usize, l: usize) -> &Mat {
        &self.blocks[k * (self.l_max + 1) + l]
    }
}

/// `D(k;l) = H(k;l) - e pi H(.;l)`, summing `pi H` over every computed level
/// of `pi` and closing the rest with the affine form of `H`.
pub fn deviation_d_window(win: &DeviationWindow, pi: &LevelVector) -> Result<DWindow> {
    let kd = pi.max_level();
    if kd == 0 {
        return Err(Error::Divergent("pi has no levels above 0".into()));
    }
    let mut pi_h = Vec::with_capacity(win.l_max + 1);
    let mut tail_bound = 0.0f64;
    let tail = pi.tail_vector(kd);
    for l in 0..=win.l_max {
        let col = win.h_column(l, kd)?;
        let mut acc = &pi.level(0) * &col[0];
        for k in 1..=kd {
            acc += pi.level(k) * &col[k];
        }
        let e_last = win.e(kd.max(l.max(1)), l)?;
        let corr =
            &tail * &e_last - win.pi_level(l) * (tail.sum() * (kd as f64 + 1.0) / -win.sigma);
        tail_bound = tail_bound.max(corr.amax());
        acc += corr;
        pi_h.push(acc);
    }
    let mut blocks = Vec::with_capacity((win.k_max + 1) * (win.l_max + 1));
    for k in 0..=win.k_max {
        for (l, ph) in pi_h.iter().enumerate() {
            let h = win.h(k, l)?;
            let rows = h.nrows();
            blocks.push(h - outer(&ones(rows), ph));
        }
    }
    Ok(DWindow {
        blocks,
        pi_h,
        tail_bound,
        k_max: win.k_max,
        l_max: win.l_max,
    })
}
