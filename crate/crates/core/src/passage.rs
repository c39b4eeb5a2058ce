//! Poisson equation of the repeating part, Foster-Lyapunov drift vectors and
//! mean first-passage times to level 0.

use serde::Serialize;

use crate::chain::{ChainSpec, FiniteChainSpec};
use crate::error::{Error, Result};
use crate::linalg::{inverse, ones, outer, Col, Mat};
use crate::matan::{MatanSolution, RFamily};
use crate::stationary::LevelVector;

/// Solution `a = (I - A + e varpi)^-1 beta_A + c e` of `(I - A) x = -sigma e + beta_A`.
#[derive(Clone, Debug)]
pub struct PoissonA {
    pub a: Col,
    pub c: f64,
    pub sigma: f64,
    pub residual: f64,
}

pub fn solve_a(spec: &ChainSpec) -> Result<PoissonA> {
    let m = spec.m1();
    let a_tot = spec.a_total();
    let varpi = spec.varpi()?;
    let beta = spec.beta_a();
    let sigma = (&varpi * &beta)[(0, 0)];
    let reg = Mat::identity(m, m) - &a_tot + outer(&ones(m), &varpi);
    let base = inverse(&reg, "I - A + e varpi")? * &beta;
    let c = (-base.min()).max(0.0) + 1.0;
    let a = base.add_scalar(c);
    let lhs = (Mat::identity(m, m) - &a_tot) * &a;
    let rhs = ones(m) * -sigma + &beta;
    let residual = (lhs - rhs).amax();
    Ok(PoissonA {
        a,
        c,
        sigma,
        residual,
    })
}

/// Mean first-passage times `u(k)` to level 0 for `k = 0..=kmax`.
#[derive(Clone, Debug)]
pub struct PassageVectors {
    /// `(I - A - beta_A g)^-1`.
    pub resolvent: Mat,
    pub sigma: f64,
    g: Mat,
    xe: Col,
    u: Vec<Col>,
}

impl PassageVectors {
    pub fn new(spec: &ChainSpec, sol: &MatanSolution, r: &RFamily, kmax: usize) -> Result<Self> {
        let m = spec.m1();
        let sigma = spec.sigma()?;
        if sigma >= 0.0 {
            return Err(Error::NotPositiveRecurrent(sigma));
        }
        let x = Mat::identity(m, m) - spec.a_total() - outer(&spec.beta_a(), &sol.g_vec);
        let resolvent = inverse(&x, "I - A - beta_A g")?;
        let xe = &resolvent * ones(m);
        let e0 = ones(spec.m0());
        let mean_up = spec.b_up_family().moment_tail(1, 1)? * ones(m);
        let u0 = &e0 + spec.tail_b(0) * &xe - r.s_b(1) * (&sol.g * &xe) + mean_up / -sigma;
        let mut u = Vec::with_capacity(kmax + 1);
        u.push(u0);
        let mut gk_xe = xe.clone();
        for k in 1..=kmax {
            gk_xe = &sol.g * gk_xe;
            u.push(&xe - &gk_xe + ones(m) * (k as f64 / -sigma));
        }
        Ok(Self {
            resolvent,
            sigma,
            g: sol.g.clone(),
            xe,
            u,
        })
    }

    pub fn kmax(&self) -> usize {
        self.u.len() - 1
    }

    /// `u(k)`; levels past the cached range are computed on demand.
    pub fn u(&self, k: usize) -> Col {
        if k < self.u.len() {
            return self.u[k].clone();
        }
        let m = self.xe.len();
        let mut gk = self.xe.clone();
        for _ in 0..k {
            gk = &self.g * gk;
        }
        &self.xe - gk + ones(m) * (k as f64 / -self.sigma)
    }

    pub fn cached(&self) -> &[Col] {
        &self.u
    }
}

/// Drift vectors `v`, `f`, `v'` built from the Poisson solution `a`.
#[derive(Clone, Debug)]
pub struct DriftBundle {
    pub a: Col,
    pub c: f64,
    pub sigma: f64,
    m0: usize,
    a_tot: Mat,
    a_down: Mat,
    /// `sum_l l A(l)` and `sum_l l^2 A(l) e`.
    n1: Mat,
    m2e: Col,
    b_tot: Mat,
    b_n1: Mat,
    b_m2e: Col,
}

impl DriftBundle {
    /// Needs finite second moments of both block families.
    pub fn new(spec: &ChainSpec) -> Result<Self> {
        let pa = solve_a(spec)?;
        let fa = spec.a_family();
        let fb = spec.b_up_family();
        let m1 = spec.m1();
        Ok(Self {
            m0: spec.m0(),
            a_tot: spec.a_total(),
            a_down: spec.a(-1),
            n1: fa.moment_tail(1, -1)?,
            m2e: fa.moment_tail(2, -1)? * ones(m1),
            b_tot: fb.total(),
            b_n1: fb.moment_tail(1, 1)?,
            b_m2e: fb.moment_tail(2, 1)? * ones(m1),
            a: pa.a,
            c: pa.c,
            sigma: pa.sigma,
        })
    }

    fn m1(&self) -> usize {
        self.a.len()
    }

    pub fn v(&self, k: usize) -> Col {
        if k == 0 {
            return Col::zeros(self.m0);
        }
        let kf = k as f64;
        (ones(self.m1()) * (kf * kf) + &self.a * (2.0 * kf)) / -self.sigma
    }

    pub fn f(&self, k: usize) -> Col {
        if k == 0 {
            ones(self.m0)
        } else {
            ones(self.m1()) * (k as f64 + 1.0)
        }
    }

    pub fn vprime(&self, k: usize) -> Col {
        if k == 0 {
            return Col::zeros(self.m0);
        }
        (ones(self.m1()) * k as f64 + &self.a) / -self.sigma
    }

    /// `(P v)(k)` expanded in block moments.
    pub fn pv(&self, k: usize) -> Col {
        let m = self.m1();
        let e = ones(m);
        if k == 0 {
            return (&self.b_m2e + &self.b_n1 * &self.a * 2.0) / -self.sigma;
        }
        let kf = k as f64;
        let ae = &self.a_tot * &e;
        let sum = ae * (kf * kf)
            + &self.n1 * &e * (2.0 * kf)
            + &self.m2e
            + &self.a_tot * &self.a * (2.0 * kf)
            + &self.n1 * &self.a * 2.0;
        sum / -self.sigma
    }

    /// `(P v')(k)` expanded in block moments.
    pub fn pvprime(&self, k: usize) -> Col {
        let e = ones(self.m1());
        if k == 0 {
            return (&self.b_n1 * &e + &self.b_tot * &self.a) / -self.sigma;
        }
        let kf = k as f64;
        let mut sum = &self.a_tot * &e * kf + &self.n1 * &e + &self.a_tot * &self.a;
        if k == 1 {
            sum -= &self.a_down * &self.a;
        }
        sum / -self.sigma
    }

    /// `[sum l^2 A(l) e + 2 sum l A(l) a] / -sigma`.
    pub fn drift_constant(&self) -> Col {
        (&self.m2e + &self.n1 * &self.a * 2.0) / -self.sigma
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftReport {
    /// Levels `<= k` may carry a positive excess.
    pub k: usize,
    pub b: f64,
    /// `(P w - w + target)(level)` per phase for the drift vector `w`.
    pub margins: Vec<Vec<f64>>,
    /// Largest deviation of the margins on levels `>= 2` from the closed form.
    pub closed_form_gap: f64,
}

fn scan(margins: &[Col]) -> (usize, f64) {
    let k = margins.iter().rposition(|m| m.max() >= 0.0).unwrap_or(0);
    let b = margins[..=k].iter().map(|m| m.max()).fold(0.0, f64::max);
    (k, b)
}

/// Checks `P v <= v - f + b 1{level <= K}` on levels `0..=level_cap`.
pub fn drift_check_v(bundle: &DriftBundle, level_cap: usize) -> Result<DriftReport> {
    let c = bundle.drift_constant();
    let mut gap = 0.0f64;
    let margins: Vec<Col> = (0..=level_cap)
        .map(|k| {
            let m = bundle.pv(k) - bundle.v(k) + bundle.f(k);
            if k >= 1 {
                let closed = c.add_scalar(-(k as f64 - 1.0));
                gap = gap.max((&m - closed).amax() / (1.0 + k as f64 * k as f64));
            }
            m
        })
        .collect();
    let (k, b) = scan(&margins);
    if k == level_cap {
        return Err(Error::Inconsistent {
            what: format!("drift margin still nonnegative at level {level_cap}"),
            residual: margins[level_cap].max(),
            tolerance: 0.0,
        });
    }
    Ok(DriftReport {
        k,
        b,
        margins: margins
            .iter()
            .map(|m| m.iter().copied().collect())
            .collect(),
        closed_form_gap: gap,
    })
}

/// Checks `P v' <= v' - e + b' 1{level <= K'}`; on levels `>= 2` the margin
/// vanishes identically.
pub fn drift_check_vprime(bundle: &DriftBundle, level_cap: usize) -> Result<DriftReport> {
    let mut gap = 0.0f64;
    let margins: Vec<Col> = (0..=level_cap)
        .map(|k| {
            let e = if k == 0 {
                ones(bundle.m0)
            } else {
                ones(bundle.m1())
            };
            let m = bundle.pvprime(k) - bundle.vprime(k) + e;
            if k >= 2 {
                gap = gap.max(m.amax() / (1.0 + k as f64));
            }
            m
        })
        .collect();
    // margins at k >= 2 are zero up to roundoff
    let positive: Vec<Col> = margins
        .iter()
        .enumerate()
        .map(|(k, m)| if k >= 2 { m.map(|_| -1.0) } else { m.clone() })
        .collect();
    let (k, b) = scan(&positive);
    Ok(DriftReport {
        k,
        b,
        margins: margins
            .iter()
            .map(|m| m.iter().copied().collect())
            .collect(),
        closed_form_gap: gap,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FiniteDriftReport {
    pub n: usize,
    pub eps: f64,
    /// `max (lhs - rhs)` over all states; the inequality holds when `<= 0`.
    pub worst_excess: f64,
    pub holds: bool,
}

fn finite_drift(
    fspec: &FiniteChainSpec,
    w: impl Fn(usize) -> Col,
    rhs: impl Fn(usize, &Col) -> Col,
    eps: f64,
) -> FiniteDriftReport {
    let base = fspec.base();
    let n = fspec.n();
    let p = fspec.assemble();
    let mut wv = Col::zeros(fspec.dim());
    for k in 0..=n {
        wv.rows_mut(base.offset(k), base.phases(k)).copy_from(&w(k));
    }
    let pw = &p * &wv;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..=n {
        let lhs = pw.rows(base.offset(k), base.phases(k)).clone_owned();
        let bound = rhs(k, &w(k));
        let scale = 1.0 + bound.amax();
        worst = worst.max((lhs - bound).max() / scale);
    }
    FiniteDriftReport {
        n,
        eps,
        worst_excess: worst,
        holds: worst <= 1e-12,
    }
}

/// `P^(N) v <= v - (1 - eps) f + b 1{level <= K}` evaluated on the assembled matrix.
pub fn drift_check_v_finite(
    fspec: &FiniteChainSpec,
    bundle: &DriftBundle,
    report: &DriftReport,
    eps: f64,
) -> FiniteDriftReport {
    finite_drift(
        fspec,
        |k| bundle.v(k),
        |k, v| {
            let mut r = v - bundle.f(k) * (1.0 - eps);
            if k <= report.k {
                r.add_scalar_mut(report.b);
            }
            r
        },
        eps,
    )
}

/// `P^(N) v' <= v' - (1 - eps) e + b' 1{level <= K'}` evaluated on the assembled matrix.
pub fn drift_check_vprime_finite(
    fspec: &FiniteChainSpec,
    bundle: &DriftBundle,
    report: &DriftReport,
    eps: f64,
) -> FiniteDriftReport {
    finite_drift(
        fspec,
        |k| bundle.vprime(k),
        |k, v| {
            let mut r = v.add_scalar(eps - 1.0);
            if k <= report.k {
                r.add_scalar_mut(report.b);
            }
            r
        },
        eps,
    )
}

/// Smallest `N` of an increasing grid from which every finite check holds.
pub fn n_eps(reports: &[FiniteDriftReport]) -> Option<usize> {
    let first_bad_from_end = reports.iter().rposition(|r| !r.holds);
    match first_bad_from_end {
        None => reports.first().map(|r| r.n),
        Some(i) => reports.get(i + 1).map(|r| r.n),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PiUReport {
    pub partial: Vec<f64>,
    /// Change over the last ten levels below `1e-10`.
    pub cauchy: bool,
    /// Log-log slope of the summands over the upper half of the levels.
    pub summand_slope: f64,
    pub converges: bool,
}

/// Partial sums of `sum_k pi(k) u(k)`.
pub fn pi_u_diagnostic(pi: &LevelVector, u: &PassageVectors, kmax: usize) -> PiUReport {
    let kmax = kmax.min(pi.max_level());
    let mut partial = Vec::with_capacity(kmax + 1);
    let mut terms = Vec::with_capacity(kmax + 1);
    let mut acc = 0.0;
    let mut gk_xe = u.xe.clone();
    let m = u.xe.len();
    for k in 0..=kmax {
        let uk = if k == 0 {
            u.u[0].clone()
        } else {
            gk_xe = &u.g * gk_xe;
            &u.xe - &gk_xe + ones(m) * (k as f64 / -u.sigma)
        };
        let t = (pi.level(k) * uk)[(0, 0)];
        acc += t;
        terms.push(t);
        partial.push(acc);
    }
    let cauchy = kmax >= 10 && (partial[kmax] - partial[kmax - 10]).abs() < 1e-10;
    let lo = (kmax / 2).max(1);
    let pts: Vec<(f64, f64)> = (lo..=kmax)
        .filter(|&k| terms[k] > 0.0)
        .map(|k| ((k as f64).ln(), terms[k].ln()))
        .collect();
    let summand_slope = slope(&pts);
    PiUReport {
        converges: cauchy || summand_slope < -1.1,
        partial,
        cauchy,
        summand_slope,
    }
}

/// Least-squares slope of a point cloud.
pub(crate) fn slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
