//! Stationary distributions of the infinite-level chain (boundary vector and
//! Ramaswami's recursion) and of its finite-level truncations.

use std::fmt::Write as _;

use serde::Serialize;

use crate::chain::{ChainSpec, FiniteChainSpec, TailWeights};
use crate::error::{Error, Result};
use crate::linalg::{inverse, ones, Col, Mat, Row};
use crate::matan::{MatanSolution, RFamily};
use crate::oracle::gth;
use crate::passage::PassageVectors;

/// Level-indexed row vectors: `v0` on level 0 and `vk[k-1]` on level `k`.
#[derive(Clone, Debug)]
pub struct LevelVector {
    v0: Row,
    vk: Vec<Row>,
    /// Exact sum over levels `>= 1` when known independently of `vk`.
    upper: Option<Row>,
    /// Mass not represented by the stored levels.
    pub tail_bound: f64,
    finite: bool,
}

impl LevelVector {
    pub fn new(v0: Row, vk: Vec<Row>, upper: Option<Row>, tail_bound: f64, finite: bool) -> Self {
        Self {
            v0,
            vk,
            upper,
            tail_bound,
            finite,
        }
    }

    /// Splits a flat state vector of `P^(N)` into levels.
    pub fn from_flat(spec: &ChainSpec, n: usize, x: &Row) -> Self {
        let v0 = x.columns(0, spec.m0()).clone_owned();
        let vk = (1..=n)
            .map(|k| x.columns(spec.offset(k), spec.m1()).clone_owned())
            .collect();
        Self::new(v0, vk, None, 0.0, true)
    }

    pub fn max_level(&self) -> usize {
        self.vk.len()
    }

    pub fn is_finite(&self) -> bool {
        self.finite
    }

    pub fn m1(&self) -> usize {
        self.vk.first().map(|r| r.len()).unwrap_or(0)
    }

    /// Row vector of level `k`; zero past the stored range.
    pub fn level(&self, k: usize) -> Row {
        match k {
            0 => self.v0.clone(),
            _ if k <= self.vk.len() => self.vk[k - 1].clone(),
            _ => Row::zeros(self.m1()),
        }
    }

    pub fn level_mass(&self, k: usize) -> f64 {
        match k {
            0 => self.v0.sum(),
            _ if k <= self.vk.len() => self.vk[k - 1].sum(),
            _ => 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.v0.sum() + self.vk.iter().map(|r| r.sum()).sum::<f64>()
    }

    /// `sum_{l > n} v(l) e`. Finite vectors sum the stored levels; infinite
    /// ones use `1 - sum_{l <= n} v(l) e`.
    pub fn tail_mass(&self, n: usize) -> f64 {
        if self.finite {
            return (n + 1..=self.vk.len()).map(|k| self.vk[k - 1].sum()).sum();
        }
        let head: f64 = (0..=n.min(self.vk.len())).map(|k| self.level_mass(k)).sum();
        1.0 - head
    }

    /// `sum_{l > n} v(l)` as a row vector, `n >= 0`.
    pub fn tail_vector(&self, n: usize) -> Row {
        let m = self.m1();
        if let (false, Some(upper)) = (self.finite, &self.upper) {
            let mut t = upper.clone();
            for k in 1..=n.min(self.vk.len()) {
                t -= &self.vk[k - 1];
            }
            return t;
        }
        let mut t = Row::zeros(m);
        for k in n + 1..=self.vk.len() {
            t += &self.vk[k - 1];
        }
        t
    }

    /// CSV with columns `level,phase,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,phase,value\n");
        for k in 0..=self.vk.len() {
            for (i, x) in self.level(k).iter().enumerate() {
                let _ = writeln!(out, "{k},{i},{x:.17e}");
            }
        }
        out
    }

    /// Partial sums `sum_{k <= n} k v(k) e`.
    pub fn level_moment_partial(&self) -> Vec<f64> {
        let mut acc = 0.0;
        (0..=self.vk.len())
            .map(|k| {
                acc += k as f64 * self.level_mass(k);
                acc
            })
            .collect()
    }
}

/// Level-0 censored chain.
#[derive(Clone, Debug)]
pub struct Censored {
    /// `B(0) + R0(1) B(-1)`.
    pub p0: Mat,
    /// Its stationary vector.
    pub pi0: Row,
    pub row_residual: f64,
}

pub fn censored_p0(spec: &ChainSpec, r: &RFamily) -> Result<Censored> {
    let p0 = spec.b0() + r.r0(1) * spec.b_down();
    let row_residual = (&p0 * ones(spec.m0())).add_scalar(-1.0).amax();
    if row_residual > 1e-9 {
        return Err(Error::Inconsistent {
            what: "row sums of the censored level-0 matrix".into(),
            residual: row_residual,
            tolerance: 1e-9,
        });
    }
    let pi0 = gth(&p0.map(|x| x.max(0.0)))?;
    Ok(Censored {
        p0,
        pi0,
        row_residual,
    })
}

#[derive(Clone, Debug)]
pub struct StationaryOptions {
    /// Stop once the mass above the computed levels falls below this.
    pub mass_tol: f64,
    pub max_level: usize,
    /// Return the levels reached instead of failing at `max_level`.
    pub allow_truncated: bool,
}

impl StationaryOptions {
    /// `1e-12` for light tails, `1e-10` for power-law tails.
    pub fn for_spec(spec: &ChainSpec) -> Self {
        let heavy = [spec.a_family(), spec.b_up_family()].iter().any(|f| {
            matches!(
                f.tail().map(|t| &t.weights),
                Some(TailWeights::PowerLaw { .. })
            )
        });
        Self {
            mass_tol: if heavy { 1e-10 } else { 1e-12 },
            max_level: 1 << 16,
            allow_truncated: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct InfiniteSolution {
    pub pi: LevelVector,
    pub censored: Censored,
    pub u0: Col,
    /// `|pi(0) e + pi(0) sum R0 (I - sum R)^-1 e - 1|`.
    pub normalization_gap: f64,
    pub levels: usize,
}

/// `pi` from the censored boundary vector, normalized by
/// `pi(0) = pi0~ / (pi0~ u(0))`, and Ramaswami's recursion
/// `pi(k) = pi(0) R0(k) + sum_{l<k} pi(l) R(k-l)`.
pub fn solve_infinite(
    spec: &ChainSpec,
    sol: &MatanSolution,
    opts: &StationaryOptions,
) -> Result<InfiniteSolution> {
    let m = spec.m1();
    let support = spec.max_jump().map(|s| s as usize);
    let mut limit = support.unwrap_or(256).max(256).min(opts.max_level);
    loop {
        let rk = support.unwrap_or(limit).clamp(1, limit);
        let r = RFamily::new(spec, sol, rk, 1e-15)?;
        let censored = censored_p0(spec, &r)?;
        let u0 = PassageVectors::new(spec, sol, &r, 0)?.u(0);
        let pi0 = &censored.pi0 / (&censored.pi0 * &u0)[(0, 0)];
        let upper = &pi0 * &r.r0_total * inverse(&(Mat::identity(m, m) - &r.r_total), "I - sum R")?;
        let normalization_gap = (pi0.sum() + upper.sum() - 1.0).abs();

        let rs: Vec<&[f64]> = (1..=rk).map(|j| r.r(j).as_slice()).collect();
        let mut flat: Vec<f64> = Vec::with_capacity(limit * m);
        let mut remaining = upper.sum();
        let mut reached = 0;
        for k in 1..=limit {
            let mut x = vec![0.0; m];
            if k <= rk {
                let r0 = r.r0(k);
                for j in 0..m {
                    x[j] = (0..spec.m0()).map(|i| pi0[i] * r0[(i, j)]).sum();
                }
            }
            for l in k.saturating_sub(rk).max(1)..k {
                let rl = rs[k - l - 1];
                let p = &flat[(l - 1) * m..l * m];
                for j in 0..m {
                    let col = &rl[j * m..(j + 1) * m];
                    x[j] += p.iter().zip(col).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            remaining -= x.iter().sum::<f64>();
            flat.extend_from_slice(&x);
            reached = k;
            if remaining <= opts.mass_tol {
                break;
            }
        }
        let done = remaining <= opts.mass_tol;
        if done || limit >= opts.max_level {
            if !done && !opts.allow_truncated {
                return Err(Error::NoConvergence {
                    what: "Ramaswami recursion tail mass".into(),
                    iterations: reached,
                    residual: remaining,
                });
            }
            let vk = flat.chunks(m).map(Row::from_row_slice).collect();
            return Ok(InfiniteSolution {
                pi: LevelVector::new(pi0, vk, Some(upper), remaining.max(0.0), false),
                censored,
                u0,
                normalization_gap,
                levels: reached,
            });
        }
        limit = (limit * 4).min(opts.max_level);
    }
}

/// Stationary vector of `P^(N)` by GTH elimination.
pub fn solve_finite(fspec: &FiniteChainSpec) -> Result<LevelVector> {
    let p = fspec.assemble();
    let x = gth(&p)?;
    Ok(LevelVector::from_flat(fspec.base(), fspec.n(), &x))
}

/// `||pi P - pi||_inf` on column levels `0..=upto`; needs `pi` through `upto + 1`.
pub fn stationarity_residual(spec: &ChainSpec, pi: &LevelVector, upto: usize) -> Result<f64> {
    if upto + 1 > pi.max_level() {
        return Err(Error::WindowTooSmall { required: upto + 1 });
    }
    let mut worst = 0.0f64;
    for l in 0..=upto {
        let mut acc = &pi.level(0) * spec.p_block(0, l);
        for k in 1..=l + 1 {
            acc += pi.level(k) * spec.p_block(k, l);
        }
        worst = worst.max((acc - pi.level(l)).amax());
    }
    Ok(worst)
}

/// `max |pi_N(k,i) - pi(k,i)| / pi(k,i)` over levels `k < N`.
pub fn relative_error(pi_n: &LevelVector, pi: &LevelVector) -> f64 {
    let n = pi_n.max_level();
    let mut worst = 0.0f64;
    for k in 0..n {
        let a = pi_n.level(k);
        let b = pi.level(k);
        for (x, y) in a.iter().zip(b.iter()) {
            if *y > 0.0 {
                worst = worst.max((x - y).abs() / y);
            }
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentDiagnostic {
    pub partial: Vec<f64>,
    pub converged: bool,
}

/// `sum_k k pi(k) e` as the truncation grows.
pub fn moment_diagnostic(pi: &LevelVector) -> MomentDiagnostic {
    let partial = pi.level_moment_partial();
    let n = partial.len();
    let converged =
        n > 10 && (partial[n - 1] - partial[n - 11]).abs() < 1e-8 * partial[n - 1].max(1.0);
    MomentDiagnostic { partial, converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn infinite(spec: &ChainSpec) -> InfiniteSolution {
        let sol = MatanSolution::solve(spec).unwrap();
        solve_infinite(spec, &sol, &StationaryOptions::for_spec(spec)).unwrap()
    }

    #[test]
    fn sc1_geometric_closed_form() {
        let s = infinite(&presets::sc1());
        assert!(
            (s.censored.p0[(0, 0)] - 1.0).abs() < 1e-12,
            "{}",
            s.censored.p0
        );
        assert!((s.censored.pi0[0] - 1.0).abs() < 1e-15);
        for k in 0..=40 {
            let exact = 0.6 * 0.4f64.powi(k as i32);
            assert!((s.pi.level(k)[0] - exact).abs() < 1e-12, "k={k}");
        }
        assert!((s.pi.tail_mass(0) - 0.4).abs() < 1e-12);
        assert!((s.pi.total() - 1.0).abs() < 1e-10);
        assert!(
            s.normalization_gap < 1e-12,
            "{} {}",
            s.normalization_gap,
            s.pi.level(0)[0] - 0.6
        );
    }

    #[test]
    fn finite_sc1_two_level_balance() {
        let f = FiniteChainSpec::last_column(&presets::sc1(), 1).unwrap();
        let pi = solve_finite(&f).unwrap();
        // 0.2 x0 = 0.5 x1
        assert!((pi.level(0)[0] - 5.0 / 7.0).abs() < 1e-15);
        assert!((pi.level(1)[0] - 2.0 / 7.0).abs() < 1e-15);
        assert_eq!(pi.tail_mass(1), 0.0);
    }

    #[test]
    fn finite_residual_and_lu_agreement() {
        let f = FiniteChainSpec::last_column(&presets::sc1(), 3).unwrap();
        let pi = solve_finite(&f).unwrap();
        let p = f.assemble();
        let x = Row::from_iterator(4, (0..=3).map(|k| pi.level(k)[0]));
        assert!((&x * &p - &x).amax() < 1e-14);
        let lu = crate::oracle::lu_stationary(&p).unwrap();
        assert!((x - lu).amax() < 1e-11);
    }

    #[test]
    fn mm1_finite_matches_birth_death() {
        // embedded chain of M/M/1/11 at departures: geometric up to the last level
        let f = FiniteChainSpec::last_column(&presets::mm1(), 10).unwrap();
        let pi = solve_finite(&f).unwrap();
        let rho: f64 = 0.5;
        let norm: f64 = (0..=10).map(|k| rho.powi(k)).sum();
        for k in 0..=10 {
            assert!(
                (pi.level(k)[0] - rho.powi(k as i32) / norm).abs() < 1e-12,
                "k={k}"
            );
        }
    }

    #[test]
    fn ramaswami_matches_large_truncation() {
        for spec in [presets::mm1(), presets::mp2()] {
            let s = infinite(&spec);
            let f = FiniteChainSpec::last_column(&spec, 400).unwrap();
            let pn = solve_finite(&f).unwrap();
            for k in 0..=30 {
                assert!((pn.level(k) - s.pi.level(k)).amax() < 1e-9, "k={k}");
            }
            let upto = s.pi.max_level() - 1;
            assert!(stationarity_residual(&spec, &s.pi, upto).unwrap() < 1e-9);
            assert!((s.pi.total() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn mp2_censored_vector_matches_conditional_level_zero() {
        let spec = presets::mp2();
        let s = infinite(&spec);
        let pn = solve_finite(&FiniteChainSpec::last_column(&spec, 200).unwrap()).unwrap();
        let cond = pn.level(0) / pn.level_mass(0);
        assert!((cond - &s.censored.pi0).amax() < 1e-6);
    }

    #[test]
    fn single_term_recursion_when_a_has_no_upward_jumps() {
        use crate::chain::BlockFamily;
        let s = |x: f64| Mat::from_element(1, 1, x);
        let a = BlockFamily::finite(-1, 1, 1, vec![s(0.6), s(0.4)]).unwrap();
        let b_up = BlockFamily::finite(1, 1, 1, vec![s(0.3)]).unwrap();
        let spec = ChainSpec::new(a, s(0.6), s(0.7), b_up).unwrap();
        let sol = infinite(&spec);
        let r = RFamily::new(&spec, &MatanSolution::solve(&spec).unwrap(), 4, 1e-15).unwrap();
        for k in 2..=6 {
            let expected = sol.pi.level(1)[0] * r.r(1)[(0, 0)].powi(k as i32 - 1);
            assert!((sol.pi.level(k)[0] - expected).abs() < 1e-15, "k={k}");
        }
        assert!(r.r(1)[(0, 0)] < 1e-15);
    }

    #[test]
    fn heavy_tail_moments_and_relative_error() {
        let spec = presets::hc1(4.5);
        let s = infinite(&spec);
        assert!(moment_diagnostic(&s.pi).converged);
        let e: Vec<f64> = [25, 50, 100]
            .iter()
            .map(|&n| {
                let pn = solve_finite(&FiniteChainSpec::last_column(&spec, n).unwrap()).unwrap();
                relative_error(&pn, &s.pi)
            })
            .collect();
        assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
    }

    #[test]
    fn csv_layout() {
        let f = FiniteChainSpec::last_column(&presets::sc1(), 1).unwrap();
        let csv = solve_finite(&f).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "level,phase,value");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,0,"));
    }
}
