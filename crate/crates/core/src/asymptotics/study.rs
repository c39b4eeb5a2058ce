use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::tail::TailModel;
use crate::chain::{ChainSpec, FiniteChainSpec};
use crate::error::{Error, Result};
use crate::linalg::ones;
use crate::stationary::{solve_finite, LevelVector};

/// Whether `values` decrease over the last half, allowing `tolerated` rises.
pub fn trend_decreasing(values: &[f64], tolerated: usize) -> bool {
    if values.len() < 2 {
        return true;
    }
    let start = values.len() / 2;
    let start = start.min(values.len() - 2);
    let rises = values[start..].windows(2).filter(|w| w[1] > w[0]).count();
    rises <= tolerated
}

/// Richardson estimate of `lim r(N)` under `r(N) = c + d / N`.
pub fn richardson(n1: f64, r1: f64, n2: f64, r2: f64) -> f64 {
    (n2 * r2 - n1 * r1) / (n2 - n1)
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticConstants {
    pub grid: Vec<usize>,
    /// `A=(N) e / Fbar(N)` per grid point.
    pub ratios_a: Vec<Vec<f64>>,
    pub ratios_b: Vec<Vec<f64>>,
    pub c_a: Vec<f64>,
    pub c_b: Vec<f64>,
    /// Both limits vanish or the ratios keep growing.
    pub violated: bool,
    pub note: String,
}

impl AsymptoticConstants {
    /// `(pi(0) c_B + pi_bar(0) c_A) / -sigma` times `varpi`.
    pub fn tail_ratio_limit(&self, spec: &ChainSpec, pi: &LevelVector) -> Result<Vec<f64>> {
        let sigma = spec.sigma()?;
        let varpi = spec.varpi()?;
        let p0: f64 = pi.level(0).iter().zip(&self.c_b).map(|(a, b)| a * b).sum();
        let pu: f64 = pi
            .tail_vector(0)
            .iter()
            .zip(&self.c_a)
            .map(|(a, b)| a * b)
            .sum();
        let s = (p0 + pu) / -sigma;
        Ok(varpi.iter().map(|w| s * w).collect())
    }
}

fn plateau(grid: &[usize], ratios: &[Vec<f64>]) -> Vec<f64> {
    let n = grid.len();
    let m = ratios[0].len();
    if n < 2 {
        return ratios[0].clone();
    }
    (0..m)
        .map(|i| {
            let c = richardson(
                grid[n - 2] as f64,
                ratios[n - 2][i],
                grid[n - 1] as f64,
                ratios[n - 1][i],
            );
            if c.abs() < 1e-12 * ratios[n - 1][i].abs().max(1.0) {
                0.0
            } else {
                c
            }
        })
        .collect()
}

fn growing(ratios: &[Vec<f64>]) -> bool {
    let n = ratios.len();
    n >= 2
        && ratios[n - 1]
            .iter()
            .zip(&ratios[n / 2])
            .any(|(last, mid)| *last > 1.5 * mid.abs() && *last > 1e-12)
}

/// Ratios `A=(N) e / Fbar(N)`, `B=(N) e / Fbar(N)` on a grid and their limits.
pub fn fit_constants(
    spec: &ChainSpec,
    tail: &TailModel,
    grid: &[usize],
) -> Result<AsymptoticConstants> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty N grid".into()));
    }
    let e1 = ones(spec.m1());
    let mut ratios_a = Vec::with_capacity(grid.len());
    let mut ratios_b = Vec::with_capacity(grid.len());
    for &n in grid {
        let f = tail.fbar(n as i64);
        let a = spec.double_tail_a(n as i64)? * &e1 / f;
        let b = spec.double_tail_b(n as i64)? * &e1 / f;
        ratios_a.push(a.iter().copied().collect());
        ratios_b.push(b.iter().copied().collect());
    }
    let c_a = plateau(grid, &ratios_a);
    let c_b = plateau(grid, &ratios_b);
    let zero = c_a.iter().chain(&c_b).all(|x| *x == 0.0);
    let grows = growing(&ratios_a) || growing(&ratios_b);
    let note = match (zero, grows) {
        (true, _) => "c_A = c_B = 0: tails lighter than the reference".to_string(),
        (_, true) => "ratios keep growing: tails heavier than the reference".to_string(),
        _ => String::new(),
    };
    Ok(AsymptoticConstants {
        grid: grid.to_vec(),
        ratios_a,
        ratios_b,
        c_a,
        c_b,
        violated: zero || grows,
        note,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioSequence {
    pub grid: Vec<usize>,
    /// One vector (per phase) or scalar per grid point.
    pub values: Vec<Vec<f64>>,
    pub prediction: Option<Vec<f64>>,
    /// `max_i |value_i / prediction_i - 1|` at each grid point.
    pub rel_error: Vec<f64>,
    pub trend_ok: bool,
}

/// `pi_bar(N) / Fbar(N)` against the subexponential limit.
pub fn tail_ratio(
    pi: &LevelVector,
    tail: &TailModel,
    grid: &[usize],
    prediction: Option<Vec<f64>>,
) -> Result<RatioSequence> {
    if pi.is_finite() {
        return Err(Error::Inapplicable(
            "needs the infinite-level stationary vector".into(),
        ));
    }
    let values: Vec<Vec<f64>> = grid
        .iter()
        .map(|&n| {
            let f = tail.fbar(n as i64);
            pi.tail_vector(n).iter().map(|x| x / f).collect()
        })
        .collect();
    let rel_error: Vec<f64> = match &prediction {
        Some(p) => values
            .iter()
            .map(|v| {
                v.iter()
                    .zip(p)
                    .map(|(a, b)| (a / b - 1.0).abs())
                    .fold(0.0, f64::max)
            })
            .collect(),
        None => Vec::new(),
    };
    let trend_ok = if rel_error.len() >= 5 {
        rel_error[rel_error.len() - 5..]
            .windows(2)
            .all(|w| w[1] <= w[0])
    } else {
        trend_decreasing(&rel_error, 0)
    };
    Ok(RatioSequence {
        grid: grid.to_vec(),
        values,
        prediction,
        rel_error,
        trend_ok,
    })
}

/// `pi_N(N) e / Fbar(N)` for each `N` of the grid.
pub fn last_level_ratio(
    spec: &ChainSpec,
    tail: &TailModel,
    grid: &[usize],
) -> Result<RatioSequence> {
    let vals: Vec<Result<f64>> = grid
        .par_iter()
        .map(|&n| {
            let f = FiniteChainSpec::last_column(spec, n)?;
            let pi_n = solve_finite(&f)?;
            Ok(pi_n.level_mass(n) / tail.fbar(n as i64))
        })
        .collect();
    let values: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    // N = 1 is excluded from the trend
    let trend: Vec<f64> = grid
        .iter()
        .zip(&values)
        .filter(|(n, _)| **n > 1)
        .map(|(_, v)| *v)
        .collect();
    Ok(RatioSequence {
        grid: grid.to_vec(),
        trend_ok: trend_decreasing(&trend, 0),
        values: values.into_iter().map(|v| vec![v]).collect(),
        prediction: None,
        rel_error: Vec::new(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub n: usize,
    pub k: usize,
    pub phase: usize,
    pub r: f64,
    pub pibar_n: f64,
    pub fbar_n: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KTrend {
    pub k: usize,
    pub phase: usize,
    /// `|r_N(k) - 1|` along the grid.
    pub deviation: Vec<f64>,
    pub decreasing: bool,
    pub last: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyReport {
    pub tail: String,
    pub grid: Vec<usize>,
    pub k_list: Vec<usize>,
    pub rows: Vec<StudyRow>,
    pub trends: Vec<KTrend>,
    pub excluded: Vec<String>,
    pub assumptions_ok: bool,
    pub context: String,
    pub pass: bool,
}

impl StudyReport {
    /// CSV with columns `N,k,phase,r_N,pibar_N,Fbar_N`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,k,phase,r_N,pibar_N,Fbar_N\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.17e},{:.17e},{:.17e}",
                r.n, r.k, r.phase, r.r, r.pibar_n, r.fbar_n
            );
        }
        out
    }
}

/// Largest one-step relative drop of `Fbar` on the upper half of the grid
/// still read as long-tailed.
pub const LONG_TAIL_DELTA: f64 = 0.05;

/// Deviation threshold at the largest grid point.
pub const STUDY_THRESHOLD: f64 = 0.35;

/// `r_N(k) = (pi_N(k) - pi(k)) / (pi_bar(N) e pi(k))` per phase over the grid.
pub fn convergence_study(
    spec: &ChainSpec,
    pi: &LevelVector,
    tail: &TailModel,
    k_list: &[usize],
    grid: &[usize],
) -> Result<StudyReport> {
    if grid.is_empty() || k_list.is_empty() {
        return Err(Error::InvalidInput("empty grid or k list".into()));
    }
    let constants = fit_constants(spec, tail, grid);
    let n_max = grid.iter().copied().max().unwrap_or(0);
    let long_tail = tail.validate(n_max);
    let (assumptions_ok, context) = match (&constants, &long_tail) {
        (Err(e), _) | (_, Err(e)) => (false, format!("assumption-violated: {e}")),
        (Ok(c), _) if c.violated => (false, format!("assumption-violated: {}", c.note)),
        (_, Ok(v)) if v.delta > LONG_TAIL_DELTA => (
            false,
            format!(
                "assumption-violated: tail drops by a factor {:.3} per level near N = {n_max}",
                1.0 - v.delta
            ),
        ),
        _ if !tail.summable() => (false, "assumption-violated: tail is not summable".into()),
        _ => (true, String::new()),
    };
    let finite: Vec<Result<LevelVector>> = grid
        .par_iter()
        .map(|&n| solve_finite(&FiniteChainSpec::last_column(spec, n)?))
        .collect();
    let finite: Vec<LevelVector> = finite.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    let mut trends = Vec::new();
    for &k in k_list {
        let pk = pi.level(k);
        for (phase, &p) in pk.iter().enumerate() {
            if p < 1e-13 {
                excluded.push(format!("k = {k}, phase {phase}: pi below 1e-13"));
                continue;
            }
            let mut deviation = Vec::with_capacity(grid.len());
            for (&n, pn) in grid.iter().zip(&finite) {
                if k > n {
                    continue;
                }
                let pibar = pi.tail_mass(n);
                let r = (pn.level(k)[phase] - p) / (pibar * p);
                deviation.push((r - 1.0).abs());
                rows.push(StudyRow {
                    n,
                    k,
                    phase,
                    r,
                    pibar_n: pibar,
                    fbar_n: tail.fbar(n as i64),
                });
            }
            let last = deviation.last().copied().unwrap_or(f64::NAN);
            let decreasing = trend_decreasing(&deviation, 1);
            trends.push(KTrend {
                k,
                phase,
                pass: decreasing && last < STUDY_THRESHOLD,
                deviation,
                decreasing,
                last,
            });
        }
    }
    let pass = !trends.is_empty() && trends.iter().all(|t| t.pass);
    Ok(StudyReport {
        tail: tail.name(),
        grid: grid.to_vec(),
        k_list: k_list.to_vec(),
        rows,
        trends,
        excluded,
        assumptions_ok,
        context,
        pass,
    })
}
