use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::chain::ChainSpec;
use crate::error::{Error, Result};
use crate::mapg1::{MapSpec, ServiceDist};

/// Monte Carlo mean with the standard error across independent replications.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub replications: usize,
}

impl McEstimate {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self {
            mean,
            se: (var / n).sqrt(),
            replications: samples.len(),
        }
    }

    /// Whether `value` lies within `k` standard errors.
    pub fn brackets(&self, value: f64, k: f64) -> bool {
        (value - self.mean).abs() <= k * self.se
    }
}

/// Simulated loss fraction with the raw counts behind it.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LossEstimate {
    pub estimate: McEstimate,
    pub lost: u64,
    pub counted: u64,
}

impl LossEstimate {
    /// Whether `value` is consistent with the simulation at the level of a
    /// `k`-sigma two-sided test. Without any observed loss the batch error is
    /// zero, so the count is tested directly: zero losses are plausible when
    /// `exp(-counted * value)` exceeds the `k`-sigma tail probability.
    pub fn consistent_with(&self, value: f64, k: f64) -> bool {
        if self.lost > 0 {
            return self.estimate.brackets(value, k);
        }
        let level = 2.0 * (1.0 - Normal::standard().cdf(k));
        (-(self.counted as f64) * value).exp() >= level
    }
}

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Loss fraction of a simulated MAP/G/1 queue holding at most `n + 1`
/// customers, over `arrivals` arrivals split into `replications` runs.
pub fn mc_queue(
    map: &MapSpec,
    service: &ServiceDist,
    n: usize,
    arrivals: u64,
    replications: usize,
    seed: u64,
) -> Result<LossEstimate> {
    if replications < 2 {
        return Err(Error::InvalidInput("need at least two replications".into()));
    }
    service.validate()?;
    let per_run = arrivals / replications as u64;
    let warmup = (per_run / 100).min(10_000);
    let m = map.phases();
    let l0 = map.lambda0();
    let l1 = map.lambda1();
    let out_rate: Vec<f64> = (0..m).map(|i| -l0[(i, i)]).collect();
    // per phase: cumulative over hidden moves then arrival moves
    let table: Vec<Vec<(f64, usize, bool)>> = (0..m)
        .map(|i| {
            let mut acc = 0.0;
            let mut row = Vec::new();
            for j in 0..m {
                if j != i && l0[(i, j)] > 0.0 {
                    acc += l0[(i, j)] / out_rate[i];
                    row.push((acc, j, false));
                }
            }
            for j in 0..m {
                if l1[(i, j)] > 0.0 {
                    acc += l1[(i, j)] / out_rate[i];
                    row.push((acc, j, true));
                }
            }
            row
        })
        .collect();
    let capacity = n + 1;
    let varpi = map.varpi().clone();

    let runs: Vec<(u64, u64)> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(seed, rep);
            let mut phase = {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = m - 1;
                for i in 0..m {
                    acc += varpi[i];
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                pick
            };
            let mut now = 0.0f64;
            let mut in_system = 0usize;
            let mut departure = f64::INFINITY;
            let mut seen = 0u64;
            let mut lost = 0u64;
            let mut counted = 0u64;
            while counted < per_run {
                let u: f64 = 1.0 - rng.random::<f64>();
                let next_event = now + (-u.ln()) / out_rate[phase];
                while departure <= next_event {
                    now = departure;
                    in_system -= 1;
                    departure = if in_system > 0 {
                        now + service.sample(&mut rng)
                    } else {
                        f64::INFINITY
                    };
                }
                now = next_event;
                let r: f64 = rng.random();
                let row = &table[phase];
                let idx = row
                    .iter()
                    .position(|(c, _, _)| r < *c)
                    .unwrap_or(row.len() - 1);
                let (_, to, arrival) = row[idx];
                phase = to;
                if arrival {
                    seen += 1;
                    let blocked = in_system == capacity;
                    if !blocked {
                        in_system += 1;
                        if in_system == 1 {
                            departure = now + service.sample(&mut rng);
                        }
                    }
                    if seen > warmup {
                        counted += 1;
                        if blocked {
                            lost += 1;
                        }
                    }
                }
            }
            (lost, counted)
        })
        .collect();
    let samples: Vec<f64> = runs.iter().map(|(l, c)| *l as f64 / *c as f64).collect();
    Ok(LossEstimate {
        estimate: McEstimate::from_samples(&samples),
        lost: runs.iter().map(|r| r.0).sum(),
        counted: runs.iter().map(|r| r.1).sum(),
    })
}

/// Inverse-CDF tables for one-step moves of an M/G/1-type chain, with the
/// block families cut where the remaining mass is below `1e-15`.
struct StepSampler {
    /// from levels >= 2: (cumulative, jump, phase)
    upper: Vec<Vec<(f64, i64, usize)>>,
    /// from level 1: a jump of -1 lands in level 0 through B(-1)
    first: Vec<Vec<(f64, i64, usize)>>,
    /// from level 0: (cumulative, new level, phase)
    boundary: Vec<Vec<(f64, i64, usize)>>,
}

impl StepSampler {
    fn new(spec: &ChainSpec) -> Self {
        let (m0, m1) = (spec.m0(), spec.m1());
        let (cut_a, _) = spec.a_family().truncation_index(1e-15);
        let (cut_b, _) = spec.b_up_family().truncation_index(1e-15);
        let a_blocks: Vec<_> = (-1..=cut_a).map(|k| (k, spec.a(k))).collect();
        let build = |rows: usize,
                     parts: &dyn Fn(usize) -> Vec<(f64, i64, usize)>|
         -> Vec<Vec<(f64, i64, usize)>> {
            (0..rows)
                .map(|i| {
                    let mut acc = 0.0;
                    parts(i)
                        .into_iter()
                        .filter(|(p, _, _)| *p > 0.0)
                        .map(|(p, k, j)| {
                            acc += p;
                            (acc, k, j)
                        })
                        .collect()
                })
                .collect()
        };
        let upper = build(m1, &|i| {
            a_blocks
                .iter()
                .flat_map(|(k, a)| (0..m1).map(move |j| (a[(i, j)], *k, j)))
                .collect()
        });
        let first = build(m1, &|i| {
            let mut v: Vec<_> = (0..m0).map(|j| (spec.b_down()[(i, j)], -1, j)).collect();
            v.extend(
                a_blocks
                    .iter()
                    .filter(|(k, _)| *k >= 0)
                    .flat_map(|(k, a)| (0..m1).map(move |j| (a[(i, j)], *k, j))),
            );
            v
        });
        let boundary = build(m0, &|i| {
            let mut v: Vec<_> = (0..m0).map(|j| (spec.b0()[(i, j)], 0, j)).collect();
            for k in 1..=cut_b.max(1) {
                let b = spec.b(k);
                v.extend((0..m1).map(|j| (b[(i, j)], k, j)));
            }
            v
        });
        Self {
            upper,
            first,
            boundary,
        }
    }

    fn draw(table: &[(f64, i64, usize)], u: f64) -> (i64, usize) {
        let total = table.last().map_or(1.0, |t| t.0);
        let target = u * total;
        let idx = table
            .partition_point(|(c, _, _)| *c <= target)
            .min(table.len() - 1);
        (table[idx].1, table[idx].2)
    }

    fn step<R: Rng>(&self, level: i64, phase: usize, rng: &mut R) -> (i64, usize) {
        let u: f64 = rng.random();
        match level {
            0 => Self::draw(&self.boundary[phase], u),
            1 => {
                let (k, j) = Self::draw(&self.first[phase], u);
                (1 + k, j)
            }
            _ => {
                let (k, j) = Self::draw(&self.upper[phase], u);
                (level + k, j)
            }
        }
    }
}

/// Monte Carlo estimate of `E[T_0]` from `(level, phase)`.
pub fn mc_first_passage(
    spec: &ChainSpec,
    level: usize,
    phase: usize,
    paths: usize,
    replications: usize,
    seed: u64,
) -> Result<McEstimate> {
    if replications < 2 {
        return Err(Error::InvalidInput("need at least two replications".into()));
    }
    let sampler = StepSampler::new(spec);
    let per = paths.div_ceil(replications);
    let samples: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(seed, rep);
            let mut total = 0.0;
            for _ in 0..per {
                let (mut l, mut p) = (level as i64, phase);
                let mut steps = 0u64;
                loop {
                    let (nl, np) = sampler.step(l, p, &mut rng);
                    steps += 1;
                    l = nl;
                    p = np;
                    if l == 0 {
                        break;
                    }
                }
                total += steps as f64;
            }
            total / per as f64
        })
        .collect();
    Ok(McEstimate::from_samples(&samples))
}

/// Monte Carlo estimate of `R(k)[i][j]`: expected visits to `(n + k, j)`
/// before the first return below level `n + k`, starting from `(n, i)`
/// with `n` far from the boundary.
pub fn mc_occupation_r(
    spec: &ChainSpec,
    k: usize,
    i: usize,
    j: usize,
    paths: usize,
    replications: usize,
    seed: u64,
) -> Result<McEstimate> {
    if replications < 2 || k == 0 {
        return Err(Error::InvalidInput(
            "need k >= 1 and at least two replications".into(),
        ));
    }
    let sampler = StepSampler::new(spec);
    let per = paths.div_ceil(replications);
    // far above the boundary only the A blocks matter
    let base = 1_000_000i64;
    let target = base + k as i64;
    let samples: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(seed, rep);
            let mut visits = 0u64;
            for _ in 0..per {
                let (mut l, mut p) = (base, i);
                loop {
                    let (nl, np) = sampler.step(l, p, &mut rng);
                    l = nl;
                    p = np;
                    if l < target {
                        break;
                    }
                    if l == target && p == j {
                        visits += 1;
                    }
                }
            }
            visits as f64 / per as f64
        })
        .collect();
    Ok(McEstimate::from_samples(&samples))
}
