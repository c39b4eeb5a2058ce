use serde::Serialize;

use super::map::MapSpec;
use super::service::ServiceDist;
use crate::chain::{AnalyticTail, BlockFamily, ChainSpec, TailWeights};
use crate::error::{Error, Result};
use crate::linalg::{ones, Mat};

/// Controls for [`embed_chain`].
#[derive(Clone, Debug)]
pub struct EmbedOptions {
    /// Remaining probability mass at which the block sequence is cut.
    pub tol: f64,
    /// Minimum number of explicit blocks `A(-1..=k_max)`; for heavy-tailed
    /// service this is where the power-law continuation starts.
    pub k_max: usize,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            k_max: 0,
        }
    }
}

/// Chain embedded at departure epochs of the MAP/G/1 queue.
#[derive(Clone, Debug)]
pub struct EmbeddedChain {
    pub map: MapSpec,
    pub service: ServiceDist,
    pub chain: ChainSpec,
    pub theta: f64,
    pub mixture_terms: usize,
    /// Last explicit index of `A`.
    pub k_max: i64,
    pub rho: f64,
    pub report: EmbedReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbedReport {
    pub row_residual: f64,
    /// `|varpi_A beta_A - (rho - 1)|`.
    pub drift_residual: f64,
    /// Shift of the power-law continuation, if any.
    pub tail_shift: Option<f64>,
}

/// Builds the departure-epoch chain by uniformization:
/// `A(k) = sum_j gamma_j K_j[k+1]`, where `K_j[n]` is the coefficient of
/// `z^n` in `(P0 + z P1)^j`, `B(-1) = A(-1)` and `B(k) = (-Lambda0)^-1 Lambda1 A(k-1)`.
pub fn embed_chain(
    map: &MapSpec,
    service: &ServiceDist,
    opts: &EmbedOptions,
) -> Result<EmbeddedChain> {
    service.validate()?;
    let m = map.phases();
    let rho = map.rate() * service.mean();
    if rho >= 1.0 {
        return Err(Error::NotPositiveRecurrent(rho - 1.0));
    }
    let theta = 1.05 * map.lambda0().diagonal().amax();
    let p0 = Mat::identity(m, m) + map.lambda0() / theta;
    let p1 = map.lambda1() / theta;

    let heavy = service.heavy_tailed();
    let (gamma, _) = if heavy {
        let k = opts.k_max.max(16) as f64 + 2.0;
        let j = (k * theta / map.rate() * 1.02 + 14.0 * k.sqrt() + 60.0).ceil() as usize;
        service.poisson_mixture(theta, 0.0, j)
    } else {
        service.poisson_mixture(theta, opts.tol * 1e-2, 10_000_000)
    };
    let j_terms = gamma.len();

    // a[n] accumulates A(n - 1)
    let mut a = vec![Mat::zeros(m, m); j_terms + 1];
    let mut k_coeff = vec![Mat::identity(m, m)];
    for (j, g) in gamma.iter().enumerate() {
        for (n, kc) in k_coeff.iter().enumerate() {
            a[n] += kc * *g;
        }
        if j + 1 == j_terms {
            break;
        }
        let mut next = Vec::with_capacity(k_coeff.len() + 1);
        for n in 0..=k_coeff.len() {
            let mut c = Mat::zeros(m, m);
            if n < k_coeff.len() {
                c += &k_coeff[n] * &p0;
            }
            if n > 0 {
                c += &k_coeff[n - 1] * &p1;
            }
            next.push(c);
        }
        k_coeff = next;
    }

    let e = ones(m);
    let varpi = map.varpi().clone();
    let (a_family, tail_shift, k_max) = if heavy {
        let (shape, scale) = match service {
            ServiceDist::Pareto { shape, scale } => (*shape, *scale),
            _ => unreachable!("only Pareto service is heavy-tailed"),
        };
        let k_max = opts.k_max.max(16);
        let head: Vec<Mat> = a[..k_max + 2].to_vec();
        let explicit = head.iter().fold(Mat::zeros(m, m), |acc, x| acc + x);
        let deficit = (&e - &explicit * &e).map(|x| x.max(0.0));
        let k0 = k_max as i64 + 1;
        let moment: f64 = head
            .iter()
            .enumerate()
            .map(|(i, x)| (i as f64 - 1.0) * (&varpi * x * &e)[(0, 0)])
            .sum();
        let mass = (&varpi * &deficit)[(0, 0)];
        let beta = shape + 1.0;
        let target = if mass > 0.0 {
            (rho - 1.0 - moment) / mass
        } else {
            f64::NAN
        };
        let shift = fit_shift(beta, k0, target).unwrap_or(1.0 + map.rate() * scale);
        let weights = TailWeights::PowerLaw {
            exponent: beta,
            shift,
        };
        let z = weights.moment_from(0, k0)?;
        let profile = &deficit * &varpi / z;
        let family = BlockFamily::new(-1, m, m, head, Some(AnalyticTail { weights, profile }))?;
        (family, Some(shift), k_max as i64)
    } else {
        // cut where the remaining mass is below tol and fold the rest into the last block
        let mut tail = Mat::zeros(m, m);
        let mut cut = a.len() - 1;
        let total = a.iter().fold(Mat::zeros(m, m), |acc, x| acc + x);
        let missing = (&e - &total * &e).map(|x| x.max(0.0));
        for n in (0..a.len()).rev() {
            let next_tail = &tail + &a[n];
            if (&next_tail * &e + &missing).amax() >= opts.tol || n <= opts.k_max + 1 {
                cut = n;
                break;
            }
            tail = next_tail;
        }
        let mut head: Vec<Mat> = a[..=cut].to_vec();
        head[cut] += &tail + &missing * &varpi;
        let family = BlockFamily::finite(-1, m, m, head)?;
        (family, None, cut as i64 - 1)
    };

    let d = map.idle_resolvent()? * map.lambda1();
    let b_down = a_family.block(-1);
    let b0 = &d * a_family.block(-1);
    let b_head: Vec<Mat> = a_family.head()[1..].iter().map(|x| &d * x).collect();
    let b_tail = a_family.tail().map(|t| AnalyticTail {
        weights: match t.weights {
            TailWeights::PowerLaw { exponent, shift } => TailWeights::PowerLaw {
                exponent,
                shift: shift - 1.0,
            },
            ref other => other.clone(),
        },
        profile: &d * &t.profile,
    });
    let b_up = BlockFamily::new(1, m, m, b_head, b_tail)?;
    let chain = ChainSpec::new(a_family, b_down, b0, b_up)?;

    let row_residual = (chain.a_total() * &e - &e).amax();
    let drift_residual = ((&varpi * chain.beta_a())[(0, 0)] - (rho - 1.0)).abs();
    Ok(EmbeddedChain {
        map: map.clone(),
        service: service.clone(),
        chain,
        theta,
        mixture_terms: j_terms,
        k_max,
        rho,
        report: EmbedReport {
            row_residual,
            drift_residual,
            tail_shift,
        },
    })
}

/// Shift `c` such that the law proportional to `(k + c)^-beta` on `k >= k0`
/// has mean `target`.
fn fit_shift(beta: f64, k0: i64, target: f64) -> Option<f64> {
    if !target.is_finite() || target <= k0 as f64 {
        return None;
    }
    let mean = |c: f64| -> Option<f64> {
        let w = TailWeights::PowerLaw {
            exponent: beta,
            shift: c,
        };
        Some(w.moment_from(1, k0).ok()? / w.moment_from(0, k0).ok()?)
    };
    let mut lo = -(k0 as f64) + 1e-6;
    let mut hi = (k0 as f64).max(1.0);
    while mean(hi)? < target {
        hi *= 2.0;
        if hi > 1e9 {
            return None;
        }
    }
    if mean(lo)? > target {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
