use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{inverse, ones, Mat, Row};
use crate::special::gauss_legendre;

/// Service-time distribution of the single server.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServiceDist {
    Exponential {
        rate: f64,
    },
    Deterministic {
        value: f64,
    },
    /// Lomax law `P(S > x) = (1 + x/scale)^(-shape)`.
    Pareto {
        shape: f64,
        scale: f64,
    },
    /// Time to absorption of a CTMC with initial vector `alpha` and
    /// subgenerator `t`.
    PhaseType {
        alpha: Vec<f64>,
        t: Vec<Vec<f64>>,
    },
}

impl ServiceDist {
    /// Pareto service with mean one.
    pub fn pareto_unit_mean(shape: f64) -> Self {
        ServiceDist::Pareto {
            shape,
            scale: shape - 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        match self {
            ServiceDist::Exponential { rate } if !(*rate > 0.0 && rate.is_finite()) => {
                bad(format!("exponential rate {rate}"))
            }
            ServiceDist::Deterministic { value } if !(*value > 0.0 && value.is_finite()) => {
                bad(format!("deterministic value {value}"))
            }
            ServiceDist::Pareto { shape, scale } if !(*shape > 1.0 && *scale > 0.0) => bad(
                format!("Pareto needs shape > 1 and scale > 0 (got {shape}, {scale})"),
            ),
            ServiceDist::PhaseType { alpha, t } => {
                let (a, tm) = self.ph_parts().expect("phase type");
                if alpha.is_empty() || tm.nrows() != alpha.len() || tm.ncols() != alpha.len() {
                    return bad("phase-type dimensions".into());
                }
                if (a.sum() - 1.0).abs() > 1e-12 || a.iter().any(|x| *x < 0.0) {
                    return bad("phase-type alpha must be a probability vector".into());
                }
                let exit = -(&tm * ones(t.len()));
                if exit.iter().any(|x| *x < -1e-12) {
                    return bad("phase-type subgenerator has positive row sums".into());
                }
                inverse(&(-tm), "-T").map(|_| ())
            }
            _ => Ok(()),
        }
    }

    fn ph_parts(&self) -> Option<(Row, Mat)> {
        match self {
            ServiceDist::PhaseType { alpha, t } => {
                let n = alpha.len();
                let tm = Mat::from_fn(n, n, |i, j| {
                    t.get(i).and_then(|r| r.get(j)).copied().unwrap_or(f64::NAN)
                });
                Some((Row::from_row_slice(alpha), tm))
            }
            _ => None,
        }
    }

    /// Mean service time.
    pub fn mean(&self) -> f64 {
        match self {
            ServiceDist::Exponential { rate } => 1.0 / rate,
            ServiceDist::Deterministic { value } => *value,
            ServiceDist::Pareto { shape, scale } => scale / (shape - 1.0),
            ServiceDist::PhaseType { .. } => {
                let (a, t) = self.ph_parts().unwrap();
                let n = t.nrows();
                let inv = inverse(&(-t), "-T").expect("validated phase type");
                (a * inv * ones(n))[(0, 0)]
            }
        }
    }

    pub fn second_moment_finite(&self) -> bool {
        match self {
            ServiceDist::Pareto { shape, .. } => *shape > 2.0,
            _ => true,
        }
    }

    /// Whether the equilibrium law is subexponential and its square root long-tailed.
    pub fn heavy_tailed(&self) -> bool {
        matches!(self, ServiceDist::Pareto { .. })
    }

    /// `P(S > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match self {
            ServiceDist::Exponential { rate } => (-rate * x).exp(),
            ServiceDist::Deterministic { value } => {
                if x < *value {
                    1.0
                } else {
                    0.0
                }
            }
            ServiceDist::Pareto { shape, scale } => (1.0 + x / scale).powf(-shape),
            ServiceDist::PhaseType { .. } => {
                let (a, t) = self.ph_parts().unwrap();
                let n = t.nrows();
                (a * (t * x).exp() * ones(n))[(0, 0)]
            }
        }
    }

    /// `P(S_re > x) = (1/mean) int_x^inf P(S > y) dy`.
    pub fn equilibrium_tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self {
            ServiceDist::Exponential { rate } => (-rate * x).exp(),
            ServiceDist::Deterministic { value } => (1.0 - x / value).max(0.0),
            ServiceDist::Pareto { shape, scale } => (1.0 + x / scale).powf(1.0 - shape),
            ServiceDist::PhaseType { .. } => {
                let (a, t) = self.ph_parts().unwrap();
                let n = t.nrows();
                let inv = inverse(&(-&t), "-T").expect("validated phase type");
                (a * inv * (t * x).exp() * ones(n))[(0, 0)] / self.mean()
            }
        }
    }

    /// Draws one service time.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = 1.0 - rng.random::<f64>();
        match self {
            ServiceDist::Exponential { rate } => -u.ln() / rate,
            ServiceDist::Deterministic { value } => *value,
            ServiceDist::Pareto { shape, scale } => scale * (u.powf(-1.0 / shape) - 1.0),
            ServiceDist::PhaseType { alpha, t } => {
                let n = alpha.len();
                let mut phase = pick(alpha, rng.random::<f64>());
                let mut time = -u.ln() / (-t[phase][phase]);
                loop {
                    let out = -t[phase][phase];
                    let mut r = rng.random::<f64>() * out;
                    let mut next = None;
                    for j in 0..n {
                        if j != phase {
                            r -= t[phase][j];
                            if r < 0.0 {
                                next = Some(j);
                                break;
                            }
                        }
                    }
                    match next {
                        Some(j) => {
                            phase = j;
                            let v: f64 = 1.0 - rng.random::<f64>();
                            time += -v.ln() / (-t[phase][phase]);
                        }
                        None => return time,
                    }
                }
            }
        }
    }

    /// Mixing weights `gamma_j = int e^(-theta x) (theta x)^j / j! dB(x)` for
    /// `j = 0..`, until the remaining mass drops below `tol` or `j_max` is hit.
    /// Returns the weights and the mass not covered.
    pub fn poisson_mixture(&self, theta: f64, tol: f64, j_max: usize) -> (Vec<f64>, f64) {
        // 1 - covered cannot resolve below a few ulps
        let tol = if tol > 0.0 {
            tol.max(4.0 * f64::EPSILON)
        } else {
            tol
        };
        let mut weights = Vec::new();
        let mut covered = 0.0;
        let mut push = |w: f64, weights: &mut Vec<f64>| {
            weights.push(w);
            covered += w;
            1.0 - covered
        };
        match self {
            ServiceDist::Exponential { rate } => {
                let q = theta / (rate + theta);
                let mut w = rate / (rate + theta);
                while weights.len() < j_max {
                    if push(w, &mut weights) < tol {
                        break;
                    }
                    w *= q;
                }
            }
            ServiceDist::Deterministic { value } => {
                let y = theta * value;
                for j in 0..j_max {
                    let w = (-y + j as f64 * y.ln() - ln_gamma(j as f64 + 1.0)).exp();
                    if push(w, &mut weights) < tol && j as f64 > y {
                        break;
                    }
                }
            }
            ServiceDist::PhaseType { .. } => {
                let (a, t) = self.ph_parts().unwrap();
                let n = t.nrows();
                let shifted = Mat::identity(n, n) * theta - &t;
                let res = inverse(&shifted, "theta I - T").expect("theta I - T is nonsingular");
                let step = &res * theta;
                let exit = -(&t * ones(n));
                let mut left = a * &res;
                while weights.len() < j_max {
                    let w = (&left * &exit)[(0, 0)];
                    if push(w, &mut weights) < tol {
                        break;
                    }
                    left *= &step;
                }
            }
            ServiceDist::Pareto { shape, scale } => {
                let rule = gauss_legendre(16);
                for j in 0..j_max {
                    let w = pareto_weight(*shape, *scale, theta, j, &rule);
                    if push(w, &mut weights) < tol {
                        break;
                    }
                }
            }
        }
        let rest = (1.0 - weights.iter().sum::<f64>()).max(0.0);
        (weights, rest)
    }
}

fn pick(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// `int_0^inf p_j(y) f(y / theta) / theta dy` with `p_j` the Poisson weight
/// seen as a Gamma(j+1) density in `y`, by composite Gauss-Legendre.
fn pareto_weight(shape: f64, scale: f64, theta: f64, j: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let jf = j as f64;
    let sd = (jf + 1.0).sqrt();
    let lo = (jf + 1.0 - 14.0 * sd).max(0.0);
    let hi = jf + 1.0 + 14.0 * sd + 40.0;
    let panels = ((hi - lo) / (0.5 * sd)).ceil().clamp(8.0, 4096.0) as usize;
    let width = (hi - lo) / panels as f64;
    let log_norm = ln_gamma(jf + 1.0);
    let (nodes, weights) = rule;
    let mut total = 0.0;
    for p in 0..panels {
        let a = lo + p as f64 * width;
        let mid = a + 0.5 * width;
        let mut panel = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            let y = mid + 0.5 * width * x;
            if y <= 0.0 {
                continue;
            }
            let log_p = -y + jf * y.ln() - log_norm;
            let density = shape / scale * (1.0 + y / (theta * scale)).powf(-shape - 1.0) / theta;
            panel += w * log_p.exp() * density;
        }
        total += 0.5 * width * panel;
    }
    total
}
