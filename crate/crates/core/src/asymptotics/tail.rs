use serde::{Deserialize, Serialize};

use crate::chain::ChainSpec;
use crate::error::{Error, Result};
use crate::linalg::{ones, Mat, Row};
use crate::mapg1::ServiceDist;

/// Tail `Fbar(k)`, `k >= 0`, of a reference distribution on the integers,
/// with `Fbar(-1) = 1`.
#[derive(Clone, Debug)]
pub enum TailModel {
    /// `(1 + k)^-exponent`.
    Power { exponent: f64 },
    /// `ratio^k`.
    Geometric { ratio: f64 },
    /// `varpi A=(k) e / varpi A=(0) e`, the chain's own integrated tail.
    ChainIntegrated {
        spec: Box<ChainSpec>,
        varpi: Row,
        norm: f64,
    },
    /// `P(S_re > k / rate)`.
    EquilibriumService { service: ServiceDist, rate: f64 },
}

/// Serializable selector for the tail models that need no chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailChoice {
    Power { exponent: f64 },
    Geometric { ratio: f64 },
    Chain,
}

impl TailModel {
    pub fn chain_integrated(spec: &ChainSpec) -> Result<Self> {
        let varpi = spec.varpi()?;
        let norm = weighted(&varpi, &spec.double_tail_a(0)?);
        if !(norm > 0.0) {
            return Err(Error::Inapplicable(
                "the chain has no upward tail beyond level 1".into(),
            ));
        }
        Ok(TailModel::ChainIntegrated {
            spec: Box::new(spec.clone()),
            varpi,
            norm,
        })
    }

    pub fn from_choice(choice: &TailChoice, spec: &ChainSpec) -> Result<Self> {
        Ok(match *choice {
            TailChoice::Power { exponent } => TailModel::Power { exponent },
            TailChoice::Geometric { ratio } => TailModel::Geometric { ratio },
            TailChoice::Chain => Self::chain_integrated(spec)?,
        })
    }

    pub fn fbar(&self, k: i64) -> f64 {
        if k < 0 {
            return 1.0;
        }
        match self {
            TailModel::Power { exponent } => (1.0 + k as f64).powf(-exponent),
            TailModel::Geometric { ratio } => ratio.powi(k as i32),
            TailModel::ChainIntegrated { spec, varpi, norm } => {
                let dt = spec
                    .double_tail_a(k)
                    .expect("double tail validated at construction");
                weighted(varpi, &dt) / norm
            }
            TailModel::EquilibriumService { service, rate } => {
                service.equilibrium_tail(k as f64 / rate)
            }
        }
    }

    /// `Fbar(0..=n)`.
    pub fn values(&self, n: usize) -> Vec<f64> {
        (0..=n as i64).map(|k| self.fbar(k)).collect()
    }

    /// Whether `sum_k Fbar(k)` is finite.
    pub fn summable(&self) -> bool {
        match self {
            TailModel::Power { exponent } => *exponent > 1.0,
            TailModel::Geometric { .. } => true,
            TailModel::ChainIntegrated { spec, .. } => spec.a_family().moment_tail(2, 1).is_ok(),
            TailModel::EquilibriumService { service, .. } => service.second_moment_finite(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            TailModel::Power { exponent } => format!("power({exponent})"),
            TailModel::Geometric { ratio } => format!("geometric({ratio})"),
            TailModel::ChainIntegrated { .. } => "chain".into(),
            TailModel::EquilibriumService { rate, .. } => {
                format!("equilibrium_service(rate {rate})")
            }
        }
    }

    /// Positivity, monotonicity and long-tail evidence on `0..=n`.
    pub fn validate(&self, n: usize) -> Result<TailValidation> {
        let v = self.values(n);
        check_values(&v)?;
        let k0 = n / 2;
        let min_ratio = (k0..n).map(|k| v[k + 1] / v[k]).fold(1.0, f64::min);
        Ok(TailValidation {
            k0,
            delta: 1.0 - min_ratio,
            summable: self.summable(),
        })
    }
}

fn weighted(varpi: &Row, m: &Mat) -> f64 {
    (varpi * m * ones(m.ncols()))[(0, 0)]
}

fn check_values(v: &[f64]) -> Result<()> {
    for (k, w) in v.windows(2).enumerate() {
        if !(w[1] > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tail vanishes at k = {}",
                k + 1
            )));
        }
        if w[1] > w[0] {
            return Err(Error::InvalidInput(format!(
                "tail increases at k = {}",
                k + 1
            )));
        }
    }
    if v.first().is_some_and(|x| !(*x > 0.0)) {
        return Err(Error::InvalidInput("tail vanishes at k = 0".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct TailValidation {
    pub k0: usize,
    /// `1 - min_{k >= k0} Fbar(k+1) / Fbar(k)`.
    pub delta: f64,
    pub summable: bool,
}

/// `(1 - F*2(k)) / (1 - F(k))` for `k = 0..=n_max`, from the exact
/// convolution `1 + sum_{l <= k} f(l) Fbar(k - l) / Fbar(k)`.
pub fn subexponential_evidence(tail: &TailModel, n_max: usize) -> Result<Vec<f64>> {
    let v = tail.values(2 * n_max);
    check_values(&v)?;
    let fbar = |k: i64| if k < 0 { 1.0 } else { v[k as usize] };
    let pmf: Vec<f64> = (0..=n_max as i64).map(|l| fbar(l - 1) - fbar(l)).collect();
    Ok((0..=n_max)
        .map(|k| {
            let s: f64 = (0..=k).map(|l| pmf[l] * v[k - l]).sum();
            1.0 + s / v[k]
        })
        .collect())
}
