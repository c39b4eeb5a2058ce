use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_rows, inverse, is_irreducible, ones, to_rows, Mat, Row};
use crate::oracle::gth;

/// Markovian arrival process `(Lambda0, Lambda1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MapSpec {
    lambda0: Mat,
    lambda1: Mat,
    varpi: Row,
    rate: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapWire {
    lambda0: Vec<Vec<f64>>,
    lambda1: Vec<Vec<f64>>,
}

impl MapSpec {
    pub fn new(lambda0: Mat, lambda1: Mat) -> Result<Self> {
        let m = lambda0.nrows();
        if m == 0 || lambda0.ncols() != m || lambda1.shape() != (m, m) {
            return Err(Error::Dimension(
                "MAP matrices must be square and equal-sized".into(),
            ));
        }
        for i in 0..m {
            if lambda0[(i, i)] >= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "Lambda0[{i},{i}] must be negative"
                )));
            }
            for j in 0..m {
                if (i != j && lambda0[(i, j)] < 0.0) || lambda1[(i, j)] < 0.0 {
                    return Err(Error::Negative("MAP off-diagonal or arrival rate".into()));
                }
            }
        }
        let generator = &lambda0 + &lambda1;
        let residual = (&generator * ones(m)).amax();
        let scale = lambda0.diagonal().amax();
        if residual > 1e-12 * scale.max(1.0) {
            return Err(Error::NotStochastic {
                what: "(Lambda0 + Lambda1) e".into(),
                residual,
            });
        }
        // uniformize to reuse the discrete-time irreducibility and GTH routines
        let theta = scale * 1.05;
        let jump = Mat::identity(m, m) + &generator / theta;
        if !is_irreducible(&jump) {
            return Err(Error::Reducible("MAP generator".into()));
        }
        let varpi = gth(&jump)?;
        let rate = (&varpi * &lambda1 * ones(m))[(0, 0)];
        if !(rate > 0.0) {
            return Err(Error::InvalidInput(
                "MAP arrival rate must be positive".into(),
            ));
        }
        Ok(Self {
            lambda0,
            lambda1,
            varpi,
            rate,
        })
    }

    /// Poisson process with the given rate.
    pub fn poisson(rate: f64) -> Result<Self> {
        Self::new(
            Mat::from_element(1, 1, -rate),
            Mat::from_element(1, 1, rate),
        )
    }

    pub fn phases(&self) -> usize {
        self.lambda0.nrows()
    }

    pub fn lambda0(&self) -> &Mat {
        &self.lambda0
    }

    pub fn lambda1(&self) -> &Mat {
        &self.lambda1
    }

    /// Stationary vector of `Lambda0 + Lambda1`.
    pub fn varpi(&self) -> &Row {
        &self.varpi
    }

    /// Mean arrival rate `varpi Lambda1 e`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `(-Lambda0)^-1`.
    pub fn idle_resolvent(&self) -> Result<Mat> {
        inverse(&(-&self.lambda0), "-Lambda0")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: MapWire = serde_json::from_str(text)?;
        Self::new(from_rows(&wire.lambda0)?, from_rows(&wire.lambda1)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MapWire {
            lambda0: to_rows(&self.lambda0),
            lambda1: to_rows(&self.lambda1),
        })?)
    }
}
