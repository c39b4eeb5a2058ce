use super::embed::EmbeddedChain;
use super::service::ServiceDist;
use crate::chain::FiniteChainSpec;
use crate::error::{Error, Result};
use crate::linalg::{ones, Row};
use crate::stationary::solve_finite;

/// Time-stationary probability of an empty system from the departure-epoch
/// probabilities of level 0.
fn empty_probability(model: &EmbeddedChain, pi0: &Row) -> Result<f64> {
    let m = model.map.phases();
    let idle = (pi0 * model.map.idle_resolvent()? * ones(m))[(0, 0)];
    Ok(idle / (idle + model.service.mean()))
}

/// Exact loss probability of the MAP/G/1/N+1 queue.
pub fn loss_exact(model: &EmbeddedChain, n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain("buffer level N must be at least 1".into()));
    }
    let finite = FiniteChainSpec::last_column(&model.chain, n)?;
    let pi = solve_finite(&finite)?;
    let p0 = empty_probability(model, &pi.level(0))?;
    let loss = 1.0 - (1.0 - p0) / model.rho;
    if !(-1e-13..=1.0 + 1e-13).contains(&loss) {
        return Err(Error::Inconsistent {
            what: "loss probability outside [0, 1]".into(),
            residual: loss,
            tolerance: 1e-13,
        });
    }
    Ok(loss.clamp(0.0, 1.0))
}

/// Subexponential approximation `rho t / (1 + rho t)` with `t = P(S_re > N / lambda)`.
pub fn loss_asymptotic(service: &ServiceDist, rate: f64, n: usize) -> Result<f64> {
    if !service.heavy_tailed() {
        return Err(Error::Inapplicable(
            "the asymptotic loss formula needs a subexponential equilibrium service law".into(),
        ));
    }
    if !service.second_moment_finite() {
        return Err(Error::Inapplicable(
            "the asymptotic loss formula needs a finite second service moment".into(),
        ));
    }
    let rho = rate * service.mean();
    let t = service.equilibrium_tail(n as f64 / rate);
    Ok(rho * t / (1.0 + rho * t))
}

/// `|1/lambda - pi(0) (-Lambda0)^-1 e - mean service|` for the infinite buffer.
pub fn lambda_identity(model: &EmbeddedChain, pi0: &Row) -> Result<f64> {
    let m = model.map.phases();
    let idle = (pi0 * model.map.idle_resolvent()? * ones(m))[(0, 0)];
    Ok((1.0 / model.map.rate() - idle - model.service.mean()).abs())
}
