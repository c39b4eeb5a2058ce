//! Reference chains and queue models used by the tests, benches and CLI.

use crate::chain::{AnalyticTail, BlockFamily, ChainSpec, TailWeights};
use crate::error::Result;
use crate::linalg::{from_rows, Mat};
use crate::mapg1::{embed_chain, EmbedOptions, EmbeddedChain, MapSpec, ServiceDist};
use crate::special::hurwitz_zeta;

fn scalar(x: f64) -> Mat {
    Mat::from_element(1, 1, x)
}

/// Scalar chain with jumps `-1, 0, +1` of probabilities `.5, .3, .2`.
pub fn sc1() -> ChainSpec {
    let a = BlockFamily::finite(-1, 1, 1, vec![scalar(0.5), scalar(0.3), scalar(0.2)]).unwrap();
    let b_up = BlockFamily::finite(1, 1, 1, vec![scalar(0.2)]).unwrap();
    ChainSpec::new(a, scalar(0.5), scalar(0.8), b_up).unwrap()
}

/// Departure-epoch chain of the M/M/1 queue with `lambda = 1`, `mu = 2`,
/// written with exact geometric tails.
pub fn mm1() -> ChainSpec {
    let q = 1.0 / 3.0;
    let a = BlockFamily::new(
        -1,
        1,
        1,
        vec![scalar(2.0 / 3.0)],
        Some(AnalyticTail {
            weights: TailWeights::Geometric { ratio: q },
            profile: scalar(2.0 / 9.0),
        }),
    )
    .unwrap();
    let b_up = BlockFamily::new(
        1,
        1,
        1,
        vec![],
        Some(AnalyticTail {
            weights: TailWeights::Geometric { ratio: q },
            profile: scalar(2.0 / 3.0),
        }),
    )
    .unwrap();
    ChainSpec::new(a, scalar(2.0 / 3.0), scalar(2.0 / 3.0), b_up).unwrap()
}

/// Scalar chain with `A(-1) = .6`, `A(0) = .2` and a power-law tail
/// `A(k) = .2 k^-beta / zeta(beta)`; the boundary shares the tail.
pub fn hc1(beta: f64) -> ChainSpec {
    let tail = AnalyticTail {
        weights: TailWeights::PowerLaw {
            exponent: beta,
            shift: 0.0,
        },
        profile: scalar(0.2 / hurwitz_zeta(beta, 1.0)),
    };
    let a = BlockFamily::new(-1, 1, 1, vec![scalar(0.6), scalar(0.2)], Some(tail.clone())).unwrap();
    let b_up = BlockFamily::new(1, 1, 1, vec![], Some(tail)).unwrap();
    ChainSpec::new(a, scalar(0.6), scalar(0.8), b_up).unwrap()
}

/// Default heavy-tailed chain.
pub fn hc1_default() -> ChainSpec {
    hc1(4.5)
}

/// Two-phase MMPP with rates `.5`, `1.5` and switching rates `.2`, `.3`.
pub fn mp2_map() -> MapSpec {
    let l0 = from_rows(&[vec![-0.7, 0.2], vec![0.3, -1.8]]).unwrap();
    let l1 = from_rows(&[vec![0.5, 0.0], vec![0.0, 1.5]]).unwrap();
    MapSpec::new(l0, l1).unwrap()
}

pub fn mm1_model() -> Result<EmbeddedChain> {
    embed_chain(
        &MapSpec::poisson(1.0)?,
        &ServiceDist::Exponential { rate: 2.0 },
        &EmbedOptions::default(),
    )
}

/// MP2 arrivals with exponential service of rate 4.
pub fn mp2_model() -> Result<EmbeddedChain> {
    embed_chain(
        &mp2_map(),
        &ServiceDist::Exponential { rate: 4.0 },
        &EmbedOptions::default(),
    )
}

pub fn mp2() -> ChainSpec {
    mp2_model().unwrap().chain
}

/// M/D/1 with `lambda = 1` and service time `0.5`.
pub fn md1_model() -> Result<EmbeddedChain> {
    embed_chain(
        &MapSpec::poisson(1.0)?,
        &ServiceDist::Deterministic { value: 0.5 },
        &EmbedOptions::default(),
    )
}

/// Poisson arrivals of rate `.5` and unit-mean Pareto service of shape 3.5.
pub fn pareto_model() -> Result<EmbeddedChain> {
    embed_chain(
        &MapSpec::poisson(0.5)?,
        &ServiceDist::pareto_unit_mean(3.5),
        &EmbedOptions {
            k_max: 256,
            ..EmbedOptions::default()
        },
    )
}

/// Looks a preset chain up by name.
pub fn by_name(name: &str) -> Option<ChainSpec> {
    match name {
        "sc1" => Some(sc1()),
        "mm1" => Some(mm1()),
        "hc1" => Some(hc1_default()),
        "mp2" => Some(mp2()),
        _ => None,
    }
}
