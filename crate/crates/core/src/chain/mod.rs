//! Chain specifications: block families, infinite and finite-level chains.

mod family;
mod finite;
mod format;
mod spec;

pub use family::{AnalyticTail, BlockFamily, TailWeights, MAX_TRUNCATION};
pub use finite::{Augmentation, FiniteChainSpec};
pub use spec::{
    ChainSpec, PWindow, ValidationReport, BUILD_TOLERANCE, INPUT_TOLERANCE, IRREDUCIBILITY_WINDOW,
};
