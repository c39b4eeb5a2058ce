//! Matrix-analytic toolkit for M/G/1-type Markov chains.
//!
//! The crate covers the infinite-level chain and its last-block augmented
//! truncations: the `G` matrix and Ramaswami's recursion, first-passage
//! vectors and drift checks, the fundamental deviation matrix on a finite
//! window, subexponential truncation asymptotics, and the embedded chain of
//! the MAP/G/1/N+1 queue with its loss probability.

pub mod asymptotics;
pub mod chain;
pub mod deviation;
pub mod error;
pub mod linalg;
pub mod mapg1;
pub mod matan;
pub mod oracle;
pub mod passage;
pub mod presets;
pub mod special;
pub mod stationary;

pub use chain::{
    Augmentation, BlockFamily, ChainSpec, FiniteChainSpec, TailWeights, ValidationReport,
};
pub use error::{Error, Result};
pub use linalg::{Col, Mat, Row};
pub use matan::{FPlusWindow, MatanSolution, RFamily};
pub use stationary::LevelVector;
